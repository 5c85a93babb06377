//! Fluid-model back-pressure broadcasting.
//!
//! For a fixed configuration the solver iterates a projected primal-dual
//! update of the source rate `z` and the per-destination prices
//! `lambda[v][d]`. Each node sends at full upload capacity to the
//! out-neighbor with the largest aggregate back-pressure and carries a
//! virtual flow for every destination whose price gap to that neighbor is
//! positive. With network coding the broadcast rate is the largest `z` that
//! every destination can receive, so the iteration settles at the optimum of
//! the rate problem for this configuration.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::overlay::{is_connected_from_source, Configuration, NodeId, OverlayGraph};

/// Strictly concave utility of the source rate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Utility {
    /// `ln(z + shift)`.
    Log { shift: f64 },
}

impl Utility {
    pub fn value(&self, z: f64) -> f64 {
        match *self {
            Utility::Log { shift } => (z + shift).ln(),
        }
    }

    pub fn derivative(&self, z: f64) -> f64 {
        match *self {
            Utility::Log { shift } => 1.0 / (z + shift),
        }
    }
}

impl Default for Utility {
    fn default() -> Self {
        Utility::Log { shift: 1e-6 }
    }
}

/// Price step sizes `k_{v,d}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum PriceSteps {
    Uniform(f64),
    /// Row-major `n x n` table indexed by `(v, d)`.
    PerPair(Vec<f64>),
}

impl PriceSteps {
    fn get(&self, n: usize, v: NodeId, d: NodeId) -> f64 {
        match self {
            PriceSteps::Uniform(k) => *k,
            PriceSteps::PerPair(table) => table[v * n + d],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Step size of the source-rate update.
    pub alpha: f64,
    pub k: PriceSteps,
    pub utility: Utility,
    /// Convergence window in iterations.
    pub window: usize,
    /// Relative span of `z` over a window below which the run has converged.
    pub tolerance: f64,
    pub max_iters: usize,
    /// Windows between the two means compared by the drift check.
    pub drift_lag: usize,
    /// Run in units where a known feasible rate is 1 and scale the result
    /// back. The rate update `z + alpha (1/z - P)` is only stable around its
    /// fixed point when `z > sqrt(alpha / 2)`, so the working units matter.
    pub normalize: bool,
    /// Record a trace point every this many iterations.
    pub trace_every: Option<usize>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            alpha: 0.1,
            k: PriceSteps::Uniform(5e-5),
            utility: Utility::default(),
            window: 2000,
            tolerance: 1e-3,
            max_iters: 4_000_000,
            drift_lag: 10,
            normalize: true,
            trace_every: Some(1),
        }
    }
}

impl SolverConfig {
    pub fn validate(&self, n: usize) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidScenario(msg.to_string()));
        if !(self.alpha > 0.0) {
            return bad("alpha must be positive");
        }
        match &self.k {
            PriceSteps::Uniform(k) if !(*k > 0.0) => return bad("k must be positive"),
            PriceSteps::PerPair(t) if t.len() != n * n => return bad("k table must be n x n"),
            PriceSteps::PerPair(t) if t.iter().any(|k| !(*k > 0.0)) => {
                return bad("k must be positive")
            }
            _ => {}
        }
        if !(self.tolerance > 0.0) {
            return bad("tolerance must be positive");
        }
        if self.window == 0 {
            return bad("window must be at least 1");
        }
        if self.trace_every == Some(0) {
            return bad("trace interval must be at least 1");
        }
        Ok(())
    }

    /// Same settings without trace recording.
    pub fn quiet(&self) -> Self {
        SolverConfig {
            trace_every: None,
            ..self.clone()
        }
    }
}

/// Directed links `(v,u)` for every in-use pair, excluding links into the
/// source.
#[derive(Clone, Debug)]
pub struct LinkSet {
    from: Vec<NodeId>,
    to: Vec<NodeId>,
    out: Vec<Vec<usize>>,
    into: Vec<Vec<usize>>,
}

impl LinkSet {
    pub fn new(g: &OverlayGraph, f: &Configuration) -> Self {
        let n = g.node_count();
        let s = g.source();
        let mut links = LinkSet {
            from: Vec::new(),
            to: Vec::new(),
            out: vec![Vec::new(); n],
            into: vec![Vec::new(); n],
        };
        let mut directed: Vec<(NodeId, NodeId)> = f
            .pairs()
            .iter()
            .flat_map(|p| [(p.lo(), p.hi()), (p.hi(), p.lo())])
            .filter(|&(_, u)| u != s)
            .collect();
        directed.sort_unstable();
        for (v, u) in directed {
            let id = links.from.len();
            links.from.push(v);
            links.to.push(u);
            links.out[v].push(id);
            links.into[u].push(id);
        }
        links
    }

    pub fn len(&self) -> usize {
        self.from.len()
    }

    pub fn is_empty(&self) -> bool {
        self.from.is_empty()
    }

    pub fn endpoints(&self, link: usize) -> (NodeId, NodeId) {
        (self.from[link], self.to[link])
    }

    /// Link ids leaving `v`, sorted by head node.
    pub fn out_links(&self, v: NodeId) -> &[usize] {
        &self.out[v]
    }

    pub fn in_links(&self, v: NodeId) -> &[usize] {
        &self.into[v]
    }

    pub fn find(&self, v: NodeId, u: NodeId) -> Option<usize> {
        self.out[v].iter().copied().find(|&l| self.to[l] == u)
    }
}

/// Primal-dual iterate.
#[derive(Clone, Debug, PartialEq)]
pub struct SolverState {
    pub z: f64,
    /// `lambda[v * n + d]`; entries with `d` the source or `v == d` stay 0.
    pub lambda: Vec<f64>,
    /// `flows[link * n + d]`.
    pub flows: Vec<f64>,
    /// Physical rate per link.
    pub phys: Vec<f64>,
}

impl SolverState {
    pub fn zeroed(n: usize, links: usize) -> Self {
        SolverState {
            z: 0.0,
            lambda: vec![0.0; n * n],
            flows: vec![0.0; links * n],
            phys: vec![0.0; links],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub iter: usize,
    pub z: f64,
    pub sum_lambda_source: f64,
}

/// CSV with header `iter,z,sum_lambda_source`.
pub fn trace_csv(trace: &[TracePoint]) -> String {
    let mut out = String::from("iter,z,sum_lambda_source\n");
    for p in trace {
        out.push_str(&format!("{},{},{}\n", p.iter, p.z, p.sum_lambda_source));
    }
    out
}

/// Result of [`solve_rate`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateEstimate {
    /// Window-averaged source rate.
    pub rate: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Window-averaged receiving rate of each node's own virtual flow; the
    /// source entry is the averaged source rate.
    pub receiving: Vec<f64>,
    pub trace: Vec<TracePoint>,
}

/// Single-configuration primal-dual solver working in the graph's own units.
#[derive(Clone, Debug)]
pub struct RateSolver<'g> {
    g: &'g OverlayGraph,
    links: LinkSet,
    receivers: Vec<NodeId>,
    z_cap: f64,
    state: SolverState,
    /// Per-link, per-destination amount actually forwarded in the last step.
    delivered: Vec<f64>,
    config: SolverConfig,
}

impl<'g> RateSolver<'g> {
    pub fn new(g: &'g OverlayGraph, f: &Configuration, config: SolverConfig) -> Result<Self> {
        g.check_membership(f)?;
        config.validate(g.node_count())?;
        let links = LinkSet::new(g, f);
        let state = SolverState::zeroed(g.node_count(), links.len());
        Ok(RateSolver {
            g,
            receivers: g.receivers().collect(),
            z_cap: g.capacity(g.source()),
            delivered: vec![0.0; links.len() * g.node_count()],
            links,
            state,
            config,
        })
    }

    pub fn state(&self) -> &SolverState {
        &self.state
    }

    pub fn links(&self) -> &LinkSet {
        &self.links
    }

    /// Replaces the iterate; dimensions must match.
    pub fn set_state(&mut self, state: SolverState) -> Result<()> {
        let n = self.g.node_count();
        if state.lambda.len() != n * n
            || state.flows.len() != self.links.len() * n
            || state.phys.len() != self.links.len()
        {
            return Err(Error::Dimension(
                "solver state does not match configuration".into(),
            ));
        }
        self.state = state;
        Ok(())
    }

    fn n(&self) -> usize {
        self.g.node_count()
    }

    fn lambda(&self, v: NodeId, d: NodeId) -> f64 {
        self.state.lambda[v * self.n() + d]
    }

    fn pressure(&self, v: NodeId, u: NodeId) -> f64 {
        self.receivers
            .iter()
            .map(|&d| (self.lambda(v, d) - self.lambda(u, d)).max(0.0))
            .sum()
    }

    /// Aggregate back-pressure `w_vu`.
    pub fn back_pressure(&self, v: NodeId, u: NodeId) -> Result<f64> {
        if v >= self.n() {
            return Err(Error::UnknownNode(v));
        }
        self.links
            .find(v, u)
            .map(|_| self.pressure(v, u))
            .ok_or(Error::NotNeighbor { v, u })
    }

    /// Out-neighbor with the largest back-pressure, lowest id on ties.
    pub fn select_neighbor(&self, v: NodeId) -> Option<NodeId> {
        self.select(v).map(|(l, _)| self.links.to[l])
    }

    fn select(&self, v: NodeId) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for &l in &self.links.out[v] {
            let w = self.pressure(v, self.links.to[l]);
            if best.is_none_or(|(_, bw)| w > bw) {
                best = Some((l, w));
            }
        }
        best
    }

    /// Sets `(f, g)` to the scheduling subproblem's optimum for the current
    /// prices.
    pub fn assign_flows(&mut self) {
        let n = self.n();
        self.state.flows.iter_mut().for_each(|x| *x = 0.0);
        self.state.phys.iter_mut().for_each(|x| *x = 0.0);
        for v in 0..n {
            let Some((l, w)) = self.select(v) else {
                continue;
            };
            if w <= 0.0 {
                continue;
            }
            let c = self.g.capacity(v);
            let u = self.links.to[l];
            self.state.phys[l] = c;
            for &d in &self.receivers {
                if self.state.lambda[v * n + d] - self.state.lambda[u * n + d] > 0.0 {
                    self.state.flows[l * n + d] = c;
                }
            }
        }
    }

    /// One Euler step: rate update, flow assignment, price update.
    ///
    /// A link delivers `min(f, lambda_{v,d} / k_{v,d})` for destination `d`:
    /// a node cannot forward more than its backlog, so the price update
    /// conserves flow exactly and prices stay nonnegative without clipping.
    pub fn step(&mut self) {
        let n = self.n();
        let s = self.g.source();
        let price_sum = self.price_sum_source();
        let z = self.state.z
            + self.config.alpha * (self.config.utility.derivative(self.state.z) - price_sum);
        self.state.z = z.clamp(0.0, self.z_cap);

        self.assign_flows();
        self.deliver();

        let mut next = self.state.lambda.clone();
        for v in 0..n {
            for &d in &self.receivers {
                if v == d {
                    continue;
                }
                let inflow: f64 = self.links.into[v]
                    .iter()
                    .map(|&l| self.delivered[l * n + d])
                    .sum();
                let outflow: f64 = self.links.out[v]
                    .iter()
                    .map(|&l| self.delivered[l * n + d])
                    .sum();
                let injected = if v == s { self.state.z } else { 0.0 };
                let k = self.config.k.get(n, v, d);
                let idx = v * n + d;
                next[idx] = (next[idx] + k * (inflow + injected - outflow)).max(0.0);
            }
        }
        self.state.lambda = next;
    }

    fn deliver(&mut self) {
        let n = self.n();
        self.delivered.clear();
        self.delivered.extend_from_slice(&self.state.flows);
        for v in 0..n {
            for &d in &self.receivers {
                if v == d {
                    continue;
                }
                let backlog = self.state.lambda[v * n + d] / self.config.k.get(n, v, d);
                let wanted: f64 = self.links.out[v]
                    .iter()
                    .map(|&l| self.state.flows[l * n + d])
                    .sum();
                if wanted > backlog {
                    let scale = backlog / wanted;
                    for &l in &self.links.out[v] {
                        self.delivered[l * n + d] *= scale;
                    }
                }
            }
        }
    }

    fn received(&self, d: NodeId) -> f64 {
        let n = self.n();
        self.links.into[d]
            .iter()
            .map(|&l| self.delivered[l * n + d])
            .sum()
    }

    fn price_sum_source(&self) -> f64 {
        let s = self.g.source();
        self.receivers.iter().map(|&d| self.lambda(s, d)).sum()
    }

    /// Iterates in windows until the iteration budget runs out or a window
    /// shows all of:
    /// - relative span of `z` below the tolerance;
    /// - mean `z` and mean source price sum within the tolerance of their
    ///   values `drift_lag` windows earlier;
    /// - every receiver's own-flow receiving rate within ten tolerances of
    ///   `z` (flows are bang-bang, so window averages are coarse).
    pub fn run(&mut self) -> RateEstimate {
        let n = self.n();
        let s = self.g.source();
        let window = self.config.window;
        let tol = self.config.tolerance;
        let mut trace = Vec::new();
        let mut iter = 0;
        let mut last: Option<(f64, Vec<f64>)> = None;
        let mut history: Vec<(f64, f64)> = Vec::new();
        let mut converged = false;

        while iter < self.config.max_iters {
            let mut z_span = Span::default();
            let mut price_span = Span::default();
            let mut recv = vec![0.0; n];
            let mut count = 0usize;
            while count < window && iter < self.config.max_iters {
                self.step();
                iter += 1;
                count += 1;
                let z = self.state.z;
                let prices = self.price_sum_source();
                z_span.push(z);
                price_span.push(prices);
                for &d in &self.receivers {
                    recv[d] += self.received(d);
                }
                if let Some(every) = self.config.trace_every {
                    if iter % every == 0 {
                        trace.push(TracePoint {
                            iter,
                            z,
                            sum_lambda_source: prices,
                        });
                    }
                }
            }
            let mean = z_span.mean();
            recv.iter_mut().for_each(|r| *r /= count as f64);
            recv[s] = mean;
            let lag = self.config.drift_lag.max(1);
            let prices = price_span.mean();
            let close = |a: f64, b: f64, tol: f64| (a - b).abs() <= tol * a.abs();
            let settled = count == window
                && z_span.relative() < tol
                && history.len() >= lag
                && close(mean, history[history.len() - lag].0, tol)
                && close(prices, history[history.len() - lag].1, tol)
                && self
                    .receivers
                    .iter()
                    .all(|&d| close(mean, recv[d], 10.0 * tol));
            history.push((mean, prices));
            last = Some((mean, recv));
            if settled {
                converged = true;
                break;
            }
        }

        let (rate, receiving) = last.unwrap_or((0.0, vec![0.0; n]));
        RateEstimate {
            rate,
            converged,
            iterations: iter,
            receiving,
            trace,
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct Span {
    min: f64,
    max: f64,
    sum: f64,
    count: usize,
}

impl Default for Span {
    fn default() -> Self {
        Span {
            min: f64::INFINITY,
            max: f64::NEG_INFINITY,
            sum: 0.0,
            count: 0,
        }
    }
}

impl Span {
    fn push(&mut self, x: f64) {
        self.min = self.min.min(x);
        self.max = self.max.max(x);
        self.sum += x;
        self.count += 1;
    }

    fn mean(&self) -> f64 {
        self.sum / self.count.max(1) as f64
    }

    fn relative(&self) -> f64 {
        (self.max - self.min) / self.mean().abs().max(f64::MIN_POSITIVE)
    }
}

/// Runs the primal-dual solver on `f` to convergence.
///
/// Configurations in which some receiver cannot be reached from the source
/// have rate 0 and return immediately. With `normalize` set, capacities are
/// divided by the rate achieved when every node splits its capacity evenly
/// over its out-links, which is feasible and therefore at most the optimum;
/// rates and trace are scaled back afterwards.
pub fn solve_rate(
    g: &OverlayGraph,
    f: &Configuration,
    config: &SolverConfig,
) -> Result<RateEstimate> {
    g.check_membership(f)?;
    config.validate(g.node_count())?;
    let zero = || RateEstimate {
        rate: 0.0,
        converged: true,
        iterations: 0,
        receiving: vec![0.0; g.node_count()],
        trace: Vec::new(),
    };
    if !is_connected_from_source(g, f) || g.capacity(g.source()) == 0.0 {
        return Ok(zero());
    }

    let scale = if config.normalize {
        let even = crate::oracle::baseline_rate(g, f)?;
        if even > 0.0 {
            even
        } else if crate::oracle::link_capacity_bound(g, f)? == 0.0 {
            // some receiver is cut off by zero-capacity relays
            return Ok(zero());
        } else {
            g.capacity(g.source())
        }
    } else {
        1.0
    };
    if scale == 1.0 {
        return Ok(RateSolver::new(g, f, config.clone())?.run());
    }
    let scaled = g.with_capacities(g.capacities().iter().map(|c| c / scale).collect())?;
    let mut est = RateSolver::new(&scaled, f, config.clone())?.run();
    est.rate *= scale;
    est.receiving.iter_mut().for_each(|r| *r *= scale);
    for p in &mut est.trace {
        p.z *= scale;
        p.sum_lambda_source /= scale;
    }
    Ok(est)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances;
    use crate::overlay::Pair;

    fn star() -> (OverlayGraph, Configuration) {
        // source 0 with receivers 1, 2, 3 all mutually adjacent
        let g = OverlayGraph::complete(0, vec![10.0, 4.0, 4.0, 4.0], vec![3; 4]).unwrap();
        let f = g.configuration(g.pairs().to_vec()).unwrap();
        (g, f)
    }

    fn set_lambda(solver: &mut RateSolver, v: NodeId, d: NodeId, x: f64) {
        let n = solver.n();
        let mut st = solver.state().clone();
        st.lambda[v * n + d] = x;
        solver.set_state(st).unwrap();
    }

    #[test]
    fn zero_prices_give_zero_pressure() {
        let (g, f) = star();
        let s = RateSolver::new(&g, &f, SolverConfig::default()).unwrap();
        assert_eq!(s.back_pressure(1, 2).unwrap(), 0.0);
    }

    #[test]
    fn pressure_example_two_destinations() {
        // receivers d1 = 3, d2 = 4; lambda_v = {3, 1}, lambda_u = {1, 2}
        let g = OverlayGraph::complete(0, vec![1.0; 5], vec![4; 5]).unwrap();
        let f = g.configuration(g.pairs().to_vec()).unwrap();
        let mut s = RateSolver::new(&g, &f, SolverConfig::default()).unwrap();
        set_lambda(&mut s, 1, 3, 3.0);
        set_lambda(&mut s, 1, 4, 1.0);
        set_lambda(&mut s, 2, 3, 1.0);
        set_lambda(&mut s, 2, 4, 2.0);
        assert_eq!(s.back_pressure(1, 2).unwrap(), 2.0);
        // equal price vectors
        set_lambda(&mut s, 2, 3, 3.0);
        set_lambda(&mut s, 2, 4, 1.0);
        assert_eq!(s.back_pressure(1, 2).unwrap(), 0.0);
    }

    #[test]
    fn pressure_requires_link() {
        let g = instances::chain(vec![1.0; 3], 2);
        let f = g.configuration(g.pairs().to_vec()).unwrap();
        let s = RateSolver::new(&g, &f, SolverConfig::default()).unwrap();
        assert!(matches!(
            s.back_pressure(0, 2),
            Err(Error::NotNeighbor { .. })
        ));
        // no link into the source
        assert!(matches!(
            s.back_pressure(1, 0),
            Err(Error::NotNeighbor { .. })
        ));
    }

    #[test]
    fn selection_argmax_and_ties() {
        let g = OverlayGraph::complete(0, vec![1.0; 8], vec![7; 8]).unwrap();
        let f = g.configuration([Pair::new(1, 2), Pair::new(1, 7)]).unwrap();
        let mut s = RateSolver::new(&g, &f, SolverConfig::default()).unwrap();
        assert_eq!(s.select_neighbor(1), Some(2), "tie goes to lowest id");
        set_lambda(&mut s, 1, 3, 5.0);
        set_lambda(&mut s, 7, 3, 2.0);
        // w_{1,2} = 5, w_{1,7} = 3
        assert_eq!(s.select_neighbor(1), Some(2));
        set_lambda(&mut s, 2, 3, 4.0);
        assert_eq!(s.select_neighbor(1), Some(7));
        assert_eq!(s.select_neighbor(4), None);
    }

    #[test]
    fn flows_follow_positive_gaps() {
        // C_1 = 10, single out-neighbor 2, gap positive for d = 3 only
        let g = OverlayGraph::complete(0, vec![1.0, 10.0, 1.0, 1.0], vec![3; 4]).unwrap();
        let f = g.configuration([Pair::new(1, 2)]).unwrap();
        let mut s = RateSolver::new(&g, &f, SolverConfig::default()).unwrap();
        set_lambda(&mut s, 1, 3, 2.0);
        set_lambda(&mut s, 2, 2, 0.0);
        set_lambda(&mut s, 1, 2, 0.0);
        s.assign_flows();
        let l = s.links().find(1, 2).unwrap();
        let st = s.state();
        assert_eq!(st.phys[l], 10.0);
        assert_eq!(st.flows[l * 4 + 3], 10.0);
        assert_eq!(st.flows[l * 4 + 2], 0.0);
        let back = s.links().find(2, 1).unwrap();
        assert_eq!(st.phys[back], 0.0);
    }

    #[test]
    fn idle_when_no_pressure() {
        let (g, f) = star();
        let mut s = RateSolver::new(&g, &f, SolverConfig::default()).unwrap();
        s.assign_flows();
        assert!(s.state().phys.iter().all(|&x| x == 0.0));
        assert!(s.state().flows.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn rate_step_example() {
        // z = 1, no source prices, ln utility: z' = 1 + 0.1 * (1 - 0)
        let g = OverlayGraph::new(0, vec![2.0, 2.0], vec![1, 1], [(0, 1)]).unwrap();
        let f = g.configuration(g.pairs().to_vec()).unwrap();
        let cfg = SolverConfig {
            utility: Utility::Log { shift: 0.0 },
            ..SolverConfig::default()
        };
        let mut s = RateSolver::new(&g, &f, cfg).unwrap();
        let mut st = s.state().clone();
        st.z = 1.0;
        s.set_state(st).unwrap();
        s.step();
        assert!((s.state().z - 1.1).abs() < 1e-12);
    }

    #[test]
    fn projection_keeps_prices_nonnegative() {
        let g = instances::chain(vec![1.0; 3], 2);
        let f = g.configuration(g.pairs().to_vec()).unwrap();
        let mut s = RateSolver::new(&g, &f, SolverConfig::default()).unwrap();
        // node 1 forwards with positive pressure toward 2 while nothing
        // arrives: its price for d=2 has negative drift from 0
        set_lambda(&mut s, 1, 2, 1e-9);
        s.step();
        assert!(s.state().lambda.iter().all(|&x| x >= 0.0));
        assert_eq!(s.state().lambda[3 + 1], 0.0, "lambda_{{d,d}} stays zero");
    }

    #[test]
    fn state_invariants_hold_every_step() {
        let g = instances::random_small(7, 0.4, 11);
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(1);
        let f = instances::random_configuration(&g, &mut rng);
        let mut s = RateSolver::new(&g, &f, SolverConfig::default()).unwrap();
        let n = g.node_count();
        for _ in 0..5000 {
            s.step();
            let st = s.state();
            assert!(st.z >= 0.0);
            assert!(st.lambda.iter().all(|&x| x >= 0.0));
            for d in 0..n {
                assert_eq!(st.lambda[d * n + d], 0.0);
            }
            for l in 0..s.links().len() {
                for d in 0..n {
                    assert!(st.flows[l * n + d] <= st.phys[l]);
                }
            }
            for v in 0..n {
                let used: f64 = s.links().out_links(v).iter().map(|&l| st.phys[l]).sum();
                assert!(used <= g.capacity(v));
            }
        }
    }

    #[test]
    fn unit_chain_rate() {
        let g = instances::chain(vec![1.0; 3], 1);
        let g = g.with_bounds(vec![1, 2, 1]).unwrap();
        let f = g.configuration(g.pairs().to_vec()).unwrap();
        let est = solve_rate(&g, &f, &SolverConfig::default().quiet()).unwrap();
        assert!(est.converged);
        assert!((est.rate - 1.0).abs() < 0.01, "{}", est.rate);
    }

    #[test]
    fn disconnected_is_zero() {
        let g = instances::chain(vec![1.0; 3], 2);
        let f = g.configuration([Pair::new(0, 1)]).unwrap();
        let est = solve_rate(&g, &f, &SolverConfig::default()).unwrap();
        assert_eq!(est.rate, 0.0);
        assert!(est.converged);
    }

    #[test]
    fn setting_three_f4_is_half() {
        let g = instances::setting_three();
        let [_, _, _, f4] = instances::setting_three_configurations(&g);
        let est = solve_rate(&g, &f4, &SolverConfig::default().quiet()).unwrap();
        assert!((est.rate - 0.5).abs() < 0.005, "{}", est.rate);
    }
}
