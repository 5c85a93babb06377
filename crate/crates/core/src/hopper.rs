//! Distributed topology hopping.
//!
//! Every node with at least one hoppable neighbor runs an exponential
//! count-down with mean `2 e^tau / |N_v|`, where `N_v` is the set of its
//! potential neighbors over non-pinned pairs. On expiry it drops a random
//! in-use neighbor with probability `|N_{v,f}| / |N_v|`, otherwise tries to
//! add a random unused one. The new configuration is kept with probability
//! `e^{b x'} / (e^{b x} + e^{b x'})`.
//!
//! The rate of the current configuration is the value observed when the
//! chain entered it. Under noisy measurement this makes the hop process the
//! extended chain over `(configuration, observed rate)` states.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::analysis::acceptance;
use crate::error::{Error, Result};
use crate::oracle;
use crate::overlay::{Configuration, NodeId, OverlayGraph, Pair};
use crate::ratecast::{solve_rate, SolverConfig};

/// How a probing node learns the rate of a configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasurementMode {
    /// Exact optimum of the rate LP.
    OracleExact,
    /// Primal-dual solver run to convergence.
    SolverConverged,
    /// Exact rate plus `(j / levels) delta` with `j` drawn from `eta`
    /// (`2 levels + 1` entries, `j = -levels..=levels`).
    Noisy { delta: f64, eta: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HopperConfig {
    pub beta: f64,
    pub tau: f64,
    pub measurement: MeasurementMode,
}

impl HopperConfig {
    pub fn new(beta: f64, tau: f64, measurement: MeasurementMode) -> Result<Self> {
        let cfg = HopperConfig {
            beta,
            tau,
            measurement,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::InvalidScenario(format!(
                "beta must be positive, got {}",
                self.beta
            )));
        }
        if !self.tau.is_finite() {
            return Err(Error::InvalidScenario("tau must be finite".into()));
        }
        if let MeasurementMode::Noisy { delta, eta } = &self.measurement {
            if eta.len() % 2 == 0 || eta.len() < 3 {
                return Err(Error::InvalidNoise(
                    "eta needs 2n + 1 entries, n >= 1".into(),
                ));
            }
            let total: f64 = eta.iter().sum();
            if !(*delta >= 0.0) || eta.iter().any(|e| !(*e >= 0.0)) || (total - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidNoise(
                    "delta >= 0 and eta a distribution".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Rate measurement used during a probe.
pub trait RateMeasure {
    fn measure(&mut self, g: &OverlayGraph, f: &Configuration) -> Result<f64>;
}

impl<F> RateMeasure for F
where
    F: FnMut(&OverlayGraph, &Configuration) -> Result<f64>,
{
    fn measure(&mut self, g: &OverlayGraph, f: &Configuration) -> Result<f64> {
        self(g, f)
    }
}

/// Exact rates, memoized per configuration.
#[derive(Clone, Debug, Default)]
pub struct OracleMeasure {
    cache: HashMap<Configuration, f64>,
}

impl OracleMeasure {
    pub fn new() -> Self {
        Self::default()
    }
}

impl RateMeasure for OracleMeasure {
    fn measure(&mut self, g: &OverlayGraph, f: &Configuration) -> Result<f64> {
        if let Some(&x) = self.cache.get(f) {
            return Ok(x);
        }
        let x = oracle::exact_rate(g, f)?;
        self.cache.insert(f.clone(), x);
        Ok(x)
    }
}

/// Converged primal-dual estimates, memoized per configuration. The solver
/// is deterministic, so a repeat probe of the same configuration would
/// return the same value.
#[derive(Clone, Debug)]
pub struct SolverMeasure {
    config: SolverConfig,
    cache: HashMap<Configuration, f64>,
    /// Probes whose solver run hit the iteration budget.
    pub nonconverged: usize,
}

impl SolverMeasure {
    pub fn new(config: SolverConfig) -> Self {
        SolverMeasure {
            config: config.quiet(),
            cache: HashMap::new(),
            nonconverged: 0,
        }
    }
}

impl Default for SolverMeasure {
    fn default() -> Self {
        Self::new(SolverConfig::default())
    }
}

impl RateMeasure for SolverMeasure {
    fn measure(&mut self, g: &OverlayGraph, f: &Configuration) -> Result<f64> {
        if let Some(&x) = self.cache.get(f) {
            return Ok(x);
        }
        let est = solve_rate(g, f, &self.config)?;
        if !est.converged {
            self.nonconverged += 1;
        }
        self.cache.insert(f.clone(), est.rate);
        Ok(est.rate)
    }
}

/// Exact rate perturbed by a discrete offset drawn afresh on every probe.
#[derive(Clone, Debug)]
pub struct NoisyMeasure {
    exact: OracleMeasure,
    delta: f64,
    eta: Vec<f64>,
    rng: ChaCha8Rng,
}

impl NoisyMeasure {
    pub fn new(delta: f64, eta: Vec<f64>, seed: u64) -> Self {
        NoisyMeasure {
            exact: OracleMeasure::new(),
            delta,
            eta,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl RateMeasure for NoisyMeasure {
    fn measure(&mut self, g: &OverlayGraph, f: &Configuration) -> Result<f64> {
        let x = self.exact.measure(g, f)?;
        Ok(x + noise_offset(self.delta, &self.eta, &mut self.rng))
    }
}

/// Offset `j` in `-n..=n` drawn from `eta` (`2n + 1` entries).
pub fn draw_offset<R: Rng + ?Sized>(eta: &[f64], rng: &mut R) -> i64 {
    let levels = (eta.len() / 2) as i64;
    let mut u: f64 = rng.random();
    let mut idx = eta.len() - 1;
    for (i, e) in eta.iter().enumerate() {
        if u < *e {
            idx = i;
            break;
        }
        u -= e;
    }
    idx as i64 - levels
}

/// Additive measurement error: a drawn offset scaled so that the extreme
/// levels sit at `±delta`.
pub fn noise_offset<R: Rng + ?Sized>(delta: f64, eta: &[f64], rng: &mut R) -> f64 {
    let levels = (eta.len() / 2) as f64;
    let j = draw_offset(eta, rng) as f64;
    if levels == 0.0 {
        0.0
    } else {
        j / levels * delta
    }
}

/// Builds the measurement callback for a mode. `seed` only matters for the
/// noisy mode.
pub fn measurement(
    mode: &MeasurementMode,
    solver: &SolverConfig,
    seed: u64,
) -> Box<dyn RateMeasure> {
    match mode {
        MeasurementMode::OracleExact => Box::new(OracleMeasure::new()),
        MeasurementMode::SolverConverged => Box::new(SolverMeasure::new(solver.clone())),
        MeasurementMode::Noisy { delta, eta } => {
            Box::new(NoisyMeasure::new(*delta, eta.clone(), seed))
        }
    }
}

/// Exponential count-down with mean `2 e^tau / |N_v|`.
pub fn sample_timer<R: Rng + ?Sized>(
    v: NodeId,
    cfg: &HopperConfig,
    g: &OverlayGraph,
    rng: &mut R,
) -> Result<f64> {
    if v >= g.node_count() {
        return Err(Error::UnknownNode(v));
    }
    let degree = g.hoppable_neighbors(v).count();
    if degree == 0 {
        return Err(Error::IsolatedNode(v));
    }
    let rate = degree as f64 / (2.0 * cfg.tau.exp());
    let exp = Exp::new(rate).map_err(|e| Error::InvalidScenario(e.to_string()))?;
    Ok(exp.sample(rng))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Remove,
    Add,
    /// Add attempt refused by a degree bound.
    Blocked,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Proposal {
    pub action: Action,
    pub pair: Pair,
}

/// Draws the expiring node's move.
pub fn propose<R: Rng + ?Sized>(
    g: &OverlayGraph,
    f: &Configuration,
    v: NodeId,
    rng: &mut R,
) -> Result<Proposal> {
    let all: Vec<NodeId> = g.hoppable_neighbors(v).collect();
    if all.is_empty() {
        return Err(Error::IsolatedNode(v));
    }
    let (used, unused): (Vec<NodeId>, Vec<NodeId>) =
        all.iter().partition(|&&u| f.contains(Pair::new(v, u)));
    let remove = rng.random_range(0..all.len()) < used.len();
    if remove {
        let u = used[rng.random_range(0..used.len())];
        return Ok(Proposal {
            action: Action::Remove,
            pair: Pair::new(v, u),
        });
    }
    let u = unused[rng.random_range(0..unused.len())];
    let action = if f.degree(v) >= g.bound(v) || f.degree(u) >= g.bound(u) {
        Action::Blocked
    } else {
        Action::Add
    };
    Ok(Proposal {
        action,
        pair: Pair::new(v, u),
    })
}

/// One line of the transition log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransitionRecord {
    pub t: f64,
    pub actor: NodeId,
    pub action: Action,
    pub pair: Pair,
    pub x_old: f64,
    /// Absent for blocked adds.
    pub x_new: Option<f64>,
    pub accepted: bool,
}

/// Mutable protocol state.
#[derive(Clone, Debug)]
pub struct HopperState {
    pub current: Configuration,
    pub clock: f64,
    /// Absolute expiry time per node; `None` for nodes without hoppable
    /// neighbors.
    pub timers: Vec<Option<f64>>,
    /// Observed rate of `current`, taken when the chain entered it.
    pub last_rate: f64,
    rng: ChaCha8Rng,
}

impl HopperState {
    /// Starts from `initial`, or from a random maximal configuration when
    /// `None`, and arms every timer.
    pub fn new(
        g: &OverlayGraph,
        cfg: &HopperConfig,
        initial: Option<Configuration>,
        measure: &mut dyn RateMeasure,
        seed: u64,
    ) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let current = match initial {
            Some(f) => f,
            None => crate::instances::random_configuration(g, &mut rng),
        };
        g.check_configuration(&current)?;
        let mut timers = Vec::with_capacity(g.node_count());
        for v in g.nodes() {
            timers.push(if g.hoppable_neighbors(v).next().is_some() {
                Some(sample_timer(v, cfg, g, &mut rng)?)
            } else {
                None
            });
        }
        let last_rate = measure.measure(g, &current)?;
        Ok(HopperState {
            current,
            clock: 0.0,
            timers,
            last_rate,
            rng,
        })
    }

    /// Node whose timer expires first, lowest id on ties.
    pub fn next_actor(&self) -> Option<(NodeId, f64)> {
        let mut best: Option<(NodeId, f64)> = None;
        for (v, t) in self.timers.iter().enumerate() {
            if let Some(t) = *t {
                if best.is_none_or(|(_, bt)| t < bt) {
                    best = Some((v, t));
                }
            }
        }
        best
    }
}

/// Advances to the next timer expiry and carries out that node's move.
pub fn hop_step(
    state: &mut HopperState,
    cfg: &HopperConfig,
    g: &OverlayGraph,
    measure: &mut dyn RateMeasure,
) -> Result<TransitionRecord> {
    let (v, t) = state
        .next_actor()
        .ok_or_else(|| Error::InvalidScenario("no node has a hoppable neighbor".into()))?;
    state.clock = t;
    let proposal = propose(g, &state.current, v, &mut state.rng)?;
    let x_old = state.last_rate;
    let mut record = TransitionRecord {
        t,
        actor: v,
        action: proposal.action,
        pair: proposal.pair,
        x_old,
        x_new: None,
        accepted: false,
    };
    let next = match proposal.action {
        Action::Remove => Some(state.current.without_pair(proposal.pair)),
        Action::Add => Some(state.current.with_pair(proposal.pair)),
        Action::Blocked => None,
    };
    if let Some(next) = next {
        let x_new = measure.measure(g, &next)?;
        let take = acceptance(x_old, x_new, cfg.beta);
        record.x_new = Some(x_new);
        if state.rng.random::<f64>() < take {
            state.current = next;
            state.last_rate = x_new;
            record.accepted = true;
        }
    }
    debug_assert!(g.check_configuration(&state.current).is_ok());
    state.timers[v] = Some(t + sample_timer(v, cfg, g, &mut state.rng)?);
    Ok(record)
}

/// Time spent in each configuration.
#[derive(Clone, Debug, Default)]
pub struct Occupancy {
    time: BTreeMap<Configuration, f64>,
    total: f64,
}

impl Occupancy {
    pub fn add(&mut self, f: &Configuration, dt: f64) {
        if dt > 0.0 {
            *self.time.entry(f.clone()).or_default() += dt;
            self.total += dt;
        }
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn time(&self, f: &Configuration) -> f64 {
        self.time.get(f).copied().unwrap_or(0.0)
    }

    pub fn fraction(&self, f: &Configuration) -> f64 {
        if self.total > 0.0 {
            self.time(f) / self.total
        } else {
            0.0
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Configuration, f64)> {
        self.time.iter().map(|(f, t)| (f, *t))
    }
}

/// Event-loop driver bundling graph, settings, state and measurement.
pub struct Hopper<'g> {
    pub g: &'g OverlayGraph,
    pub cfg: HopperConfig,
    pub state: HopperState,
    measure: Box<dyn RateMeasure + 'g>,
}

impl<'g> Hopper<'g> {
    pub fn new(
        g: &'g OverlayGraph,
        cfg: HopperConfig,
        initial: Option<Configuration>,
        mut measure: Box<dyn RateMeasure + 'g>,
        seed: u64,
    ) -> Result<Self> {
        let state = HopperState::new(g, &cfg, initial, measure.as_mut(), seed)?;
        Ok(Hopper {
            g,
            cfg,
            state,
            measure,
        })
    }

    pub fn step(&mut self) -> Result<TransitionRecord> {
        hop_step(&mut self.state, &self.cfg, self.g, self.measure.as_mut())
    }

    pub fn measure(&mut self, f: &Configuration) -> Result<f64> {
        self.measure.measure(self.g, f)
    }

    /// Runs `events` hops, crediting the time between events to the
    /// configuration in force. Occupancy starts counting at `burn_in`.
    pub fn run(
        &mut self,
        events: usize,
        burn_in: f64,
        log: Option<&mut dyn Write>,
    ) -> Result<Occupancy> {
        let mut occ = Occupancy::default();
        let mut log = log;
        for _ in 0..events {
            let before = self.state.current.clone();
            let t0 = self.state.clock;
            let rec = self.step()?;
            occ.add(&before, rec.t - t0.max(burn_in).min(rec.t));
            if let Some(w) = log.as_deref_mut() {
                serde_json::to_writer(&mut *w, &rec)?;
                w.write_all(b"\n")?;
            }
        }
        Ok(occ)
    }
}
