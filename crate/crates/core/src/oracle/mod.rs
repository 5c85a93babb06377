//! Exact reference computations: the broadcast-rate LP for a configuration,
//! max-flow, the unbounded-degree rate and the even-split baseline.

pub mod maxflow;
pub mod simplex;

pub use maxflow::{max_flow, max_flow_cut, MaxFlow};
pub use simplex::{LinearProgram, LpSolution, PivotRule};

use crate::error::{Error, Result};
use crate::overlay::{is_connected_from_source, Configuration, NodeId, OverlayGraph};
use crate::ratecast::LinkSet;

/// Relative duality gap accepted from the simplex before reporting failure.
pub const MAX_DUALITY_GAP: f64 = 1e-6;

/// Variable layout of the rate LP.
#[derive(Clone, Debug)]
pub struct RateLp {
    pub lp: LinearProgram,
    pub links: LinkSet,
    receivers: Vec<NodeId>,
    /// `flow_var[link][receiver index]`; `None` for links leaving that
    /// receiver, which can never help it.
    flow_var: Vec<Vec<Option<usize>>>,
}

impl RateLp {
    /// Builds `max z` subject to per-destination conservation, the
    /// piggybacking bound `f <= g` and node upload capacities.
    pub fn build(g: &OverlayGraph, f: &Configuration) -> Self {
        let links = LinkSet::new(g, f);
        let receivers: Vec<NodeId> = g.receivers().collect();
        let s = g.source();
        let nl = links.len();

        let mut next = 1 + nl;
        let flow_var: Vec<Vec<Option<usize>>> = (0..nl)
            .map(|l| {
                let (from, _) = links.endpoints(l);
                receivers
                    .iter()
                    .map(|&d| {
                        (from != d).then(|| {
                            next += 1;
                            next - 1
                        })
                    })
                    .collect()
            })
            .collect();
        let mut lp = LinearProgram::new(next);
        lp.set_objective(0, 1.0);
        let phys = |l: usize| 1 + l;

        for (di, &d) in receivers.iter().enumerate() {
            for v in g.nodes().filter(|&v| v != d) {
                let mut row = Vec::new();
                if v == s {
                    row.push((0, 1.0));
                }
                for &l in links.in_links(v) {
                    if let Some(x) = flow_var[l][di] {
                        row.push((x, 1.0));
                    }
                }
                for &l in links.out_links(v) {
                    if let Some(x) = flow_var[l][di] {
                        row.push((x, -1.0));
                    }
                }
                lp.add_row(row, 0.0);
            }
        }
        for l in 0..nl {
            for x in flow_var[l].iter().flatten() {
                lp.add_row(vec![(*x, 1.0), (phys(l), -1.0)], 0.0);
            }
        }
        for v in g.nodes() {
            let row: Vec<(usize, f64)> =
                links.out_links(v).iter().map(|&l| (phys(l), 1.0)).collect();
            if !row.is_empty() {
                lp.add_row(row, g.capacity(v));
            }
        }
        RateLp {
            lp,
            links,
            receivers,
            flow_var,
        }
    }

    pub fn variable_name(&self, var: usize) -> String {
        if var == 0 {
            return "z".into();
        }
        if var <= self.links.len() {
            let (a, b) = self.links.endpoints(var - 1);
            return format!("g[{a}->{b}]");
        }
        for (l, row) in self.flow_var.iter().enumerate() {
            for (di, x) in row.iter().enumerate() {
                if *x == Some(var) {
                    let (a, b) = self.links.endpoints(l);
                    return format!("f{}[{a}->{b}]", self.receivers[di]);
                }
            }
        }
        format!("x{var}")
    }

    /// Constraint listing for debugging.
    pub fn listing(&self) -> String {
        self.lp.listing(|v| self.variable_name(v))
    }

    /// Physical link rates from a solution vector.
    pub fn link_rates(&self, x: &[f64]) -> Vec<(NodeId, NodeId, f64)> {
        (0..self.links.len())
            .map(|l| {
                let (a, b) = self.links.endpoints(l);
                (a, b, x[1 + l].max(0.0))
            })
            .collect()
    }
}

/// Exact broadcast rate of `f` with a linear objective. Returns 0 when some
/// receiver is unreachable from the source.
pub fn solve_mp(g: &OverlayGraph, f: &Configuration) -> Result<f64> {
    solve_mp_detailed(g, f).map(|s| s.map_or(0.0, |s| s.objective))
}

/// Like [`solve_mp`] but exposes the LP solution; `None` for unreachable
/// receivers.
pub fn solve_mp_detailed(g: &OverlayGraph, f: &Configuration) -> Result<Option<LpSolution>> {
    g.check_membership(f)?;
    if !is_connected_from_source(g, f) {
        return Ok(None);
    }
    let model = RateLp::build(g, f);
    let sol = model.lp.solve()?;
    if sol.duality_gap() > MAX_DUALITY_GAP {
        return Err(Error::Numerical(format!(
            "duality gap {:.3e} exceeds tolerance",
            sol.duality_gap()
        )));
    }
    Ok(Some(sol))
}

/// Exact broadcast rate through a cut formulation: variables are `z` and the
/// link rates, and violated source-destination cuts are added from max-flow
/// until every destination's max-flow reaches `z`. Suitable for graphs too
/// large for the full flow LP.
pub fn solve_mp_cuts(g: &OverlayGraph, f: &Configuration) -> Result<f64> {
    g.check_membership(f)?;
    if !is_connected_from_source(g, f) {
        return Ok(0.0);
    }
    let links = LinkSet::new(g, f);
    let n = g.node_count();
    let nl = links.len();
    let mut lp = LinearProgram::new(1 + nl);
    lp.set_objective(0, 1.0);
    for v in g.nodes() {
        let row: Vec<(usize, f64)> = links.out_links(v).iter().map(|&l| (1 + l, 1.0)).collect();
        if !row.is_empty() {
            lp.add_row(row, g.capacity(v));
        }
    }
    let add_cut = |lp: &mut LinearProgram, source_side: &[bool]| {
        let mut row = vec![(0, 1.0)];
        for l in 0..nl {
            let (a, b) = links.endpoints(l);
            if source_side[a] && !source_side[b] {
                row.push((1 + l, -1.0));
            }
        }
        lp.add_row(row, 0.0);
    };
    for d in g.receivers() {
        let side: Vec<bool> = (0..n).map(|v| v != d).collect();
        add_cut(&mut lp, &side);
    }

    for _ in 0..10_000 {
        let sol = lp.solve()?;
        let z = sol.objective;
        let caps: Vec<(NodeId, NodeId, f64)> = (0..nl)
            .map(|l| {
                let (a, b) = links.endpoints(l);
                (a, b, sol.x[1 + l].max(0.0))
            })
            .collect();
        let mut added = false;
        for d in g.receivers() {
            let m = max_flow_cut(n, &caps, g.source(), d)?;
            if m.value < z - 1e-9 * z.max(1.0) {
                add_cut(&mut lp, &m.source_side);
                added = true;
            }
        }
        if !added {
            return Ok(z);
        }
    }
    Err(Error::Numerical("cut generation did not terminate".into()))
}

/// Node count above which [`exact_rate`] switches to cut generation.
pub const DENSE_NODE_LIMIT: usize = 10;

/// Exact broadcast rate by whichever formulation suits the graph size. When
/// the even split already attains the upper bound no LP is solved.
pub fn exact_rate(g: &OverlayGraph, f: &Configuration) -> Result<f64> {
    let upper = fullmesh_rate(g).min(link_capacity_bound(g, f)?);
    if baseline_rate(g, f)? >= upper {
        Ok(upper)
    } else if g.node_count() <= DENSE_NODE_LIMIT {
        solve_mp(g, f)
    } else {
        solve_mp_cuts(g, f)
    }
}

/// Broadcast rate with unbounded degrees: `min(C_s, (C_s + sum C_v) / |R|)`.
pub fn fullmesh_rate(g: &OverlayGraph) -> f64 {
    let r = g.receiver_count();
    let cs = g.capacity(g.source());
    if r == 0 {
        return cs;
    }
    let total: f64 = g.capacities().iter().sum();
    cs.min(total / r as f64)
}

/// Upper bound on the rate: min over receivers of the max-flow when every
/// in-use link may carry its tail's whole capacity.
pub fn link_capacity_bound(g: &OverlayGraph, f: &Configuration) -> Result<f64> {
    g.check_membership(f)?;
    let links = LinkSet::new(g, f);
    let caps: Vec<_> = (0..links.len())
        .map(|l| {
            let (a, b) = links.endpoints(l);
            (a, b, g.capacity(a))
        })
        .collect();
    let mut best = g.capacity(g.source());
    for d in g.receivers() {
        best = best.min(max_flow(g.node_count(), &caps, g.source(), d)?);
    }
    Ok(best)
}

/// Rate achieved by routing when every node splits its capacity evenly over
/// its in-use out-neighbors: the smallest source-destination max-flow.
pub fn baseline_rate(g: &OverlayGraph, f: &Configuration) -> Result<f64> {
    g.check_membership(f)?;
    let links = even_split_links(g, f);
    let mut best = f64::INFINITY;
    for d in g.receivers() {
        best = best.min(max_flow(g.node_count(), &links, g.source(), d)?);
    }
    Ok(if best.is_finite() {
        best
    } else {
        g.capacity(g.source())
    })
}

/// `C_v / |out(v)|` on every in-use directed link, links into the source
/// excluded.
pub fn even_split_links(g: &OverlayGraph, f: &Configuration) -> Vec<(NodeId, NodeId, f64)> {
    let links = LinkSet::new(g, f);
    (0..links.len())
        .map(|l| {
            let (a, b) = links.endpoints(l);
            (a, b, g.capacity(a) / links.out_links(a).len() as f64)
        })
        .collect()
}

/// Best rate over link allocations on a grid of `1/steps` fractions of each
/// node's capacity, evaluated by min-over-destinations max-flow. Exponential
/// in the number of links; only for tiny instances.
pub fn grid_rate(g: &OverlayGraph, f: &Configuration, steps: usize) -> Result<f64> {
    let links = LinkSet::new(g, f);
    let n = g.node_count();
    let mut alloc: Vec<Vec<usize>> = vec![Vec::new(); n];
    // per node: all compositions of at most `steps` units over its out-links
    let per_node: Vec<Vec<Vec<usize>>> = g
        .nodes()
        .map(|v| compositions(links.out_links(v).len(), steps))
        .collect();
    let mut best = 0.0f64;
    fn rec(
        v: usize,
        g: &OverlayGraph,
        links: &LinkSet,
        steps: usize,
        per_node: &[Vec<Vec<usize>>],
        alloc: &mut Vec<Vec<usize>>,
        best: &mut f64,
    ) -> Result<()> {
        if v == g.node_count() {
            let mut caps = Vec::new();
            for u in g.nodes() {
                for (i, &l) in links.out_links(u).iter().enumerate() {
                    let (a, b) = links.endpoints(l);
                    caps.push((a, b, g.capacity(u) * alloc[u][i] as f64 / steps as f64));
                }
            }
            let mut rate = f64::INFINITY;
            for d in g.receivers() {
                rate = rate.min(max_flow(g.node_count(), &caps, g.source(), d)?);
            }
            *best = best.max(rate);
            return Ok(());
        }
        for c in &per_node[v] {
            alloc[v] = c.clone();
            rec(v + 1, g, links, steps, per_node, alloc, best)?;
        }
        Ok(())
    }
    rec(0, g, &links, steps, &per_node, &mut alloc, &mut best)?;
    Ok(best)
}

fn compositions(parts: usize, total: usize) -> Vec<Vec<usize>> {
    if parts == 0 {
        return vec![Vec::new()];
    }
    if parts == 1 {
        return vec![vec![total]];
    }
    (0..=total)
        .flat_map(|first| {
            compositions(parts - 1, total - first)
                .into_iter()
                .map(move |mut rest| {
                    rest.insert(0, first);
                    rest
                })
        })
        .collect()
}
