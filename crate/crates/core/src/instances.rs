//! Named instances and seeded random generators used by tests, the scenario
//! runner and the CLI.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::overlay::{CapacityProfile, Configuration, NodeId, OverlayGraph, Pair};

/// Five nodes, all potential pairs, unit capacities, degree bound 3.
pub fn five_node_mesh() -> OverlayGraph {
    OverlayGraph::complete(0, vec![1.0; 5], vec![3; 5]).expect("static instance")
}

/// A connected configuration of [`five_node_mesh`] using seven pairs.
pub fn five_node_example(g: &OverlayGraph) -> Configuration {
    g.configuration(
        [(0, 1), (0, 2), (0, 4), (1, 2), (1, 4), (2, 3), (3, 4)]
            .into_iter()
            .map(|(a, b)| Pair::new(a, b)),
    )
    .expect("static instance")
}

/// Unit-capacity five-node instance whose only free pairs are {1,2} and
/// {1,4}. The backbone s-2-3 with 3 feeding both 1 and 4 is pinned.
///
/// The four configurations have broadcast rates 1, 1, 1 and 0.5; see
/// [`setting_three_configurations`].
pub fn setting_three() -> OverlayGraph {
    let pinned = [(0, 2), (2, 3), (1, 3), (3, 4)];
    let free = [(1, 2), (1, 4)];
    OverlayGraph::new(
        0,
        vec![1.0; 5],
        vec![3; 5],
        pinned.iter().chain(free.iter()).copied(),
    )
    .and_then(|g| g.with_pinned(pinned.map(|(a, b)| Pair::new(a, b))))
    .expect("static instance")
}

/// `[f1, f2, f3, f4]`: {1,2} only, {1,4} only, both, neither.
pub fn setting_three_configurations(g: &OverlayGraph) -> [Configuration; 4] {
    let a = Pair::new(1, 2);
    let b = Pair::new(1, 4);
    let base = g.base_configuration();
    [
        base.with_pair(a),
        base.with_pair(b),
        base.with_pair(a).with_pair(b),
        base,
    ]
}

/// Path 0-1-...-(n-1) with the given capacities.
pub fn chain(capacity: Vec<f64>, bound: usize) -> OverlayGraph {
    let n = capacity.len();
    OverlayGraph::new(0, capacity, vec![bound; n], (1..n).map(|v| (v - 1, v))).expect("chain")
}

/// Random connected potential graph: a random spanning tree plus every other
/// pair independently with probability `extra`. Capacities are integers drawn
/// uniformly from `1..=4`, bounds uniformly from `2..=4`.
pub fn random_small(n: usize, extra: f64, seed: u64) -> OverlayGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let capacity: Vec<f64> = (0..n).map(|_| rng.random_range(1..=4) as f64).collect();
    let bound: Vec<usize> = (0..n).map(|_| rng.random_range(2..=4)).collect();
    let edges = random_connected_pairs(n, extra, &mut rng);
    OverlayGraph::new(0, capacity, bound, edges).expect("random instance")
}

/// Random connected potential graph with capacities from `profile`, the
/// source fixed at `source_capacity`, and uniform degree bound.
pub fn random_profiled(
    n: usize,
    extra: f64,
    profile: &CapacityProfile,
    source_capacity: f64,
    bound: usize,
    seed: u64,
) -> OverlayGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut capacity = profile.sample_with(n, &mut rng);
    capacity[0] = source_capacity;
    let edges = random_connected_pairs(n, extra, &mut rng);
    OverlayGraph::new(0, capacity, vec![bound; n], edges).expect("random instance")
}

fn random_connected_pairs<R: Rng>(n: usize, extra: f64, rng: &mut R) -> Vec<(NodeId, NodeId)> {
    let mut order: Vec<NodeId> = (1..n).collect();
    order.shuffle(rng);
    let mut attached = vec![0];
    let mut tree = std::collections::BTreeSet::new();
    for v in order {
        let u = attached[rng.random_range(0..attached.len())];
        tree.insert(Pair::new(u, v));
        attached.push(v);
    }
    let mut edges = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            let p = Pair::new(a, b);
            if tree.contains(&p) || rng.random::<f64>() < extra {
                edges.push((a, b));
            }
        }
    }
    edges
}

/// Random maximal degree-feasible configuration: free pairs are visited in a
/// random order and kept whenever both endpoints have spare degree.
pub fn random_configuration<R: Rng + ?Sized>(g: &OverlayGraph, rng: &mut R) -> Configuration {
    let mut free: Vec<Pair> = g.free_pairs().collect();
    free.shuffle(rng);
    extend_greedily(g, g.base_configuration(), &free)
}

/// Adds pairs from `order` to `start` while degree bounds allow.
pub fn extend_greedily(g: &OverlayGraph, start: Configuration, order: &[Pair]) -> Configuration {
    order.iter().fold(start, |f, &p| {
        if !f.contains(p)
            && f.degree(p.lo()) < g.bound(p.lo())
            && f.degree(p.hi()) < g.bound(p.hi())
        {
            f.with_pair(p)
        } else {
            f
        }
    })
}
