use hopcast::instances::{random_configuration, random_small};
use hopcast::oracle::{
    baseline_rate, fullmesh_rate, grid_rate, max_flow, max_flow_cut, solve_mp, solve_mp_cuts,
    LinearProgram,
};
use hopcast::overlay::{enumerate_configurations, is_connected_from_source, OverlayGraph};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Minimum over every s-t cut of its capacity.
fn brute_min_cut(n: usize, links: &[(usize, usize, f64)], s: usize, t: usize) -> f64 {
    let mut best = f64::INFINITY;
    for mask in 0u32..1 << n {
        if mask >> s & 1 == 0 || mask >> t & 1 == 1 {
            continue;
        }
        let cut: f64 = links
            .iter()
            .filter(|(a, b, _)| mask >> a & 1 == 1 && mask >> b & 1 == 0)
            .map(|l| l.2)
            .sum();
        best = best.min(cut);
    }
    best
}

fn links() -> impl Strategy<Value = (usize, Vec<(usize, usize, f64)>)> {
    (2usize..=7).prop_flat_map(|n| {
        let link = (0..n, 0..n, 0.0f64..5.0).prop_filter("no loops", |(a, b, _)| a != b);
        (Just(n), prop::collection::vec(link, 0..20))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn max_flow_equals_min_cut((n, links) in links(), t in 1usize..7) {
        let t = t % n;
        prop_assume!(t != 0);
        let v = max_flow(n, &links, 0, t).unwrap();
        let cut = brute_min_cut(n, &links, 0, t);
        prop_assert!((v - cut).abs() <= 1e-9 * cut.max(1.0), "{} vs {}", v, cut);
        let m = max_flow_cut(n, &links, 0, t).unwrap();
        let side_cut: f64 = links.iter().filter(|(a, b, _)| m.source_side[*a] && !m.source_side[*b]).map(|l| l.2).sum();
        prop_assert!((side_cut - v).abs() <= 1e-9 * v.max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn rate_is_monotone_in_pairs(n in 2usize..=6, extra in 0.0f64..0.8, seed in any::<u64>()) {
        let g = random_small(n, extra, seed);
        let configs = enumerate_configurations(&g).unwrap();
        prop_assume!(configs.len() <= 400);
        let rates: Vec<f64> = configs.iter().map(|f| solve_mp(&g, f).unwrap()).collect();
        let full = fullmesh_rate(&g);
        for (f, &x) in configs.iter().zip(&rates) {
            prop_assert!(x <= full * (1.0 + 1e-9));
            prop_assert!(baseline_rate(&g, f).unwrap() <= x * (1.0 + 1e-9) + 1e-12);
            for (h, &y) in configs.iter().zip(&rates) {
                if h.len() == f.len() + 1 && f.distance(h) == 1 {
                    prop_assert!(y >= x * (1.0 - 1e-9));
                }
            }
        }
    }

    #[test]
    fn formulations_agree(n in 2usize..=8, extra in 0.0f64..1.0, seed in any::<u64>()) {
        let g = random_small(n, extra, seed);
        let f = random_configuration(&g, &mut ChaCha8Rng::seed_from_u64(seed));
        let a = solve_mp(&g, &f).unwrap();
        let b = solve_mp_cuts(&g, &f).unwrap();
        prop_assert!((a - b).abs() <= 1e-7 * a.max(1.0), "{} vs {}", a, b);
        prop_assert_eq!(a > 0.0, is_connected_from_source(&g, &f));
    }

    #[test]
    fn grid_search_never_beats_the_lp(n in 2usize..=4, seed in any::<u64>()) {
        let g = random_small(n, 0.5, seed);
        let f = random_configuration(&g, &mut ChaCha8Rng::seed_from_u64(seed));
        let lp = solve_mp(&g, &f).unwrap();
        let grid = grid_rate(&g, &f, 4).unwrap();
        prop_assert!(grid <= lp * (1.0 + 1e-9) + 1e-12);
    }

    #[test]
    fn lp_duality(c in prop::collection::vec(0.0f64..3.0, 3), rows in prop::collection::vec((prop::collection::vec(0.0f64..2.0, 3), 0.5f64..4.0), 1..5)) {
        // bounded packing LPs: max c x, A x <= b, x >= 0 with x_i <= 10
        let mut lp = LinearProgram::new(3);
        for (i, &ci) in c.iter().enumerate() {
            lp.set_objective(i, ci);
            lp.add_row(vec![(i, 1.0)], 10.0);
        }
        for (a, b) in &rows {
            lp.add_row(a.iter().copied().enumerate().collect(), *b);
        }
        let sol = lp.solve().unwrap();
        prop_assert!(lp.primal_violation(&sol.x) <= 1e-9);
        prop_assert!(lp.dual_violation(&sol.y) <= 1e-9);
        prop_assert!(sol.duality_gap().abs() <= 1e-9 * sol.objective.abs().max(1.0));
    }
}

#[test]
fn chain_rate_is_the_weakest_forwarder() {
    // 0 -> 1 -> 2 -> 3 with degree bound 2 leaves one route
    let g = OverlayGraph::new(
        0,
        vec![3.0, 2.0, 1.5, 9.0],
        vec![2; 4],
        [(0, 1), (1, 2), (2, 3)],
    )
    .unwrap();
    let f = g.configuration(g.pairs().iter().copied()).unwrap();
    assert!((solve_mp(&g, &f).unwrap() - 1.5).abs() < 1e-9);
    // the even split sends half of node 2's upload back to node 1
    assert_eq!(baseline_rate(&g, &f).unwrap(), 0.75);
}
