use std::collections::BTreeMap;

use hopcast::analysis::{acceptance, optimal_distribution, tv_distance, DistributionVector};
use hopcast::hopper::{
    measurement, sample_timer, Action, Hopper, HopperConfig, MeasurementMode, Occupancy,
    OracleMeasure,
};
use hopcast::instances::{random_small, setting_three, setting_three_configurations};
use hopcast::overlay::Configuration;
use hopcast::ratecast::SolverConfig;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn oracle_hopper(g: &hopcast::overlay::OverlayGraph, beta: f64, tau: f64, seed: u64) -> Hopper<'_> {
    let cfg = HopperConfig::new(beta, tau, MeasurementMode::OracleExact).unwrap();
    Hopper::new(g, cfg, None, Box::new(OracleMeasure::new()), seed).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn every_step_respects_bounds(n in 3usize..=8, extra in 0.0f64..1.0, beta in 0.0f64..20.0, seed in any::<u64>()) {
        let g = random_small(n, extra, seed);
        let mut h = oracle_hopper(&g, beta, 0.0, seed);
        let mut clock = 0.0;
        for _ in 0..300 {
            let before = h.state.current.clone();
            let x_before = h.state.last_rate;
            let rec = h.step().unwrap();
            let after = &h.state.current;
            prop_assert!(g.check_configuration(after).is_ok());
            prop_assert!(rec.t >= clock);
            clock = rec.t;
            prop_assert_eq!(rec.x_old, x_before);
            prop_assert!(rec.pair.contains(rec.actor));
            match (rec.action, rec.accepted) {
                (Action::Blocked, acc) => {
                    prop_assert!(!acc);
                    prop_assert!(rec.x_new.is_none());
                    prop_assert_eq!(after, &before);
                }
                (_, true) => {
                    prop_assert_eq!(after.distance(&before), 1);
                    prop_assert_eq!(Some(h.state.last_rate), rec.x_new);
                }
                (_, false) => prop_assert_eq!(after, &before),
            }
        }
    }

    #[test]
    fn same_seed_same_trajectory(seed in any::<u64>()) {
        let g = random_small(6, 0.5, seed);
        let mut a = oracle_hopper(&g, 3.0, 0.2, seed);
        let mut b = oracle_hopper(&g, 3.0, 0.2, seed);
        for _ in 0..200 {
            prop_assert_eq!(a.step().unwrap(), b.step().unwrap());
        }
    }
}

#[test]
fn observed_rate_is_kept_until_the_next_move() {
    // with noise, a rejected proposal must not refresh the current reading
    let g = setting_three();
    let cfg = HopperConfig::new(
        5.0,
        0.0,
        MeasurementMode::Noisy {
            delta: 0.3,
            eta: vec![0.2, 0.2, 0.2, 0.2, 0.2],
        },
    )
    .unwrap();
    let m = measurement(&cfg.measurement, &SolverConfig::default(), 9);
    let mut h = Hopper::new(&g, cfg, None, m, 9).unwrap();
    let mut last = h.state.last_rate;
    for _ in 0..5_000 {
        let rec = h.step().unwrap();
        assert_eq!(rec.x_old, last);
        if rec.accepted {
            last = rec.x_new.unwrap();
        }
    }
}

#[test]
fn timer_mean_matches_neighbor_count() {
    let g = random_small(6, 0.6, 4);
    for tau in [0.0, 0.7] {
        let cfg = HopperConfig::new(1.0, tau, MeasurementMode::OracleExact).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for v in g.nodes() {
            let k = g.hoppable_neighbors(v).count();
            if k == 0 {
                assert!(sample_timer(v, &cfg, &g, &mut rng).is_err());
                continue;
            }
            let draws = 40_000;
            let mean = (0..draws)
                .map(|_| sample_timer(v, &cfg, &g, &mut rng).unwrap())
                .sum::<f64>()
                / draws as f64;
            let want = 2.0 * f64::exp(tau) / k as f64;
            assert!(
                (mean / want - 1.0).abs() < 0.03,
                "node {v}: {mean} vs {want}"
            );
        }
    }
}

/// Transition counts and occupancy over a long oracle run.
fn long_run(
    beta: f64,
    tau: f64,
    events: usize,
) -> (Occupancy, BTreeMap<(Configuration, Configuration), usize>) {
    let g = setting_three();
    let mut h = oracle_hopper(&g, beta, tau, 21);
    let mut occ = Occupancy::default();
    let mut moves = BTreeMap::new();
    for _ in 0..events {
        let from = h.state.current.clone();
        let t0 = h.state.clock;
        let rec = h.step().unwrap();
        occ.add(&from, rec.t - t0);
        if rec.accepted {
            *moves.entry((from, h.state.current.clone())).or_insert(0) += 1;
        }
    }
    (occ, moves)
}

#[test]
fn transition_rates_match_the_design() {
    // each free pair is toggled at rate e^{-tau} (both endpoints may act),
    // and the move is then taken with the acceptance probability
    let (beta, tau) = (2.0, 0.5);
    let g = setting_three();
    let configs = setting_three_configurations(&g);
    let x = [1.0, 1.0, 1.0, 0.5];
    let (occ, moves) = long_run(beta, tau, 400_000);
    let mut checked = 0;
    for (a, fa) in configs.iter().enumerate() {
        for (b, fb) in configs.iter().enumerate() {
            if fa.distance(fb) != 1 {
                continue;
            }
            let count = moves.get(&(fa.clone(), fb.clone())).copied().unwrap_or(0);
            let rate = count as f64 / occ.time(fa);
            let want = (-tau).exp() * acceptance(x[a], x[b], beta);
            assert!(
                (rate / want - 1.0).abs() < 0.05,
                "{a}->{b}: {rate} vs {want}"
            );
            checked += 1;
        }
    }
    assert_eq!(checked, 8);
}

#[test]
fn occupancy_approaches_gibbs() {
    let g = setting_three();
    let configs = setting_three_configurations(&g);
    let x = [1.0, 1.0, 1.0, 0.5];
    for beta in [1.0, 5.0] {
        let (occ, _) = long_run(beta, 0.0, 200_000);
        let times: Vec<f64> = configs.iter().map(|f| occ.time(f)).collect();
        let emp = DistributionVector::empirical(&times).unwrap();
        let tv = tv_distance(&optimal_distribution(&x, beta).unwrap(), &emp).unwrap();
        assert!(tv < 0.02, "beta {beta}: tv {tv}");
    }
}
