//! Two-timescale scenario loop and the random-swap baseline.

use std::cell::RefCell;
use std::collections::HashMap;
use std::io::Write;
use std::path::Path;
use std::rc::Rc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::report::{cdf, BaselineComparison, OccupancyEntry, RunReport, Sample, OCCUPANCY_ROWS};
use super::scenario::{Initial, Scenario};
use crate::error::Result;
use crate::hopper::{noise_offset, sample_timer, Action, Hopper, MeasurementMode, Occupancy};
use crate::instances;
use crate::oracle;
use crate::overlay::{Configuration, NodeId, OverlayGraph, Pair};
use crate::ratecast::{solve_rate, SolverConfig};

// Independent streams derived from the scenario seed.
const INITIAL_STREAM: u64 = 0x9e37_79b9_7f4a_7c15;
const NOISE_STREAM: u64 = 0xbf58_476d_1ce4_e5b9;
const BASELINE_STREAM: u64 = 0x94d0_49bb_1331_11eb;

/// True rate of a configuration plus per-node receiving rates.
#[derive(Clone, Debug)]
struct Eval {
    rate: f64,
    receiving: Vec<f64>,
}

/// Memoized evaluation of configurations.
struct Evaluator {
    solver: Option<SolverConfig>,
    cache: HashMap<Configuration, Eval>,
    nonconverged: usize,
}

impl Evaluator {
    fn new(mode: &MeasurementMode, solver: &SolverConfig) -> Self {
        Evaluator {
            solver: matches!(mode, MeasurementMode::SolverConverged).then(|| solver.quiet()),
            cache: HashMap::new(),
            nonconverged: 0,
        }
    }

    fn eval(&mut self, g: &OverlayGraph, f: &Configuration) -> Result<Eval> {
        if let Some(e) = self.cache.get(f) {
            return Ok(e.clone());
        }
        let e = match &self.solver {
            Some(cfg) => {
                let est = solve_rate(g, f, cfg)?;
                if !est.converged {
                    self.nonconverged += 1;
                }
                Eval {
                    rate: est.rate,
                    receiving: est.receiving,
                }
            }
            None => {
                let x = oracle::exact_rate(g, f)?;
                Eval {
                    rate: x,
                    receiving: vec![x; g.node_count()],
                }
            }
        };
        self.cache.insert(f.clone(), e.clone());
        Ok(e)
    }
}

fn mean_receiving(g: &OverlayGraph, e: &Eval) -> f64 {
    let r: f64 = g.receivers().map(|v| e.receiving[v]).sum();
    r / g.receiver_count().max(1) as f64
}

fn sample(g: &OverlayGraph, event: usize, t: f64, e: &Eval) -> Sample {
    Sample {
        event,
        t,
        source_rate: e.rate,
        mean_receiving_rate: mean_receiving(g, e),
    }
}

/// Starting configuration of both the hopping run and the baseline.
pub fn initial_configuration(g: &OverlayGraph, s: &Scenario) -> Result<Configuration> {
    let f = match &s.initial {
        Initial::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(s.seed ^ INITIAL_STREAM);
            instances::random_configuration(g, &mut rng)
        }
        Initial::Base => g.base_configuration(),
        Initial::Pairs(p) => g.configuration(p.iter().copied())?,
    };
    g.check_configuration(&f)?;
    Ok(f)
}

struct Tally {
    occupancy: Occupancy,
    series: Vec<Sample>,
    accepted: usize,
    blocked: usize,
    nonconverged: usize,
}

fn finish(
    s: &Scenario,
    g: &OverlayGraph,
    kind: &str,
    tally: Tally,
    initial: &Eval,
    last: (&Configuration, Eval),
    rates: impl Fn(&Configuration) -> f64,
) -> RunReport {
    let occ = &tally.occupancy;
    let (time_average_rate, mut entries): (f64, Vec<OccupancyEntry>) = if occ.total() > 0.0 {
        let avg = occ.iter().map(|(f, t)| t * rates(f)).sum::<f64>() / occ.total();
        let entries = occ
            .iter()
            .map(|(f, t)| OccupancyEntry {
                configuration: f.label(),
                fraction: t / occ.total(),
                rate: rates(f),
            })
            .collect();
        (avg, entries)
    } else {
        let entry = OccupancyEntry {
            configuration: last.0.label(),
            fraction: 1.0,
            rate: last.1.rate,
        };
        (last.1.rate, vec![entry])
    };
    let distinct = entries.len();
    // stable sort keeps the configuration order among equal fractions
    entries.sort_by(|a, b| b.fraction.total_cmp(&a.fraction));
    let other: f64 = entries
        .iter()
        .skip(OCCUPANCY_ROWS)
        .map(|e| e.fraction)
        .sum();
    entries.truncate(OCCUPANCY_ROWS);
    let receivers: Vec<f64> = g.receivers().map(|v| last.1.receiving[v]).collect();
    RunReport {
        scenario: s.name.clone(),
        kind: kind.into(),
        seed: s.seed,
        nodes: g.node_count(),
        events: s.hops,
        accepted: tally.accepted,
        blocked: tally.blocked,
        nonconverged: tally.nonconverged,
        initial_rate: initial.rate,
        final_rate: last.1.rate,
        time_average_rate,
        fullmesh_rate: oracle::fullmesh_rate(g),
        distinct_configurations: distinct,
        occupancy: entries,
        occupancy_other: other,
        baseline: None,
        receiving_cdf: cdf(&receivers),
        time_series: tally.series,
    }
}

/// Runs the hopping protocol with rates measured per the scenario's mode.
/// Time between events is credited to the configuration in force once
/// `burn_in` events have passed. Each hop is appended to `log` as a JSON
/// line when given.
pub fn run_scenario(
    s: &Scenario,
    base_dir: Option<&Path>,
    log: Option<&mut dyn Write>,
) -> Result<RunReport> {
    s.validate()?;
    let g = s.build_graph(base_dir)?;
    let f0 = initial_configuration(&g, s)?;
    let ev = Rc::new(RefCell::new(Evaluator::new(
        &s.hopper.measurement,
        &s.solver,
    )));

    let measure = {
        let ev = Rc::clone(&ev);
        let mut noise = match &s.hopper.measurement {
            MeasurementMode::Noisy { delta, eta } => Some((
                *delta,
                eta.clone(),
                ChaCha8Rng::seed_from_u64(s.seed ^ NOISE_STREAM),
            )),
            _ => None,
        };
        move |g: &OverlayGraph, f: &Configuration| -> Result<f64> {
            let x = ev.borrow_mut().eval(g, f)?.rate;
            Ok(match &mut noise {
                Some((delta, eta, rng)) => x + noise_offset(*delta, eta, rng),
                None => x,
            })
        }
    };
    let mut hopper = Hopper::new(
        &g,
        s.hopper.clone(),
        Some(f0.clone()),
        Box::new(measure),
        s.seed,
    )?;
    let initial = ev.borrow_mut().eval(&g, &f0)?;

    let every = s.sample_interval();
    let mut tally = Tally {
        occupancy: Occupancy::default(),
        series: vec![sample(&g, 0, 0.0, &initial)],
        accepted: 0,
        blocked: 0,
        nonconverged: 0,
    };
    let mut log = log;
    for event in 1..=s.hops {
        let before = hopper.state.current.clone();
        let t0 = hopper.state.clock;
        let rec = hopper.step()?;
        if event > s.burn_in {
            tally.occupancy.add(&before, rec.t - t0);
        }
        tally.accepted += rec.accepted as usize;
        tally.blocked += (rec.action == Action::Blocked) as usize;
        if let Some(w) = log.as_deref_mut() {
            serde_json::to_writer(&mut *w, &rec)?;
            w.write_all(b"\n")?;
        }
        if event % every == 0 || event == s.hops {
            let e = ev.borrow_mut().eval(&g, &hopper.state.current)?;
            tally.series.push(sample(&g, event, rec.t, &e));
        }
    }

    let last_f = hopper.state.current.clone();
    let last = ev.borrow_mut().eval(&g, &last_f)?;
    let rates: HashMap<Configuration, f64> = tally
        .occupancy
        .iter()
        .map(|(f, _)| Ok((f.clone(), ev.borrow_mut().eval(&g, f)?.rate)))
        .collect::<Result<_>>()?;
    tally.nonconverged = ev.borrow().nonconverged;
    let mut report = finish(s, &g, "hop", tally, &initial, (&last_f, last), |f| rates[f]);
    if s.compare_baseline {
        let b = run_baseline(s, base_dir)?;
        report.baseline = Some(BaselineComparison {
            time_average_rate: b.time_average_rate,
            ratio: report.time_average_rate / b.time_average_rate,
        });
    }
    Ok(report)
}

/// Random-swap heuristic: on timer expiry a node drops a random in-use
/// neighbor and connects to a random unused one, ignoring degree bounds.
/// Rates are those of an even capacity split.
pub fn run_baseline(s: &Scenario, base_dir: Option<&Path>) -> Result<RunReport> {
    s.validate()?;
    let g = s.build_graph(base_dir)?;
    let mut f = initial_configuration(&g, s)?;
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed ^ BASELINE_STREAM);
    let mut cache: HashMap<Configuration, f64> = HashMap::new();
    let mut rate = |f: &Configuration| -> Result<f64> {
        if let Some(&x) = cache.get(f) {
            return Ok(x);
        }
        let x = oracle::baseline_rate(&g, f)?;
        cache.insert(f.clone(), x);
        Ok(x)
    };
    let eval = |x: f64| Eval {
        rate: x,
        receiving: vec![x; g.node_count()],
    };

    let mut timers: Vec<Option<f64>> = Vec::with_capacity(g.node_count());
    for v in g.nodes() {
        timers.push(if g.hoppable_neighbors(v).next().is_some() {
            Some(sample_timer(v, &s.hopper, &g, &mut rng)?)
        } else {
            None
        });
    }
    let initial = eval(rate(&f)?);
    let every = s.sample_interval();
    let mut tally = Tally {
        occupancy: Occupancy::default(),
        series: vec![sample(&g, 0, 0.0, &initial)],
        accepted: 0,
        blocked: 0,
        nonconverged: 0,
    };
    let mut clock = 0.0;
    for event in 1..=s.hops {
        let Some((v, t)) = next_timer(&timers) else {
            break;
        };
        if event > s.burn_in {
            tally.occupancy.add(&f, t - clock);
        }
        clock = t;
        let (used, unused): (Vec<NodeId>, Vec<NodeId>) = g
            .hoppable_neighbors(v)
            .partition(|&u| f.contains(Pair::new(v, u)));
        if !used.is_empty() {
            f = f.without_pair(Pair::new(v, used[rng.random_range(0..used.len())]));
        }
        if !unused.is_empty() {
            f = f.with_pair(Pair::new(v, unused[rng.random_range(0..unused.len())]));
        }
        tally.accepted += 1;
        timers[v] = Some(t + sample_timer(v, &s.hopper, &g, &mut rng)?);
        if event % every == 0 || event == s.hops {
            tally.series.push(sample(&g, event, t, &eval(rate(&f)?)));
        }
    }
    let last = eval(rate(&f)?);
    let rates: HashMap<Configuration, f64> = tally
        .occupancy
        .iter()
        .map(|(f, _)| Ok((f.clone(), rate(f)?)))
        .collect::<Result<_>>()?;
    Ok(finish(
        s,
        &g,
        "baseline",
        tally,
        &initial,
        (&f, last),
        |f| rates[f],
    ))
}

fn next_timer(timers: &[Option<f64>]) -> Option<(NodeId, f64)> {
    let mut best: Option<(NodeId, f64)> = None;
    for (v, t) in timers.iter().enumerate() {
        if let Some(t) = *t {
            if best.is_none_or(|(_, bt)| t < bt) {
                best = Some((v, t));
            }
        }
    }
    best
}
