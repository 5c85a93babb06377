//! Single-configuration solves, configuration listings and distribution
//! analysis for a scenario's instance.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::run::initial_configuration;
use super::scenario::Scenario;
use crate::analysis::{
    distribution_csv, log_sum_exp_rate, noise_bounds, optimal_distribution, stationary_extended,
    tv_distance, DistributionVector, NoiseBounds, NoiseModel,
};
use crate::error::Result;
use crate::hopper::{measurement, Hopper, MeasurementMode, Occupancy};
use crate::oracle;
use crate::overlay::{enumerate_configurations, is_connected_from_source, Configuration, Pair};
use crate::ratecast::{solve_rate, TracePoint};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub configuration: String,
    pub rate: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Receiving rate per node; the source entry is the source rate.
    pub receiving: Vec<f64>,
    pub exact_rate: f64,
    pub fullmesh_rate: f64,
    /// Solver trace when the scenario's solver records one.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub trace: Vec<TracePoint>,
}

/// Solves the scenario's initial configuration, or `pairs` (added to the
/// pinned ones) when given.
pub fn rate_scenario(
    s: &Scenario,
    base_dir: Option<&Path>,
    pairs: Option<&[Pair]>,
) -> Result<RateReport> {
    s.validate()?;
    let g = s.build_graph(base_dir)?;
    let f = match pairs {
        Some(p) => {
            let f = g.configuration(p.iter().copied())?;
            g.check_configuration(&f)?;
            f
        }
        None => initial_configuration(&g, s)?,
    };
    let est = solve_rate(&g, &f, &s.solver)?;
    Ok(RateReport {
        configuration: f.label(),
        rate: est.rate,
        converged: est.converged,
        iterations: est.iterations,
        receiving: est.receiving,
        trace: est.trace,
        exact_rate: oracle::exact_rate(&g, &f)?,
        fullmesh_rate: oracle::fullmesh_rate(&g),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfigurationRow {
    pub id: usize,
    pub configuration: String,
    pub pairs: usize,
    pub connected: bool,
    pub rate: f64,
}

fn rows(
    s: &Scenario,
    base_dir: Option<&Path>,
) -> Result<(Vec<Configuration>, Vec<ConfigurationRow>)> {
    s.validate()?;
    let g = s.build_graph(base_dir)?;
    let configs = enumerate_configurations(&g)?;
    let rows = configs
        .iter()
        .enumerate()
        .map(|(id, f)| {
            Ok(ConfigurationRow {
                id,
                configuration: f.label(),
                pairs: f.len(),
                connected: is_connected_from_source(&g, f),
                rate: oracle::exact_rate(&g, f)?,
            })
        })
        .collect::<Result<_>>()?;
    Ok((configs, rows))
}

/// Every degree-feasible configuration of the scenario's instance with its
/// exact rate.
pub fn enumerate_scenario(s: &Scenario, base_dir: Option<&Path>) -> Result<Vec<ConfigurationRow>> {
    Ok(rows(s, base_dir)?.1)
}

pub fn configurations_csv(rows: &[ConfigurationRow]) -> String {
    let mut out = String::from("config_id,configuration,pairs,connected,rate\n");
    for r in rows {
        writeln!(
            out,
            "{},\"{}\",{},{},{}",
            r.id, r.configuration, r.pairs, r.connected, r.rate
        )
        .expect("string write");
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub beta: f64,
    pub configurations: Vec<ConfigurationRow>,
    pub p_star: DistributionVector,
    /// Stationary configuration law under the scenario's noise, if noisy.
    pub p_bar: Option<DistributionVector>,
    /// Occupancy of a hopping run, if requested.
    pub empirical: Option<DistributionVector>,
    pub max_rate: f64,
    pub log_sum_exp_rate: f64,
    pub expected_rate: f64,
    pub bounds: Option<NoiseBounds>,
    pub tv_empirical: Option<f64>,
}

impl AnalysisReport {
    pub fn distribution_csv(&self) -> Result<String> {
        distribution_csv(&self.p_star, self.p_bar.as_ref(), self.empirical.as_ref())
    }
}

/// Gibbs distribution over the enumerated configurations; under noisy
/// measurement also the perturbed law and its bounds. With `empirical` the
/// scenario is hopped for its horizon and the post-burn-in occupancy is
/// compared against the target law.
pub fn analyze_scenario(
    s: &Scenario,
    base_dir: Option<&Path>,
    empirical: bool,
) -> Result<AnalysisReport> {
    let (configs, rows) = rows(s, base_dir)?;
    let x: Vec<f64> = rows.iter().map(|r| r.rate).collect();
    let beta = s.hopper.beta;
    let p_star = optimal_distribution(&x, beta)?;
    let (p_bar, bounds) = match &s.hopper.measurement {
        MeasurementMode::Noisy { delta, eta } => {
            let noise = NoiseModel::identical(x.len(), *delta, eta.clone())?;
            let st = stationary_extended(&x, &noise, beta)?;
            (
                Some(st.configurations),
                Some(noise_bounds(&x, &noise, beta)?),
            )
        }
        _ => (None, None),
    };
    let empirical = if empirical {
        let occ = hop_occupancy(s, base_dir)?;
        let times: Vec<f64> = configs.iter().map(|f| occ.time(f)).collect();
        Some(DistributionVector::empirical(&times)?)
    } else {
        None
    };
    let target = p_bar.as_ref().unwrap_or(&p_star);
    let tv_empirical = empirical
        .as_ref()
        .map(|e| tv_distance(target, e))
        .transpose()?;
    Ok(AnalysisReport {
        beta,
        max_rate: x.iter().copied().fold(0.0, f64::max),
        log_sum_exp_rate: log_sum_exp_rate(&x, beta)?,
        expected_rate: p_star.expectation(&x)?,
        configurations: rows,
        p_star,
        p_bar,
        empirical,
        bounds,
        tv_empirical,
    })
}

fn hop_occupancy(s: &Scenario, base_dir: Option<&Path>) -> Result<Occupancy> {
    let g = s.build_graph(base_dir)?;
    let f0 = initial_configuration(&g, s)?;
    let measure = measurement(&s.hopper.measurement, &s.solver, s.seed);
    let mut hopper = Hopper::new(&g, s.hopper.clone(), Some(f0), measure, s.seed)?;
    let mut occ = Occupancy::default();
    for event in 1..=s.hops {
        let before = hopper.state.current.clone();
        let t0 = hopper.state.clock;
        let rec = hopper.step()?;
        if event > s.burn_in {
            occ.add(&before, rec.t - t0);
        }
    }
    Ok(occ)
}
