//! Closed forms for the hopping chain: log-sum-exp values, the Gibbs
//! distribution over configurations, the noisy-measurement extended chain and
//! its stationary law, and the distance bounds under noise.
//!
//! Every exponential is evaluated after subtracting the largest exponent, so
//! `beta * x` in the thousands is fine.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::overlay::Configuration;

/// Probability vector over an ordered list of configuration ids.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistributionVector {
    support: Vec<usize>,
    probs: Vec<f64>,
}

pub const SUM_TOLERANCE: f64 = 1e-9;

impl DistributionVector {
    pub fn new(support: Vec<usize>, probs: Vec<f64>) -> Result<Self> {
        if support.len() != probs.len() {
            return Err(Error::Dimension(format!(
                "{} ids for {} probabilities",
                support.len(),
                probs.len()
            )));
        }
        if probs.iter().any(|p| !(*p >= 0.0)) {
            return Err(Error::InvalidInput("negative or NaN probability".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::InvalidInput(format!("probabilities sum to {total}")));
        }
        Ok(DistributionVector { support, probs })
    }

    /// Normalizes nonnegative weights over ids `0..weights.len()`.
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::InvalidInput(
                "weights must be nonnegative with positive sum".into(),
            ));
        }
        Self::new(
            (0..weights.len()).collect(),
            weights.iter().map(|w| w / total).collect(),
        )
    }

    /// Empirical distribution of `counts` (occupancy times or visits).
    pub fn empirical(counts: &[f64]) -> Result<Self> {
        Self::from_weights(counts)
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// `sum_f p_f x_f`.
    pub fn expectation(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.len() {
            return Err(Error::Dimension("one value per configuration".into()));
        }
        Ok(self.probs.iter().zip(x).map(|(p, v)| p * v).sum())
    }

    /// Shannon entropy in nats.
    pub fn entropy(&self) -> f64 {
        -self
            .probs
            .iter()
            .filter(|p| **p > 0.0)
            .map(|p| p * p.ln())
            .sum::<f64>()
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if beta >= 0.0 && beta.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "beta must be finite and nonnegative, got {beta}"
        )))
    }
}

fn check_rates(x: &[f64]) -> Result<()> {
    if x.is_empty() {
        return Err(Error::InvalidInput("empty rate vector".into()));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("rates must be finite".into()));
    }
    Ok(())
}

/// `ln sum exp(e_i)` without overflow.
fn lse(exponents: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = exponents.clone().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + exponents.map(|e| (e - m).exp()).sum::<f64>().ln()
}

/// Weights `w_i exp(e_i)` normalized to a probability vector.
fn softmax(exponents: &[f64], weights: &[f64]) -> Vec<f64> {
    let m = exponents
        .iter()
        .zip(weights)
        .filter(|(_, w)| **w > 0.0)
        .map(|(e, _)| *e)
        .fold(f64::NEG_INFINITY, f64::max);
    let raw: Vec<f64> = exponents
        .iter()
        .zip(weights)
        .map(|(e, w)| if *w > 0.0 { w * (e - m).exp() } else { 0.0 })
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|r| r / total).collect()
}

/// `(1/beta) ln sum_f exp(beta x_f)`.
pub fn log_sum_exp_rate(x: &[f64], beta: f64) -> Result<f64> {
    check_rates(x)?;
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "beta must be positive, got {beta}"
        )));
    }
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    // ln sum exp(beta (x - max)) lies in [0, ln |F|]; clamp away rounding
    let tail = lse(x.iter().map(|v| beta * (v - max))).clamp(0.0, (x.len() as f64).ln());
    Ok(max + tail / beta)
}

/// Gibbs distribution `p_f proportional to exp(beta x_f)`.
pub fn optimal_distribution(x: &[f64], beta: f64) -> Result<DistributionVector> {
    check_rates(x)?;
    check_beta(beta)?;
    let e: Vec<f64> = x.iter().map(|v| beta * v).collect();
    DistributionVector::new((0..x.len()).collect(), softmax(&e, &vec![1.0; x.len()]))
}

/// `(1/2) sum |p_f - q_f|`.
pub fn tv_distance(p: &DistributionVector, q: &DistributionVector) -> Result<f64> {
    if p.support != q.support {
        return Err(Error::SupportMismatch);
    }
    Ok(0.5
        * p.probs
            .iter()
            .zip(&q.probs)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>())
}

/// Discretized measurement noise: under configuration `f` the observed rate
/// is `x_f + (j / n_f) delta_f` with probability `eta_f[j + n_f]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    delta: Vec<f64>,
    levels: Vec<usize>,
    eta: Vec<Vec<f64>>,
}

impl NoiseModel {
    pub fn new(delta: Vec<f64>, levels: Vec<usize>, eta: Vec<Vec<f64>>) -> Result<Self> {
        let m = delta.len();
        if levels.len() != m || eta.len() != m {
            return Err(Error::InvalidNoise(
                "delta, levels and eta need one entry per configuration".into(),
            ));
        }
        for f in 0..m {
            if !(delta[f] >= 0.0 && delta[f].is_finite()) {
                return Err(Error::InvalidNoise(format!("delta[{f}] = {}", delta[f])));
            }
            if levels[f] == 0 {
                return Err(Error::InvalidNoise(format!(
                    "levels[{f}] must be at least 1"
                )));
            }
            if eta[f].len() != 2 * levels[f] + 1 {
                return Err(Error::InvalidNoise(format!(
                    "eta[{f}] has {} entries, expected {}",
                    eta[f].len(),
                    2 * levels[f] + 1
                )));
            }
            if eta[f].iter().any(|e| !(*e >= 0.0)) {
                return Err(Error::InvalidNoise(format!(
                    "eta[{f}] has a negative entry"
                )));
            }
            let total: f64 = eta[f].iter().sum();
            if (total - 1.0).abs() > SUM_TOLERANCE {
                return Err(Error::InvalidNoise(format!("eta[{f}] sums to {total}")));
            }
        }
        Ok(NoiseModel { delta, levels, eta })
    }

    /// Exact measurements for `m` configurations.
    pub fn exact(m: usize) -> Self {
        NoiseModel {
            delta: vec![0.0; m],
            levels: vec![1; m],
            eta: vec![vec![0.0, 1.0, 0.0]; m],
        }
    }

    /// The same `eta` and `delta` for every configuration.
    pub fn identical(m: usize, delta: f64, eta: Vec<f64>) -> Result<Self> {
        let n = (eta.len().max(1) - 1) / 2;
        Self::new(vec![delta; m], vec![n; m], vec![eta; m])
    }

    pub fn configurations(&self) -> usize {
        self.delta.len()
    }

    pub fn delta(&self, f: usize) -> f64 {
        self.delta[f]
    }

    pub fn levels(&self, f: usize) -> usize {
        self.levels[f]
    }

    /// Probability of offset `j` in `-n_f..=n_f`.
    pub fn eta(&self, f: usize, j: i64) -> f64 {
        self.eta[f][(j + self.levels[f] as i64) as usize]
    }

    pub fn max_delta(&self) -> f64 {
        self.delta.iter().copied().fold(0.0, f64::max)
    }

    /// Observed rate `x_f + (j / n_f) delta_f`.
    pub fn observed(&self, x: f64, f: usize, j: i64) -> f64 {
        x + j as f64 / self.levels[f] as f64 * self.delta[f]
    }

    /// Offsets `-n_f..=n_f`.
    pub fn offsets(&self, f: usize) -> impl Iterator<Item = i64> {
        let n = self.levels[f] as i64;
        -n..=n
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.configurations() {
            return Err(Error::Dimension(format!(
                "{} rates for a noise model over {} configurations",
                x.len(),
                self.configurations()
            )));
        }
        Ok(())
    }
}

/// Pairs `(a, b)`, `a < b`, of configurations differing in exactly one pair.
pub fn adjacent_configurations(configs: &[Configuration]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for a in 0..configs.len() {
        for b in a + 1..configs.len() {
            if configs[a].distance(&configs[b]) == 1 {
                out.push((a, b));
            }
        }
    }
    out
}

/// Probability that a hop from rate `x_old` to `x_new` is taken,
/// `e^{b x_new} / (e^{b x_old} + e^{b x_new})`.
pub fn acceptance(x_old: f64, x_new: f64, beta: f64) -> f64 {
    let d = beta * (x_old - x_new);
    if d.is_nan() {
        return 0.5;
    }
    // 1 / (1 + e^d), evaluated on the side that cannot overflow
    if d > 0.0 {
        let e = (-d).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + d.exp())
    }
}

/// Continuous-time chain over `(configuration, observed offset)` states.
#[derive(Clone, Debug)]
pub struct ExtendedChain {
    /// `(configuration, j)` for every state, grouped by configuration.
    pub states: Vec<(usize, i64)>,
    pub observed: Vec<f64>,
    /// Generator: off-diagonal transition rates, rows summing to zero.
    pub generator: DMatrix<f64>,
}

impl ExtendedChain {
    /// Marginal over configurations of a distribution on states.
    pub fn configuration_marginal(&self, p: &[f64], configs: usize) -> Vec<f64> {
        let mut out = vec![0.0; configs];
        for (&(f, _), &pi) in self.states.iter().zip(p) {
            out[f] += pi;
        }
        out
    }

    pub fn rate(&self, from: usize, to: usize) -> f64 {
        self.generator[(from, to)]
    }
}

/// Builds the extended chain: from `(f, j)` to `(f', j')` for adjacent `f`,
/// `f'` at rate `eta_{j',f'} e^{-tau} accept(observed_f, observed_f')`.
pub fn extended_chain(
    x: &[f64],
    noise: &NoiseModel,
    adjacency: &[(usize, usize)],
    beta: f64,
    tau: f64,
) -> Result<ExtendedChain> {
    check_rates(x)?;
    check_beta(beta)?;
    noise.check(x)?;
    let mut states = Vec::new();
    let mut first = Vec::with_capacity(x.len());
    for f in 0..x.len() {
        first.push(states.len());
        states.extend(noise.offsets(f).map(|j| (f, j)));
    }
    let observed: Vec<f64> = states
        .iter()
        .map(|&(f, j)| noise.observed(x[f], f, j))
        .collect();
    let size = states.len();
    let mut q = DMatrix::zeros(size, size);
    let clock = (-tau).exp();
    for &(a, b) in adjacency {
        if a >= x.len() || b >= x.len() || a == b {
            return Err(Error::Dimension(format!("bad adjacency ({a}, {b})")));
        }
        for (f, g) in [(a, b), (b, a)] {
            for i in 0..2 * noise.levels(f) + 1 {
                let si = first[f] + i;
                for (k, jj) in noise.offsets(g).enumerate() {
                    let sk = first[g] + k;
                    q[(si, sk)] +=
                        noise.eta(g, jj) * clock * acceptance(observed[si], observed[sk], beta);
                }
            }
        }
    }
    for i in 0..size {
        let out: f64 = (0..size).filter(|&k| k != i).map(|k| q[(i, k)]).sum();
        q[(i, i)] = -out;
    }
    Ok(ExtendedChain {
        states,
        observed,
        generator: q,
    })
}

/// Stationary law of the extended chain in both closed forms.
#[derive(Clone, Debug, PartialEq)]
pub struct ExtendedStationary {
    /// Per state, in [`extended_chain`] order.
    pub states: Vec<f64>,
    /// Per configuration, summed over states.
    pub configurations: DistributionVector,
    /// Per configuration via `alpha_f e^{beta x_f}` normalized.
    pub configurations_alpha: DistributionVector,
}

pub fn stationary_extended(x: &[f64], noise: &NoiseModel, beta: f64) -> Result<ExtendedStationary> {
    check_rates(x)?;
    check_beta(beta)?;
    noise.check(x)?;
    let mut exps = Vec::new();
    let mut weights = Vec::new();
    for f in 0..x.len() {
        for j in noise.offsets(f) {
            exps.push(beta * noise.observed(x[f], f, j));
            weights.push(noise.eta(f, j));
        }
    }
    let states = softmax(&exps, &weights);
    let mut marginal = vec![0.0; x.len()];
    let mut s = 0;
    for (f, m) in marginal.iter_mut().enumerate() {
        for _ in noise.offsets(f) {
            *m += states[s];
            s += 1;
        }
    }

    // ln alpha_f + beta x_f with alpha_f = sum_j eta_j e^{beta (j/n) delta}
    let log_alpha: Vec<f64> = (0..x.len())
        .map(|f| {
            let terms: Vec<f64> = noise
                .offsets(f)
                .filter(|&j| noise.eta(f, j) > 0.0)
                .map(|j| {
                    noise.eta(f, j).ln()
                        + beta * (j as f64 / noise.levels(f) as f64) * noise.delta(f)
                })
                .collect();
            lse(terms.into_iter()) + beta * x[f]
        })
        .collect();
    let alpha = softmax(&log_alpha, &vec![1.0; x.len()]);
    let ids: Vec<usize> = (0..x.len()).collect();
    Ok(ExtendedStationary {
        states,
        configurations: renormalized(ids.clone(), marginal)?,
        configurations_alpha: renormalized(ids, alpha)?,
    })
}

fn renormalized(ids: Vec<usize>, mut p: Vec<f64>) -> Result<DistributionVector> {
    let total: f64 = p.iter().sum();
    p.iter_mut().for_each(|v| *v /= total);
    DistributionVector::new(ids, p)
}

/// Stationary distribution of an irreducible generator by a direct solve of
/// `pi Q = 0`, `sum pi = 1`. Uses state reduction (GTH elimination), which
/// never subtracts and so stays accurate when rates span many orders of
/// magnitude; the diagonal of `generator` is ignored.
pub fn stationary_by_linear_solve(generator: &DMatrix<f64>) -> Result<Vec<f64>> {
    let n = generator.nrows();
    if n == 0 || generator.ncols() != n {
        return Err(Error::Dimension(
            "generator must be square and nonempty".into(),
        ));
    }
    let mut a = generator.clone();
    // censor states n-1, n-2, ..., 1 in turn
    for k in (1..n).rev() {
        let out: f64 = (0..k).map(|j| a[(k, j)]).sum();
        if !(out > 0.0) {
            return Err(Error::Numerical(format!(
                "state {k} cannot reach lower states; chain not irreducible"
            )));
        }
        for i in 0..k {
            a[(i, k)] /= out;
        }
        for i in 0..k {
            let via = a[(i, k)];
            if via == 0.0 {
                continue;
            }
            for j in 0..k {
                if j != i {
                    a[(i, j)] += via * a[(k, j)];
                }
            }
        }
    }
    let mut pi = vec![0.0; n];
    pi[0] = 1.0;
    for j in 1..n {
        pi[j] = (0..j).map(|i| pi[i] * a[(i, j)]).sum();
    }
    let total: f64 = pi.iter().sum();
    Ok(pi.into_iter().map(|p| p / total).collect())
}

/// Distances between the noiseless and the noisy stationary laws next to
/// their upper bounds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseBounds {
    pub tv_bound: f64,
    pub rate_gap_bound: f64,
    pub tv_actual: f64,
    pub rate_gap_actual: f64,
}

impl NoiseBounds {
    pub fn holds(&self) -> bool {
        self.tv_actual <= self.tv_bound && self.rate_gap_actual <= self.rate_gap_bound
    }
}

/// `d_TV(p*, p_bar) <= 1 - e^{-2 beta delta_max}` and
/// `|p* x - p_bar x| <= 2 x_max (1 - e^{-2 beta delta_max})`.
pub fn noise_bounds(x: &[f64], noise: &NoiseModel, beta: f64) -> Result<NoiseBounds> {
    let star = optimal_distribution(x, beta)?;
    let noisy = stationary_extended(x, noise, beta)?;
    let p_bar = &noisy.configurations;
    let x_max = x.iter().copied().fold(0.0, f64::max);
    let spread = -(-2.0 * beta * noise.max_delta()).exp_m1();
    Ok(NoiseBounds {
        tv_bound: spread,
        rate_gap_bound: 2.0 * x_max * spread,
        tv_actual: tv_distance(&star, p_bar)?,
        rate_gap_actual: (star.expectation(x)? - p_bar.expectation(x)?).abs(),
    })
}

/// CSV with header `config_id,p_star,p_bar,empirical`; missing columns are
/// left empty.
pub fn distribution_csv(
    p_star: &DistributionVector,
    p_bar: Option<&DistributionVector>,
    empirical: Option<&DistributionVector>,
) -> Result<String> {
    for other in [p_bar, empirical].into_iter().flatten() {
        if other.support != p_star.support {
            return Err(Error::SupportMismatch);
        }
    }
    let cell = |d: Option<&DistributionVector>, i: usize| {
        d.map(|d| format!("{:.12}", d.probs[i])).unwrap_or_default()
    };
    let mut out = String::from("config_id,p_star,p_bar,empirical\n");
    for (i, id) in p_star.support.iter().enumerate() {
        writeln!(
            out,
            "{id},{:.12},{},{}",
            p_star.probs[i],
            cell(p_bar, i),
            cell(empirical, i)
        )
        .expect("write to string");
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SETTING: [f64; 4] = [1.0, 1.0, 1.0, 0.5];

    #[test]
    fn single_configuration_lse() {
        assert_eq!(log_sum_exp_rate(&[0.7], 3.0).unwrap(), 0.7);
    }

    #[test]
    fn lse_example() {
        let v = log_sum_exp_rate(&SETTING, 10.0).unwrap();
        let direct = (3.0 * 10f64.exp() + 5f64.exp()).ln() / 10.0;
        assert!((v - direct).abs() < 1e-12);
        // 1 + ln(3)/10 = 1.109861 drops the e^5 term; the full value is higher
        assert!((v - 1.1100856).abs() < 5e-7, "{v}");
    }

    #[test]
    fn lse_rejects_bad_input() {
        assert!(log_sum_exp_rate(&[], 1.0).is_err());
        assert!(log_sum_exp_rate(&[1.0], 0.0).is_err());
    }

    #[test]
    fn lse_large_exponents() {
        let x = [1e4, 1e4 - 1.0, 0.0];
        let v = log_sum_exp_rate(&x, 500.0).unwrap();
        assert!(v.is_finite() && v >= 1e4);
    }

    #[test]
    fn gibbs_example() {
        let p = optimal_distribution(&SETTING, 1.0).unwrap();
        let want = [0.27727, 0.27727, 0.27727, 0.16818];
        for (a, b) in p.probs().iter().zip(want) {
            assert!((a - b).abs() < 5e-6, "{a} vs {b}");
        }
    }

    #[test]
    fn gibbs_uniform_and_limit() {
        let p = optimal_distribution(&[2.0; 5], 7.0).unwrap();
        assert!(p.probs().iter().all(|v| (v - 0.2).abs() < 1e-15));
        let p = optimal_distribution(&SETTING, 100.0).unwrap();
        assert!((p.expectation(&SETTING).unwrap() - 1.0).abs() < 1e-3);
        let p = optimal_distribution(&[1e4, 0.0], 500.0).unwrap();
        assert_eq!(p.probs(), &[1.0, 0.0]);
    }

    #[test]
    fn tv_examples() {
        let p = DistributionVector::new(vec![0, 1], vec![0.5, 0.5]).unwrap();
        let q = DistributionVector::new(vec![0, 1], vec![0.3, 0.7]).unwrap();
        assert_eq!(tv_distance(&p, &p).unwrap(), 0.0);
        assert!((tv_distance(&p, &q).unwrap() - 0.2).abs() < 1e-15);
        let r = DistributionVector::new(vec![0, 2], vec![0.3, 0.7]).unwrap();
        assert!(matches!(tv_distance(&p, &r), Err(Error::SupportMismatch)));
    }

    #[test]
    fn distribution_validation() {
        assert!(DistributionVector::new(vec![0, 1], vec![0.5, 0.6]).is_err());
        assert!(DistributionVector::new(vec![0], vec![0.5, 0.5]).is_err());
        assert!(DistributionVector::new(vec![0, 1], vec![-0.1, 1.1]).is_err());
    }

    #[test]
    fn noise_validation() {
        assert!(NoiseModel::new(vec![0.1], vec![1], vec![vec![0.2, 0.5, 0.3]]).is_ok());
        assert!(NoiseModel::new(vec![0.1], vec![1], vec![vec![0.2, 0.5, 0.4]]).is_err());
        assert!(NoiseModel::new(vec![0.1], vec![2], vec![vec![0.2, 0.5, 0.3]]).is_err());
        assert!(NoiseModel::new(vec![-0.1], vec![1], vec![vec![0.2, 0.5, 0.3]]).is_err());
        assert!(NoiseModel::new(vec![0.1], vec![0], vec![vec![1.0]]).is_err());
    }

    #[test]
    fn acceptance_examples() {
        assert_eq!(acceptance(0.3, 0.3, 4.0), 0.5);
        assert_eq!(acceptance(0.3, 7.0, 0.0), 0.5);
        let v = acceptance(0.5, 1.0, 20.0);
        assert!((v - 1.0 / (1.0 + (-10f64).exp())).abs() < 1e-15);
        assert!((v - 0.9999546).abs() < 1e-7);
        assert_eq!(acceptance(0.0, 1e4, 500.0), 1.0);
        assert_eq!(acceptance(1e4, 0.0, 500.0), 0.0);
    }

    #[test]
    fn bound_example() {
        let noise = NoiseModel::identical(2, 0.01, vec![0.5, 0.0, 0.5]).unwrap();
        let b = noise_bounds(&[1.0, 0.5], &noise, 20.0).unwrap();
        assert!((b.tv_bound - (1.0 - (-0.4f64).exp())).abs() < 1e-15);
        assert!((b.tv_bound - 0.32968).abs() < 5e-6);
    }

    #[test]
    fn zero_noise_bounds_vanish() {
        let b = noise_bounds(&SETTING, &NoiseModel::exact(4), 5.0).unwrap();
        assert_eq!(b.tv_bound, 0.0);
        assert_eq!(b.rate_gap_bound, 0.0);
        assert!(b.tv_actual < 1e-15 && b.rate_gap_actual < 1e-15);
    }

    #[test]
    fn zero_noise_collapses_to_gibbs() {
        let st = stationary_extended(&SETTING, &NoiseModel::exact(4), 3.0).unwrap();
        let star = optimal_distribution(&SETTING, 3.0).unwrap();
        assert!(tv_distance(&st.configurations, &star).unwrap() < 1e-15);
    }

    #[test]
    fn identical_symmetric_noise_cancels() {
        let noise = NoiseModel::identical(4, 0.2, vec![0.1, 0.3, 0.2, 0.3, 0.1]).unwrap();
        let st = stationary_extended(&SETTING, &noise, 3.0).unwrap();
        let star = optimal_distribution(&SETTING, 3.0).unwrap();
        assert!(tv_distance(&st.configurations, &star).unwrap() < 1e-12);
    }

    #[test]
    fn three_state_chain_structure() {
        // path f0 - f1 - f2 with three observation levels each
        let x = [1.0, 0.8, 0.4];
        let eta = vec![
            vec![0.2, 0.5, 0.3],
            vec![0.1, 0.8, 0.1],
            vec![0.3, 0.3, 0.4],
        ];
        let noise = NoiseModel::new(vec![0.1, 0.05, 0.2], vec![1; 3], eta).unwrap();
        let (beta, tau) = (2.0, 0.5);
        let chain = extended_chain(&x, &noise, &[(0, 1), (1, 2)], beta, tau).unwrap();
        assert_eq!(chain.states.len(), 9);
        for i in 0..9 {
            let row: f64 = (0..9).map(|k| chain.rate(i, k)).sum();
            assert!(row.abs() < 1e-12);
            for k in 0..9 {
                let (f, _) = chain.states[i];
                let (g, jg) = chain.states[k];
                let adjacent = f.abs_diff(g) == 1;
                if i == k {
                    continue;
                }
                if !adjacent {
                    assert_eq!(chain.rate(i, k), 0.0);
                    continue;
                }
                let (a, b) = (chain.observed[i], chain.observed[k]);
                let want = noise.eta(g, jg) * (-tau).exp() * (beta * b).exp()
                    / ((beta * a).exp() + (beta * b).exp());
                assert!((chain.rate(i, k) - want).abs() < 1e-15);
            }
        }
    }
}
