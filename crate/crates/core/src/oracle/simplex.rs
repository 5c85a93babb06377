//! Dense tableau simplex for `max c·x  s.t.  A x <= b, x >= 0` with `b >= 0`.
//!
//! The slack basis is feasible at the origin, so no phase one is needed.
//! Pivoting uses the largest reduced cost and falls back to Bland's rule for
//! the rest of the solve once a run of degenerate pivots suggests cycling.

use crate::error::{Error, Result};

const EPS: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PivotRule {
    /// Smallest-index entering and leaving variables throughout.
    Bland,
    /// Largest reduced cost, switching to Bland after this many consecutive
    /// degenerate pivots.
    DantzigThenBland(usize),
}

impl Default for PivotRule {
    fn default() -> Self {
        PivotRule::DantzigThenBland(50)
    }
}

/// Linear program in inequality form.
#[derive(Clone, Debug, Default)]
pub struct LinearProgram {
    objective: Vec<f64>,
    rows: Vec<Vec<(usize, f64)>>,
    rhs: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct LpSolution {
    pub x: Vec<f64>,
    /// Dual prices of the rows.
    pub y: Vec<f64>,
    pub objective: f64,
    pub dual_objective: f64,
    pub pivots: usize,
}

impl LpSolution {
    /// `|primal - dual| / max(1, |primal|)`.
    pub fn duality_gap(&self) -> f64 {
        (self.objective - self.dual_objective).abs() / self.objective.abs().max(1.0)
    }
}

impl LinearProgram {
    pub fn new(vars: usize) -> Self {
        LinearProgram {
            objective: vec![0.0; vars],
            rows: Vec::new(),
            rhs: Vec::new(),
        }
    }

    pub fn vars(&self) -> usize {
        self.objective.len()
    }

    pub fn rows(&self) -> usize {
        self.rows.len()
    }

    pub fn set_objective(&mut self, var: usize, coef: f64) {
        self.objective[var] = coef;
    }

    /// Adds `sum coef * x[var] <= rhs`. Repeated variables accumulate.
    pub fn add_row(&mut self, terms: Vec<(usize, f64)>, rhs: f64) -> usize {
        debug_assert!(terms.iter().all(|&(v, _)| v < self.vars()));
        self.rows.push(terms);
        self.rhs.push(rhs);
        self.rows.len() - 1
    }

    /// Human-readable constraint listing.
    pub fn listing(&self, names: impl Fn(usize) -> String) -> String {
        let term = |(v, c): (usize, f64)| format!("{:+} {}", c, names(v));
        let mut out = String::from("max ");
        let obj: Vec<String> = self
            .objective
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != 0.0)
            .map(|(v, &c)| term((v, c)))
            .collect();
        out.push_str(&obj.join(" "));
        out.push('\n');
        for (row, rhs) in self.rows.iter().zip(&self.rhs) {
            let lhs: Vec<String> = row.iter().map(|&t| term(t)).collect();
            out.push_str(&format!("  {} <= {}\n", lhs.join(" "), rhs));
        }
        out
    }

    pub fn solve(&self) -> Result<LpSolution> {
        self.solve_with(PivotRule::default())
    }

    pub fn solve_with(&self, rule: PivotRule) -> Result<LpSolution> {
        let n = self.vars();
        let m = self.rows();
        if let Some(i) = self.rhs.iter().position(|b| !(*b >= 0.0 && b.is_finite())) {
            return Err(Error::Numerical(format!(
                "row {i} has right-hand side {}; only b >= 0 is supported",
                self.rhs[i]
            )));
        }
        let width = n + m + 1;
        // row-major tableau; the last row holds reduced costs (negated)
        let mut t = vec![0.0; (m + 1) * width];
        for (i, row) in self.rows.iter().enumerate() {
            for &(v, c) in row {
                t[i * width + v] += c;
            }
            t[i * width + n + i] = 1.0;
            t[i * width + width - 1] = self.rhs[i];
        }
        for v in 0..n {
            t[m * width + v] = -self.objective[v];
        }
        let mut basis: Vec<usize> = (n..n + m).collect();

        let mut bland = matches!(rule, PivotRule::Bland);
        let mut degenerate_run = 0usize;
        let mut pivots = 0usize;
        let max_pivots = 50 * (n + m) + 1000;
        let obj = m * width;

        loop {
            let entering = if bland {
                (0..n + m).find(|&j| t[obj + j] < -EPS)
            } else {
                let mut best: Option<(usize, f64)> = None;
                for j in 0..n + m {
                    let r = t[obj + j];
                    if r < -EPS && best.is_none_or(|(_, b)| r < b) {
                        best = Some((j, r));
                    }
                }
                best.map(|(j, _)| j)
            };
            let Some(col) = entering else { break };

            let mut leave: Option<(usize, f64)> = None;
            for i in 0..m {
                let a = t[i * width + col];
                if a > EPS {
                    let ratio = t[i * width + width - 1] / a;
                    let better = match leave {
                        None => true,
                        Some((r, best)) => {
                            ratio < best - EPS || (ratio <= best + EPS && basis[i] < basis[r])
                        }
                    };
                    if better {
                        leave = Some((i, ratio));
                    }
                }
            }
            let Some((row, ratio)) = leave else {
                return Err(Error::Unbounded);
            };

            if ratio <= EPS {
                degenerate_run += 1;
                if let PivotRule::DantzigThenBland(limit) = rule {
                    if degenerate_run >= limit {
                        bland = true;
                    }
                }
            } else {
                degenerate_run = 0;
            }

            pivot(&mut t, width, m, row, col);
            basis[row] = col;
            pivots += 1;
            if pivots > max_pivots {
                return Err(Error::Numerical(format!(
                    "no optimum after {pivots} pivots"
                )));
            }
        }

        let mut x = vec![0.0; n];
        for (i, &b) in basis.iter().enumerate() {
            if b < n {
                x[b] = t[i * width + width - 1];
            }
        }
        let y: Vec<f64> = (0..m).map(|i| t[obj + n + i]).collect();
        let objective = t[obj + width - 1];
        let dual_objective: f64 = y.iter().zip(&self.rhs).map(|(a, b)| a * b).sum();
        if x.iter().chain(&y).any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite tableau entry".into()));
        }
        Ok(LpSolution {
            x,
            y,
            objective,
            dual_objective,
            pivots,
        })
    }

    /// Largest violation of `A x <= b` and `x >= 0`.
    pub fn primal_violation(&self, x: &[f64]) -> f64 {
        let rows = self.rows.iter().zip(&self.rhs).map(|(row, b)| {
            let lhs: f64 = row.iter().map(|&(v, c)| c * x[v]).sum();
            (lhs - b).max(0.0)
        });
        x.iter()
            .map(|v| (-v).max(0.0))
            .chain(rows)
            .fold(0.0, f64::max)
    }

    /// Largest violation of `A^T y >= c` and `y >= 0`.
    pub fn dual_violation(&self, y: &[f64]) -> f64 {
        let mut col = vec![0.0; self.vars()];
        for (row, &yi) in self.rows.iter().zip(y) {
            for &(v, c) in row {
                col[v] += c * yi;
            }
        }
        let cols = col
            .iter()
            .zip(&self.objective)
            .map(|(lhs, c)| (c - lhs).max(0.0));
        y.iter()
            .map(|v| (-v).max(0.0))
            .chain(cols)
            .fold(0.0, f64::max)
    }
}

fn pivot(t: &mut [f64], width: usize, m: usize, row: usize, col: usize) {
    let p = t[row * width + col];
    for j in 0..width {
        t[row * width + j] /= p;
    }
    let pivot_row: Vec<f64> = t[row * width..(row + 1) * width].to_vec();
    for i in 0..=m {
        if i == row {
            continue;
        }
        let factor = t[i * width + col];
        if factor.abs() <= 1e-14 {
            continue;
        }
        let r = &mut t[i * width..(i + 1) * width];
        for (a, b) in r.iter_mut().zip(&pivot_row) {
            *a -= factor * b;
        }
        r[col] = 0.0;
    }
}
