//! Sup-norm error certificates for truncated chains and the induced bounds
//! on performance measures.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernel::{e1_factor, E1Mode, Grid, TransitionKernel, TransitionMatrix};
use crate::measure::{expectation, PerformanceFunctional};
use crate::numerics::{solve_lp, LinearProgram};
use crate::stationary::StationarySolution;

/// LP optima at or below this are treated as a singular operator.
pub const MIN_Y: f64 = 1e-12;

/// `w[i][j] = 1 + Σ_{s<=j} q_is` for `j = 0..=J` (column 0 is all ones).
fn weights(q: &TransitionMatrix) -> Vec<Vec<f64>> {
    let n = q.len();
    (0..n)
        .map(|i| {
            let mut row = Vec::with_capacity(n + 1);
            let mut acc = 1.0;
            row.push(acc);
            for &v in q.row(i) {
                acc += v;
                row.push(acc);
            }
            row
        })
        .collect()
}

fn push_rows(lp: &mut LinearProgram, w: &[Vec<f64>], j: usize, k: usize) -> Result<()> {
    let n = w.len();
    for eta in [0.0, 1.0] {
        let delta = if j == k { eta } else { 0.0 };
        // E = delta + coef · a with a_0 = 0 substituted out
        let mut coef = vec![0.0; n + 1];
        for m in 1..=n {
            let next = if m < n { w[m][j] } else { 0.0 };
            coef[m] = -(w[m - 1][j] - next);
        }
        if j >= 1 {
            coef[j] += 1.0 - delta;
        }
        // E <= y  and  -y <= E
        let mut upper: Vec<f64> = coef.clone();
        upper[0] = -1.0;
        lp.add_le(upper, -delta)?;
        let mut lower: Vec<f64> = coef.iter().map(|c| -c).collect();
        lower[0] = -1.0;
        lp.add_le(lower, delta)?;
    }
    Ok(())
}

fn build_with(w: &[Vec<f64>], k: usize) -> Result<LinearProgram> {
    let n = w.len();
    let mut objective = vec![0.0; n + 1];
    objective[0] = 1.0;
    let mut lower = vec![-1.0; n + 1];
    let mut upper = vec![1.0; n + 1];
    lower[0] = f64::NEG_INFINITY;
    upper[0] = f64::INFINITY;
    let mut lp = LinearProgram::new(objective, lower, upper)?;
    for j in 0..=n {
        push_rows(&mut lp, w, j, k)?;
    }
    Ok(lp)
}

/// The LP for index `k ∈ 0..=J`: variables `(y, a_1..a_J)`, `a_j ∈ [−1, 1]`,
/// minimize `y` subject to, for every `j ∈ 0..=J` and `η ∈ {0, 1}`,
/// `|a_j + η δ_jk (1 − a_j) − Σ_i w_ij (a_i − a_{i−1})| <= y`.
pub fn build_lp(q: &TransitionMatrix, k: usize) -> Result<LinearProgram> {
    let n = q.len();
    if n < 2 {
        return Err(Error::InvalidArgument("the certificate needs at least two states".into()));
    }
    if k > n {
        return Err(Error::InvalidArgument(format!("index {k} outside 0..={n}")));
    }
    build_with(&weights(q), k)
}

/// `(e₂, y*)` with `e₂ = 1 / min_k y*_k`.
pub fn e2_factor(q: &TransitionMatrix) -> Result<(f64, Vec<f64>)> {
    let n = q.len();
    if n < 2 {
        return Err(Error::InvalidArgument("the certificate needs at least two states".into()));
    }
    let w = weights(q);
    let ys: Vec<f64> = (0..=n)
        .into_par_iter()
        .map(|k| -> Result<f64> {
            let lp = build_with(&w, k)?;
            match solve_lp(&lp) {
                Ok(sol) => Ok(sol.value),
                Err(Error::Infeasible | Error::Unbounded) => Err(Error::Invertibility { k, value: f64::NAN }),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_>>()?;
    let (k, &min) = argmin(&ys);
    if min <= MIN_Y {
        return Err(Error::Invertibility { k, value: min });
    }
    Ok((1.0 / min, ys))
}

/// Smallest index among the minimizers.
fn argmin(ys: &[f64]) -> (usize, &f64) {
    ys.iter().enumerate().fold((0, &ys[0]), |best, (i, y)| if *y < *best.1 { (i, y) } else { best })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorCertificate {
    pub level: u32,
    pub e1: f64,
    pub e2: f64,
    pub dist_bound: f64,
    pub y_star: Vec<f64>,
    pub argmin_k: usize,
}

impl ErrorCertificate {
    pub const CSV_HEADER: &'static str = "r,e1,e2,dist_bound,argmin_k";

    pub fn csv_row(&self) -> String {
        format!("{},{:.16e},{:.16e},{:.16e},{}", self.level, self.e1, self.e2, self.dist_bound, self.argmin_k)
    }
}

/// `||p − p⁽ʳ⁾||∞ <= e₁·e₂` with the analytic `e₁`.
pub fn certify<K: TransitionKernel + ?Sized>(k: &K, q: &TransitionMatrix, grid: &Grid) -> Result<ErrorCertificate> {
    let e1 = e1_factor(k, q, grid, E1Mode::Analytic)?;
    let (e2, y_star) = e2_factor(q)?;
    let argmin_k = argmin(&y_star).0;
    Ok(ErrorCertificate { level: grid.level(), e1, e2, dist_bound: e1 * e2, y_star, argmin_k })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasureBound {
    pub functional: String,
    pub value: f64,
    pub half_width: f64,
    pub a: f64,
}

impl MeasureBound {
    pub fn contains(&self, v: f64) -> bool {
        (v - self.value).abs() <= self.half_width
    }
}

/// Point value `E_p⁽ʳ⁾[g]` with half-width `a·V(g)·e₁·e₂`.
pub fn bound_measure(g: &PerformanceFunctional, sol: &StationarySolution, cert: &ErrorCertificate) -> MeasureBound {
    let a = g.a_factor();
    MeasureBound {
        functional: g.name().to_string(),
        value: expectation(g, &sol.distribution),
        half_width: a * g.variation() * cert.dist_bound,
        a,
    }
}
