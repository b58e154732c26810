//! Dense bounded-variable primal simplex.
//!
//! Problems are stated as `min cᵀx` subject to `A x <= b` and
//! `l <= x <= u` (bounds may be infinite). Internally every variable is
//! shifted or reflected onto `[0, u']`, slacks are added, and a single
//! artificial column repairs the rows that start infeasible. The tableau is
//! kept in condensed (Tucker) form: one column per nonbasic variable, so the
//! memory footprint is `rows × variables` regardless of the slack count.

use std::collections::HashSet;

use crate::error::{Error, Result};

/// `min cᵀx` s.t. `A x <= b`, `l <= x <= u`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram {
    objective: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    rows: Vec<Vec<f64>>,
    rhs: Vec<f64>,
}

impl LinearProgram {
    pub fn new(objective: Vec<f64>, lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let n = objective.len();
        if lower.len() != n || upper.len() != n {
            return Err(Error::InvalidArgument("bound vectors must match the objective width".into()));
        }
        if lower.iter().zip(&upper).any(|(l, u)| l > u || l.is_nan() || u.is_nan()) {
            return Err(Error::InvalidArgument("every lower bound must not exceed its upper bound".into()));
        }
        Ok(Self { objective, lower, upper, rows: Vec::new(), rhs: Vec::new() })
    }

    /// Adds the row `coeffs · x <= rhs`.
    pub fn add_le(&mut self, coeffs: Vec<f64>, rhs: f64) -> Result<()> {
        if coeffs.len() != self.objective.len() {
            return Err(Error::InvalidArgument(format!(
                "row has width {}, expected {}",
                coeffs.len(),
                self.objective.len()
            )));
        }
        self.rows.push(coeffs);
        self.rhs.push(rhs);
        Ok(())
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn objective(&self) -> &[f64] {
        &self.objective
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn row(&self, i: usize) -> (&[f64], f64) {
        (&self.rows[i], self.rhs[i])
    }

    /// Largest violation of any row or bound at `x` (0 when feasible).
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut v = 0.0f64;
        for (row, &b) in self.rows.iter().zip(&self.rhs) {
            let lhs: f64 = row.iter().zip(x).map(|(a, x)| a * x).sum();
            v = v.max(lhs - b);
        }
        for ((&xi, &l), &u) in x.iter().zip(&self.lower).zip(&self.upper) {
            v = v.max(l - xi).max(xi - u);
        }
        v
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, x)| c * x).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub value: f64,
    pub x: Vec<f64>,
    pub pivots: usize,
}

const PIVOT_TOL: f64 = 1e-9;
const FEAS_TOL: f64 = 1e-9;
const COST_TOL: f64 = 1e-10;
const DEGENERATE_STREAK: usize = 50;
const REFRESH_EVERY: usize = 200;

#[derive(Debug, Clone, Copy)]
enum ColumnMap {
    /// `x = lo + x'`
    Shift { col: usize, lo: f64 },
    /// `x = hi - x'`
    Reflect { col: usize, hi: f64 },
    /// `x = x'_pos - x'_neg`
    Split { pos: usize, neg: usize },
}

struct Tableau {
    m: usize,
    width: usize,
    t: Vec<f64>,
    rhs: Vec<f64>,
    beta: Vec<f64>,
    basic: Vec<usize>,
    nonbasic: Vec<usize>,
    at_upper: Vec<bool>,
    ub: Vec<f64>,
    pivots: usize,
}

impl Tableau {
    fn row(&self, i: usize) -> &[f64] {
        &self.t[i * self.width..(i + 1) * self.width]
    }

    fn nonbasic_value(&self, var: usize) -> f64 {
        if self.at_upper[var] {
            self.ub[var]
        } else {
            0.0
        }
    }

    fn reduced_costs(&self, cost: &[f64]) -> Vec<f64> {
        let mut d: Vec<f64> = self.nonbasic.iter().map(|&v| cost[v]).collect();
        for i in 0..self.m {
            let cb = cost[self.basic[i]];
            if cb != 0.0 {
                for (dj, tij) in d.iter_mut().zip(self.row(i)) {
                    *dj -= cb * tij;
                }
            }
        }
        d
    }

    fn refresh_values(&mut self) {
        let xn: Vec<f64> = self.nonbasic.iter().map(|&v| self.nonbasic_value(v)).collect();
        for i in 0..self.m {
            let s: f64 = self.row(i).iter().zip(&xn).map(|(a, x)| a * x).sum();
            self.beta[i] = self.rhs[i] - s;
        }
    }

    /// Exchange basic row `r` with nonbasic column `j`; `d` is the reduced-cost row.
    fn exchange(&mut self, r: usize, j: usize, d: &mut [f64]) {
        let w = self.width;
        let p = self.t[r * w + j];
        {
            let row = &mut self.t[r * w..(r + 1) * w];
            for v in row.iter_mut() {
                *v /= p;
            }
            row[j] = 1.0 / p;
        }
        self.rhs[r] /= p;
        let pivot_row: Vec<f64> = self.t[r * w..(r + 1) * w].to_vec();
        let rhs_r = self.rhs[r];
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let row = &mut self.t[i * w..(i + 1) * w];
            let f = row[j];
            if f != 0.0 {
                row[j] = 0.0;
                for (a, &b) in row.iter_mut().zip(&pivot_row) {
                    *a -= f * b;
                }
                self.rhs[i] -= f * rhs_r;
            }
        }
        let f = d[j];
        if f != 0.0 {
            d[j] = 0.0;
            for (a, &b) in d.iter_mut().zip(&pivot_row) {
                *a -= f * b;
            }
        }
        std::mem::swap(&mut self.basic[r], &mut self.nonbasic[j]);
        self.pivots += 1;
    }

    /// Runs simplex iterations for `cost` until optimal.
    fn optimize(&mut self, cost: &[f64], max_pivots: usize) -> Result<()> {
        let mut d = self.reduced_costs(cost);
        let mut streak = 0usize;
        let mut since_refresh = 0usize;
        loop {
            if since_refresh >= REFRESH_EVERY {
                self.refresh_values();
                d = self.reduced_costs(cost);
                since_refresh = 0;
            }
            let bland = streak >= DEGENERATE_STREAK;

            // pricing
            let mut enter: Option<(usize, f64)> = None;
            for (j, &dj) in d.iter().enumerate() {
                let var = self.nonbasic[j];
                if self.ub[var] <= 0.0 {
                    continue;
                }
                let score = if self.at_upper[var] { dj } else { -dj };
                if score <= COST_TOL {
                    continue;
                }
                enter = match enter {
                    None => Some((j, score)),
                    Some((bj, bs)) => {
                        let better = if bland { var < self.nonbasic[bj] } else { score > bs };
                        if better {
                            Some((j, score))
                        } else {
                            Some((bj, bs))
                        }
                    }
                };
            }
            let Some((j, _)) = enter else {
                self.refresh_values();
                return Ok(());
            };
            if self.pivots >= max_pivots {
                return Err(Error::IterationLimit(self.pivots));
            }
            let var = self.nonbasic[j];
            let sigma = if self.at_upper[var] { -1.0 } else { 1.0 };

            // Harris two-pass ratio test
            let mut theta_max = f64::INFINITY;
            for i in 0..self.m {
                let alpha = self.t[i * self.width + j] * sigma;
                let bvar = self.basic[i];
                if alpha > PIVOT_TOL {
                    theta_max = theta_max.min((self.beta[i].max(0.0) + FEAS_TOL) / alpha);
                } else if alpha < -PIVOT_TOL && self.ub[bvar].is_finite() {
                    theta_max = theta_max.min(((self.ub[bvar] - self.beta[i]).max(0.0) + FEAS_TOL) / -alpha);
                }
            }
            let mut leave: Option<(usize, f64, bool)> = None; // (row, ratio, to_upper)
            let mut best_alpha = 0.0;
            for i in 0..self.m {
                let alpha = self.t[i * self.width + j] * sigma;
                let bvar = self.basic[i];
                let (ratio, to_upper) = if alpha > PIVOT_TOL {
                    (self.beta[i].max(0.0) / alpha, false)
                } else if alpha < -PIVOT_TOL && self.ub[bvar].is_finite() {
                    ((self.ub[bvar] - self.beta[i]).max(0.0) / -alpha, true)
                } else {
                    continue;
                };
                if ratio > theta_max {
                    continue;
                }
                let take = match leave {
                    None => true,
                    Some((li, lr, _)) => {
                        if bland {
                            ratio < lr || (ratio == lr && bvar < self.basic[li])
                        } else {
                            alpha.abs() > best_alpha
                        }
                    }
                };
                if take {
                    leave = Some((i, ratio, to_upper));
                    best_alpha = alpha.abs();
                }
            }

            let flip = self.ub[var];
            match leave {
                Some((r, ratio, to_upper)) if ratio < flip => {
                    let theta = ratio;
                    for i in 0..self.m {
                        let alpha = self.t[i * self.width + j] * sigma;
                        self.beta[i] -= alpha * theta;
                    }
                    let entering_value = self.nonbasic_value(var) + sigma * theta;
                    let leaving = self.basic[r];
                    self.exchange(r, j, &mut d);
                    self.beta[r] = entering_value;
                    self.at_upper[leaving] = to_upper;
                    self.at_upper[var] = false;
                    streak = if theta * best_alpha.max(1.0) < 1e-12 { streak + 1 } else { 0 };
                }
                _ if flip.is_finite() => {
                    for i in 0..self.m {
                        let alpha = self.t[i * self.width + j] * sigma;
                        self.beta[i] -= alpha * flip;
                    }
                    self.at_upper[var] = !self.at_upper[var];
                    streak = 0;
                }
                _ => return Err(Error::Unbounded),
            }
            since_refresh += 1;
        }
    }
}

/// Solves `lp` and returns the optimal value and a minimizer.
pub fn solve_lp(lp: &LinearProgram) -> Result<LpSolution> {
    let n = lp.num_vars();

    // map each variable onto nonnegative internal columns
    let mut maps = Vec::with_capacity(n);
    let mut col_ub: Vec<f64> = Vec::new();
    let mut col_cost: Vec<f64> = Vec::new();
    let mut col_source: Vec<(usize, f64)> = Vec::new(); // (variable, sign)
    let mut rhs_shift = vec![0.0; lp.num_rows()];
    for v in 0..n {
        let (l, u, c) = (lp.lower[v], lp.upper[v], lp.objective[v]);
        let map = if l.is_finite() {
            col_ub.push(u - l);
            col_cost.push(c);
            col_source.push((v, 1.0));
            ColumnMap::Shift { col: col_ub.len() - 1, lo: l }
        } else if u.is_finite() {
            col_ub.push(f64::INFINITY);
            col_cost.push(-c);
            col_source.push((v, -1.0));
            ColumnMap::Reflect { col: col_ub.len() - 1, hi: u }
        } else {
            col_ub.push(f64::INFINITY);
            col_cost.push(c);
            col_source.push((v, 1.0));
            col_ub.push(f64::INFINITY);
            col_cost.push(-c);
            col_source.push((v, -1.0));
            ColumnMap::Split { pos: col_ub.len() - 2, neg: col_ub.len() - 1 }
        };
        let offset = match map {
            ColumnMap::Shift { lo, .. } => lo,
            ColumnMap::Reflect { hi, .. } => hi,
            ColumnMap::Split { .. } => 0.0,
        };
        if offset != 0.0 {
            for (shift, row) in rhs_shift.iter_mut().zip(&lp.rows) {
                *shift += row[v] * offset;
            }
        }
        maps.push(map);
    }
    let ncols = col_ub.len();

    // internal rows, dropping exact duplicates and empty rows
    let mut seen: HashSet<Vec<u64>> = HashSet::new();
    let mut t_rows: Vec<Vec<f64>> = Vec::new();
    let mut b: Vec<f64> = Vec::new();
    for (i, row) in lp.rows.iter().enumerate() {
        let internal: Vec<f64> = col_source.iter().map(|&(v, s)| s * row[v]).collect();
        let bi = lp.rhs[i] - rhs_shift[i];
        if internal.iter().all(|&a| a == 0.0) {
            if bi < -FEAS_TOL {
                return Err(Error::Infeasible);
            }
            continue;
        }
        let mut key: Vec<u64> = internal.iter().map(|a| (a + 0.0).to_bits()).collect();
        key.push((bi + 0.0).to_bits());
        if seen.insert(key) {
            t_rows.push(internal);
            b.push(bi);
        }
    }
    let m = t_rows.len();
    let art = ncols + m;
    let width = ncols + 1;
    let mut t = vec![0.0; m * width];
    for (i, row) in t_rows.iter().enumerate() {
        t[i * width..i * width + ncols].copy_from_slice(row);
        if b[i] < 0.0 {
            t[i * width + ncols] = -1.0;
        }
    }
    let mut ub = col_ub.clone();
    ub.extend(std::iter::repeat(f64::INFINITY).take(m + 1));
    let mut tab = Tableau {
        m,
        width,
        t,
        rhs: b.clone(),
        beta: b.clone(),
        basic: (ncols..ncols + m).collect(),
        nonbasic: (0..ncols).chain(std::iter::once(art)).collect(),
        at_upper: vec![false; art + 1],
        ub,
        pivots: 0,
    };
    let max_pivots = 50 * (m + width) + 1000;

    // phase 1: a single artificial column absorbs every negative right-hand side
    if let Some((r, &most)) = b.iter().enumerate().filter(|(_, &v)| v < 0.0).min_by(|a, b| a.1.total_cmp(b.1)) {
        let theta = -most;
        for i in 0..m {
            if b[i] < 0.0 {
                tab.beta[i] += theta;
            }
        }
        let mut scratch = vec![0.0; width];
        tab.exchange(r, ncols, &mut scratch);
        tab.beta[r] = theta;
        let mut cost1 = vec![0.0; art + 1];
        cost1[art] = 1.0;
        tab.optimize(&cost1, max_pivots)?;
        let t_value = match tab.basic.iter().position(|&v| v == art) {
            Some(i) => tab.beta[i],
            None => tab.nonbasic_value(art),
        };
        if t_value > 1e-8 {
            return Err(Error::Infeasible);
        }
        if let Some(i) = tab.basic.iter().position(|&v| v == art) {
            // drive the artificial out of the basis when a pivot exists
            let row = tab.row(i);
            if let Some(j) = (0..width)
                .filter(|&j| row[j].abs() > PIVOT_TOL)
                .max_by(|&a, &c| row[a].abs().total_cmp(&row[c].abs()))
            {
                let var = tab.nonbasic[j];
                let value = tab.nonbasic_value(var);
                tab.exchange(i, j, &mut scratch);
                tab.beta[i] = value;
                tab.at_upper[art] = false;
                tab.at_upper[var] = false;
            }
        }
    }
    tab.ub[art] = 0.0;

    // phase 2
    let mut cost2 = col_cost.clone();
    cost2.extend(std::iter::repeat(0.0).take(m + 1));
    tab.optimize(&cost2, max_pivots)?;

    let mut internal = vec![0.0; ncols];
    for (j, &var) in tab.nonbasic.iter().enumerate() {
        let _ = j;
        if var < ncols {
            internal[var] = tab.nonbasic_value(var);
        }
    }
    for (i, &var) in tab.basic.iter().enumerate() {
        if var < ncols {
            internal[var] = tab.beta[i].clamp(0.0, tab.ub[var]);
        }
    }
    let x: Vec<f64> = maps
        .iter()
        .map(|map| match *map {
            ColumnMap::Shift { col, lo } => lo + internal[col],
            ColumnMap::Reflect { col, hi } => hi - internal[col],
            ColumnMap::Split { pos, neg } => internal[pos] - internal[neg],
        })
        .collect();
    Ok(LpSolution { value: lp.evaluate(&x), x, pivots: tab.pivots })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::numerics::linalg::{solve_linear, Matrix};

    /// Exhaustive vertex enumeration: every choice of `n` tight constraints
    /// among rows and finite bounds, keeping feasible intersection points.
    pub(crate) fn vertex_enumeration(lp: &LinearProgram) -> Option<f64> {
        let n = lp.num_vars();
        let mut planes: Vec<(Vec<f64>, f64)> = (0..lp.num_rows()).map(|i| (lp.rows[i].clone(), lp.rhs[i])).collect();
        for v in 0..n {
            let mut e = vec![0.0; n];
            e[v] = 1.0;
            if lp.lower[v].is_finite() {
                planes.push((e.clone(), lp.lower[v]));
            }
            if lp.upper[v].is_finite() {
                planes.push((e, lp.upper[v]));
            }
        }
        let mut best: Option<f64> = None;
        let mut idx = Vec::with_capacity(n);
        choose(lp, &planes, 0, &mut idx, &mut best);
        best
    }

    fn choose(lp: &LinearProgram, planes: &[(Vec<f64>, f64)], start: usize, idx: &mut Vec<usize>, best: &mut Option<f64>) {
        let n = lp.num_vars();
        if idx.len() == n {
            let rows: Vec<Vec<f64>> = idx.iter().map(|&i| planes[i].0.clone()).collect();
            let rhs: Vec<f64> = idx.iter().map(|&i| planes[i].1).collect();
            if let Ok(x) = solve_linear(&Matrix::from_rows(&rows).unwrap(), &rhs) {
                if lp.max_violation(&x) <= 1e-9 {
                    let v = lp.evaluate(&x);
                    *best = Some(best.map_or(v, |b| b.min(v)));
                }
            }
            return;
        }
        for i in start..planes.len() {
            idx.push(i);
            choose(lp, planes, i + 1, idx, best);
            idx.pop();
        }
    }

    #[test]
    fn single_absolute_value() {
        // min y s.t. -y <= 1 <= y
        let mut lp = LinearProgram::new(vec![1.0], vec![f64::NEG_INFINITY], vec![f64::INFINITY]).unwrap();
        lp.add_le(vec![-1.0], -1.0).unwrap();
        lp.add_le(vec![-1.0], 1.0).unwrap();
        let sol = solve_lp(&lp).unwrap();
        assert!((sol.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn two_sided_chebyshev() {
        // min y s.t. |a| <= y, |1 - a| <= y, a in [-1, 1]
        let mut lp = LinearProgram::new(vec![1.0, 0.0], vec![f64::NEG_INFINITY, -1.0], vec![f64::INFINITY, 1.0]).unwrap();
        lp.add_le(vec![-1.0, 1.0], 0.0).unwrap();
        lp.add_le(vec![-1.0, -1.0], 0.0).unwrap();
        lp.add_le(vec![-1.0, -1.0], -1.0).unwrap();
        lp.add_le(vec![-1.0, 1.0], 1.0).unwrap();
        let sol = solve_lp(&lp).unwrap();
        assert!((sol.value - 0.5).abs() < 1e-12);
        assert!((sol.x[1] - 0.5).abs() < 1e-12);
        assert!((vertex_enumeration(&lp).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn infeasible_and_unbounded() {
        let mut lp = LinearProgram::new(vec![1.0], vec![0.0], vec![1.0]).unwrap();
        lp.add_le(vec![1.0], -1.0).unwrap();
        assert!(matches!(solve_lp(&lp), Err(Error::Infeasible)));

        let mut lp = LinearProgram::new(vec![-1.0, 0.0], vec![0.0, 0.0], vec![f64::INFINITY, 1.0]).unwrap();
        lp.add_le(vec![-1.0, 1.0], 1.0).unwrap();
        assert!(matches!(solve_lp(&lp), Err(Error::Unbounded)));
    }

    #[test]
    fn ragged_rows_rejected() {
        let mut lp = LinearProgram::new(vec![1.0, 1.0], vec![0.0; 2], vec![1.0; 2]).unwrap();
        assert!(lp.add_le(vec![1.0], 0.0).is_err());
    }

    #[test]
    fn random_lps_match_vertex_enumeration() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        for _ in 0..200 {
            let n = rng.gen_range(2..=4);
            let obj: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let lower: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..0.0)).collect();
            let upper: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..2.0)).collect();
            let mut lp = LinearProgram::new(obj, lower, upper).unwrap();
            for _ in 0..rng.gen_range(1..6) {
                let row: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
                lp.add_le(row, rng.gen_range(-0.5..1.0)).unwrap();
            }
            match (solve_lp(&lp), vertex_enumeration(&lp)) {
                (Ok(sol), Some(v)) => {
                    assert!((sol.value - v).abs() < 1e-9, "{} vs {v}", sol.value);
                    assert!(lp.max_violation(&sol.x) < 1e-9);
                }
                (Err(Error::Infeasible), None) => {}
                (got, want) => panic!("solver {got:?} vs oracle {want:?}"),
            }
        }
    }
}
