//! Transition kernels on `[0, 1]`, dyadic grids and the finite chain obtained
//! by truncating a kernel to a grid.

use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::measure::DiscreteDistribution;
use crate::numerics::Matrix;

/// Derivative metadata attached to a kernel. `None` means "not known".
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct KernelBounds {
    /// Bound on `|∂κ̄/∂x|`.
    pub lipschitz_x: Option<f64>,
    /// Bound on `|∂κ̄/∂u|`.
    pub lipschitz_u: Option<f64>,
    /// Bound on `|∂²κ̄/∂x∂u|`.
    pub mixed: Option<f64>,
    /// Bound on `|dκ̄(x, 1)/dx|`.
    pub edge: Option<f64>,
}

/// `κ̄(x, u)`: probability that the next state is `<= x` from state `u`.
///
/// The bulk methods have brute-force defaults; kernels with structure can
/// override them.
pub trait TransitionKernel: Send + Sync {
    fn cdf(&self, x: f64, u: f64) -> f64;

    fn bounds(&self) -> KernelBounds {
        KernelBounds::default()
    }

    /// `M[i][j] = κ̄(c_j, c_i)` on a grid.
    fn tabulate(&self, grid: &Grid) -> Matrix {
        tabulate_brute(self, grid.states(), grid.states())
    }

    /// `M[i][j] = κ̄(xs[j], us[i])`.
    fn tabulate_on(&self, xs: &[f64], us: &[f64]) -> Matrix {
        tabulate_brute(self, xs, us)
    }

    /// `Σᵢ wᵢ κ̄(x, uᵢ)` for every `x` in `xs`.
    fn mixture_cdf(&self, atoms: &[(f64, f64)], xs: &[f64]) -> Vec<f64> {
        xs.par_iter().map(|&x| atoms.iter().map(|&(u, w)| w * self.cdf(x, u)).sum()).collect()
    }
}

/// Shared, thread-safe kernel.
pub type KernelHandle = Arc<dyn TransitionKernel>;

fn tabulate_brute<K: TransitionKernel + ?Sized>(k: &K, xs: &[f64], us: &[f64]) -> Matrix {
    let data: Vec<f64> = us.par_iter().flat_map_iter(|&u| xs.iter().map(move |&x| k.cdf(x, u))).collect();
    Matrix::from_vec(us.len(), xs.len(), data).expect("dimensions match by construction")
}

/// A kernel given by a closure.
pub struct FnKernel<F> {
    f: F,
    bounds: KernelBounds,
}

impl<F: Fn(f64, f64) -> f64 + Send + Sync> FnKernel<F> {
    pub fn new(f: F, bounds: KernelBounds) -> Self {
        Self { f, bounds }
    }
}

impl<F: Fn(f64, f64) -> f64 + Send + Sync> TransitionKernel for FnKernel<F> {
    fn cdf(&self, x: f64, u: f64) -> f64 {
        (self.f)(x, u)
    }

    fn bounds(&self) -> KernelBounds {
        self.bounds
    }
}

/// `κ̄(x, u) = F(x)`: every step restarts from `F`, which is also the
/// stationary law. `lipschitz` bounds the density of `F`.
pub fn regeneration_kernel<F>(f: F, lipschitz: f64) -> FnKernel<impl Fn(f64, f64) -> f64 + Send + Sync>
where
    F: Fn(f64) -> f64 + Send + Sync,
{
    FnKernel::new(
        move |x, _u| f(x),
        KernelBounds { lipschitz_x: Some(lipschitz), lipschitz_u: Some(0.0), mixed: Some(0.0), edge: Some(lipschitz) },
    )
}

/// `κ̄(x, u) = 1{x >= 0}`: every step jumps to 0.
pub fn absorption_kernel() -> FnKernel<impl Fn(f64, f64) -> f64 + Send + Sync> {
    FnKernel::new(
        |x: f64, _u: f64| if x >= 0.0 { 1.0 } else { 0.0 },
        KernelBounds { lipschitz_x: Some(0.0), lipschitz_u: Some(0.0), mixed: Some(0.0), edge: Some(0.0) },
    )
}

/// Largest supported dyadic level.
pub const MAX_LEVEL: u32 = 24;

/// Sorted states `0 = c_1 < … < c_J = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    states: Vec<f64>,
    level: u32,
    uniform: bool,
}

impl Grid {
    /// `c_i = (i − 1)/2^r`, `J = 2^r + 1`.
    pub fn dyadic(r: u32) -> Result<Self> {
        if !(1..=MAX_LEVEL).contains(&r) {
            return Err(Error::InvalidArgument(format!("grid level must lie in 1..={MAX_LEVEL}, got {r}")));
        }
        let n = 1usize << r;
        let states = (0..=n).map(|i| i as f64 / n as f64).collect();
        Ok(Self { states, level: r, uniform: true })
    }

    /// An arbitrary grid; level is reported as 0.
    pub fn from_states(states: Vec<f64>) -> Result<Self> {
        if states.len() < 2 || states[0] != 0.0 || *states.last().unwrap() != 1.0 {
            return Err(Error::InvalidArgument("grid must start at 0 and end at 1".into()));
        }
        if states.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument("grid states must be strictly increasing".into()));
        }
        Ok(Self { states, level: 0, uniform: false })
    }

    pub fn states(&self) -> &[f64] {
        &self.states
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    /// True for dyadic grids, whose states are `k·mesh` exactly.
    pub fn is_uniform(&self) -> bool {
        self.uniform
    }

    /// Largest gap between adjacent states.
    pub fn mesh(&self) -> f64 {
        self.states.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }

    /// `max{j : c_j <= x}` (0-based), `None` for `x < 0`.
    pub fn floor_index(&self, x: f64) -> Option<usize> {
        self.states.partition_point(|&c| c <= x).checked_sub(1)
    }

    /// `min{i : u <= c_i}` (0-based), clamped to the last state for `u > 1`.
    pub fn ceil_index(&self, u: f64) -> usize {
        self.states.partition_point(|&c| c < u).min(self.states.len() - 1)
    }
}

/// Row-stochastic matrix of the truncated chain; row `i` is the source state.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    q: Matrix,
    level: u32,
}

/// Allowed deviation of a row sum of a [`TransitionMatrix`] from one.
pub const ROW_SUM_TOL: f64 = 1e-12;
/// Deviation of `κ̄(1, u)` from one that is repaired rather than rejected.
pub const INTEGRITY_TOL: f64 = 1e-8;

impl TransitionMatrix {
    pub fn new(q: Matrix, level: u32) -> Result<Self> {
        if q.rows() != q.cols() || q.rows() == 0 {
            return Err(Error::InvalidArgument(format!("transition matrix must be square, got {}x{}", q.rows(), q.cols())));
        }
        for i in 0..q.rows() {
            let row = q.row(i);
            if row.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
                return Err(Error::KernelIntegrity { row: i, sum: row.iter().sum() });
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::KernelIntegrity { row: i, sum });
            }
        }
        Ok(Self { q, level })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(Matrix::from_rows(rows)?, 0)
    }

    pub fn len(&self) -> usize {
        self.q.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.q.rows() == 0
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn matrix(&self) -> &Matrix {
        &self.q
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.q[(i, j)]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.q.row(i)
    }

    /// Partial sums `Σ_{s<=j} q_is` of row `i`.
    pub fn cumulative_row(&self, i: usize) -> Vec<f64> {
        let mut acc = 0.0;
        self.q
            .row(i)
            .iter()
            .map(|v| {
                acc += v;
                acc
            })
            .collect()
    }

    /// One CSV row per source state, no header.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        for i in 0..self.len() {
            let line: Vec<String> = self.q.row(i).iter().map(|v| format!("{v:.16e}")).collect();
            writeln!(out, "{}", line.join(","))?;
        }
        Ok(())
    }
}

/// `q_ij = κ̄(c_j, c_i) − κ̄(c_{j−1}, c_i)` with `κ̄(c_0, ·) = 0`.
pub fn truncate_kernel<K: TransitionKernel + ?Sized>(k: &K, grid: &Grid) -> Result<TransitionMatrix> {
    let cum = k.tabulate(grid);
    let n = grid.len();
    let mut q = Matrix::zeros(n, n);
    for i in 0..n {
        let row = cum.row(i);
        let top = row[n - 1];
        if (top - 1.0).abs() > INTEGRITY_TOL || row.iter().any(|v| !v.is_finite()) {
            return Err(Error::KernelIntegrity { row: i, sum: top });
        }
        let out = q.row_mut(i);
        let mut prev = 0.0;
        for j in 0..n {
            let cur = if j == n - 1 { 1.0 } else { row[j] };
            let inc = cur - prev;
            if inc < -1e-12 {
                return Err(Error::KernelIntegrity { row: i, sum: top });
            }
            out[j] = inc.max(0.0);
            prev = cur;
        }
    }
    TransitionMatrix::new(q, grid.level())
}

/// `κ̄⁽ʳ⁾(x, u) = Σ_{j: c_j <= x} q_{i(u) j}`.
pub fn approx_kernel_eval(q: &TransitionMatrix, grid: &Grid, x: f64, u: f64) -> f64 {
    match grid.floor_index(x) {
        None => 0.0,
        Some(j) => {
            let i = grid.ceil_index(u);
            q.row(i)[..=j].iter().sum()
        }
    }
}

/// The kernel `κ̄⁽ʳ⁾` induced by a truncated chain.
pub struct ApproxKernel {
    grid: Grid,
    cumulative: Matrix,
}

impl ApproxKernel {
    pub fn new(q: &TransitionMatrix, grid: &Grid) -> Result<Self> {
        if q.len() != grid.len() {
            return Err(Error::InvalidArgument(format!("{} states but a {}-state matrix", grid.len(), q.len())));
        }
        let rows: Vec<f64> = (0..q.len()).flat_map(|i| q.cumulative_row(i)).collect();
        Ok(Self { grid: grid.clone(), cumulative: Matrix::from_vec(q.len(), q.len(), rows)? })
    }
}

impl TransitionKernel for ApproxKernel {
    fn cdf(&self, x: f64, u: f64) -> f64 {
        match self.grid.floor_index(x) {
            None => 0.0,
            Some(j) => self.cumulative[(self.grid.ceil_index(u), j)],
        }
    }

    fn mixture_cdf(&self, atoms: &[(f64, f64)], xs: &[f64]) -> Vec<f64> {
        let mut weights = vec![0.0; self.grid.len()];
        for &(u, w) in atoms {
            weights[self.grid.ceil_index(u)] += w;
        }
        let mixed = self.cumulative.vec_mul(&weights);
        xs.iter().map(|&x| self.grid.floor_index(x).map_or(0.0, |j| mixed[j])).collect()
    }
}

/// How to obtain `e₁ = sup |κ̄ − κ̄⁽ʳ⁾|`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum E1Mode {
    /// Lipschitz bound; a valid certificate.
    Analytic,
    /// Maximum over the `(m+1)²` points `(a/m, b/m)`; a lower estimate only.
    Empirical(usize),
}

pub fn e1_factor<K: TransitionKernel + ?Sized>(k: &K, q: &TransitionMatrix, grid: &Grid, mode: E1Mode) -> Result<f64> {
    match mode {
        E1Mode::Analytic => {
            let b = k.bounds();
            match (b.lipschitz_x, b.lipschitz_u) {
                (Some(lx), Some(lu)) => Ok((lx + lu) * grid.mesh()),
                _ => Err(Error::Capability("analytic e1 needs both Lipschitz bounds".into())),
            }
        }
        E1Mode::Empirical(m) => {
            if m == 0 {
                return Err(Error::InvalidArgument("empirical e1 needs a positive sample size".into()));
            }
            let pts: Vec<f64> = (0..=m).map(|a| a as f64 / m as f64).collect();
            let exact = k.tabulate_on(&pts, &pts);
            let approx = ApproxKernel::new(q, grid)?;
            let worst = (0..=m)
                .into_par_iter()
                .map(|b| {
                    let row = exact.row(b);
                    pts.iter().zip(row).map(|(&x, &v)| (v - approx.cdf(x, pts[b])).abs()).fold(0.0, f64::max)
                })
                .reduce(|| 0.0, f64::max);
            Ok(worst)
        }
    }
}

/// Balance residue of a proxy law on an evaluation grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidueReport {
    pub grid_points: usize,
    pub l_inf: f64,
    pub l_1: f64,
}

impl ResidueReport {
    pub const CSV_HEADER: &'static str = "grid_points,l_inf,l_1";

    pub fn csv_row(&self) -> String {
        format!("{},{:.16e},{:.16e}", self.grid_points, self.l_inf, self.l_1)
    }
}

/// Default number of evaluation intervals for residues.
pub const DEFAULT_RESIDUE_GRID: usize = 100_000;

/// `|F(x) − Σᵢ πᵢ κ̄(x, cᵢ)|` at `x = k/n`, `k = 0..=n`.
pub fn balance_residue<K: TransitionKernel + ?Sized>(
    k: &K,
    proxy: &DiscreteDistribution,
    eval_grid_size: usize,
) -> Result<ResidueReport> {
    if eval_grid_size == 0 {
        return Err(Error::InvalidArgument("residue grid needs at least one interval".into()));
    }
    let n = eval_grid_size;
    let xs: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
    let atoms: Vec<(f64, f64)> = proxy.atoms().collect();
    let mixed = k.mixture_cdf(&atoms, &xs);
    let own = proxy.cdf_sorted(&xs);
    let mut l_inf = 0.0f64;
    let mut total = 0.0;
    for (a, b) in own.iter().zip(&mixed) {
        let r = (a - b).abs();
        l_inf = l_inf.max(r);
        total += r;
    }
    Ok(ResidueReport { grid_points: n + 1, l_inf, l_1: total / (n + 1) as f64 })
}

/// Finite-difference estimates of kernel derivative maxima.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionEstimates {
    /// `sup |∂κ̄/∂u|`
    pub du: f64,
    /// `sup |∂²κ̄/∂x∂u|`
    pub dxdu: f64,
    /// `sup |dκ̄(x, 1)/dx|`
    pub edge: f64,
}

/// Step of the difference quotients.
pub const FD_STEP: f64 = 1e-5;

fn stencil(t: f64) -> (f64, f64) {
    ((t - FD_STEP).max(0.0), (t + FD_STEP).min(1.0))
}

/// Central differences on the `(m+1)²` sample `(a/m, b/m)`, one-sided at the
/// edges of `[0, 1]`.
pub fn estimate_condition_bounds<K: TransitionKernel + ?Sized>(k: &K, sample_grid: usize) -> ConditionEstimates {
    let m = sample_grid.max(1);
    let pts: Vec<f64> = (0..=m).map(|a| a as f64 / m as f64).collect();
    let (du, dxdu) = pts
        .par_iter()
        .map(|&u| {
            let (u0, u1) = stencil(u);
            let mut du = 0.0f64;
            let mut dxdu = 0.0f64;
            for &x in &pts {
                let (x0, x1) = stencil(x);
                du = du.max(((k.cdf(x, u1) - k.cdf(x, u0)) / (u1 - u0)).abs());
                let cross = k.cdf(x1, u1) - k.cdf(x1, u0) - k.cdf(x0, u1) + k.cdf(x0, u0);
                dxdu = dxdu.max((cross / ((x1 - x0) * (u1 - u0))).abs());
            }
            (du, dxdu)
        })
        .reduce(|| (0.0, 0.0), |a, b| (a.0.max(b.0), a.1.max(b.1)));
    let edge = pts
        .iter()
        .map(|&x| {
            let (x0, x1) = stencil(x);
            ((k.cdf(x1, 1.0) - k.cdf(x0, 1.0)) / (x1 - x0)).abs()
        })
        .fold(0.0, f64::max);
    ConditionEstimates { du, dxdu, edge }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dyadic_grids() {
        assert_eq!(Grid::dyadic(1).unwrap().states(), &[0.0, 0.5, 1.0]);
        assert_eq!(Grid::dyadic(2).unwrap().states(), &[0.0, 0.25, 0.5, 0.75, 1.0]);
        let g = Grid::dyadic(3).unwrap();
        assert_eq!(g.len(), 9);
        assert_eq!(g.mesh(), 0.125);
        assert!(Grid::dyadic(0).is_err());
        assert!(Grid::dyadic(25).is_err());
        assert!(Grid::from_states(vec![0.0, 0.5, 0.5, 1.0]).is_err());
        assert!(Grid::from_states(vec![0.1, 1.0]).is_err());
    }

    #[test]
    fn index_conventions() {
        let g = Grid::dyadic(2).unwrap();
        assert_eq!(g.floor_index(-0.1), None);
        assert_eq!(g.floor_index(0.0), Some(0));
        assert_eq!(g.floor_index(0.3), Some(1));
        assert_eq!(g.floor_index(1.0), Some(4));
        assert_eq!(g.ceil_index(0.0), 0);
        assert_eq!(g.ceil_index(0.01), 1);
        assert_eq!(g.ceil_index(0.25), 1);
        assert_eq!(g.ceil_index(1.0), 4);
    }

    #[test]
    fn regeneration_truncation() {
        let g = Grid::dyadic(3).unwrap();
        let q = truncate_kernel(&regeneration_kernel(|x: f64| x.clamp(0.0, 1.0), 1.0), &g).unwrap();
        for i in 0..g.len() {
            assert_eq!(q.get(i, 0), 0.0);
            for j in 1..g.len() {
                assert!((q.get(i, j) - 0.125).abs() < 1e-15);
            }
        }
        // induced kernel is the floor of x onto the grid
        for &(x, u) in &[(0.3, 0.7), (0.999, 0.0), (0.125, 0.5)] {
            let want = g.states()[g.floor_index(x).unwrap()];
            assert!((approx_kernel_eval(&q, &g, x, u) - want).abs() < 1e-15);
        }
    }

    #[test]
    fn absorption_truncation() {
        let g = Grid::dyadic(2).unwrap();
        let q = truncate_kernel(&absorption_kernel(), &g).unwrap();
        for i in 0..g.len() {
            assert_eq!(q.get(i, 0), 1.0);
            assert_eq!(q.row(i)[1..].iter().sum::<f64>(), 0.0);
        }
    }

    #[test]
    fn broken_kernel_rejected() {
        let g = Grid::dyadic(2).unwrap();
        let k = FnKernel::new(|x: f64, _u: f64| 0.9 * x, KernelBounds::default());
        assert!(matches!(truncate_kernel(&k, &g), Err(Error::KernelIntegrity { .. })));
    }

    #[test]
    fn approx_kernel_matches_at_states() {
        let g = Grid::dyadic(3).unwrap();
        let k = FnKernel::new(|x: f64, u: f64| x.clamp(0.0, 1.0).powf(1.0 + u), KernelBounds::default());
        let q = truncate_kernel(&k, &g).unwrap();
        let ak = ApproxKernel::new(&q, &g).unwrap();
        for &u in g.states() {
            for &x in g.states() {
                assert!((approx_kernel_eval(&q, &g, x, u) - k.cdf(x, u)).abs() < 1e-12);
                assert!((ak.cdf(x, u) - k.cdf(x, u)).abs() < 1e-12);
            }
            assert!((approx_kernel_eval(&q, &g, 1.0, u) - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn e1_examples() {
        let g = Grid::dyadic(3).unwrap();
        let k = FnKernel::new(
            |x: f64, _u: f64| x.clamp(0.0, 1.0),
            KernelBounds { lipschitz_x: Some(1.0), lipschitz_u: Some(0.0), ..Default::default() },
        );
        let q = truncate_kernel(&k, &g).unwrap();
        assert_eq!(e1_factor(&k, &q, &g, E1Mode::Analytic).unwrap(), 0.125);
        assert!(e1_factor(&k, &q, &g, E1Mode::Empirical(8)).unwrap() < 1e-15);
        let emp = e1_factor(&k, &q, &g, E1Mode::Empirical(1000)).unwrap();
        assert!(emp <= 0.125 && emp > 0.12);
        let bare = FnKernel::new(|x: f64, _u: f64| x, KernelBounds::default());
        assert!(matches!(e1_factor(&bare, &q, &g, E1Mode::Analytic), Err(Error::Capability(_))));
    }

    #[test]
    fn condition_estimates_for_simple_kernels() {
        let lin = FnKernel::new(|x: f64, _u: f64| x, KernelBounds::default());
        let est = estimate_condition_bounds(&lin, 50);
        assert!(est.du < 1e-9 && est.dxdu < 1e-6);
        assert!((est.edge - 1.0).abs() < 1e-9);
        let prod = FnKernel::new(|x: f64, u: f64| x * u, KernelBounds::default());
        let est = estimate_condition_bounds(&prod, 50);
        assert!((est.du - 1.0).abs() < 1e-9);
        assert!((est.dxdu - 1.0).abs() < 1e-4);
    }

    #[test]
    fn residue_of_exact_balance_is_zero() {
        let g = Grid::dyadic(3).unwrap();
        let k = regeneration_kernel(|x: f64| x.clamp(0.0, 1.0), 1.0);
        let q = truncate_kernel(&k, &g).unwrap();
        let p = DiscreteDistribution::new(g.states().iter().map(|&c| (c, if c == 0.0 { 0.0 } else { 0.125 })).collect())
            .unwrap();
        let rep = balance_residue(&ApproxKernel::new(&q, &g).unwrap(), &p, 1000).unwrap();
        assert!(rep.l_inf < 1e-12);
        assert_eq!(rep.grid_points, 1001);
        let rep = balance_residue(&k, &p, 1000).unwrap();
        assert!(rep.l_inf <= 0.125 + 1e-12 && rep.l_1 <= rep.l_inf);
    }
}
