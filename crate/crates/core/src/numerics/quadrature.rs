//! Composite Gauss–Legendre quadrature on the unit interval.

use crate::error::{Error, Result};

/// Smallest and largest supported number of Gauss points per panel.
pub const MIN_POINTS: usize = 2;
pub const MAX_POINTS: usize = 16;

/// A composite rule on `[0, 1]`: `panels` equal sub-intervals, each carrying
/// an `points`-point Gauss–Legendre rule.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    panels: usize,
    points: usize,
}

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`,
/// by Newton iteration on the Legendre recurrence.
fn legendre_rule(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = (n + 1) / 2;
    for i in 0..m {
        // Tricomi's initial guess
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

impl QuadratureRule {
    /// Composite rule with `panels` panels of `points` Gauss points each.
    pub fn gauss_legendre(panels: usize, points: usize) -> Result<Self> {
        if panels == 0 {
            return Err(Error::InvalidArgument("quadrature needs at least one panel".into()));
        }
        if !(MIN_POINTS..=MAX_POINTS).contains(&points) {
            return Err(Error::InvalidArgument(format!(
                "points per panel must lie in {MIN_POINTS}..={MAX_POINTS}, got {points}"
            )));
        }
        let (ref_nodes, ref_weights) = legendre_rule(points);
        let h = 1.0 / panels as f64;
        let mut nodes = Vec::with_capacity(panels * points);
        let mut weights = Vec::with_capacity(panels * points);
        for p in 0..panels {
            let left = p as f64 * h;
            for (x, w) in ref_nodes.iter().zip(&ref_weights) {
                nodes.push(left + 0.5 * h * (x + 1.0));
                weights.push(0.5 * h * w);
            }
        }
        Ok(Self { nodes, weights, panels, points })
    }

    /// Default rule used by the queue model: 16 panels × 8 points.
    pub fn default_rule() -> Self {
        Self::gauss_legendre(16, 8).expect("default rule parameters are valid")
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn panels(&self) -> usize {
        self.panels
    }

    pub fn points(&self) -> usize {
        self.points
    }

    /// The same rule with twice as many panels.
    pub fn refined(&self) -> Self {
        Self::gauss_legendre(self.panels * 2, self.points).expect("refining a valid rule")
    }

    /// `∫_0^1 f`.
    pub fn integrate_unit<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }

    /// `∫_a^b f` by mapping the unit rule affinely onto `[a, b]`.
    pub fn integrate<F: Fn(f64) -> f64>(&self, a: f64, b: f64, f: F) -> f64 {
        if b <= a {
            return 0.0;
        }
        let len = b - a;
        len * self.integrate_unit(|t| f(a + len * t))
    }

    /// `∫ f` over `[a, b]`, split at every interior breakpoint so the
    /// integrand only needs to be smooth between consecutive breakpoints.
    pub fn integrate_split<F: Fn(f64) -> f64>(&self, a: f64, b: f64, breaks: &[f64], f: F) -> f64 {
        let mut cuts: Vec<f64> = breaks.iter().copied().filter(|&c| c > a && c < b).collect();
        cuts.sort_by(f64::total_cmp);
        let mut total = 0.0;
        let mut left = a;
        for c in cuts.into_iter().chain(std::iter::once(b)) {
            if c > left {
                total += self.integrate(left, c, &f);
                left = c;
            }
        }
        total
    }
}
