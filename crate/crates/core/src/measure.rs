//! Distribution functions on `[0, 1]` as values: discrete laws, sup-norm
//! distance, performance functionals and their expectations.

use std::fmt;
use std::io::{BufRead, Write};
use std::sync::Arc;

use crate::error::{Error, Result};

/// Atoms closer than this are merged at construction.
pub const MERGE_TOL: f64 = 1e-14;
/// Allowed deviation of the total mass from one.
pub const MASS_TOL: f64 = 1e-12;

/// A probability law with finitely many atoms in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDistribution {
    locations: Vec<f64>,
    masses: Vec<f64>,
    cumulative: Vec<f64>,
}

impl DiscreteDistribution {
    /// Builds a distribution from `(location, mass)` pairs in any order.
    pub fn new(atoms: Vec<(f64, f64)>) -> Result<Self> {
        let total = check_atoms(&atoms)?;
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::Domain(format!("masses sum to {total}, expected 1")));
        }
        Ok(Self::assemble(atoms))
    }

    /// Like [`new`](Self::new) but rescales nonnegative weights to total mass one.
    pub fn from_weights(atoms: Vec<(f64, f64)>) -> Result<Self> {
        let total = check_atoms(&atoms)?;
        if total <= 0.0 {
            return Err(Error::Domain("weights have zero total".into()));
        }
        Ok(Self::assemble(atoms.into_iter().map(|(x, w)| (x, w / total)).collect()))
    }

    pub fn point_mass(x: f64) -> Result<Self> {
        Self::new(vec![(x, 1.0)])
    }

    /// Equal mass on each sample; repeated values accumulate.
    pub fn empirical(samples: &[f64]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Domain("empirical law of an empty sample".into()));
        }
        let w = 1.0 / samples.len() as f64;
        Self::from_weights(samples.iter().map(|&x| (x, w)).collect())
    }

    fn assemble(mut atoms: Vec<(f64, f64)>) -> Self {
        atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut locations: Vec<f64> = Vec::with_capacity(atoms.len());
        let mut masses: Vec<f64> = Vec::with_capacity(atoms.len());
        for (x, m) in atoms {
            match locations.last() {
                Some(&last) if x - last < MERGE_TOL => *masses.last_mut().unwrap() += m,
                _ => {
                    locations.push(x);
                    masses.push(m);
                }
            }
        }
        let mut acc = 0.0;
        let cumulative = masses
            .iter()
            .map(|m| {
                acc += m;
                acc
            })
            .collect();
        Self { locations, masses, cumulative }
    }

    pub fn len(&self) -> usize {
        self.locations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.locations.is_empty()
    }

    pub fn locations(&self) -> &[f64] {
        &self.locations
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn atoms(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.locations.iter().copied().zip(self.masses.iter().copied())
    }

    /// `F(x) = Σ_{cᵢ ≤ x} πᵢ`.
    pub fn cdf(&self, x: f64) -> f64 {
        let n = self.locations.partition_point(|&c| c <= x);
        if n == 0 {
            0.0
        } else {
            self.cumulative[n - 1]
        }
    }

    /// `F(x−) = Σ_{cᵢ < x} πᵢ`.
    pub fn cdf_left(&self, x: f64) -> f64 {
        let n = self.locations.partition_point(|&c| c < x);
        if n == 0 {
            0.0
        } else {
            self.cumulative[n - 1]
        }
    }

    /// CDF at every point of a sorted slice, in one sweep.
    pub fn cdf_sorted(&self, xs: &[f64]) -> Vec<f64> {
        let mut k = 0;
        xs.iter()
            .map(|&x| {
                while k < self.locations.len() && self.locations[k] <= x {
                    k += 1;
                }
                if k == 0 {
                    0.0
                } else {
                    self.cumulative[k - 1]
                }
            })
            .collect()
    }

    /// Writes `location,mass` rows with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "location,mass")?;
        for (x, m) in self.atoms() {
            writeln!(out, "{x:.16e},{m:.16e}")?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        match lines.next() {
            Some(Ok(h)) if h.trim() == "location,mass" => {}
            _ => return Err(Error::Config("expected header `location,mass`".into())),
        }
        let mut atoms = Vec::new();
        for (n, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let parse = |s: Option<&str>| -> Result<f64> {
                s.and_then(|v| v.trim().parse().ok())
                    .ok_or_else(|| Error::Config(format!("bad atom on data line {}", n + 1)))
            };
            let mut parts = line.split(',');
            atoms.push((parse(parts.next())?, parse(parts.next())?));
        }
        Self::new(atoms)
    }
}

fn check_atoms(atoms: &[(f64, f64)]) -> Result<f64> {
    if atoms.is_empty() {
        return Err(Error::Domain("a distribution needs at least one atom".into()));
    }
    let mut total = 0.0;
    for &(x, m) in atoms {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::Domain(format!("atom location {x} outside [0, 1]")));
        }
        if !(m >= 0.0 && m.is_finite()) {
            return Err(Error::Domain(format!("atom mass {m} is not a nonnegative number")));
        }
        total += m;
    }
    Ok(total)
}

/// `sup_x |F_p(x) − F_q(x)|`, exact: only atom locations and their left
/// limits can attain it.
pub fn sup_distance(p: &DiscreteDistribution, q: &DiscreteDistribution) -> f64 {
    let (mut i, mut j) = (0, 0);
    let (mut fp, mut fq) = (0.0f64, 0.0f64);
    let mut best = 0.0f64;
    while i < p.len() || j < q.len() {
        let x = match (p.locations.get(i), q.locations.get(j)) {
            (Some(&a), Some(&b)) => a.min(b),
            (Some(&a), None) => a,
            (None, Some(&b)) => b,
            (None, None) => unreachable!(),
        };
        best = best.max((fp - fq).abs());
        if i < p.len() && p.locations[i] == x {
            fp = p.cumulative[i];
            i += 1;
        }
        if j < q.len() && q.locations[j] == x {
            fq = q.cumulative[j];
            j += 1;
        }
        best = best.max((fp - fq).abs());
    }
    best
}

/// `sup_x |F_p(x) − F(x)|` for a nondecreasing `F` with `F(−∞) = 0` and
/// `F(∞) = 1`; `f_left` must return the left limit `F(x−)`.
///
/// Between consecutive atoms `F_p` is constant and `F` is monotone, so the
/// supremum is reached at an atom or approached just before one.
pub fn sup_distance_to_cdf<F, L>(p: &DiscreteDistribution, f: F, f_left: L) -> f64
where
    F: Fn(f64) -> f64,
    L: Fn(f64) -> f64,
{
    let mut below = 0.0;
    let mut best = 0.0f64;
    for (k, &x) in p.locations.iter().enumerate() {
        best = best.max((below - f_left(x)).abs());
        below = p.cumulative[k];
        best = best.max((below - f(x)).abs());
    }
    best
}

/// A performance functional `g` with a declared total variation.
#[derive(Clone)]
pub struct PerformanceFunctional {
    name: String,
    eval: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    variation: f64,
    continuous: bool,
}

impl PerformanceFunctional {
    pub fn new<F>(name: impl Into<String>, eval: F, variation: f64, continuous: bool) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        if !(variation >= 0.0 && variation.is_finite()) {
            return Err(Error::Domain(format!("total variation {variation} must be finite and nonnegative")));
        }
        Ok(Self { name: name.into(), eval: Arc::new(eval), variation, continuous })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn eval(&self, x: f64) -> f64 {
        (self.eval)(x)
    }

    pub fn variation(&self) -> f64 {
        self.variation
    }

    pub fn is_continuous(&self) -> bool {
        self.continuous
    }

    /// Multiplier in the expectation-gap bound: 1 for continuous `g`, else 2.
    pub fn a_factor(&self) -> f64 {
        if self.continuous {
            1.0
        } else {
            2.0
        }
    }
}

impl fmt::Debug for PerformanceFunctional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PerformanceFunctional")
            .field("name", &self.name)
            .field("variation", &self.variation)
            .field("continuous", &self.continuous)
            .finish_non_exhaustive()
    }
}

/// `Σᵢ g(cᵢ) πᵢ`.
pub fn expectation(g: &PerformanceFunctional, p: &DiscreteDistribution) -> f64 {
    p.atoms().map(|(x, m)| g.eval(x) * m).sum()
}

/// Total variation of a function sampled on a sorted grid, plus any jumps
/// that the samples do not see (e.g. isolated point values).
pub fn variation_of_step(grid: &[f64], values: &[f64], jumps: &[f64]) -> Result<f64> {
    if grid.len() != values.len() {
        return Err(Error::InvalidArgument(format!("{} grid points but {} values", grid.len(), values.len())));
    }
    if grid.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidArgument("grid must be sorted".into()));
    }
    let inner: f64 = values.windows(2).map(|w| (w[1] - w[0]).abs()).sum();
    Ok(inner + jumps.iter().map(|j| j.abs()).sum::<f64>())
}
