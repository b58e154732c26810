//! Single-server queue with general arrivals, service and patience, seen
//! through its virtual waiting time (VWT) chain on `[0, 1]`.

use std::fmt;
use std::path::Path;
use std::sync::OnceLock;

use rand::Rng;
use rayon::prelude::*;

use crate::config::{parse_key_values, parse_value, reject_unknown};
use crate::error::{Error, Result};
use crate::kernel::{Grid, KernelBounds, TransitionKernel};
use crate::measure::{DiscreteDistribution, PerformanceFunctional};
use crate::numerics::{bisect, Family, Matrix, ParametricCdf, QuadratureRule};

/// Tolerance of the inverse-CDF sampler.
pub const SAMPLING_TOL: f64 = 1e-12;

/// Arrival `A(x) = A₀(λx)`, service `B(x) = B₀(μx/2)`, patience `G(x) = G₀(2x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QueueModel {
    lambda: f64,
    mu: f64,
    arrival: ParametricCdf,
    service: ParametricCdf,
    patience: ParametricCdf,
    rule: QuadratureRule,
}

pub const CONFIG_KEYS: [&str; 7] =
    ["lambda", "mu", "arrival_family", "service_family", "patience_family", "quadrature_panels", "quadrature_points"];

impl QueueModel {
    pub fn new(
        lambda: f64,
        mu: f64,
        arrival: Family,
        service: Family,
        patience: Family,
        rule: QuadratureRule,
    ) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite() && mu > 0.0 && mu.is_finite()) {
            return Err(Error::Config(format!("rates must be positive, got lambda = {lambda}, mu = {mu}")));
        }
        let arrival = ParametricCdf::new(arrival, lambda)?;
        if (arrival.mean() * lambda - 1.0).abs() > 1e-6 {
            return Err(Error::Config(format!(
                "arrival family {} has mean {} instead of 1/lambda",
                arrival.family(),
                arrival.mean()
            )));
        }
        let service = ParametricCdf::new(service, mu / 2.0)?;
        let patience = ParametricCdf::new(patience, 2.0)?;
        let (s_bar, y_bar) = (service.support_end(), patience.support_end());
        if !(s_bar + y_bar <= 1.0 + 1e-12) {
            return Err(Error::Support(s_bar + y_bar));
        }
        Ok(Self { lambda, mu, arrival, service, patience, rule })
    }

    /// Erlang(2,2) arrivals, Beta(2,2) service, Beta(3,4) patience.
    pub fn standard(lambda: f64, mu: f64) -> Result<Self> {
        Self::new(lambda, mu, Family::Erlang22, Family::Beta22, Family::Beta34, QuadratureRule::default_rule())
    }

    /// `(λ, μ) = (4.1, 4)`.
    pub fn model_a() -> Self {
        Self::standard(4.1, 4.0).expect("preset is valid")
    }

    /// `(λ, μ) = (5, 4)`.
    pub fn model_b() -> Self {
        Self::standard(5.0, 4.0).expect("preset is valid")
    }

    /// `"a"` or `"b"`.
    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "a" => Ok(Self::model_a()),
            "b" => Ok(Self::model_b()),
            other => Err(Error::Config(format!("unknown preset model `{other}`"))),
        }
    }

    /// Parses a `key = value` configuration; `lambda` and `mu` are required.
    pub fn from_config_str(text: &str) -> Result<Self> {
        let map = parse_key_values(text)?;
        reject_unknown(&map, &CONFIG_KEYS)?;
        let need = |k: &str| map.get(k).ok_or_else(|| Error::Config(format!("missing key `{k}`")));
        let lambda: f64 = parse_value("lambda", need("lambda")?)?;
        let mu: f64 = parse_value("mu", need("mu")?)?;
        let family = |k: &str, default: Family| -> Result<Family> {
            map.get(k).map_or(Ok(default), |v| parse_value(k, v))
        };
        let panels: usize = map.get("quadrature_panels").map_or(Ok(16), |v| parse_value("quadrature_panels", v))?;
        let points: usize = map.get("quadrature_points").map_or(Ok(8), |v| parse_value("quadrature_points", v))?;
        Self::new(
            lambda,
            mu,
            family("arrival_family", Family::Erlang22)?,
            family("service_family", Family::Beta22)?,
            family("patience_family", Family::Beta34)?,
            QuadratureRule::gauss_legendre(panels, points)?,
        )
    }

    pub fn from_config_file(path: &Path) -> Result<Self> {
        Self::from_config_str(&std::fs::read_to_string(path)?)
    }

    /// Canonical configuration text; parsing it gives back the same model.
    pub fn to_config_string(&self) -> String {
        format!(
            "lambda = {}\nmu = {}\narrival_family = {}\nservice_family = {}\npatience_family = {}\nquadrature_panels = {}\nquadrature_points = {}\n",
            self.lambda,
            self.mu,
            self.arrival.family(),
            self.service.family(),
            self.patience.family(),
            self.rule.panels(),
            self.rule.points()
        )
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn arrival(&self) -> &ParametricCdf {
        &self.arrival
    }

    pub fn service(&self) -> &ParametricCdf {
        &self.service
    }

    pub fn patience(&self) -> &ParametricCdf {
        &self.patience
    }

    pub fn rule(&self) -> &QuadratureRule {
        &self.rule
    }

    pub fn s_bar(&self) -> f64 {
        self.service.support_end()
    }

    pub fn y_bar(&self) -> f64 {
        self.patience.support_end()
    }

    /// The same model with another quadrature rule.
    pub fn with_rule(&self, rule: QuadratureRule) -> Self {
        Self { rule, ..self.clone() }
    }

    /// `A*(z) = 1 − A(z−)`: probability that the next inter-arrival time is at least `z`.
    pub fn a_star(&self, z: f64) -> f64 {
        self.arrival.survival_left(z)
    }

    /// `D(z) = ∫ A*(s − z) dB(s)` by quadrature split at `s = z` and at the
    /// density breakpoints; service atoms are added exactly.
    pub fn d(&self, z: f64) -> f64 {
        self.d_with(z, &self.rule)
    }

    fn d_with(&self, z: f64, rule: &QuadratureRule) -> f64 {
        let s_bar = self.s_bar();
        if z >= s_bar {
            return 1.0;
        }
        let atoms: f64 = self.service.atoms().iter().map(|&(s, m)| m * self.a_star(s - z)).sum();
        rule.integrate_split(0.0, s_bar, &self.breaks(z), |s| self.a_star(s - z) * self.service.pdf(s)) + atoms
    }

    fn breaks(&self, z: f64) -> Vec<f64> {
        let mut b = self.service.breakpoints();
        b.extend(self.arrival.breakpoints().into_iter().map(|a| a + z));
        b
    }

    /// `h(x) = ∫₀ˣ Ḡ(y) dy`, which equals `E[min(y, x)]`.
    pub fn h(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        let top = x.min(self.y_bar());
        let tail = (x - top).max(0.0) * self.patience.survival(top);
        self.rule.integrate_split(0.0, top, &self.patience.breakpoints(), |y| self.patience.survival(y)) + tail
    }

    /// One inter-arrival, service and patience draw by inverse-CDF sampling.
    pub fn draw<R1: Rng, R2: Rng, R3: Rng>(&self, rt: &mut R1, rs: &mut R2, ry: &mut R3) -> Result<Draws> {
        Ok(Draws {
            t: self.arrival.quantile(rt.gen::<f64>(), SAMPLING_TOL)?,
            s: self.service.quantile(rs.gen::<f64>(), SAMPLING_TOL)?,
            y: self.patience.quantile(ry.gen::<f64>(), SAMPLING_TOL)?,
        })
    }
}

impl fmt::Display for QueueModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "G/G/1+G(lambda={}, mu={}, A={}, B={}, G={})",
            self.lambda,
            self.mu,
            self.arrival.family(),
            self.service.family(),
            self.patience.family()
        )
    }
}

/// One draw of inter-arrival time `t`, service `s` and patience `y`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Draws {
    pub t: f64,
    pub s: f64,
    pub y: f64,
}

/// `w' = [w + s − t]₊` if the customer waits (`y > w`), else `[w − t]₊`.
pub fn vwt_step(w: f64, d: Draws) -> f64 {
    if d.y > w {
        (w + d.s - d.t).max(0.0)
    } else {
        (w - d.t).max(0.0)
    }
}

/// Step of the cached `D` table on `[−1, 1]`.
const TABLE_LEVEL: u32 = 14;

/// `κ̄(x, u) = Ḡ(u) D(x − u) + G(u) A*(u − x)` for `x >= 0`.
pub struct VwtKernel {
    model: QueueModel,
    bounds: KernelBounds,
    table: OnceLock<Vec<f64>>,
}

pub fn vwt_kernel(model: &QueueModel) -> VwtKernel {
    let smooth = model.arrival.atoms().is_empty() && model.patience.atoms().is_empty();
    let bounds = if smooth {
        let a1 = model.arrival.max_pdf();
        let g1 = model.patience.max_pdf();
        let a2 = model.arrival.max_abs_pdf_derivative().ok();
        KernelBounds {
            lipschitz_x: Some(a1),
            lipschitz_u: Some(g1 + a1),
            mixed: a2.map(|a2| 2.0 * g1 * a1 + a2),
            edge: Some(a1),
        }
    } else {
        KernelBounds::default()
    };
    VwtKernel { model: model.clone(), bounds, table: OnceLock::new() }
}

impl VwtKernel {
    pub fn model(&self) -> &QueueModel {
        &self.model
    }

    /// `∫ [Ḡ(u) A*(u − x + s) + G(u) A*(u − x)] dB(s)` with the given rule.
    pub fn cdf_integrated(&self, x: f64, u: f64, rule: &QuadratureRule) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        let m = &self.model;
        let (gs, gc) = (m.patience.survival(u), m.patience.cdf(u));
        let z = x - u;
        let integrand = |s: f64| gs * m.a_star(s - z) + gc * m.a_star(-z);
        let atoms: f64 = m.service.atoms().iter().map(|&(s, w)| w * integrand(s)).sum();
        rule.integrate_split(0.0, m.s_bar(), &m.breaks(z), |s| integrand(s) * m.service.pdf(s)) + atoms
    }

    /// Interpolation is only used when `D` is smooth: arrivals without atoms.
    fn table(&self) -> Option<&[f64]> {
        if *self.model.arrival.family() != Family::Erlang22 || !self.model.service.atoms().is_empty() {
            return None;
        }
        Some(self.table.get_or_init(|| {
            let n = 1usize << TABLE_LEVEL;
            (0..=2 * n).into_par_iter().map(|k| self.model.d(k as f64 / n as f64 - 1.0)).collect()
        }))
    }

    /// `D(z)` by cubic interpolation in the cached table (exact off-table).
    pub fn d_fast(&self, z: f64) -> f64 {
        match self.table() {
            Some(t) => interpolate(t, z, self.model.s_bar()),
            None => self.model.d(z),
        }
    }
}

fn interpolate(t: &[f64], z: f64, s_bar: f64) -> f64 {
    if z >= s_bar {
        return 1.0;
    }
    let n = (1usize << TABLE_LEVEL) as f64;
    let pos = (z + 1.0) * n;
    if pos < 0.0 {
        return t[0];
    }
    let k = (pos.floor() as usize).clamp(1, t.len() - 3);
    let f = pos - k as f64;
    if f == 0.0 {
        return t[k];
    }
    // four-point Lagrange on nodes k-1, k, k+1, k+2
    let (a, b, c, d) = (t[k - 1], t[k], t[k + 1], t[k + 2]);
    let (fm, f1, f2) = (f + 1.0, f - 1.0, f - 2.0);
    -a * f * f1 * f2 / 6.0 + b * fm * f1 * f2 / 2.0 - c * fm * f * f2 / 2.0 + d * fm * f * f1 / 6.0
}

impl TransitionKernel for VwtKernel {
    fn cdf(&self, x: f64, u: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        let m = &self.model;
        m.patience.survival(u) * m.d(x - u) + m.patience.cdf(u) * m.a_star(u - x)
    }

    fn bounds(&self) -> KernelBounds {
        self.bounds
    }

    /// On a dyadic grid `x − u` runs over `2J − 1` lattice values, so `D` is
    /// evaluated once per difference.
    fn tabulate(&self, grid: &Grid) -> Matrix {
        if !grid.is_uniform() {
            return self.tabulate_on(grid.states(), grid.states());
        }
        let m = &self.model;
        let n = grid.len() - 1;
        let d: Vec<f64> = (0..=2 * n).into_par_iter().map(|k| m.d((k as f64 - n as f64) / n as f64)).collect();
        let c = grid.states();
        let data: Vec<f64> = (0..=n)
            .into_par_iter()
            .flat_map_iter(|i| {
                let (gs, gc) = (m.patience.survival(c[i]), m.patience.cdf(c[i]));
                let d = &d;
                (0..=n).map(move |j| gs * d[j + n - i] + gc * m.a_star(c[i] - c[j]))
            })
            .collect();
        Matrix::from_vec(n + 1, n + 1, data).expect("square by construction")
    }

    fn tabulate_on(&self, xs: &[f64], us: &[f64]) -> Matrix {
        let m = &self.model;
        let data: Vec<f64> = us
            .par_iter()
            .flat_map_iter(|&u| {
                let (gs, gc) = (m.patience.survival(u), m.patience.cdf(u));
                xs.iter().map(move |&x| if x < 0.0 { 0.0 } else { gs * self.d_fast(x - u) + gc * m.a_star(u - x) })
            })
            .collect();
        Matrix::from_vec(us.len(), xs.len(), data).expect("dimensions match by construction")
    }

    fn mixture_cdf(&self, atoms: &[(f64, f64)], xs: &[f64]) -> Vec<f64> {
        let m = &self.model;
        let pre: Vec<(f64, f64, f64)> =
            atoms.iter().map(|&(u, w)| (u, w * m.patience.survival(u), w * m.patience.cdf(u))).collect();
        xs.par_iter()
            .map(|&x| {
                if x < 0.0 {
                    return 0.0;
                }
                pre.iter()
                    .map(|&(u, ws, wc)| {
                        let stay = if ws == 0.0 { 0.0 } else { ws * self.d_fast(x - u) };
                        let leave = if u <= x { wc } else { wc * m.a_star(u - x) };
                        stay + leave
                    })
                    .sum()
            })
            .collect()
    }
}

/// `φ₁ = 1{x = 0}`, `φ₂ = G`, `φ₃ = λh`.
pub fn functionals(m: &QueueModel) -> [PerformanceFunctional; 3] {
    let no_wait = PerformanceFunctional::new("no_wait", |x| if x <= 0.0 { 1.0 } else { 0.0 }, 1.0, false)
        .expect("valid functional");
    let g = m.patience.clone();
    let v2 = g.cdf(1.0) - g.cdf_left(0.0);
    let continuous = g.atoms().is_empty();
    let abandon = PerformanceFunctional::new("abandonment", move |x| g.cdf(x), v2, continuous).expect("valid functional");
    let model = m.clone();
    let lambda = m.lambda;
    let queue = PerformanceFunctional::new("queue_length", move |x| lambda * model.h(x), lambda * m.h(1.0), true)
        .expect("valid functional");
    [no_wait, abandon, queue]
}

/// Point mass at `G⁻¹(1 − μ/λ)`; only defined when `λ > μ`.
pub fn fluid_approximation(m: &QueueModel) -> Result<(f64, DiscreteDistribution)> {
    if m.lambda <= m.mu {
        return Err(Error::Regime { lambda: m.lambda, mu: m.mu });
    }
    let level = 1.0 - m.mu / m.lambda;
    let w = bisect(|x| m.patience.cdf(x), level, 0.0, m.y_bar(), 1e-14)?;
    Ok((w, DiscreteDistribution::point_mass(w)?))
}

/// Tolerance of [`quadrature_self_check`].
pub const SELF_CHECK_TOL: f64 = 1e-10;

/// Largest change of `κ̄` on a `41 × 41` sample when the quadrature panels
/// are doubled.
pub fn quadrature_self_check(m: &QueueModel) -> f64 {
    let coarse = vwt_kernel(m);
    let fine = vwt_kernel(&m.with_rule(m.rule.refined()));
    let pts: Vec<f64> = (0..=40).map(|i| i as f64 / 40.0).collect();
    let mut worst = 0.0f64;
    for &u in &pts {
        for &x in &pts {
            worst = worst.max((coarse.cdf(x, u) - fine.cdf(x, u)).abs());
        }
    }
    worst
}
