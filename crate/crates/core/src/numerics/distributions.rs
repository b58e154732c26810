//! Closed-form distribution functions used by the queue model.
//!
//! Every family is described by a base CDF `F0` on `[0, ∞)` and a positive
//! scale, with `F(x) = F0(scale · x)`.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Piecewise-linear CDF through `(x_k, F_k)` knots.
///
/// `F(x) = 0` below the first knot, `F(x_0) = F_0` (an atom when positive),
/// linear between knots and `1` from the last knot on.
#[derive(Debug, Clone, PartialEq)]
pub struct Tabulated {
    xs: Vec<f64>,
    fs: Vec<f64>,
}

impl Tabulated {
    pub fn new(knots: Vec<(f64, f64)>) -> Result<Self> {
        if knots.is_empty() {
            return Err(Error::InvalidArgument("tabulated CDF needs at least one knot".into()));
        }
        let (xs, fs): (Vec<f64>, Vec<f64>) = knots.into_iter().unzip();
        if xs[0] < 0.0 || xs.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidArgument("tabulated knots must be nonnegative and strictly increasing".into()));
        }
        if fs.iter().any(|f| !(0.0..=1.0).contains(f)) || fs.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidArgument("tabulated CDF values must be nondecreasing in [0, 1]".into()));
        }
        if (fs[fs.len() - 1] - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument("tabulated CDF must reach 1 at its last knot".into()));
        }
        Ok(Self { xs, fs })
    }

    pub fn knots(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.xs.iter().copied().zip(self.fs.iter().copied())
    }

    fn segment(&self, x: f64) -> Option<usize> {
        // index k with xs[k] <= x < xs[k+1]
        if x < self.xs[0] || x >= self.xs[self.xs.len() - 1] {
            return None;
        }
        Some(self.xs.partition_point(|&k| k <= x) - 1)
    }

    fn cdf(&self, x: f64) -> f64 {
        if x < self.xs[0] {
            return 0.0;
        }
        match self.segment(x) {
            None => 1.0,
            Some(k) => {
                let t = (x - self.xs[k]) / (self.xs[k + 1] - self.xs[k]);
                self.fs[k] + t * (self.fs[k + 1] - self.fs[k])
            }
        }
    }

    fn cdf_left(&self, x: f64) -> f64 {
        if x <= self.xs[0] {
            0.0
        } else {
            self.cdf(x)
        }
    }

    fn pdf(&self, x: f64) -> f64 {
        match self.segment(x) {
            None => 0.0,
            Some(k) => (self.fs[k + 1] - self.fs[k]) / (self.xs[k + 1] - self.xs[k]),
        }
    }

    fn max_pdf(&self) -> f64 {
        (0..self.xs.len().saturating_sub(1))
            .map(|k| (self.fs[k + 1] - self.fs[k]) / (self.xs[k + 1] - self.xs[k]))
            .fold(0.0, f64::max)
    }

    fn mean(&self) -> f64 {
        // atom at x_0 plus uniform mass on each segment
        let mut m = self.fs[0] * self.xs[0];
        for k in 0..self.xs.len() - 1 {
            m += (self.fs[k + 1] - self.fs[k]) * 0.5 * (self.xs[k] + self.xs[k + 1]);
        }
        m
    }
}

/// Base distribution families.
#[derive(Debug, Clone, PartialEq)]
pub enum Family {
    /// Erlang with shape 2 and rate 2 (mean 1).
    Erlang22,
    /// Beta(2, 2) on `[0, 1]`.
    Beta22,
    /// Beta(3, 4) on `[0, 1]`.
    Beta34,
    Tabulated(Tabulated),
}

impl Family {
    /// Highest derivative of the CDF available in closed form.
    pub fn smoothness(&self) -> usize {
        match self {
            Family::Erlang22 => 2,
            _ => 1,
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::Erlang22 => write!(f, "erlang(2,2)"),
            Family::Beta22 => write!(f, "beta(2,2)"),
            Family::Beta34 => write!(f, "beta(3,4)"),
            Family::Tabulated(t) => {
                let knots: Vec<String> = t.knots().map(|(x, p)| format!("{x}:{p}")).collect();
                write!(f, "tabulated({})", knots.join(";"))
            }
        }
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect::<String>().to_ascii_lowercase();
        match compact.as_str() {
            "erlang(2,2)" | "erlang22" => return Ok(Family::Erlang22),
            "beta(2,2)" | "beta22" => return Ok(Family::Beta22),
            "beta(3,4)" | "beta34" => return Ok(Family::Beta34),
            _ => {}
        }
        if let Some(body) = compact.strip_prefix("tabulated(").and_then(|b| b.strip_suffix(')')) {
            let mut knots = Vec::new();
            for item in body.split(';').filter(|i| !i.is_empty()) {
                let (x, p) = item
                    .split_once(':')
                    .ok_or_else(|| Error::Config(format!("tabulated knot `{item}` is not `x:F`")))?;
                let x: f64 = x.parse().map_err(|_| Error::Config(format!("bad knot location `{x}`")))?;
                let p: f64 = p.parse().map_err(|_| Error::Config(format!("bad knot value `{p}`")))?;
                knots.push((x, p));
            }
            return Ok(Family::Tabulated(Tabulated::new(knots)?));
        }
        Err(Error::Config(format!("unknown distribution family `{s}`")))
    }
}

/// `F(x) = F0(scale · x)` for a base family `F0`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParametricCdf {
    family: Family,
    scale: f64,
}

fn erlang22_cdf(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        // 1 - e^{-2x}(1 + 2x), written to avoid cancellation near 0
        -(-2.0 * x).exp_m1() - 2.0 * x * (-2.0 * x).exp()
    }
}

fn beta22_cdf(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        x * x * (3.0 - 2.0 * x)
    }
}

fn beta34_cdf(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        // I_x(3,4) = sum_{j=3}^{6} C(6,j) x^j (1-x)^{6-j}
        let x2 = x * x;
        let x3 = x2 * x;
        x3 * (20.0 - 45.0 * x + 36.0 * x2 - 10.0 * x3)
    }
}

impl ParametricCdf {
    pub fn new(family: Family, scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidArgument(format!("scale must be positive and finite, got {scale}")));
        }
        Ok(Self { family, scale })
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    fn base_cdf(&self, z: f64) -> f64 {
        match &self.family {
            Family::Erlang22 => erlang22_cdf(z),
            Family::Beta22 => beta22_cdf(z),
            Family::Beta34 => beta34_cdf(z),
            Family::Tabulated(t) => t.cdf(z),
        }
    }

    fn base_pdf(&self, z: f64) -> f64 {
        match &self.family {
            Family::Erlang22 => {
                if z <= 0.0 {
                    0.0
                } else {
                    4.0 * z * (-2.0 * z).exp()
                }
            }
            Family::Beta22 => {
                if z <= 0.0 || z >= 1.0 {
                    0.0
                } else {
                    6.0 * z * (1.0 - z)
                }
            }
            Family::Beta34 => {
                if z <= 0.0 || z >= 1.0 {
                    0.0
                } else {
                    let w = 1.0 - z;
                    60.0 * z * z * w * w * w
                }
            }
            Family::Tabulated(t) => t.pdf(z),
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        self.base_cdf(self.scale * x)
    }

    /// `F(x-)`.
    pub fn cdf_left(&self, x: f64) -> f64 {
        match &self.family {
            Family::Tabulated(t) => t.cdf_left(self.scale * x),
            _ => self.cdf(x),
        }
    }

    /// `1 - F(x)`, accurate in the upper tail for the Erlang family.
    pub fn survival(&self, x: f64) -> f64 {
        match &self.family {
            Family::Erlang22 => {
                let z = self.scale * x;
                if z <= 0.0 {
                    1.0
                } else {
                    (-2.0 * z).exp() * (1.0 + 2.0 * z)
                }
            }
            _ => 1.0 - self.cdf(x),
        }
    }

    /// `1 - F(x-)`, the probability of a draw at least `x`.
    pub fn survival_left(&self, x: f64) -> f64 {
        match &self.family {
            Family::Tabulated(_) => 1.0 - self.cdf_left(x),
            _ => self.survival(x),
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.scale * self.base_pdf(self.scale * x)
    }

    /// Derivative of the density; only the Erlang family declares it.
    pub fn pdf_derivative(&self, x: f64) -> Result<f64> {
        match &self.family {
            Family::Erlang22 => {
                let z = self.scale * x;
                let d = if z <= 0.0 { 0.0 } else { 4.0 * (-2.0 * z).exp() * (1.0 - 2.0 * z) };
                Ok(self.scale * self.scale * d)
            }
            other => Err(Error::Capability(format!("{other} does not declare a second derivative"))),
        }
    }

    /// Right end of the support (`∞` for the Erlang family).
    pub fn support_end(&self) -> f64 {
        let base = match &self.family {
            Family::Erlang22 => f64::INFINITY,
            Family::Beta22 | Family::Beta34 => 1.0,
            Family::Tabulated(t) => t.xs[t.xs.len() - 1],
        };
        base / self.scale
    }

    /// Points inside the support where the density is not smooth.
    pub fn breakpoints(&self) -> Vec<f64> {
        match &self.family {
            Family::Tabulated(t) => t.xs.iter().map(|x| x / self.scale).collect(),
            Family::Erlang22 => vec![0.0],
            _ => vec![0.0, 1.0 / self.scale],
        }
    }

    /// Point masses `(location, mass)`.
    pub fn atoms(&self) -> Vec<(f64, f64)> {
        match &self.family {
            Family::Tabulated(t) if t.fs[0] > 0.0 => vec![(t.xs[0] / self.scale, t.fs[0])],
            _ => Vec::new(),
        }
    }

    /// `sup_x F'(x)` in closed form.
    pub fn max_pdf(&self) -> f64 {
        let base = match &self.family {
            // 4x e^{-2x} peaks at x = 1/2
            Family::Erlang22 => 2.0 * (-1.0f64).exp(),
            // 6x(1-x) peaks at x = 1/2
            Family::Beta22 => 1.5,
            // 60 x^2 (1-x)^3 peaks at x = 2/5
            Family::Beta34 => 60.0 * 0.4 * 0.4 * 0.6 * 0.6 * 0.6,
            Family::Tabulated(t) => t.max_pdf(),
        };
        self.scale * base
    }

    /// `sup_x |F''(x)|` in closed form (Erlang only: `|4e^{-2x}(1-2x)|` peaks at 0).
    pub fn max_abs_pdf_derivative(&self) -> Result<f64> {
        match &self.family {
            Family::Erlang22 => Ok(self.scale * self.scale * 4.0),
            other => Err(Error::Capability(format!("{other} does not declare a second derivative"))),
        }
    }

    pub fn mean(&self) -> f64 {
        let base = match &self.family {
            Family::Erlang22 => 1.0,
            Family::Beta22 => 0.5,
            Family::Beta34 => 3.0 / 7.0,
            Family::Tabulated(t) => t.mean(),
        };
        base / self.scale
    }

    /// Generalized inverse `inf { x : F(x) >= level }` by bisection.
    pub fn quantile(&self, level: f64, tol: f64) -> Result<f64> {
        if !(0.0..1.0).contains(&level) {
            return Err(Error::InvalidArgument(format!("quantile level must lie in [0, 1), got {level}")));
        }
        let mut hi = self.support_end();
        if !hi.is_finite() {
            hi = 1.0 / self.scale;
            while self.cdf(hi) < level {
                hi *= 2.0;
            }
        }
        super::roots::quantile(|x| self.cdf(x), level, 0.0, hi, tol)
    }
}
