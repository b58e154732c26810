//! Trajectory simulation of the VWT recursion as a sampling baseline.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::measure::{DiscreteDistribution, PerformanceFunctional};
use crate::queue::{functionals, vwt_step, QueueModel};

/// `Φ⁻¹(0.9995)`, the two-sided 99.9% normal quantile.
pub const Z_999: f64 = 3.290526731491926;

/// Stream ids of the inter-arrival, service and patience draws.
const STREAM_T: u64 = 0;
const STREAM_S: u64 = 1;
const STREAM_Y: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct McmcConfig {
    pub burn_in: u64,
    pub thinning: u64,
    pub samples: usize,
    pub seed: u64,
}

impl McmcConfig {
    /// Burn-in `10⁵`, thinning `10²`, `N = 2^r + 1` samples.
    pub fn for_level(r: u32, seed: u64) -> Self {
        Self { burn_in: 100_000, thinning: 100, samples: (1usize << r) + 1, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if self.burn_in == 0 || self.thinning == 0 || self.samples == 0 {
            return Err(Error::InvalidArgument("burn-in, thinning and sample count must be positive".into()));
        }
        Ok(())
    }
}

/// Three independent draw streams derived from one seed.
pub struct DrawStreams {
    t: ChaCha8Rng,
    s: ChaCha8Rng,
    y: ChaCha8Rng,
}

impl DrawStreams {
    pub fn new(seed: u64) -> Self {
        let stream = |id| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(id);
            rng
        };
        Self { t: stream(STREAM_T), s: stream(STREAM_S), y: stream(STREAM_Y) }
    }

    pub fn step(&mut self, model: &QueueModel, w: f64) -> Result<f64> {
        Ok(vwt_step(w, model.draw(&mut self.t, &mut self.s, &mut self.y)?))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FunctionalEstimate {
    pub functional: String,
    pub mean: f64,
    pub ci_half_width: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct McmcResult {
    pub config: McmcConfig,
    pub samples: Vec<f64>,
    pub empirical: DiscreteDistribution,
    pub estimates: Vec<FunctionalEstimate>,
}

/// Sample mean and `z·sd/√N` half-width (sample standard deviation).
pub fn estimate(g: &PerformanceFunctional, samples: &[f64]) -> FunctionalEstimate {
    let n = samples.len() as f64;
    let values: Vec<f64> = samples.iter().map(|&w| g.eval(w)).collect();
    let mean = values.iter().sum::<f64>() / n;
    let var = if samples.len() > 1 { values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    FunctionalEstimate { functional: g.name().to_string(), mean, ci_half_width: Z_999 * var.sqrt() / n.sqrt() }
}

/// Starts at `w = 0`, discards `burn_in` steps, then keeps every
/// `thinning`-th state until `samples` are collected.
pub fn run_mcmc(model: &QueueModel, cfg: McmcConfig) -> Result<McmcResult> {
    cfg.validate()?;
    let mut streams = DrawStreams::new(cfg.seed);
    let mut w = 0.0;
    for _ in 0..cfg.burn_in {
        w = streams.step(model, w)?;
    }
    let mut samples = Vec::with_capacity(cfg.samples);
    for _ in 0..cfg.samples {
        for _ in 0..cfg.thinning {
            w = streams.step(model, w)?;
        }
        samples.push(w);
    }
    let empirical = DiscreteDistribution::empirical(&samples)?;
    let estimates = functionals(model).iter().map(|g| estimate(g, &samples)).collect();
    Ok(McmcResult { config: cfg, samples, empirical, estimates })
}

/// `n` independent one-step transitions from state `u`.
pub fn one_step_samples(model: &QueueModel, u: f64, n: usize, seed: u64) -> Result<Vec<f64>> {
    let mut streams = DrawStreams::new(seed);
    (0..n).map(|_| streams.step(model, u)).collect()
}

/// DKW half-width `sqrt(ln(2/α) / (2N))`.
pub fn dkw_band(n: usize, alpha: f64) -> Result<f64> {
    if n == 0 || !(alpha > 0.0 && alpha <= 2.0) {
        return Err(Error::InvalidArgument(format!("need N > 0 and alpha in (0, 2], got N = {n}, alpha = {alpha}")));
    }
    Ok(((2.0 / alpha).ln() / (2.0 * n as f64)).sqrt())
}

impl McmcResult {
    pub const ESTIMATES_HEADER: &'static str = "functional,mean,ci_half_width,N,seed";

    pub fn write_samples_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "index,w")?;
        for (i, w) in self.samples.iter().enumerate() {
            writeln!(out, "{i},{w:.16e}")?;
        }
        Ok(())
    }

    pub fn write_estimates_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{}", Self::ESTIMATES_HEADER)?;
        for e in &self.estimates {
            writeln!(
                out,
                "{},{:.16e},{:.16e},{},{}",
                e.functional,
                e.mean,
                e.ci_half_width,
                self.samples.len(),
                self.config.seed
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dkw_examples() {
        let e = dkw_band(2, 2.0 / std::f64::consts::E.powi(2)).unwrap();
        assert!((e - 0.5f64.sqrt()).abs() < 1e-12);
        assert_eq!(dkw_band(10, 2.0).unwrap(), 0.0);
        let a = dkw_band(100, 0.01).unwrap();
        let b = dkw_band(400, 0.01).unwrap();
        assert!((a / b - 2.0).abs() < 1e-12);
        assert!(dkw_band(0, 0.1).is_err());
        assert!(dkw_band(10, 0.0).is_err());
    }

    #[test]
    fn ci_half_width_formula() {
        let g = PerformanceFunctional::new("id", |x| x, 1.0, true).unwrap();
        let e = estimate(&g, &[0.0, 1.0]);
        assert_eq!(e.mean, 0.5);
        assert!((e.ci_half_width - Z_999 * 0.5f64.sqrt() / 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn z_is_the_normal_quantile() {
        use statrs::distribution::{ContinuousCDF, Normal};
        let n = Normal::new(0.0, 1.0).unwrap();
        assert!((n.cdf(Z_999) - 0.9995).abs() < 1e-12);
    }

    #[test]
    fn same_seed_same_run() {
        let m = QueueModel::model_a();
        let cfg = McmcConfig { burn_in: 1000, thinning: 10, samples: 50, seed: 7 };
        let a = run_mcmc(&m, cfg).unwrap();
        let b = run_mcmc(&m, cfg).unwrap();
        assert_eq!(a, b);
        let c = run_mcmc(&m, McmcConfig { seed: 8, ..cfg }).unwrap();
        assert_ne!(a.samples, c.samples);
        assert!(a.samples.iter().all(|&w| (0.0..=1.0).contains(&w)));
    }
}
