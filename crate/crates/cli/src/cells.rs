//! One `(method, r, seed)` computation each.

use std::time::Instant;

use finapprox::bounds::{bound_measure, certify, ErrorCertificate, MeasureBound};
use finapprox::kernel::{balance_residue, truncate_kernel, Grid, ResidueReport};
use finapprox::mcmc::{run_mcmc, McmcConfig, McmcResult};
use finapprox::measure::DiscreteDistribution;
use finapprox::queue::{fluid_approximation, functionals, VwtKernel};
use finapprox::stationary::{stationary, StationarySolution};
use finapprox::Result;

#[derive(Debug, Clone)]
pub struct FiniteCell {
    pub r: u32,
    pub solution: StationarySolution,
    pub residue: ResidueReport,
    /// Present when `r <= cert_max_r`.
    pub certificate: Option<ErrorCertificate>,
    pub bounds: Vec<MeasureBound>,
    pub seconds: f64,
}

/// Truncate, solve, and measure the balance residue against the true kernel.
pub fn finite_cell(k: &VwtKernel, r: u32, grid: usize, cert_max_r: u32) -> Result<FiniteCell> {
    let start = Instant::now();
    let g = Grid::dyadic(r)?;
    let q = truncate_kernel(k, &g)?;
    let solution = stationary(&q, &g)?;
    let seconds = start.elapsed().as_secs_f64();
    let residue = balance_residue(k, &solution.distribution, grid)?;
    let (certificate, bounds) = if r <= cert_max_r {
        let cert = certify(k, &q, &g)?;
        let bounds = functionals(k.model()).iter().map(|f| bound_measure(f, &solution, &cert)).collect();
        (Some(cert), bounds)
    } else {
        (None, Vec::new())
    };
    Ok(FiniteCell { r, solution, residue, certificate, bounds, seconds })
}

#[derive(Debug, Clone)]
pub struct McmcCell {
    pub r: u32,
    pub seed: u64,
    pub result: McmcResult,
    pub residue: ResidueReport,
    pub seconds: f64,
}

/// Chain with `N = 2^r + 1` recorded samples and the default burn-in and thinning.
pub fn mcmc_cell(k: &VwtKernel, r: u32, seed: u64, grid: usize) -> Result<McmcCell> {
    mcmc_cell_with(k, r, McmcConfig::for_level(r, seed), grid)
}

pub fn mcmc_cell_with(k: &VwtKernel, r: u32, cfg: McmcConfig, grid: usize) -> Result<McmcCell> {
    let start = Instant::now();
    let seed = cfg.seed;
    let result = run_mcmc(k.model(), cfg)?;
    let seconds = start.elapsed().as_secs_f64();
    let residue = balance_residue(k, &result.empirical, grid)?;
    Ok(McmcCell { r, seed, result, residue, seconds })
}

#[derive(Debug, Clone)]
pub struct FluidCell {
    pub w: f64,
    pub distribution: DiscreteDistribution,
    pub residue: ResidueReport,
    pub seconds: f64,
}

pub fn fluid_cell(k: &VwtKernel, grid: usize) -> Result<FluidCell> {
    let start = Instant::now();
    let (w, distribution) = fluid_approximation(k.model())?;
    let seconds = start.elapsed().as_secs_f64();
    let residue = balance_residue(k, &distribution, grid)?;
    Ok(FluidCell { w, distribution, residue, seconds })
}
