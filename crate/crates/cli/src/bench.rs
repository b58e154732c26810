//! Runs a plan and writes its CSV artifacts.
//!
//! Layout of the output directory:
//!
//! | file | columns |
//! |---|---|
//! | `proxies/<cell>.csv` | `location,mass` |
//! | `residues.csv` | [`RESIDUES_HEADER`] |
//! | `certificates.csv` | `r,e1,e2,dist_bound,argmin_k` |
//! | `measure_bounds.csv` | [`BOUNDS_HEADER`] |
//! | `mcmc_estimates.csv` | [`ESTIMATES_HEADER`] |
//! | `rates.csv` | [`RATES_HEADER`] |
//! | `summary_convergence.csv` | [`CONVERGENCE_HEADER`] |
//! | `summary_fluid.csv` | [`FLUID_HEADER`] |
//! | `relative_errors.csv` | `method,functional,value,reference,error,relative` |
//! | `index.csv` | [`INDEX_HEADER`] |
//! | `metadata/timing.csv` | [`TIMING_HEADER`] |
//! | `metadata/run.txt` | start and end times |
//!
//! Everything outside `metadata/` is a function of the plan and model alone.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use finapprox::bounds::ErrorCertificate;
use finapprox::mcmc::McmcConfig;
use finapprox::measure::{expectation, DiscreteDistribution};
use finapprox::queue::{functionals, vwt_kernel, VwtKernel};
use finapprox::Result;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::analysis::{fit_rate, relative_error_table, write_relative_errors, RateFit};
use crate::cells::{finite_cell, fluid_cell, mcmc_cell_with, FiniteCell, FluidCell, McmcCell};
use crate::plan::{ExperimentPlan, Method};

pub const VERSION: &str = concat!("finapprox-cli ", env!("CARGO_PKG_VERSION"));

pub const RESIDUES_HEADER: &str = "method,r,seed,N,grid_points,l_inf,l_1,status";
pub const BOUNDS_HEADER: &str = "r,functional,value,half_width,a";
pub const ESTIMATES_HEADER: &str = "r,seed,functional,mean,ci_half_width,N";
pub const RATES_HEADER: &str = "method,slope,intercept,r_min,r_max,points,status";
pub const CONVERGENCE_HEADER: &str = "r,N,finite_l_inf,mcmc_l_inf_mean,mcmc_seeds";
pub const FLUID_HEADER: &str = "quantity,finite_reference,fluid";
pub const INDEX_HEADER: &str = "artifact,config_hash,seed,version";
pub const TIMING_HEADER: &str = "method,r,seed,seconds";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct CellKey {
    pub method: Method,
    pub r: Option<u32>,
    pub seed: Option<u64>,
}

impl CellKey {
    /// File stem of the cell's proxy distribution.
    pub fn stem(&self) -> String {
        let mut s = self.method.to_string();
        if let Some(r) = self.r {
            let _ = write!(s, "_r{r}");
        }
        if let Some(seed) = self.seed {
            let _ = write!(s, "_seed{seed}");
        }
        s
    }
}

#[derive(Debug, Clone)]
pub enum CellOutput {
    Finite(Box<FiniteCell>),
    Mcmc(Box<McmcCell>),
    Fluid(FluidCell),
}

impl CellOutput {
    pub fn distribution(&self) -> &DiscreteDistribution {
        match self {
            CellOutput::Finite(c) => &c.solution.distribution,
            CellOutput::Mcmc(c) => &c.result.empirical,
            CellOutput::Fluid(c) => &c.distribution,
        }
    }

    pub fn residue(&self) -> &finapprox::kernel::ResidueReport {
        match self {
            CellOutput::Finite(c) => &c.residue,
            CellOutput::Mcmc(c) => &c.residue,
            CellOutput::Fluid(c) => &c.residue,
        }
    }

    pub fn seconds(&self) -> f64 {
        match self {
            CellOutput::Finite(c) => c.seconds,
            CellOutput::Mcmc(c) => c.seconds,
            CellOutput::Fluid(c) => c.seconds,
        }
    }
}

/// Results of every cell, in plan order, plus the fitted rates.
#[derive(Debug)]
pub struct PlanReport {
    pub cells: Vec<(CellKey, std::result::Result<CellOutput, String>)>,
    pub rates: Vec<(String, std::result::Result<RateFit, String>)>,
    pub artifacts: Vec<PathBuf>,
}

impl PlanReport {
    pub fn finite(&self, r: u32) -> Option<&FiniteCell> {
        self.cells.iter().find_map(|(k, c)| match c {
            Ok(CellOutput::Finite(f)) if k.r == Some(r) => Some(f.as_ref()),
            _ => None,
        })
    }
}

/// SHA-256 of the canonical plan (without its output directory) and model text.
pub fn config_hash(plan: &ExperimentPlan, model_text: &str) -> String {
    let plan_text: String =
        plan.to_config_string().lines().filter(|l| !l.starts_with("out =")).map(|l| format!("{l}\n")).collect();
    let digest = Sha256::new().chain_update(plan_text).chain_update(model_text).finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn cell_keys(plan: &ExperimentPlan) -> Vec<CellKey> {
    let mut keys = Vec::new();
    for &method in &plan.methods {
        match method {
            Method::Finite => keys.extend(plan.ladder.iter().map(|&r| CellKey { method, r: Some(r), seed: None })),
            Method::Mcmc => {
                for &r in &plan.ladder {
                    keys.extend(plan.seeds.iter().map(|&s| CellKey { method, r: Some(r), seed: Some(s) }));
                }
            }
            Method::Fluid => keys.push(CellKey { method, r: None, seed: None }),
        }
    }
    keys
}

fn run_cell(k: &VwtKernel, plan: &ExperimentPlan, key: CellKey) -> Result<CellOutput> {
    match (key.method, key.r, key.seed) {
        (Method::Finite, Some(r), _) => Ok(CellOutput::Finite(Box::new(finite_cell(k, r, plan.grid, plan.cert_max_r)?))),
        (Method::Mcmc, Some(r), Some(seed)) => {
            let cfg = McmcConfig { burn_in: plan.mcmc_burn_in, thinning: plan.mcmc_thinning, ..McmcConfig::for_level(r, seed) };
            Ok(CellOutput::Mcmc(Box::new(mcmc_cell_with(k, r, cfg, plan.grid)?)))
        }
        _ => Ok(CellOutput::Fluid(fluid_cell(k, plan.grid)?)),
    }
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map_or(String::new(), |v| v.to_string())
}

fn sci(v: f64) -> String {
    format!("{v:.16e}")
}

/// CSV fields cannot hold raw commas or newlines from error messages.
fn sanitize(msg: &str) -> String {
    format!("error: {}", msg.replace([',', '\n', '\r'], ";"))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, text)?;
    Ok(())
}

fn now_secs() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0.0, |d| d.as_secs_f64())
}

/// Runs every cell concurrently, then aggregates sequentially. A failing cell
/// becomes an error row; only I/O and model loading abort the plan.
pub fn run_plan(plan: &ExperimentPlan) -> Result<PlanReport> {
    plan.validate()?;
    let started = now_secs();
    let model = plan.model.load()?;
    let model_text = model.to_config_string();
    let hash = config_hash(plan, &model_text);
    let kernel = vwt_kernel(&model);
    let out = &plan.out;
    fs::create_dir_all(out.join("proxies"))?;
    fs::create_dir_all(out.join("metadata"))?;

    let keys = cell_keys(plan);
    let cells: Vec<(CellKey, std::result::Result<CellOutput, String>)> = keys
        .par_iter()
        .map(|&key| {
            let res = run_cell(&kernel, plan, key).and_then(|c| {
                let file = fs::File::create(out.join("proxies").join(format!("{}.csv", key.stem())))?;
                c.distribution().write_csv(BufWriter::new(file))?;
                Ok(c)
            });
            (key, res.map_err(|e| e.to_string()))
        })
        .collect();

    let mut artifacts: Vec<(PathBuf, Option<u64>)> = Vec::new();
    for (key, cell) in &cells {
        if cell.is_ok() {
            artifacts.push((PathBuf::from("proxies").join(format!("{}.csv", key.stem())), key.seed));
        }
    }

    let mut residues = format!("{RESIDUES_HEADER}\n");
    let mut timing = format!("{TIMING_HEADER}\n");
    for (key, cell) in &cells {
        let n = key.r.map(|r| (1u64 << r) + 1);
        let head = format!("{},{},{},{}", key.method, opt(key.r), opt(key.seed), opt(n));
        match cell {
            Ok(c) => {
                let rep = c.residue();
                let _ = writeln!(residues, "{head},{},{},{},ok", rep.grid_points, sci(rep.l_inf), sci(rep.l_1));
                let _ = writeln!(timing, "{},{},{},{:.6}", key.method, opt(key.r), opt(key.seed), c.seconds());
            }
            Err(e) => {
                let _ = writeln!(residues, "{head},,,,{}", sanitize(e));
            }
        }
    }

    let mut certs = format!("{}\n", ErrorCertificate::CSV_HEADER);
    let mut bounds = format!("{BOUNDS_HEADER}\n");
    let mut estimates = format!("{ESTIMATES_HEADER}\n");
    for (_, cell) in &cells {
        match cell {
            Ok(CellOutput::Finite(f)) => {
                if let Some(c) = &f.certificate {
                    let _ = writeln!(certs, "{}", c.csv_row());
                }
                for b in &f.bounds {
                    let _ = writeln!(bounds, "{},{},{},{},{}", f.r, b.functional, sci(b.value), sci(b.half_width), b.a);
                }
            }
            Ok(CellOutput::Mcmc(m)) => {
                for e in &m.result.estimates {
                    let _ = writeln!(
                        estimates,
                        "{},{},{},{},{},{}",
                        m.r,
                        m.seed,
                        e.functional,
                        sci(e.mean),
                        sci(e.ci_half_width),
                        m.result.samples.len()
                    );
                }
            }
            _ => {}
        }
    }

    let rates = fit_rates(&cells);
    let mut rates_csv = format!("{RATES_HEADER}\n");
    for (name, fit) in &rates {
        match fit {
            Ok(f) => {
                let _ = writeln!(rates_csv, "{},ok", f.csv_row());
            }
            Err(e) => {
                let _ = writeln!(rates_csv, "{name},,,,,,{}", sanitize(e));
            }
        }
    }

    let convergence = convergence_summary(plan, &cells);
    let (fluid_table, relative) = fluid_summary(plan, &model, &cells);

    let mut files: Vec<(&str, String)> = vec![
        ("residues.csv", residues),
        ("certificates.csv", certs),
        ("measure_bounds.csv", bounds),
        ("mcmc_estimates.csv", estimates),
        ("rates.csv", rates_csv),
        ("summary_convergence.csv", convergence),
        ("summary_fluid.csv", fluid_table),
    ];
    if let Some(rel) = relative {
        files.push(("relative_errors.csv", rel));
    }
    for (name, text) in &files {
        write_text(&out.join(name), text)?;
        artifacts.push((PathBuf::from(name), None));
    }
    write_text(&out.join("metadata").join("timing.csv"), &timing)?;
    artifacts.push((PathBuf::from("metadata").join("timing.csv"), None));
    artifacts.push((PathBuf::from("metadata").join("run.txt"), None));

    let mut index = format!("{INDEX_HEADER}\n");
    for (path, seed) in &artifacts {
        let _ = writeln!(index, "{},{hash},{},{VERSION}", path.display(), opt(*seed));
    }
    write_text(&out.join("index.csv"), &index)?;
    write_text(
        &out.join("metadata").join("run.txt"),
        &format!(
            "started = {started:.3}\nfinished = {:.3}\nversion = {VERSION}\n\
             mcmc_initial_state = 0\nmcmc_burn_in = {}\nmcmc_thinning = {} (applied after burn-in only)\n\
             mcmc_sampler = trajectory simulation of the waiting-time recursion\n",
            now_secs(),
            plan.mcmc_burn_in,
            plan.mcmc_thinning
        ),
    )?;
    artifacts.push((PathBuf::from("index.csv"), None));

    Ok(PlanReport { cells, rates, artifacts: artifacts.into_iter().map(|(p, _)| out.join(p)).collect() })
}

/// Finite residues, MCMC residues (geometric mean over seeds, which gives the
/// mean of the per-seed fits) and finite half-widths `e₁·e₂`.
fn fit_rates(cells: &[(CellKey, std::result::Result<CellOutput, String>)]) -> Vec<(String, std::result::Result<RateFit, String>)> {
    let mut finite = Vec::new();
    let mut half = Vec::new();
    let mut mcmc: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
    let mut methods = std::collections::BTreeSet::new();
    for (key, cell) in cells {
        methods.insert(key.method);
        match cell {
            Ok(CellOutput::Finite(f)) => {
                finite.push((f.r, f.residue.l_inf));
                if let Some(c) = &f.certificate {
                    half.push((f.r, c.dist_bound));
                }
            }
            Ok(CellOutput::Mcmc(m)) => mcmc.entry(m.r).or_default().push(m.residue.l_inf.ln()),
            _ => {}
        }
    }
    let mut out = Vec::new();
    let fit = |name: &str, pts: &[(u32, f64)]| fit_rate(name, pts).map_err(|e| e.to_string());
    if methods.contains(&Method::Finite) {
        out.push(("finite".to_string(), fit("finite", &finite)));
        out.push(("finite_half_width".to_string(), fit("finite_half_width", &half)));
    }
    if methods.contains(&Method::Mcmc) {
        let pts: Vec<(u32, f64)> =
            mcmc.iter().map(|(&r, logs)| (r, (logs.iter().sum::<f64>() / logs.len() as f64).exp())).collect();
        out.push(("mcmc".to_string(), fit("mcmc", &pts)));
    }
    out
}

fn convergence_summary(plan: &ExperimentPlan, cells: &[(CellKey, std::result::Result<CellOutput, String>)]) -> String {
    let mut text = format!("{CONVERGENCE_HEADER}\n");
    for &r in &plan.ladder {
        let mut finite = String::new();
        let mut mcmc = Vec::new();
        for (key, cell) in cells {
            if key.r != Some(r) {
                continue;
            }
            match cell {
                Ok(CellOutput::Finite(f)) => finite = sci(f.residue.l_inf),
                Ok(CellOutput::Mcmc(m)) => mcmc.push(m.residue.l_inf),
                _ => {}
            }
        }
        let mean = if mcmc.is_empty() { String::new() } else { sci(mcmc.iter().sum::<f64>() / mcmc.len() as f64) };
        let _ = writeln!(text, "{r},{},{finite},{mean},{}", (1u64 << r) + 1, mcmc.len());
    }
    text
}

/// Residues of the finite reference (ladder maximum) and the fluid proxy,
/// the functionals under both, and relative errors against the reference.
fn fluid_summary(
    plan: &ExperimentPlan,
    model: &finapprox::queue::QueueModel,
    cells: &[(CellKey, std::result::Result<CellOutput, String>)],
) -> (String, Option<String>) {
    let r_ref = plan.ladder.last().copied();
    let reference = cells.iter().find_map(|(k, c)| match c {
        Ok(CellOutput::Finite(f)) if k.r == r_ref => Some(f.as_ref()),
        _ => None,
    });
    let fluid = cells.iter().find_map(|(_, c)| match c {
        Ok(CellOutput::Fluid(f)) => Some(f),
        _ => None,
    });
    let gs = functionals(model);
    let mut text = format!("{FLUID_HEADER}\n");
    let _ = writeln!(text, "reference_r,{},", if reference.is_some() { opt(r_ref) } else { String::new() });
    let cell = |v: Option<f64>| v.map_or(String::new(), sci);
    let _ = writeln!(
        text,
        "l_inf_residue,{},{}",
        cell(reference.map(|f| f.residue.l_inf)),
        cell(fluid.map(|f| f.residue.l_inf))
    );
    let _ = writeln!(
        text,
        "l_1_residue,{},{}",
        cell(reference.map(|f| f.residue.l_1)),
        cell(fluid.map(|f| f.residue.l_1))
    );
    for g in &gs {
        let _ = writeln!(
            text,
            "value_{},{},{}",
            g.name(),
            cell(reference.map(|f| expectation(g, &f.solution.distribution))),
            cell(fluid.map(|f| expectation(g, &f.distribution)))
        );
    }
    let Some(reference) = reference else {
        return (text, None);
    };
    let fluid_rows = fluid.map(|f| {
        let only = BTreeMap::from([("fluid".to_string(), f.distribution.clone())]);
        relative_error_table(&reference.solution.distribution, &only, &gs)
    });
    for (i, g) in gs.iter().enumerate() {
        let err = fluid_rows.as_ref().map(|rows| rows[i].error);
        let _ = writeln!(text, "rel_error_{},{},{}", g.name(), sci(0.0), cell(err));
    }

    let mut others: BTreeMap<String, DiscreteDistribution> = BTreeMap::new();
    for (key, c) in cells {
        if let Ok(c) = c {
            others.insert(key.stem(), c.distribution().clone());
        }
    }
    let rows = relative_error_table(&reference.solution.distribution, &others, &gs);
    let mut buf = Vec::new();
    let rel = write_relative_errors(&rows, &mut buf).ok().and_then(|_| String::from_utf8(buf).ok());
    (text, rel)
}
