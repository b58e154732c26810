use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use finapprox::bounds::ErrorCertificate;
use finapprox::kernel::{
    estimate_condition_bounds, truncate_kernel, Grid, ResidueReport, TransitionKernel, DEFAULT_RESIDUE_GRID,
};
use finapprox::mcmc::McmcResult;
use finapprox::queue::{quadrature_self_check, vwt_kernel, VwtKernel, SELF_CHECK_TOL};
use finapprox::stationary::check_absorbing_class;
use finapprox::Result;
use finapprox_cli::bench::{run_plan, RESIDUES_HEADER};
use finapprox_cli::cells::{finite_cell, fluid_cell, mcmc_cell};
use finapprox_cli::plan::{ExperimentPlan, ModelSource};

#[derive(Parser)]
#[command(name = "finapprox", version, about = "Finite approximation of continuous-state Markov chains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ModelArg {
    /// Preset `a` or `b`, or a model configuration file.
    #[arg(long, default_value = "a")]
    model: String,
}

impl ModelArg {
    fn kernel(&self) -> Result<VwtKernel> {
        Ok(vwt_kernel(&ModelSource::parse(&self.model).load()?))
    }
}

#[derive(Subcommand)]
enum Command {
    /// Stationary law at one resolution, with certificate and measure bounds.
    Solve {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long)]
        r: u32,
        #[arg(long, default_value_t = DEFAULT_RESIDUE_GRID)]
        grid: usize,
        /// Skip the certificate above this level.
        #[arg(long, default_value_t = 9)]
        cert_max_r: u32,
        /// Directory for the proxy law and certificate CSVs.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Balance residue of the finite-approximation law.
    Residue {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long)]
        r: u32,
        #[arg(long, default_value_t = DEFAULT_RESIDUE_GRID)]
        grid: usize,
    },
    /// Simulated chain with `2^r + 1` recorded samples.
    Mcmc {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long)]
        r: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_RESIDUE_GRID)]
        grid: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fluid point mass and its residues.
    Fluid {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long, default_value_t = DEFAULT_RESIDUE_GRID)]
        grid: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Full experiment plan.
    Bench {
        /// Plan file.
        #[arg(long)]
        config: PathBuf,
        /// Overrides the plan's output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Kernel diagnostics: quadrature, row sums, derivative bounds, classes.
    Check {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long, default_value_t = 6)]
        r: u32,
    },
}

fn print_residue(method: &str, r: Option<u32>, seed: Option<u64>, rep: &ResidueReport) {
    let opt = |v: Option<String>| v.unwrap_or_default();
    println!("{RESIDUES_HEADER}");
    println!(
        "{method},{},{},{},{},ok",
        opt(r.map(|r| r.to_string())),
        opt(seed.map(|s| s.to_string())),
        opt(r.map(|r| ((1u64 << r) + 1).to_string())),
        rep.csv_row()
    );
}

fn create(dir: &PathBuf, name: &str) -> Result<BufWriter<fs::File>> {
    fs::create_dir_all(dir)?;
    Ok(BufWriter::new(fs::File::create(dir.join(name))?))
}

fn print_mcmc(res: &McmcResult) -> Result<()> {
    res.write_estimates_csv(io::stdout().lock())
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Solve { model, r, grid, cert_max_r, out } => {
            let k = model.kernel()?;
            let cell = finite_cell(&k, r, grid, cert_max_r)?;
            print_residue("finite", Some(r), None, &cell.residue);
            if let Some(c) = &cell.certificate {
                println!("{}\n{}", ErrorCertificate::CSV_HEADER, c.csv_row());
                println!("functional,value,half_width,a");
                for b in &cell.bounds {
                    println!("{},{:.16e},{:.16e},{}", b.functional, b.value, b.half_width, b.a);
                }
            }
            if let Some(dir) = out {
                cell.solution.distribution.write_csv(create(&dir, &format!("finite_r{r}.csv"))?)?;
                if let Some(c) = &cell.certificate {
                    let mut w = create(&dir, &format!("certificate_r{r}.csv"))?;
                    writeln!(w, "{}\n{}", ErrorCertificate::CSV_HEADER, c.csv_row())?;
                }
            }
        }
        Command::Residue { model, r, grid } => {
            let k = model.kernel()?;
            let cell = finite_cell(&k, r, grid, 0)?;
            print_residue("finite", Some(r), None, &cell.residue);
        }
        Command::Mcmc { model, r, seed, grid, out } => {
            let k = model.kernel()?;
            let cell = mcmc_cell(&k, r, seed, grid)?;
            print_residue("mcmc", Some(r), Some(seed), &cell.residue);
            print_mcmc(&cell.result)?;
            if let Some(dir) = out {
                cell.result.write_samples_csv(create(&dir, &format!("mcmc_r{r}_seed{seed}_samples.csv"))?)?;
                cell.result.empirical.write_csv(create(&dir, &format!("mcmc_r{r}_seed{seed}.csv"))?)?;
            }
        }
        Command::Fluid { model, grid, out } => {
            let k = model.kernel()?;
            let cell = fluid_cell(&k, grid)?;
            println!("w = {:.16e}", cell.w);
            print_residue("fluid", None, None, &cell.residue);
            if let Some(dir) = out {
                cell.distribution.write_csv(create(&dir, "fluid.csv")?)?;
            }
        }
        Command::Bench { config, out } => {
            let mut plan = ExperimentPlan::from_file(&config)?;
            if let Some(dir) = out {
                plan.out = dir;
            }
            let report = run_plan(&plan)?;
            let failed = report.cells.iter().filter(|(_, c)| c.is_err()).count();
            for (name, fit) in &report.rates {
                match fit {
                    Ok(f) => println!("{name}: slope {:.4}", f.slope),
                    Err(e) => println!("{name}: {e}"),
                }
            }
            println!("{} cells, {failed} failed, output in {}", report.cells.len(), plan.out.display());
            return Ok(failed == 0);
        }
        Command::Check { model, r } => return check(&model.kernel()?, r),
    }
    Ok(true)
}

fn check(k: &VwtKernel, r: u32) -> Result<bool> {
    let mut ok = true;
    let mut report = |name: &str, value: f64, limit: f64| {
        let pass = value <= limit;
        ok &= pass;
        println!("{name}: {value:.3e} (limit {limit:.3e}) {}", if pass { "ok" } else { "FAIL" });
    };
    report("quadrature refinement", quadrature_self_check(k.model()), SELF_CHECK_TOL);
    let top = (0..=1000).map(|i| (k.cdf(1.0, i as f64 / 1000.0) - 1.0).abs()).fold(0.0, f64::max);
    report("max |kbar(1,u) - 1|", top, 1e-8);
    let g = Grid::dyadic(r)?;
    let q = truncate_kernel(k, &g)?;
    let rows = (0..q.len()).map(|i| (q.row(i).iter().sum::<f64>() - 1.0).abs()).fold(0.0, f64::max);
    report(&format!("row sums at r = {r}"), rows, 1e-10);
    let b = k.bounds();
    let est = estimate_condition_bounds(k, 200);
    if let Some(lu) = b.lipschitz_u {
        report("d/du estimate vs bound", est.du, lu);
    }
    if let Some(m) = b.mixed {
        report("d2/dxdu estimate vs bound", est.dxdu, m);
    }
    if let Some(e) = b.edge {
        report("edge slope estimate vs bound", est.edge, e);
    }
    let classes = check_absorbing_class(&q);
    let single = classes.has_absorbing_class();
    println!("closed classes: {} {}", classes.terminal.len(), if single { "ok" } else { "FAIL" });
    Ok(ok && single)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
