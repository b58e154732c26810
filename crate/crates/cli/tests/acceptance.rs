//! Acceptance checks, one line per criterion. Runs without the libtest
//! harness so every line is printed; exits nonzero if any check fails.

use std::process::ExitCode;
use std::time::Instant;

use finapprox::bounds::{build_lp, e2_factor};
use finapprox::kernel::{regeneration_kernel, truncate_kernel, Grid, TransitionKernel, TransitionMatrix};
use finapprox::mcmc::{dkw_band, one_step_samples};
use finapprox::measure::{expectation, sup_distance, sup_distance_to_cdf, DiscreteDistribution, PerformanceFunctional};
use finapprox::numerics::{Family, LinearProgram, ParametricCdf};
use finapprox::queue::{functionals, vwt_kernel, QueueModel};
use finapprox::stationary::stationary_direct;
use finapprox_cli::bench::{run_plan, CellOutput, PlanReport};
use finapprox_cli::cells::mcmc_cell;
use finapprox_cli::{fit_rate, ExperimentPlan, Method, ModelSource};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const GRID: usize = 100_000;

struct Outcome {
    pass: bool,
    detail: String,
}

fn within_rel(value: f64, target: f64, tol: f64) -> bool {
    ((value - target) / target).abs() <= tol
}

fn plan(model: &str, methods: &[Method], ladder: Vec<u32>, cert_max_r: u32, out: &std::path::Path) -> PlanReport {
    let mut p = ExperimentPlan::new(ModelSource::parse(model), methods, ladder, out).expect("valid plan");
    p.grid = GRID;
    p.cert_max_r = cert_max_r;
    p.seeds = (0..5).collect();
    run_plan(&p).expect("plan runs")
}

fn fluid(report: &PlanReport) -> &finapprox_cli::cells::FluidCell {
    report
        .cells
        .iter()
        .find_map(|(_, c)| match c {
            Ok(CellOutput::Fluid(f)) => Some(f),
            _ => None,
        })
        .expect("fluid cell")
}

fn finite_residues(a: &PlanReport, b: &PlanReport) -> Outcome {
    let mut pass = true;
    let mut detail = Vec::new();
    for (name, rep, targets) in [("a", a, [2.33e-1, 3.10e-2, 3.88e-3]), ("b", b, [2.64e-1, 3.40e-2, 4.25e-3])] {
        for (r, target) in [3, 6, 9].into_iter().zip(targets) {
            let v = rep.finite(r).map_or(f64::NAN, |f| f.residue.l_inf);
            pass &= within_rel(v, target, 0.10);
            detail.push(format!("{name} r={r} {v:.3e}/{target:.2e}"));
        }
    }
    Outcome { pass, detail: detail.join(", ") }
}

fn fluid_residues(a: &PlanReport, b: &PlanReport) -> Outcome {
    let mut pass = true;
    let mut detail = Vec::new();
    for (name, rep, inf, one) in [("a", a, 5.44e-1, 1.06e-1), ("b", b, 5.07e-1, 1.29e-1)] {
        let f = fluid(rep);
        pass &= within_rel(f.residue.l_inf, inf, 0.05) && within_rel(f.residue.l_1, one, 0.05);
        detail.push(format!("{name} Linf {:.3e}/{inf:.2e} L1 {:.3e}/{one:.2e}", f.residue.l_inf, f.residue.l_1));
    }
    Outcome { pass, detail: detail.join(", ") }
}

fn fluid_relative_errors(a: &PlanReport, b: &PlanReport) -> Outcome {
    let mut pass = true;
    let mut detail = Vec::new();
    // targets in percent; φ₁ exact for model (a)
    for (name, rep, targets) in [("a", a, [Some(100.0), Some(91.0), Some(37.0)]), ("b", b, [None, Some(40.0), Some(13.0)])] {
        let model = QueueModel::preset(name).unwrap();
        let reference = &rep.finite(12).expect("r = 12 reference").solution.distribution;
        let f = fluid(rep);
        for (g, target) in functionals(&model).iter().zip(targets) {
            let m_ref = expectation(g, reference);
            let err = 100.0 * (expectation(g, &f.distribution) - m_ref).abs() / m_ref.abs();
            if let Some(t) = target {
                pass &= if t == 100.0 { err == 100.0 } else { (err - t).abs() <= 3.0 };
            }
            detail.push(format!("{name} {} {err:.2}%", g.name()));
        }
    }
    Outcome { pass, detail: detail.join(", ") }
}

fn rate_contrast(a: &PlanReport) -> Outcome {
    let finite: Vec<(u32, f64)> = (3..=12).filter_map(|r| a.finite(r).map(|f| (r, f.residue.l_inf))).collect();
    let fin = fit_rate("finite", &finite).map_or(f64::NAN, |f| f.slope);
    let mut per_seed = Vec::new();
    for seed in 0..5u64 {
        let pts: Vec<(u32, f64)> = a
            .cells
            .iter()
            .filter_map(|(k, c)| match c {
                Ok(CellOutput::Mcmc(m)) if k.seed == Some(seed) => Some((m.r, m.residue.l_inf)),
                _ => None,
            })
            .collect();
        per_seed.push(fit_rate("mcmc", &pts).map_or(f64::NAN, |f| f.slope));
    }
    let mcmc = per_seed.iter().sum::<f64>() / per_seed.len() as f64;
    let half: Vec<(u32, f64)> = (3..=9)
        .filter_map(|r| Some((r, a.finite(r)?.bounds.iter().find(|b| b.functional == "abandonment")?.half_width)))
        .collect();
    let hw = if half.len() == 7 { fit_rate("half_width", &half).map_or(f64::NAN, |f| f.slope) } else { f64::NAN };
    let pass = (fin + 1.0).abs() <= 0.15 && (mcmc + 0.5).abs() <= 0.2 && (hw + 1.0).abs() <= 0.15;
    Outcome {
        pass,
        detail: format!(
            "finite slope {fin:.3}, mcmc slope {mcmc:.3} (seeds {:?}), half-width slope {hw:.3}",
            per_seed.iter().map(|s| format!("{s:.2}")).collect::<Vec<_>>()
        ),
    }
}

fn solve_small(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs()))?;
        if a[p][k].abs() < 1e-12 {
            return None;
        }
        a.swap(k, p);
        b.swap(k, p);
        for i in k + 1..n {
            let f = a[i][k] / a[k][k];
            for j in k..n {
                a[i][j] -= f * a[k][j];
            }
            b[i] -= f * b[k];
        }
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        x[k] = (b[k] - (k + 1..n).map(|j| a[k][j] * x[j]).sum::<f64>()) / a[k][k];
    }
    Some(x)
}

/// Minimum of the objective over every basic feasible point.
fn vertex_oracle(lp: &LinearProgram) -> f64 {
    let n = lp.num_vars();
    let mut planes: Vec<(Vec<f64>, f64)> = (0..lp.num_rows()).map(|i| (lp.row(i).0.to_vec(), lp.row(i).1)).collect();
    for v in 0..n {
        for bound in [lp.lower()[v], lp.upper()[v]] {
            if bound.is_finite() {
                let mut e = vec![0.0; n];
                e[v] = 1.0;
                planes.push((e, bound));
            }
        }
    }
    let mut best = f64::INFINITY;
    let mut pick = Vec::new();
    fn rec(start: usize, n: usize, planes: &[(Vec<f64>, f64)], pick: &mut Vec<usize>, f: &mut dyn FnMut(&[usize])) {
        if pick.len() == n {
            f(pick);
            return;
        }
        for i in start..planes.len() {
            pick.push(i);
            rec(i + 1, n, planes, pick, f);
            pick.pop();
        }
    }
    rec(0, n, &planes, &mut pick, &mut |idx| {
        let a = idx.iter().map(|&i| planes[i].0.clone()).collect();
        let b = idx.iter().map(|&i| planes[i].1).collect();
        if let Some(x) = solve_small(a, b) {
            if lp.max_violation(&x) < 1e-9 {
                best = best.min(lp.evaluate(&x));
            }
        }
    });
    best
}

fn random_chain(rng: &mut ChaCha8Rng, n: usize) -> TransitionMatrix {
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            let mut w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
            let s: f64 = w.iter().sum();
            w.iter_mut().for_each(|v| *v /= s);
            w[n - 1] = 1.0 - w[..n - 1].iter().sum::<f64>();
            w
        })
        .collect();
    TransitionMatrix::from_rows(&rows).unwrap()
}

fn certificate_validity(a: &PlanReport, b: &PlanReport) -> Outcome {
    let mut pass = true;
    let mut detail = Vec::new();
    for (name, rep) in [("a", a), ("b", b)] {
        let p12 = &rep.finite(12).expect("reference").solution.distribution;
        let mut worst: f64 = f64::INFINITY;
        for r in 3..=7 {
            let Some(f) = rep.finite(r) else {
                pass = false;
                continue;
            };
            let Some(c) = &f.certificate else {
                pass = false;
                continue;
            };
            let d = sup_distance(&f.solution.distribution, p12);
            pass &= c.dist_bound >= d;
            worst = worst.min(c.dist_bound / d);
        }
        detail.push(format!("{name} min bound/distance {worst:.2}"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut lp_err = 0.0f64;
    for _ in 0..100 {
        let q = random_chain(&mut rng, 3);
        match e2_factor(&q) {
            Ok((e2, ys)) => {
                let oracle: Vec<f64> = (0..=3).map(|k| vertex_oracle(&build_lp(&q, k).unwrap())).collect();
                for (y, o) in ys.iter().zip(&oracle) {
                    lp_err = lp_err.max((y - o).abs());
                }
                let min = oracle.iter().copied().fold(f64::INFINITY, f64::min);
                lp_err = lp_err.max((1.0 / e2 - min).abs());
            }
            Err(_) => lp_err = f64::INFINITY,
        }
    }
    pass &= lp_err <= 1e-9;
    detail.push(format!("LP vs vertex oracle max gap {lp_err:.1e}"));
    Outcome { pass, detail: detail.join(", ") }
}

fn random_distribution(rng: &mut ChaCha8Rng) -> DiscreteDistribution {
    let n = rng.gen_range(1..=20);
    let atoms = (0..n).map(|_| (rng.gen_range(0.0..=1.0), rng.gen_range(0.01..1.0))).collect();
    DiscreteDistribution::from_weights(atoms).unwrap()
}

fn random_functional(rng: &mut ChaCha8Rng) -> PerformanceFunctional {
    let k = rng.gen_range(2..8);
    let values: Vec<f64> = (0..k).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let variation: f64 = values.windows(2).map(|w| (w[1] - w[0]).abs()).sum();
    if rng.gen_bool(0.5) {
        let n = (k - 1) as f64;
        let g = move |x: f64| {
            let t = (x.clamp(0.0, 1.0) * n).min(n - 1e-12);
            let i = t.floor() as usize;
            values[i] + (t - i as f64) * (values[i + 1] - values[i])
        };
        PerformanceFunctional::new("pl", g, variation, true).unwrap()
    } else {
        let mut cuts: Vec<f64> = (0..k - 1).map(|_| rng.gen_range(0.0..1.0)).collect();
        cuts.sort_by(f64::total_cmp);
        let g = move |x: f64| values[cuts.partition_point(|&c| c <= x)];
        PerformanceFunctional::new("step", g, variation, false).unwrap()
    }
}

fn measure_bound_property() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut violations = 0;
    for _ in 0..1000 {
        let (p, q, g) = (random_distribution(&mut rng), random_distribution(&mut rng), random_functional(&mut rng));
        let gap = (expectation(&g, &p) - expectation(&g, &q)).abs();
        if gap > g.a_factor() * g.variation() * sup_distance(&p, &q) + 1e-12 {
            violations += 1;
        }
    }
    Outcome { pass: violations == 0, detail: format!("{violations} violations in 1000 triples") }
}

fn oracle_chains() -> Outcome {
    let f = ParametricCdf::new(Family::Beta34, 1.0).unwrap();
    let mut law_err = 0.0f64;
    let mut dist_err = 0.0f64;
    for r in 2..=10 {
        let g = Grid::dyadic(r).unwrap();
        let ff = f.clone();
        let q = truncate_kernel(&regeneration_kernel(move |x| ff.cdf(x), f.max_pdf()), &g).unwrap();
        let sol = stationary_direct(&q, &g).unwrap();
        let c = g.states();
        let prev = |j: usize| if j == 0 { 0.0 } else { f.cdf(c[j - 1]) };
        for (j, p) in sol.pi.iter().enumerate() {
            law_err = law_err.max((p - (f.cdf(c[j]) - prev(j))).abs());
        }
        let cell = (1..c.len()).map(|j| f.cdf(c[j]) - prev(j)).fold(0.0, f64::max);
        let d = sup_distance_to_cdf(&sol.distribution, |x| f.cdf(x), |x| f.cdf_left(x));
        dist_err = dist_err.max((d - cell).abs());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut two_err = 0.0f64;
    let g2 = Grid::from_states(vec![0.0, 1.0]).unwrap();
    for _ in 0..200 {
        let (alpha, beta): (f64, f64) = (rng.gen_range(0.01..1.0), rng.gen_range(0.01..1.0));
        let q = TransitionMatrix::from_rows(&[vec![1.0 - alpha, alpha], vec![beta, 1.0 - beta]]).unwrap();
        let sol = stationary_direct(&q, &g2).unwrap();
        two_err = two_err.max((sol.pi[0] - beta / (alpha + beta)).abs()).max((sol.pi[1] - alpha / (alpha + beta)).abs());
    }
    Outcome {
        pass: law_err <= 1e-12 && dist_err <= 1e-12 && two_err <= 1e-12,
        detail: format!("regeneration law {law_err:.1e}, sup distance {dist_err:.1e}, two-state {two_err:.1e}"),
    }
}

fn mcmc_residues(a: &PlanReport, extra: &[(u64, f64)]) -> Outcome {
    let mut residues: Vec<(u64, f64)> = a
        .cells
        .iter()
        .filter_map(|(k, c)| match c {
            Ok(CellOutput::Mcmc(m)) if k.r == Some(9) => Some((m.seed, m.residue.l_inf)),
            _ => None,
        })
        .collect();
    residues.extend_from_slice(extra);
    let target = 3.93e-2;
    let hits = residues.iter().filter(|(_, v)| *v >= target / 3.0 && *v <= target * 3.0).count();

    let model = QueueModel::model_a();
    let k = vwt_kernel(&model);
    let n = 100_000;
    let eps = dkw_band(n, 0.001).unwrap();
    let mut worst = 0.0f64;
    for (i, u) in [0.0, 0.25, 0.5].into_iter().enumerate() {
        let s = one_step_samples(&model, u, n, 100 + i as u64).unwrap();
        let emp = DiscreteDistribution::empirical(&s).unwrap();
        worst = worst.max(sup_distance_to_cdf(&emp, |x| k.cdf(x, u), |x| if x <= 0.0 { 0.0 } else { k.cdf(x, u) }));
    }
    Outcome {
        pass: residues.len() == 10 && hits >= 8 && worst <= eps,
        detail: format!(
            "{hits}/{} seeds within factor 3 ({}), one-step DKW {worst:.2e} <= {eps:.2e}",
            residues.len(),
            residues.iter().map(|(_, v)| format!("{v:.2e}")).collect::<Vec<_>>().join(" ")
        ),
    }
}

fn main() -> ExitCode {
    if std::env::args().any(|a| a == "--list") {
        return ExitCode::SUCCESS;
    }
    let start = Instant::now();
    let dir = std::env::temp_dir().join(format!("finapprox-acceptance-{}", std::process::id()));
    let all = [Method::Finite, Method::Mcmc, Method::Fluid];
    let a = plan("a", &all, (3..=12).collect(), 9, &dir.join("a"));
    let b = plan("b", &[Method::Finite, Method::Fluid], vec![3, 4, 5, 6, 7, 9, 12], 7, &dir.join("b"));
    let k = vwt_kernel(&QueueModel::model_a());
    let extra: Vec<(u64, f64)> =
        (5..10).map(|s| (s, mcmc_cell(&k, 9, s, GRID).map_or(f64::NAN, |c| c.residue.l_inf))).collect();

    let results = [
        ("finite-approximation residues", finite_residues(&a, &b)),
        ("fluid residues", fluid_residues(&a, &b)),
        ("fluid relative measure errors", fluid_relative_errors(&a, &b)),
        ("rate contrast", rate_contrast(&a)),
        ("certificate validity", certificate_validity(&a, &b)),
        ("measure-bound property", measure_bound_property()),
        ("oracle chains", oracle_chains()),
        ("mcmc residues and one-step law", mcmc_residues(&a, &extra)),
    ];
    let _ = std::fs::remove_dir_all(&dir);
    let mut failed = 0;
    for (name, o) in &results {
        println!("acceptance {name}: {} [{}]", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    println!("acceptance: {} passed, {failed} failed in {:.0} s", results.len() - failed, start.elapsed().as_secs_f64());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
