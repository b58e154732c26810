use finapprox::bounds::{bound_measure, certify};
use finapprox::kernel::{truncate_kernel, Grid};
use finapprox::mcmc::{run_mcmc, McmcConfig};
use finapprox::measure::expectation;
use finapprox::queue::{functionals, vwt_kernel, QueueModel};
use finapprox::stationary::{stationary, StationarySolution};

fn solve(m: &QueueModel, r: u32) -> StationarySolution {
    let g = Grid::dyadic(r).unwrap();
    stationary(&truncate_kernel(&vwt_kernel(m), &g).unwrap(), &g).unwrap()
}

#[test]
fn measure_bounds_contain_the_fine_values() {
    for m in [QueueModel::model_a(), QueueModel::model_b()] {
        let k = vwt_kernel(&m);
        let gs = functionals(&m);
        let fine = solve(&m, 12);
        let reference: Vec<f64> = gs.iter().map(|g| expectation(g, &fine.distribution)).collect();
        let mut prev_e2 = f64::INFINITY;
        for r in 5..=9 {
            let g = Grid::dyadic(r).unwrap();
            let q = truncate_kernel(&k, &g).unwrap();
            let sol = stationary(&q, &g).unwrap();
            let cert = certify(&k, &q, &g).unwrap();
            for (f, &v) in gs.iter().zip(&reference) {
                let b = bound_measure(f, &sol, &cert);
                assert!(b.contains(v), "r={r} {}: {} ± {} misses {v}", b.functional, b.value, b.half_width);
            }
            // e₂ stays bounded on this ladder
            assert!(cert.e2 < 20.0 && cert.e2 <= prev_e2 * 1.05, "r={r}: e2 = {}", cert.e2);
            prev_e2 = cert.e2;
        }
    }
}

#[test]
fn abandonment_interval_covers_the_reference() {
    let m = QueueModel::model_a();
    let [_, phi2, _] = functionals(&m);
    let target = expectation(&phi2, &solve(&m, 12).distribution);
    let hits = (0..20)
        .filter(|&seed| {
            let res = run_mcmc(&m, McmcConfig::for_level(12, seed)).unwrap();
            let e = &res.estimates[1];
            assert_eq!(e.functional, "abandonment");
            (e.mean - target).abs() <= e.ci_half_width
        })
        .count();
    assert!(hits >= 19, "{hits}/20");
}
