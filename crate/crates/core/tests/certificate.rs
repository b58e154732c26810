use finapprox::bounds::{bound_measure, build_lp, certify, e2_factor};
use finapprox::kernel::{absorption_kernel, regeneration_kernel, truncate_kernel, Grid, TransitionMatrix};
use finapprox::measure::{sup_distance_to_cdf, PerformanceFunctional};
use finapprox::numerics::LinearProgram;
use finapprox::stationary::stationary_direct;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Gaussian elimination with full pivoting, kept separate from the library
/// solver so the oracle shares no code with it.
fn solve_small(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    let mut perm: Vec<usize> = (0..n).collect();
    for k in 0..n {
        let (mut pi, mut pj, mut best) = (k, k, 0.0);
        for i in k..n {
            for j in k..n {
                if a[i][j].abs() > best {
                    best = a[i][j].abs();
                    pi = i;
                    pj = j;
                }
            }
        }
        if best < 1e-12 {
            return None;
        }
        a.swap(k, pi);
        b.swap(k, pi);
        for row in a.iter_mut() {
            row.swap(k, pj);
        }
        perm.swap(k, pj);
        for i in k + 1..n {
            let f = a[i][k] / a[k][k];
            for j in k..n {
                a[i][j] -= f * a[k][j];
            }
            b[i] -= f * b[k];
        }
    }
    let mut y = vec![0.0; n];
    for k in (0..n).rev() {
        let s: f64 = (k + 1..n).map(|j| a[k][j] * y[j]).sum();
        y[k] = (b[k] - s) / a[k][k];
    }
    let mut x = vec![0.0; n];
    for (k, &p) in perm.iter().enumerate() {
        x[p] = y[k];
    }
    Some(x)
}

/// Minimum of the objective over all vertices of the feasible polytope.
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
    let mut idx: Vec<usize> = (0..n).collect();
    loop {
        let a: Vec<Vec<f64>> = idx.iter().map(|&i| planes[i].0.clone()).collect();
        let b: Vec<f64> = idx.iter().map(|&i| planes[i].1).collect();
        if let Some(x) = solve_small(a, b) {
            if lp.max_violation(&x) < 1e-9 {
                best = best.min(lp.evaluate(&x));
            }
        }
        // next n-subset in lexicographic order
        let m = planes.len();
        let mut k = n;
        while k > 0 && idx[k - 1] == m - n + k - 1 {
            k -= 1;
        }
        if k == 0 {
            return best;
        }
        idx[k - 1] += 1;
        for t in k..n {
            idx[t] = idx[t - 1] + 1;
        }
    }
}

fn random_chain(rng: &mut ChaCha8Rng, n: usize) -> TransitionMatrix {
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            let mut w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
            let s: f64 = w.iter().sum();
            w.iter_mut().for_each(|v| *v /= s);
            let head: f64 = w[..n - 1].iter().sum();
            w[n - 1] = 1.0 - head;
            w
        })
        .collect();
    TransitionMatrix::from_rows(&rows).unwrap()
}

#[test]
fn e2_matches_vertex_enumeration_on_small_chains() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for trial in 0..100 {
        let n = if trial % 4 == 0 { 2 } else { 3 };
        let q = random_chain(&mut rng, n);
        let (e2, ys) = e2_factor(&q).unwrap();
        let oracle: Vec<f64> = (0..=n).map(|k| vertex_oracle(&build_lp(&q, k).unwrap())).collect();
        for (y, o) in ys.iter().zip(&oracle) {
            assert!((y - o).abs() < 1e-9, "trial {trial}: {y} vs {o}");
        }
        let min = oracle.iter().copied().fold(f64::INFINITY, f64::min);
        assert!((e2 - 1.0 / min).abs() < 1e-9 * e2);
    }
}

#[test]
fn regeneration_certificate_covers_the_true_error() {
    let f = |x: f64| {
        let x = x.clamp(0.0, 1.0);
        x * x * (3.0 - 2.0 * x)
    };
    let g = Grid::dyadic(3).unwrap();
    let k = regeneration_kernel(f, 1.5);
    let q = truncate_kernel(&k, &g).unwrap();
    let sol = stationary_direct(&q, &g).unwrap();
    let cert = certify(&k, &q, &g).unwrap();
    let err = sup_distance_to_cdf(&sol.distribution, f, f);
    assert!(cert.dist_bound >= err, "{} < {err}", cert.dist_bound);
    assert!((cert.dist_bound - cert.e1 * cert.e2).abs() < 1e-12);
    assert!(cert.y_star.iter().all(|&y| y > 0.0 && y <= 1.0 + 1e-12));
}

#[test]
fn absorbing_kernel_certificate_is_trivially_valid() {
    let g = Grid::dyadic(3).unwrap();
    let k = absorption_kernel();
    let q = truncate_kernel(&k, &g).unwrap();
    let sol = stationary_direct(&q, &g).unwrap();
    assert!((sol.pi[0] - 1.0).abs() < 1e-12);
    let cert = certify(&k, &q, &g).unwrap();
    assert_eq!(cert.e1, 0.0);
    assert!(cert.dist_bound >= 0.0);
}

#[test]
fn e1_halves_and_e2_stays_bounded() {
    let f = |x: f64| x.clamp(0.0, 1.0).powi(2);
    let k = regeneration_kernel(f, 2.0);
    let mut prev: Option<(f64, f64)> = None;
    for r in 3..=7 {
        let g = Grid::dyadic(r).unwrap();
        let q = truncate_kernel(&k, &g).unwrap();
        let cert = certify(&k, &q, &g).unwrap();
        if let Some((e1, e2)) = prev {
            assert_eq!(cert.e1 * 2.0, e1);
            assert!(cert.e2 <= 2.0 * e2);
        }
        assert!(cert.e2.is_finite() && cert.e2 >= 1.0);
        prev = Some((cert.e1, cert.e2));
    }
}

#[test]
fn measure_bound_half_widths() {
    let g = Grid::dyadic(3).unwrap();
    let k = regeneration_kernel(|x: f64| x.clamp(0.0, 1.0), 1.0);
    let q = truncate_kernel(&k, &g).unwrap();
    let sol = stationary_direct(&q, &g).unwrap();
    let cert = certify(&k, &q, &g).unwrap();
    let constant = PerformanceFunctional::new("c", |_| 3.0, 0.0, true).unwrap();
    assert_eq!(bound_measure(&constant, &sol, &cert).half_width, 0.0);
    let id = PerformanceFunctional::new("id", |x| x, 1.0, true).unwrap();
    let b = bound_measure(&id, &sol, &cert);
    assert_eq!(b.half_width, cert.dist_bound);
    assert_eq!(b.a, 1.0);
    // the true mean of Uniform(0, 1) is covered
    assert!(b.contains(0.5));
    let idle = PerformanceFunctional::new("idle", |x| if x <= 0.0 { 1.0 } else { 0.0 }, 1.0, false).unwrap();
    assert_eq!(bound_measure(&idle, &sol, &cert).half_width, 2.0 * cert.dist_bound);
}

#[test]
fn random_chains_have_y_star_in_unit_interval() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let n = rng.gen_range(2..8);
        let q = random_chain(&mut rng, n);
        let (_, ys) = e2_factor(&q).unwrap();
        assert!(ys.iter().all(|&y| y > 0.0 && y <= 1.0 + 1e-12));
    }
}
