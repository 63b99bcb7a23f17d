mod common;

use common::*;
use logcave_core::augment::augment;
use logcave_core::mle::{psi_gradient, psi_of_values};
use logcave_core::processes::Processes;
use logcave_core::simulate::{sample_density, TrueDensity};
use logcave_core::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn j_value_is_symmetric_and_matches_gauss_legendre(r in -30.0f64..30.0, s in -30.0f64..30.0) {
        prop_assert_eq!(j_value(r, s), j_value(s, r));
        let exact = gl_integrate(|t| ((1.0 - t) * r + t * s).exp(), 0.0, 1.0, 200);
        let rel = (j_value(r, s) - exact).abs() / exact;
        prop_assert!(rel <= 1e-12, "r={} s={} rel={:e}", r, s, rel);
    }

    #[test]
    fn j_value_near_the_diagonal(r in -30.0f64..30.0, e in -1e-4f64..1e-4) {
        let s = r + e;
        let exact = gl_integrate(|t| ((1.0 - t) * r + t * s).exp(), 0.0, 1.0, 200);
        prop_assert!((j_value(r, s) - exact).abs() <= 1e-12 * exact);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn mean_and_variance_match_quadrature(seed in any::<u64>()) {
        let f = random_concave(&mut rng(seed), 10);
        let dens = |x: f64| f.eval(x).exp();
        let scale = trapezoid(dens, f.lo(), f.hi(), 1000);
        let tol = 1e-13 * scale;
        let mass: f64 = f.knots().windows(2).map(|w| simpson(&dens, w[0], w[1], tol)).sum();
        let m1: f64 = f.knots().windows(2).map(|w| simpson(&|x| x * dens(x), w[0], w[1], tol)).sum();
        let mu = m1 / mass;
        let m2: f64 = f.knots().windows(2).map(|w| simpson(&|x| (x - mu).powi(2) * dens(x), w[0], w[1], tol)).sum();
        let var = m2 / mass;
        let (a, b) = f.mean_var();
        prop_assert!((a - mu).abs() <= 1e-9 * (1.0 + mu.abs()), "{} vs {}", a, mu);
        prop_assert!((b - var).abs() <= 1e-9 * var, "{} vs {}", b, var);
    }

    #[test]
    fn cdf_at_the_right_end_is_the_total_mass(seed in any::<u64>()) {
        let f = random_concave(&mut rng(seed), 12);
        prop_assert_eq!(f.cdf(f.hi()), f.exp_integral());
    }

    #[test]
    fn processes_are_nonnegative_and_y_left_is_convex(seed in any::<u64>()) {
        let mut r = rng(seed);
        let f = random_concave(&mut r, 8);
        let n = r.gen_range(2..40);
        let xs: Vec<f64> = (0..n).map(|_| r.gen_range(f.lo()..f.hi())).collect();
        let Ok(s) = SortedSample::from_observations(&xs) else { return Ok(()) };
        let (lo, hi) = (s.min().min(f.lo()), s.max().max(f.hi()));
        let ts: Vec<f64> = (0..=400).map(|i| (lo + (hi - lo) * i as f64 / 400.0).min(hi)).collect();
        let rows = lr_processes(&f, &s, None, &ts).unwrap();
        for row in &rows {
            for v in [row.y_left, row.y_right, row.h_left, row.h_right, row.fit_left, row.fit_right, row.emp_left, row.emp_right] {
                prop_assert!(v >= 0.0, "negative process value {:e} at {}", v, row.t);
            }
        }
        for w in rows.windows(3) {
            prop_assert!(w[1].y_left >= w[0].y_left);
            prop_assert!(w[2].y_left - 2.0 * w[1].y_left + w[0].y_left >= -1e-12);
        }
    }

    #[test]
    fn augmentation_is_idempotent_and_reversible(seed in any::<u64>()) {
        let mut r = rng(seed);
        let n = r.gen_range(2..30);
        let xs: Vec<f64> = (0..n).map(|_| r.gen_range(-5.0..5.0)).collect();
        let s = SortedSample::from_observations(&xs).unwrap();
        let m = if r.gen_bool(0.3) { s.points()[r.gen_range(0..s.len())] } else { r.gen_range(-6.0..6.0) };
        let a = augment(&s, m);
        prop_assert_eq!(a.z[a.mode_index], m);
        prop_assert_eq!(a.without_mode(), s.points().to_vec());
        let again = SortedSample::from_weighted(a.z.clone(), a.weights.clone(), s.n_raw());
        if let Ok(again) = again {
            let b = augment(&again, m);
            prop_assert_eq!(&b.z, &a.z);
            prop_assert_eq!(&b.weights, &a.weights);
        }
    }

    #[test]
    fn gradient_matches_central_differences(seed in any::<u64>()) {
        let mut r = rng(seed);
        let k = r.gen_range(2..15);
        let mut x: Vec<f64> = (0..k).map(|_| r.gen_range(-3.0..3.0)).collect();
        x.sort_by(f64::total_cmp);
        x.dedup();
        prop_assume!(x.len() >= 2);
        let raw: Vec<f64> = (0..x.len()).map(|_| r.gen_range(0.1..1.0)).collect();
        let tot: f64 = raw.iter().sum();
        let w: Vec<f64> = raw.iter().map(|v| v / tot).collect();
        let v: Vec<f64> = (0..x.len()).map(|_| r.gen_range(-3.0..1.0)).collect();
        let g = psi_gradient(&x, &w, &v);
        let h = 1e-6;
        for i in 0..x.len() {
            let (mut up, mut dn) = (v.clone(), v.clone());
            up[i] += h;
            dn[i] -= h;
            let fd = (psi_of_values(&x, &w, &up) - psi_of_values(&x, &w, &dn)) / (2.0 * h);
            prop_assert!((fd - g[i]).abs() <= 1e-5 * (1.0 + g[i].abs()), "node {}: {} vs {}", i, fd, g[i]);
        }
    }

    #[test]
    fn oracle_is_translation_equivariant(seed in any::<u64>(), shift in -50.0f64..50.0) {
        let mut r = rng(seed);
        let n = r.gen_range(2..=6);
        let xs: Vec<f64> = (0..n).map(|_| r.gen_range(-2.0..2.0)).collect();
        let s = SortedSample::from_observations(&xs).unwrap();
        let m = r.gen_range(s.min()..s.max());
        let moved: Vec<f64> = xs.iter().map(|x| x + shift).collect();
        let t = SortedSample::from_observations(&moved).unwrap();
        let a = fit_exact_small(&s, None).unwrap();
        let b = fit_exact_small(&t, None).unwrap();
        prop_assert!((a.best.psi - b.best.psi).abs() <= 1e-10);
        if let (Ok(c), Ok(d)) = (fit_exact_small(&s, Some(m)), fit_exact_small(&t, Some(m + shift))) {
            prop_assert!((c.best.psi - d.best.psi).abs() <= 1e-10);
            prop_assert!(c.best.psi <= a.best.psi + 1e-12);
        }
    }

    #[test]
    fn left_processes_ignore_data_right_of_the_split(seed in any::<u64>()) {
        let mut r = rng(seed);
        let f = random_concave(&mut r, 6);
        let n = r.gen_range(4..30);
        let mut xs: Vec<f64> = (0..n).map(|_| r.gen_range(f.lo()..f.hi())).collect();
        xs.sort_by(f64::total_cmp);
        let split = xs[n / 2];
        // move every point above the split while keeping the extremes
        let moved: Vec<f64> = xs.iter().enumerate().map(|(i, &x)| {
            if x > split && i != n - 1 { split + (x - split) * r.gen_range(0.2..0.9) } else { x }
        }).collect();
        let (Ok(a), Ok(b)) = (SortedSample::from_observations(&xs), SortedSample::from_observations(&moved)) else { return Ok(()) };
        let pa = Processes::new(&f, &a, None);
        let pb = Processes::new(&f, &b, None);
        let lo = pa.lo();
        let mut right_changed = false;
        for i in 0..=50 {
            let t = (lo + (split - lo) * i as f64 / 50.0).min(split);
            let (ra, rb) = (pa.at(t).unwrap(), pb.at(t).unwrap());
            prop_assert!((ra.y_left - rb.y_left).abs() <= 1e-13 * (1.0 + ra.y_left.abs()));
            prop_assert!((ra.h_left - rb.h_left).abs() <= 1e-13 * (1.0 + ra.h_left.abs()));
            let t = (split + (pa.hi() - split) * i as f64 / 50.0).min(pa.hi());
            let (ra, rb) = (pa.at(t).unwrap(), pb.at(t).unwrap());
            right_changed |= (ra.y_right - rb.y_right).abs() > 1e-12 || (ra.y_left - rb.y_left).abs() > 1e-12;
            prop_assert!((ra.h_right - rb.h_right).abs() <= 1e-13 * (1.0 + ra.h_right.abs()));
        }
        let any_moved = xs.iter().zip(&moved).any(|(a, b)| a != b);
        prop_assert!(right_changed || !any_moved);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(60))]

    #[test]
    fn fits_are_certified_and_perturbations_are_caught(seed in any::<u64>()) {
        let mut r = rng(seed);
        let (_, s, m) = random_instance(&mut r);
        let opts = SolverOptions::default();
        let u = fit_unconstrained(&s, &opts).unwrap();
        let c = fit_constrained(&s, m, &opts).unwrap();
        prop_assert!(verify_unconstrained(&u.estimate, &s, 1e-8).unwrap().pass);
        prop_assert!(verify_constrained(&c.estimate, &s, m, 1e-8).unwrap().pass);
        for trace in [&u.trace, &c.trace] {
            for w in trace.windows(2) {
                // equal up to the rounding of one evaluation of the criterion
                prop_assert!(w[1] >= w[0] - 1e-13 * (1.0 + w[0].abs()), "ascent broken: {} then {}", w[0], w[1]);
            }
        }
        prop_assert!(c.loglik <= u.loglik + 1e-9);
        let (mu, var) = u.estimate.mean_var();
        prop_assert!((mu - s.mean()).abs() <= 1e-8);
        prop_assert!(var <= s.variance() + 1e-8);

        let eps = if r.gen_bool(0.5) { 1e-3 } else { -1e-3 };
        let i = pick_knot(&mut r, &u.estimate);
        let pu = perturb(&u.estimate, i, eps);
        prop_assert!(!verify_unconstrained(&pu, &s, 1e-8).map(|r| r.pass).unwrap_or(false));
        let j = pick_knot(&mut r, &c.estimate);
        let pc = perturb(&c.estimate, j, eps);
        prop_assert!(!verify_constrained(&pc, &s, m, 1e-8).map(|r| r.pass).unwrap_or(false));
    }

    #[test]
    fn touching_bounds_hold_at_the_knots(seed in any::<u64>()) {
        let mut r = rng(seed);
        let (_, s, m) = random_instance(&mut r);
        let opts = SolverOptions::default();
        let u = fit_unconstrained(&s, &opts).unwrap();
        let c = fit_constrained(&s, m, &opts).unwrap();
        let n = s.n_raw() as f64;
        for (f, skip) in [(&u.estimate, None), (&c.estimate, Some(m))] {
            let k = f.knots();
            for &t in &k[1..k.len() - 1] {
                if skip == Some(t) {
                    continue;
                }
                let fhat = f.cdf(t) / f.exp_integral();
                let emp = s.ecdf(t);
                prop_assert!(fhat <= emp + 1e-8 && fhat >= emp - 1.0 / n - 1e-8, "knot {}: {} vs {}", t, fhat, emp);
            }
        }
    }
}

#[test]
fn samples_and_fits_are_reproducible() {
    let d = TrueDensity::Gumbel;
    let a = sample_density(&d, 150, 42).unwrap();
    let b = sample_density(&d, 150, 42).unwrap();
    assert_eq!(a, b);
    let opts = SolverOptions::default();
    assert_eq!(fit_constrained(&a, 0.3, &opts).unwrap().estimate, fit_constrained(&b, 0.3, &opts).unwrap().estimate);
}

#[test]
fn hellinger_medians_shrink_and_misspecification_has_a_floor() {
    let d = TrueDensity::StdNormal;
    let opts = SolverOptions::default();
    let grid = [300usize, 1000, 3000];
    let medians = |m: f64| -> Vec<f64> {
        grid.iter()
            .map(|&n| {
                let errs: Vec<f64> = (0..40u64)
                    .map(|rep| {
                        let s = sample_density(&d, n, logcave_core::stats::rep_seed(99, n as u64, rep)).unwrap();
                        hellinger(&fit_constrained(&s, m, &opts).unwrap().estimate, &d)
                    })
                    .collect();
                logcave_core::stats::median(&errs)
            })
            .collect()
    };
    let good = medians(0.0);
    let inversions = good.windows(2).filter(|w| w[1] > w[0]).count();
    assert!(inversions <= 1, "{good:?}");
    let bad = medians(1.0);
    assert!(bad[2] >= 0.5 * bad[0], "{bad:?}");
    assert!(bad[2] / bad[0] > good[2] / good[0], "{bad:?} vs {good:?}");
}
