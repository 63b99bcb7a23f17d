use logcave_core::limit::*;
use logcave_core::stats::{ks_two_sample, median};

fn opts() -> LimitOptions {
    LimitOptions::default()
}

fn objective(p: &DriverPath, g: &[f64]) -> f64 {
    g.iter()
        .zip(&p.increments)
        .map(|(g, dx)| 0.5 * p.delta * g * g - g * dx)
        .sum()
}

#[test]
fn brownian_moments_over_many_seeds() {
    let reps = 10_000u64;
    let (mut w1, mut int) = (Vec::new(), Vec::new());
    for seed in 0..reps {
        let p = simulate_driver(4.0, 0.01, seed).unwrap();
        let k = p.centre();
        // edges k+1, k+2, ... sit at δ/2, 3δ/2, ...; the edge at 0.995 is k + 100
        let e = k + 100;
        w1.push(p.w_edges[e] / p.edges[e].sqrt());
        let mut acc = 0.5 * p.w_edges[k + 1] * p.edges[k + 1];
        for j in k + 1..e {
            acc += 0.5 * (p.w_edges[j] + p.w_edges[j + 1]) * p.delta;
        }
        acc += p.w_edges[e] * (1.0 - p.edges[e]);
        int.push(acc);
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let var = |v: &[f64]| {
        let m = mean(v);
        v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64
    };
    assert!((var(&w1) - 1.0).abs() <= 0.05, "Var W(1) = {}", var(&w1));
    // four standard errors of the mean of a variance-1/3 variable
    assert!(mean(&int).abs() <= 4.0 * (1.0 / 3.0 / reps as f64).sqrt(), "E ∫W = {}", mean(&int));
    assert!((var(&int) / (1.0 / 3.0) - 1.0).abs() <= 0.05, "Var ∫W = {}", var(&int));
}

#[test]
fn zero_noise_constrained_fit_is_the_drift() {
    let p = DriverPath::drift_only(5.0, 0.005).unwrap();
    let c = invelope_constrained(&p, &opts()).unwrap();
    let k = p.centre();
    assert!(c.g.iter().all(|&v| v <= c.g[k]));
    let y: Vec<f64> = p.increments.iter().map(|d| d / p.delta).collect();
    let resid: f64 = c.g.iter().zip(&y).map(|(g, y)| (g - y).powi(2)).sum();
    assert!(resid <= 1e-16, "{resid:e} after {} iterations", c.iterations);
    let chk = check_constrained(&p, &c);
    assert!(chk.passes(1e-8, 1e-10), "{chk:?}");
}

#[test]
fn fits_are_certified_and_minimal_on_seeded_paths() {
    for seed in 0..20 {
        let p = simulate_driver(5.0, 0.005, seed).unwrap();
        let u = invelope_unconstrained(&p, &opts()).unwrap();
        let c = invelope_constrained_from(&p, &u, &opts()).unwrap();
        let cu = check_unconstrained(&p, &u);
        let cc = check_constrained(&p, &c);
        assert!(cu.passes(1e-8, 1e-10), "seed {seed}: {cu:?}");
        assert!(cc.passes(1e-8, 1e-10), "seed {seed}: {cc:?}");
        assert!(c.objective >= u.objective - 1e-12 * (1.0 + u.objective.abs()));

        // feasible competitors: the drift, the mode-capped unconstrained fit,
        // and concave perturbations of each fit
        let drift: Vec<f64> = p.grid.iter().map(|t| -12.0 * t * t).collect();
        assert!(objective(&p, &drift) >= u.objective);
        assert!(objective(&p, &drift) >= c.objective);
        let cap = u.g[p.centre()];
        let capped: Vec<f64> = u.g.iter().map(|&v| v.min(cap)).collect();
        assert!(objective(&p, &capped) >= c.objective - 1e-12 * (1.0 + c.objective.abs()));
        for eps in [1e-3, -1e-3] {
            let bumped: Vec<f64> = u.g.iter().zip(&p.grid).map(|(g, t)| g - eps * t.abs()).collect();
            if eps > 0.0 {
                assert!(objective(&p, &bumped) >= u.objective);
            }
            let shifted: Vec<f64> = c.g.iter().map(|g| g + eps).collect();
            assert!(objective(&p, &shifted) >= c.objective);
        }

        let (l, r) = c.slopes_at_zero(&p);
        assert!(l >= 0.0 && r <= 0.0, "seed {seed}: {l} {r}");
    }
}

#[test]
fn refinement_moves_the_value_at_zero_little() {
    for seed in 0..10 {
        let p = simulate_driver(5.0, 0.01, seed).unwrap();
        let q = refine_halving(&p, seed + 1000);
        let a = invelope_unconstrained(&p, &opts()).unwrap();
        let b = invelope_unconstrained(&q, &opts()).unwrap();
        let d = (a.value_at_zero(&p) - b.value_at_zero(&q)).abs();
        assert!(d <= 0.1, "seed {seed}: {d}");
        let a = invelope_constrained(&p, &opts()).unwrap();
        let b = invelope_constrained(&q, &opts()).unwrap();
        let d = (a.value_at_zero(&p) - b.value_at_zero(&q)).abs();
        assert!(d <= 0.1, "seed {seed}: {d}");
    }
}

#[test]
fn both_fits_meet_within_bounded_distance_of_every_point() {
    for seed in 100..120 {
        let p = simulate_driver(5.0, 0.005, seed).unwrap();
        let u = invelope_unconstrained(&p, &opts()).unwrap();
        let c = invelope_constrained_from(&p, &u, &opts()).unwrap();
        let d: Vec<f64> = u.g.iter().zip(&c.g).map(|(a, b)| a - b).collect();
        let inner = 0.9 * p.half_width();
        let mut meets = vec![-inner];
        meets.extend(
            (0..p.len() - 1)
                .filter(|&j| p.grid[j].abs() <= inner && (d[j].abs() <= 1e-6 || d[j] * d[j + 1] < 0.0))
                .map(|j| p.grid[j]),
        );
        meets.push(inner);
        let gap = meets.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
        assert!(gap <= 3.0, "seed {seed}: longest stretch without a meeting point {gap}");
    }
}

#[test]
fn constants_at_the_standard_normal() {
    let f0 = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
    let c = limit_constants(f0, -1.0).unwrap();
    // (2π/24)^{1/5} through logarithms
    let expected = ((2.0 * std::f64::consts::PI).ln() - 24f64.ln()) / 5.0;
    assert!((c.c_phi - expected.exp()).abs() < 1e-15);
    assert!((c.c_phi - 0.764_880_739_958).abs() < 1e-12);
    let scaled = limit_constants(f0, -32.0).unwrap();
    assert!((scaled.d_phi / c.d_phi - 8.0).abs() < 1e-12);
    assert!((scaled.d_f / c.d_f - 8.0).abs() < 1e-12);
    assert!(limit_constants(0.0, -1.0).is_err());
}

#[test]
fn limit_law_symmetry_scaling_and_tightness() {
    let reps = 2000;
    let base = limit_samples(reps, 5.0, 0.005, 1, 1.0, 1.0, false, &opts()).unwrap();
    assert_eq!(base.skipped, 0);
    assert!(median(&base.phi_unc).abs() <= 3.0);
    assert!(median(&base.phi_con).abs() <= 3.0);
    for (l, r) in base.dphi_con_left.iter().zip(&base.dphi_con_right) {
        assert!(*l >= 0.0 && *r <= 0.0);
    }

    let reflected = limit_samples(reps, 5.0, 0.005, 2, 1.0, 1.0, true, &opts()).unwrap();
    let ks = ks_two_sample(&base.phi_unc, &reflected.phi_unc);
    assert!(ks <= 0.05, "reflection KS {ks}");

    let (a, sigma) = (2.0f64, 1.5f64);
    let direct = limit_samples(reps, 5.0, 0.005, 1, a, sigma, false, &opts()).unwrap();
    let rescaled: Vec<f64> = base
        .phi_con
        .iter()
        .map(|v| sigma.powf(0.8) * a.powf(0.2) * v)
        .collect();
    let ks = ks_two_sample(&direct.phi_con, &rescaled);
    assert!(ks <= 0.06, "scaling KS {ks}");
}
