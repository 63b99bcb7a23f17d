//! Independent numerical oracles and instance generators shared by the
//! integration tests. Nothing here calls the quadrature or kernels of the
//! library under test.

#![allow(dead_code)]

use logcave_core::simulate::{sample_density, TrueDensity};
use logcave_core::{PwlConcave, SortedSample};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[−1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// `∫_a^b f` by the `n`-point Gauss–Legendre rule.
pub fn gl_integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let (x, w) = gauss_legendre(n);
    let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
    x.iter().zip(&w).map(|(x, w)| w * f(c + h * x)).sum::<f64>() * h
}

/// Adaptive Simpson quadrature to absolute tolerance `tol`.
pub fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    if b <= a {
        return 0.0;
    }
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 40)
}

/// Composite trapezoid rule with `k` panels.
pub fn trapezoid<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, k: usize) -> f64 {
    let h = (b - a) / k as f64;
    let inner: f64 = (1..k).map(|i| f(a + i as f64 * h)).sum();
    h * (0.5 * (f(a) + f(b)) + inner)
}

/// `∫ g` over the domain of a piecewise-linear function, panel by panel.
pub fn integrate_over_knots<F: Fn(f64) -> f64>(f: &PwlConcave, g: F) -> f64 {
    f.knots()
        .windows(2)
        .map(|w| gl_integrate(&g, w[0], w[1], 40))
        .sum()
}

/// Least concave majorant of the points `(x_i, v_i)`, as a function on the
/// hull vertices.
pub fn concave_majorant(x: &[f64], v: &[f64]) -> PwlConcave {
    let mut hull: Vec<usize> = Vec::new();
    for i in 0..x.len() {
        while hull.len() >= 2 {
            let (a, b) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            let cross = (x[b] - x[a]) * (v[i] - v[a]) - (v[b] - v[a]) * (x[i] - x[a]);
            if cross >= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(i);
    }
    PwlConcave::new(hull.iter().map(|&i| x[i]).collect(), hull.iter().map(|&i| v[i]).collect())
        .expect("hull is concave")
}

/// A fit moved by `eps` at its `i`-th knot, made concave again and
/// renormalized.
pub fn perturb(f: &PwlConcave, i: usize, eps: f64) -> PwlConcave {
    let mut v = f.values().to_vec();
    v[i] += eps;
    concave_majorant(f.knots(), &v).normalized()
}

/// Index of a random genuine kink of `f`, or of an endpoint when `f` is
/// linear.
pub fn pick_knot(r: &mut ChaCha8Rng, f: &PwlConcave) -> usize {
    let kinks = logcave_core::characterization::kinks(f);
    let idx: Vec<usize> = f.knots().iter().enumerate().filter(|(_, x)| kinks.contains(x)).map(|(i, _)| i).collect();
    if idx.is_empty() {
        return if r.gen_bool(0.5) { 0 } else { f.knots().len() - 1 };
    }
    idx[r.gen_range(0..idx.len())]
}

/// A random concave function with at most `max_knots` knots.
pub fn random_concave(rng: &mut ChaCha8Rng, max_knots: usize) -> PwlConcave {
    let k = rng.gen_range(2..=max_knots);
    let mut x: Vec<f64> = (0..k).map(|_| rng.gen_range(-4.0..4.0)).collect();
    x.sort_by(f64::total_cmp);
    x.dedup_by(|a, b| (*a - *b).abs() < 1e-3);
    if x.len() < 2 {
        x = vec![-1.0, 1.0];
    }
    let mut slope = rng.gen_range(0.0..4.0);
    let mut v = vec![rng.gen_range(-2.0..1.0)];
    for w in x.windows(2) {
        let last = *v.last().unwrap();
        v.push(last + slope * (w[1] - w[0]));
        slope -= rng.gen_range(0.0..3.0);
    }
    PwlConcave::new(x, v).unwrap()
}

pub fn families() -> [TrueDensity; 3] {
    [TrueDensity::StdNormal, TrueDensity::Gumbel, TrueDensity::Gamma2]
}

/// A random instance: family, sample of size `5..=200` and a mode inside the
/// central 80% quantile range of the family.
pub fn random_instance(rng: &mut ChaCha8Rng) -> (TrueDensity, SortedSample, f64) {
    let d = families()[rng.gen_range(0..3)].clone();
    let n = rng.gen_range(5..=200);
    let s = sample_density(&d, n, rng.gen()).unwrap();
    let m = d.quantile(rng.gen_range(0.1..0.9));
    (d, s, m)
}
