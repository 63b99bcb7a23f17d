//! Adaptive Gauss–Kronrod (7/15) quadrature.

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728_0,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Kronrod estimate and error estimate on one interval.
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// `∫_a^b f` to absolute error `tol`, refining by bisection to at most
/// `max_depth` levels.
pub fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, max_depth: usize) -> f64 {
    fn rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: usize, est: (f64, f64)) -> f64 {
        if est.1 <= tol || depth == 0 || b - a < 1e-14 * (1.0 + a.abs()) {
            return est.0;
        }
        let m = 0.5 * (a + b);
        let l = gk15(f, a, m);
        let r = gk15(f, m, b);
        rec(f, a, m, 0.5 * tol, depth - 1, l) + rec(f, m, b, 0.5 * tol, depth - 1, r)
    }
    if !(b > a) {
        return 0.0;
    }
    rec(f, a, b, tol, max_depth, gk15(f, a, b))
}

/// Sum of [`integrate`] over consecutive breakpoints, so kinks of the
/// integrand never sit inside a panel.
pub fn integrate_pieces<F: Fn(f64) -> f64>(f: &F, breaks: &[f64], tol: f64) -> f64 {
    let k = breaks.len().saturating_sub(1).max(1) as f64;
    breaks
        .windows(2)
        .map(|w| integrate(f, w[0], w[1], tol / k, 40))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomials_and_exponentials() {
        let v = integrate(&|x: f64| x.powi(5) - 2.0 * x, 0.0, 2.0, 1e-14, 30);
        assert!((v - (64.0 / 6.0 - 4.0)).abs() < 1e-12);
        let v = integrate(&|x: f64| x.exp(), 0.0, 1.0, 1e-14, 30);
        assert!((v - (1f64.exp() - 1.0)).abs() < 1e-13);
    }

    #[test]
    fn kinked_integrand_with_breaks() {
        let f = |x: f64| (x - 0.3).abs();
        let v = integrate_pieces(&f, &[0.0, 0.3, 1.0], 1e-13);
        assert!((v - (0.045 + 0.245)).abs() < 1e-12);
    }

    #[test]
    fn sqrt_singularity_converges() {
        let v = integrate(&|x: f64| x.sqrt(), 0.0, 1.0, 1e-10, 50);
        assert!((v - 2.0 / 3.0).abs() < 1e-9);
    }
}
