//! Closed-form integrals of `exp` over a linear segment.
//!
//! Every quantity the estimators need (mass, distribution function, integrated
//! distribution function, moments, gradient and Hessian of the mass) reduces to
//!
//! ```text
//! J_ab(r, s) = ∫₀¹ (1 − t)^a t^b exp((1 − t) r + t s) dt
//! ```
//!
//! for small `a + b`. All routines factor out `exp(max(r, s))` so they neither
//! overflow for large log-densities nor lose precision when `r ≈ s`.

/// `∫₀¹ exp((1 − t) r + t s) dt`, i.e. `(e^s − e^r) / (s − r)` with the
/// removable singularity at `r = s` filled in.
pub fn j_value(r: f64, s: f64) -> f64 {
    let hi = r.max(s);
    let d = (s - r).abs();
    if d < 1e-5 {
        // (1 − e^{−d}) / d = Σ_k (−d)^k / (k + 1)!
        let series = 1.0 - d / 2.0 + d * d / 6.0 - d * d * d / 24.0 + d.powi(4) / 120.0
            - d.powi(5) / 720.0;
        hi.exp() * series
    } else {
        hi.exp() * (-(-d).exp_m1()) / d
    }
}

/// The six low-order moments `J_ab` for `a + b ≤ 2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentMoments {
    pub j00: f64,
    pub j10: f64,
    pub j01: f64,
    pub j20: f64,
    pub j11: f64,
    pub j02: f64,
}

impl SegmentMoments {
    pub fn new(r: f64, s: f64) -> Self {
        if r >= s {
            let (scale, m0, m1, m2) = decaying(r, s);
            SegmentMoments {
                j00: scale * m0,
                j01: scale * m1,
                j02: scale * m2,
                j10: scale * (m0 - m1),
                j11: scale * (m1 - m2),
                j20: scale * (m0 - 2.0 * m1 + m2),
            }
        } else {
            // J_ab(r, s) = J_ba(s, r)
            let sw = SegmentMoments::new(s, r);
            SegmentMoments {
                j00: sw.j00,
                j01: sw.j10,
                j10: sw.j01,
                j02: sw.j20,
                j20: sw.j02,
                j11: sw.j11,
            }
        }
    }
}

/// `∫₀¹ (1 − t) exp((1 − t) r + t s) dt`.
pub fn j10(r: f64, s: f64) -> f64 {
    if r >= s {
        let (scale, m0, m1, _) = decaying(r, s);
        scale * (m0 - m1)
    } else {
        let (scale, _, m1, _) = decaying(s, r);
        scale * m1
    }
}

/// `∫₀¹ t exp((1 − t) r + t s) dt`.
pub fn j01(r: f64, s: f64) -> f64 {
    j10(s, r)
}

/// For `r ≥ s` returns `e^r` and `M_k = ∫₀¹ t^k e^{δ t} dt`, `k = 0, 1, 2`,
/// with `δ = s − r ≤ 0`.
fn decaying(r: f64, s: f64) -> (f64, f64, f64, f64) {
    let d = s - r;
    let scale = r.exp();
    if d > -1.0 {
        let mut term = 1.0;
        let (mut m0, mut m1, mut m2) = (0.0, 0.0, 0.0);
        for j in 0..26 {
            let jf = j as f64;
            m0 += term / (jf + 1.0);
            m1 += term / (jf + 2.0);
            m2 += term / (jf + 3.0);
            term *= d / (jf + 1.0);
        }
        (scale, m0, m1, m2)
    } else {
        let e = d.exp();
        let m0 = d.exp_m1() / d;
        let m1 = (e - m0) / d;
        let m2 = (e - 2.0 * m1) / d;
        (scale, m0, m1, m2)
    }
}
