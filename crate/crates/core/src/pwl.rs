//! Piecewise-linear concave log-densities and their exact calculus.

use crate::error::{Error, Result};
use crate::kernels::{j_value, SegmentMoments};

/// Relative tolerance on successive slope differences.
pub const CONCAVITY_TOL: f64 = 1e-10;

/// One-sided slopes with magnitude at most this are treated as zero when
/// classifying the mode.
pub const FLAT_SLOPE_TOL: f64 = 1e-9;

/// Concave function that is linear between `knots` and `−∞` outside
/// `[knots[0], knots[K]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PwlConcave {
    knots: Vec<f64>,
    values: Vec<f64>,
}

/// How a candidate mode sits relative to the kinks of a mode-constrained fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KnotClass {
    /// Positive slope on the left, flat on the right.
    Left,
    /// Flat on the left, negative slope on the right.
    Right,
    /// Flat on both sides.
    NotKnot,
    /// Strict peak: positive left slope and negative right slope.
    Both,
}

impl KnotClass {
    pub fn is_left(self) -> bool {
        matches!(self, KnotClass::Left | KnotClass::Both)
    }

    pub fn is_right(self) -> bool {
        matches!(self, KnotClass::Right | KnotClass::Both)
    }

    pub fn label(self) -> &'static str {
        match self {
            KnotClass::Left => "LK",
            KnotClass::Right => "RK",
            KnotClass::NotKnot => "NK",
            KnotClass::Both => "BOTH",
        }
    }
}

/// The requirement that the log-density peaks at `m`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeConstraint {
    pub m: f64,
}

impl ModeConstraint {
    pub fn new(m: f64) -> Self {
        ModeConstraint { m }
    }

    /// Left slope at `m` is nonnegative and right slope nonpositive, up to `tol`.
    pub fn is_satisfied_by(&self, f: &PwlConcave, tol: f64) -> bool {
        if !f.contains(self.m) {
            return false;
        }
        let (l, r) = f.one_sided_slopes(self.m);
        l.unwrap_or(0.0) >= -tol && r.unwrap_or(0.0) <= tol
    }
}

impl PwlConcave {
    pub fn new(knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if knots.len() != values.len() {
            return Err(Error::LengthMismatch(knots.len(), values.len()));
        }
        if knots.len() < 2 {
            return Err(Error::DegenerateSample(knots.len()));
        }
        if let Some(i) = knots
            .iter()
            .zip(&values)
            .position(|(x, v)| !x.is_finite() || !v.is_finite())
        {
            return Err(Error::NonFinite(i));
        }
        if let Some(i) = knots.windows(2).position(|w| w[0] >= w[1]) {
            return Err(Error::NotIncreasing(i + 1));
        }
        let f = PwlConcave { knots, values };
        let slopes = f.slopes();
        for (i, w) in slopes.windows(2).enumerate() {
            let excess = w[1] - w[0];
            if excess > CONCAVITY_TOL * (1.0 + w[0].abs().max(w[1].abs())) {
                return Err(Error::NotConcave {
                    index: i + 1,
                    excess,
                });
            }
        }
        Ok(f)
    }

    /// Constant log-density `value` on `[lo, hi]`.
    pub fn constant(lo: f64, hi: f64, value: f64) -> Result<Self> {
        PwlConcave::new(vec![lo, hi], vec![value, value])
    }

    /// Uniform density on `[lo, hi]`.
    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        PwlConcave::constant(lo, hi, -(hi - lo).ln())
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn lo(&self) -> f64 {
        self.knots[0]
    }

    pub fn hi(&self) -> f64 {
        self.knots[self.knots.len() - 1]
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo() && x <= self.hi()
    }

    pub fn slopes(&self) -> Vec<f64> {
        self.knots
            .windows(2)
            .zip(self.values.windows(2))
            .map(|(k, v)| (v[1] - v[0]) / (k[1] - k[0]))
            .collect()
    }

    /// `φ(x)`, `−∞` off the domain.
    pub fn eval(&self, x: f64) -> f64 {
        if !self.contains(x) {
            return f64::NEG_INFINITY;
        }
        let i = self.segment_of(x);
        let (x0, x1) = (self.knots[i], self.knots[i + 1]);
        let (v0, v1) = (self.values[i], self.values[i + 1]);
        if x == x1 {
            return v1;
        }
        let t = (x - x0) / (x1 - x0);
        v0 + t * (v1 - v0)
    }

    pub fn density(&self, x: f64) -> f64 {
        self.eval(x).exp()
    }

    /// Index `i` of the segment `[knots[i], knots[i+1]]` holding `x`
    /// (the left one at interior knots). `x` must be in the domain.
    fn segment_of(&self, x: f64) -> usize {
        let k = self.knots.partition_point(|&t| t < x);
        k.saturating_sub(1).min(self.knots.len() - 2)
    }

    /// Slopes just left and just right of `x`; `None` beyond the domain ends.
    pub fn one_sided_slopes(&self, x: f64) -> (Option<f64>, Option<f64>) {
        let slopes = self.slopes();
        let left = if x <= self.lo() {
            None
        } else {
            // segment with knots[i] < x <= knots[i+1]
            let i = self.knots.partition_point(|&t| t < x) - 1;
            Some(slopes[i.min(slopes.len() - 1)])
        };
        let right = if x >= self.hi() {
            None
        } else {
            // segment with knots[i] <= x < knots[i+1]
            let i = self.knots.partition_point(|&t| t <= x) - 1;
            Some(slopes[i])
        };
        (left, right)
    }

    /// `∫ exp(φ)`.
    pub fn exp_integral(&self) -> f64 {
        self.knots
            .windows(2)
            .zip(self.values.windows(2))
            .map(|(k, v)| (k[1] - k[0]) * j_value(v[0], v[1]))
            .sum()
    }

    /// `∫_{−∞}^t exp(φ)`; not renormalized.
    pub fn cdf(&self, t: f64) -> f64 {
        if t <= self.lo() {
            return 0.0;
        }
        let mut acc = 0.0;
        for i in 0..self.knots.len() - 1 {
            let (x0, x1) = (self.knots[i], self.knots[i + 1]);
            if t >= x1 {
                acc += (x1 - x0) * j_value(self.values[i], self.values[i + 1]);
            } else {
                let vt = self.eval(t);
                acc += (t - x0) * j_value(self.values[i], vt);
                break;
            }
        }
        acc
    }

    /// Mean and variance of the density `exp(φ) / ∫ exp(φ)`.
    pub fn mean_var(&self) -> (f64, f64) {
        let mut mass = 0.0;
        let mut first = 0.0;
        let segs: Vec<(f64, f64, SegmentMoments)> = self
            .knots
            .windows(2)
            .zip(self.values.windows(2))
            .map(|(k, v)| (k[0], k[1] - k[0], SegmentMoments::new(v[0], v[1])))
            .collect();
        for &(a, h, m) in &segs {
            mass += h * m.j00;
            first += h * (a * m.j00 + h * m.j01);
        }
        let mu = first / mass;
        let second: f64 = segs
            .iter()
            .map(|&(a, h, m)| {
                let c = a - mu;
                h * (c * c * m.j00 + 2.0 * c * h * m.j01 + h * h * m.j02)
            })
            .sum();
        (mu, second / mass)
    }

    /// Shifts values so that `∫ exp(φ) = 1`.
    pub fn normalized(&self) -> PwlConcave {
        let c = self.exp_integral().ln();
        PwlConcave {
            knots: self.knots.clone(),
            values: self.values.iter().map(|v| v - c).collect(),
        }
    }

    /// Classifies `m` as a knot of a mode-constrained fit.
    pub fn knot_class(&self, m: f64) -> Result<KnotClass> {
        if !self.contains(m) {
            return Err(Error::OutOfDomain(m, self.lo(), self.hi()));
        }
        let (l, r) = self.one_sided_slopes(m);
        let (l, r) = (l.unwrap_or(0.0), r.unwrap_or(0.0));
        if l < -FLAT_SLOPE_TOL || r > FLAT_SLOPE_TOL {
            return Err(Error::ModeInfeasible {
                m,
                left: l,
                right: r,
            });
        }
        let rising = l > FLAT_SLOPE_TOL;
        let falling = r < -FLAT_SLOPE_TOL;
        Ok(match (rising, falling) {
            (true, true) => KnotClass::Both,
            (true, false) => KnotClass::Left,
            (false, true) => KnotClass::Right,
            (false, false) => KnotClass::NotKnot,
        })
    }

    /// Sup-norm distance between two functions on the intersection of their
    /// domains, or `∞` if the domains differ by more than `domain_tol`.
    pub fn sup_distance(&self, other: &PwlConcave, domain_tol: f64) -> f64 {
        if (self.lo() - other.lo()).abs() > domain_tol || (self.hi() - other.hi()).abs() > domain_tol
        {
            return f64::INFINITY;
        }
        let lo = self.lo().max(other.lo());
        let hi = self.hi().min(other.hi());
        self.knots
            .iter()
            .chain(other.knots.iter())
            .map(|&x| x.clamp(lo, hi))
            .map(|x| (self.eval(x) - other.eval(x)).abs())
            .fold(0.0, f64::max)
    }
}
