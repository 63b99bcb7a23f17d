//! Optimality certificates that check a claimed fit against the integrated
//! distribution-function characterization, independently of the solver.
//!
//! Unconstrained: `H_L ≤ Y_L` on the data range with equality at every knot.
//! Mode-constrained at `m`: `H_L ≤ Y_L` on `[lo, m]`, `H_R ≤ Y_R` on `[m, hi]`,
//! equality at the knots of each side, at `m` itself only as the knot
//! classification demands, and total mass one.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::processes::Processes;
use crate::pwl::{KnotClass, PwlConcave};
use crate::sample::SortedSample;

/// Evaluation points per gap between consecutive nodes.
pub const CHEBYSHEV_POINTS: usize = 64;

/// Relative slope change above which a knot counts as a kink.
pub const KNOT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CharacterizationReport {
    /// Worst positive excess of `H` over `Y` on the checked side(s).
    pub max_inequality_violation: f64,
    /// Worst `|H − Y|` where equality is required.
    pub max_knot_equality_gap: f64,
    /// Worst excursion of `F̂` outside `[F_n − atom, F_n]` at the knots.
    pub touching_violation: f64,
    /// `|∫ exp(φ) − 1|`.
    pub normalization_gap: f64,
    pub pass: bool,
    /// Classification of the mode for constrained checks.
    pub knot_class: Option<KnotClass>,
}

impl CharacterizationReport {
    pub fn max_residual(&self) -> f64 {
        self.max_inequality_violation
            .max(self.max_knot_equality_gap)
            .max(self.touching_violation)
            .max(self.normalization_gap)
    }

    fn finish(mut self, tol: f64) -> Self {
        self.pass = self.max_residual() <= tol;
        self
    }
}

/// Interior knots of `f` at which the slope genuinely changes.
pub fn kinks(f: &PwlConcave) -> Vec<f64> {
    let s = f.slopes();
    (1..f.knots().len() - 1)
        .filter(|&i| s[i - 1] - s[i] > KNOT_TOL * (1.0 + s[i].abs()))
        .map(|i| f.knots()[i])
        .collect()
}

/// Indices into `grid` of the endpoints of `f` and of its kinks.
pub fn knot_indices(f: &PwlConcave, grid: &[f64]) -> Vec<usize> {
    let mut out: Vec<usize> = std::iter::once(f.lo())
        .chain(kinks(f))
        .chain(std::iter::once(f.hi()))
        .filter_map(|x| grid.binary_search_by(|g| g.total_cmp(&x)).ok())
        .collect();
    out.dedup();
    out
}

/// Nodes plus Chebyshev points inside every gap.
fn check_points(nodes: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(nodes.len() * (CHEBYSHEV_POINTS + 1));
    for w in nodes.windows(2) {
        out.push(w[0]);
        let (mid, half) = (0.5 * (w[0] + w[1]), 0.5 * (w[1] - w[0]));
        for j in (0..CHEBYSHEV_POINTS).rev() {
            let c = ((2 * j + 1) as f64 * PI / (2 * CHEBYSHEV_POINTS) as f64).cos();
            let x = mid + half * c;
            if x > w[0] && x < w[1] {
                out.push(x);
            }
        }
    }
    out.push(nodes[nodes.len() - 1]);
    out
}

fn check_domain(f: &PwlConcave, lo: f64, hi: f64) -> Result<()> {
    let tol = 1e-12 * (1.0 + lo.abs().max(hi.abs()));
    if (f.lo() - lo).abs() > tol || (f.hi() - hi).abs() > tol {
        return Err(Error::DomainMismatch {
            got_lo: f.lo(),
            got_hi: f.hi(),
            want_lo: lo,
            want_hi: hi,
        });
    }
    Ok(())
}

fn touching(p: &Processes, s: &SortedSample, at: &[f64]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for &t in at {
        let r = p.at(t)?;
        let upper = r.fit_left - s.ecdf(t);
        let lower = s.ecdf(t) - s.atom(t) - r.fit_left;
        worst = worst.max(upper).max(lower);
    }
    Ok(worst)
}

/// Checks `f` against the characterization of the unconstrained MLE.
pub fn verify_unconstrained(
    f: &PwlConcave,
    s: &SortedSample,
    tol: f64,
) -> Result<CharacterizationReport> {
    check_domain(f, s.min(), s.max())?;
    let p = Processes::new(f, s, None);
    let mut ineq: f64 = 0.0;
    for t in check_points(p.nodes()) {
        let r = p.at(t)?;
        ineq = ineq.max(r.h_left - r.y_left);
    }
    let inner = kinks(f);
    let mut eq: f64 = 0.0;
    for &t in inner.iter().chain(&[f.lo(), f.hi()]) {
        let r = p.at(t)?;
        eq = eq.max((r.h_left - r.y_left).abs());
    }
    Ok(CharacterizationReport {
        max_inequality_violation: ineq,
        max_knot_equality_gap: eq,
        touching_violation: touching(&p, s, &inner)?,
        normalization_gap: (f.exp_integral() - 1.0).abs(),
        pass: false,
        knot_class: None,
    }
    .finish(tol))
}

/// Checks `f` against the characterization of the MLE with mode `m`.
pub fn verify_constrained(
    f: &PwlConcave,
    s: &SortedSample,
    m: f64,
    tol: f64,
) -> Result<CharacterizationReport> {
    check_domain(f, s.min().min(m), s.max().max(m))?;
    let class = f.knot_class(m)?;
    let p = Processes::new(f, s, Some(m));
    let mut ineq: f64 = 0.0;
    for t in check_points(p.nodes()) {
        let r = p.at(t)?;
        if t <= m {
            ineq = ineq.max(r.h_left - r.y_left);
        }
        if t >= m {
            ineq = ineq.max(r.h_right - r.y_right);
        }
    }
    let inner: Vec<f64> = kinks(f).into_iter().filter(|&t| t != m).collect();
    let mut left: Vec<f64> = inner.iter().copied().filter(|&t| t < m).collect();
    let mut right: Vec<f64> = inner.iter().copied().filter(|&t| t > m).collect();
    left.push(f.lo());
    right.push(f.hi());
    if class.is_left() {
        left.push(m);
    }
    if class.is_right() {
        right.push(m);
    }
    let mut eq: f64 = 0.0;
    for &t in &left {
        let r = p.at(t)?;
        eq = eq.max((r.h_left - r.y_left).abs());
    }
    for &t in &right {
        let r = p.at(t)?;
        eq = eq.max((r.h_right - r.y_right).abs());
    }
    Ok(CharacterizationReport {
        max_inequality_violation: ineq,
        max_knot_equality_gap: eq,
        touching_violation: touching(&p, s, &inner)?,
        normalization_gap: (f.exp_integral() - 1.0).abs(),
        pass: false,
        knot_class: Some(class),
    }
    .finish(tol))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CrossingKind {
    CdfEqual,
    DensityEqual,
}

impl CrossingKind {
    pub fn label(self) -> &'static str {
        match self {
            CrossingKind::CdfEqual => "CDF_EQUAL",
            CrossingKind::DensityEqual => "DENSITY_EQUAL",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossingDiagnostics {
    /// The two fits coincide, so every point is a crossing.
    pub degenerate: bool,
    pub roots: Vec<(f64, CrossingKind)>,
}

impl CrossingDiagnostics {
    pub fn of_kind(&self, kind: CrossingKind) -> Vec<f64> {
        self.roots
            .iter()
            .filter(|r| r.1 == kind)
            .map(|r| r.0)
            .collect()
    }
}

/// Abscissae where consecutive nonzero signs of `g` on `xs` flip, refined by
/// `refine(a, b)`.
fn sign_changes(
    xs: &[f64],
    g: &dyn Fn(f64) -> f64,
    eps: f64,
    refine: &dyn Fn(f64, f64) -> f64,
) -> Vec<f64> {
    let vals: Vec<f64> = xs.iter().map(|&x| g(x)).collect();
    let mut out = Vec::new();
    let mut last: Option<usize> = None;
    for i in 0..xs.len() {
        if vals[i].abs() <= eps {
            continue;
        }
        if let Some(j) = last {
            if vals[j].signum() != vals[i].signum() {
                if i == j + 1 {
                    out.push(refine(xs[j], xs[i]));
                } else {
                    out.push(xs[j + 1]);
                }
            }
        }
        last = Some(i);
    }
    out
}

/// Sign changes of `F̂⁰ − F̂` and `f̂⁰ − f̂` on the common domain of an
/// unconstrained fit `fu` and a constrained fit `fc`.
pub fn crossing_diagnostics(fu: &PwlConcave, fc: &PwlConcave) -> CrossingDiagnostics {
    let lo = fu.lo().max(fc.lo());
    let hi = fu.hi().min(fc.hi());
    let mut knots: Vec<f64> = fu
        .knots()
        .iter()
        .chain(fc.knots())
        .copied()
        .filter(|&x| x >= lo && x <= hi)
        .chain([lo, hi])
        .collect();
    knots.sort_by(f64::total_cmp);
    knots.dedup();
    let degenerate = (fu.lo() - fc.lo()).abs() < 1e-12
        && (fu.hi() - fc.hi()).abs() < 1e-12
        && knots
            .iter()
            .all(|&x| (fu.eval(x) - fc.eval(x)).abs() < 1e-10);
    if degenerate {
        return CrossingDiagnostics {
            degenerate,
            roots: vec![],
        };
    }
    let mut fine = Vec::new();
    for w in knots.windows(2) {
        for j in 0..16 {
            fine.push(w[0] + (w[1] - w[0]) * j as f64 / 16.0);
        }
    }
    fine.push(hi);

    let dcdf = |x: f64| fc.cdf(x) - fu.cdf(x);
    let bisect = |mut a: f64, mut b: f64| {
        let sa = dcdf(a).signum();
        while b - a > 1e-10 {
            let c = 0.5 * (a + b);
            if dcdf(c).signum() == sa {
                a = c;
            } else {
                b = c;
            }
        }
        0.5 * (a + b)
    };
    let mut roots: Vec<(f64, CrossingKind)> = sign_changes(&fine, &dcdf, 1e-13, &bisect)
        .into_iter()
        .map(|x| (x, CrossingKind::CdfEqual))
        .collect();

    // the log-density difference is linear between merged knots
    let dlog = |x: f64| fc.eval(x) - fu.eval(x);
    let linear_root = |a: f64, b: f64| {
        let (da, db) = (dlog(a), dlog(b));
        a + (b - a) * da / (da - db)
    };
    roots.extend(
        sign_changes(&knots, &dlog, 1e-12, &linear_root)
            .into_iter()
            .map(|x| (x, CrossingKind::DensityEqual)),
    );
    roots.sort_by(|a, b| a.0.total_cmp(&b.0));
    CrossingDiagnostics { degenerate, roots }
}

/// Windows `(l, r)` spanned by interlaced knots `τ ≤ τ⁰ < τ ≤ τ⁰` (or with
/// the roles swapped) all on one side of `m`, inside which the two
/// distribution functions must cross. The mode may close a window on the left
/// side when it is a left knot of `fc`, and open one on the right side when
/// it is a right knot.
pub fn interlacing_windows(fu: &PwlConcave, fc: &PwlConcave, m: f64) -> Vec<(f64, f64)> {
    let class = fc.knot_class(m).ok();
    let ku = kinks(fu);
    let kc: Vec<f64> = kinks(fc).into_iter().filter(|&t| t != m).collect();
    let mut out = Vec::new();
    for below in [true, false] {
        let side = |v: &[f64]| -> Vec<f64> {
            v.iter()
                .copied()
                .filter(|&t| if below { t < m } else { t > m })
                .collect()
        };
        let u = side(&ku);
        let mut c = side(&kc);
        if below && class.is_some_and(|k| k.is_left()) {
            c.push(m);
        }
        if !below && class.is_some_and(|k| k.is_right()) {
            c.insert(0, m);
        }
        for (p, q) in [(&u, &c), (&c, &u)] {
            for &l in p.iter() {
                let b = q.iter().copied().find(|&x| x >= l);
                let c3 = b.and_then(|b| p.iter().copied().find(|&x| x > b));
                let r = c3.and_then(|c3| q.iter().copied().find(|&x| x >= c3));
                if let Some(r) = r {
                    if r > l {
                        out.push((l, r));
                    }
                }
            }
        }
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    out.dedup();
    out
}
