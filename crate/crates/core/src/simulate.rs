//! Test densities, error metrics against a known truth, Monte Carlo rate
//! experiments and plot data for the estimator panels.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Open01, StandardNormal};
use rayon::prelude::*;

use crate::characterization::kinks;
use crate::error::{Error, Result};
use crate::mle::{fit_constrained, fit_unconstrained, Fit, SolverOptions};
use crate::processes::Processes;
use crate::pwl::PwlConcave;
use crate::quad::integrate_pieces;
use crate::sample::SortedSample;
use crate::stats::{median, ols_slope, rep_seed};

/// Log-densities below `ln` of this are treated as zero mass.
const NEGLIGIBLE_DENSITY: f64 = 1e-16;

#[derive(Debug, Clone, PartialEq)]
pub enum TrueDensity {
    /// Standard normal.
    StdNormal,
    /// `exp(−(x + e^{−x}))`.
    Gumbel,
    /// `x e^{−x}` on `x ≥ 0`.
    Gamma2,
    /// A normalized piecewise-linear log-density.
    CustomPwl(PwlConcave),
}

impl TrueDensity {
    pub fn custom(f: &PwlConcave) -> Self {
        TrueDensity::CustomPwl(f.normalized())
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "std_normal" | "normal" => Ok(TrueDensity::StdNormal),
            "gumbel" => Ok(TrueDensity::Gumbel),
            "gamma2" | "gamma_shape2" => Ok(TrueDensity::Gamma2),
            other => Err(Error::InvalidArgument(format!("unknown density {other:?}"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            TrueDensity::StdNormal => "std_normal",
            TrueDensity::Gumbel => "gumbel",
            TrueDensity::Gamma2 => "gamma2",
            TrueDensity::CustomPwl(_) => "custom_pwl",
        }
    }

    pub fn mode(&self) -> f64 {
        match self {
            TrueDensity::StdNormal | TrueDensity::Gumbel => 0.0,
            TrueDensity::Gamma2 => 1.0,
            TrueDensity::CustomPwl(f) => {
                let v = f.values();
                let i = (0..v.len()).fold(0, |b, i| if v[i] > v[b] { i } else { b });
                f.knots()[i]
            }
        }
    }

    /// `φ₀''(mode)`; NaN for a piecewise-linear truth.
    pub fn curvature_at_mode(&self) -> f64 {
        match self {
            TrueDensity::CustomPwl(_) => f64::NAN,
            _ => -1.0,
        }
    }

    pub fn log_density(&self, x: f64) -> f64 {
        match self {
            TrueDensity::StdNormal => -0.5 * x * x - 0.5 * (2.0 * std::f64::consts::PI).ln(),
            TrueDensity::Gumbel => -x - (-x).exp(),
            TrueDensity::Gamma2 => {
                if x > 0.0 {
                    x.ln() - x
                } else {
                    f64::NEG_INFINITY
                }
            }
            TrueDensity::CustomPwl(f) => f.eval(x),
        }
    }

    pub fn density(&self, x: f64) -> f64 {
        self.log_density(x).exp()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            TrueDensity::StdNormal => 0.5 * libm::erfc(-x / std::f64::consts::SQRT_2),
            TrueDensity::Gumbel => (-(-x).exp()).exp(),
            TrueDensity::Gamma2 => {
                if x > 0.0 {
                    -((-x).exp_m1() + x * (-x).exp())
                } else {
                    0.0
                }
            }
            TrueDensity::CustomPwl(f) => f.cdf(x),
        }
    }

    /// Inverse distribution function, by bisection.
    pub fn quantile(&self, p: f64) -> f64 {
        let (mut lo, mut hi) = self.support();
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.cdf(mid) < p {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-15 * (1.0 + mid.abs()) {
                break;
            }
        }
        0.5 * (lo + hi)
    }

    /// Interval outside which the density is below 1e-16.
    pub fn support(&self) -> (f64, f64) {
        match self {
            TrueDensity::CustomPwl(f) => (f.lo(), f.hi()),
            _ => (self.tail_point(-1.0), self.tail_point(1.0)),
        }
    }

    fn tail_point(&self, dir: f64) -> f64 {
        let cut = NEGLIGIBLE_DENSITY.ln();
        let m = self.mode();
        let mut step = 1.0;
        while self.log_density(m + dir * step) >= cut {
            step *= 2.0;
        }
        let (mut a, mut b) = (0.0, step);
        for _ in 0..100 {
            let c = 0.5 * (a + b);
            if self.log_density(m + dir * c) >= cut {
                a = c;
            } else {
                b = c;
            }
        }
        m + dir * b
    }

    /// Points where the log-density is not smooth, plus the mode.
    fn breaks(&self) -> Vec<f64> {
        match self {
            TrueDensity::CustomPwl(f) => f.knots().to_vec(),
            TrueDensity::Gamma2 => vec![0.0, self.mode()],
            _ => vec![self.mode()],
        }
    }

    fn draw<R: Rng>(&self, rng: &mut R) -> f64 {
        match self {
            TrueDensity::StdNormal => rng.sample(StandardNormal),
            TrueDensity::Gumbel => {
                let u: f64 = rng.sample(Open01);
                -(-u.ln()).ln()
            }
            TrueDensity::Gamma2 => {
                let u: f64 = rng.sample(Open01);
                let v: f64 = rng.sample(Open01);
                -u.ln() - v.ln()
            }
            TrueDensity::CustomPwl(_) => {
                let u: f64 = rng.sample(Open01);
                self.quantile(u)
            }
        }
    }
}

/// `n` draws from `d`, reproducible from `seed`.
pub fn sample_density(d: &TrueDensity, n: usize, seed: u64) -> Result<SortedSample> {
    if n < 2 {
        return Err(Error::DegenerateSample(n));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xs: Vec<f64> = (0..n).map(|_| d.draw(&mut rng)).collect();
    SortedSample::from_observations(&xs)
}

/// Hellinger distance `(½ ∫ (√p − √q)²)^{1/2}` between `exp(φ)` and `d`.
pub fn hellinger(f: &PwlConcave, d: &TrueDensity) -> f64 {
    let (lo, hi) = d.support();
    let mut breaks: Vec<f64> = f
        .knots()
        .iter()
        .copied()
        .chain([lo, hi])
        .chain(d.breaks())
        .collect();
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let g = |x: f64| {
        let a = (0.5 * f.eval(x)).exp();
        let b = (0.5 * d.log_density(x)).exp();
        (a - b) * (a - b)
    };
    let h2 = 0.5 * integrate_pieces(&g, &breaks, 1e-13);
    h2.clamp(0.0, 1.0).sqrt()
}

/// `sup |φ − φ₀|` over `[a, b]`. The difference is convex on each linear
/// piece of `φ`, so its maximum sits at a piece end and its minimum is found
/// by golden-section search.
pub fn sup_log_error(f: &PwlConcave, d: &TrueDensity, a: f64, b: f64) -> f64 {
    if !(f.contains(a) && f.contains(b)) {
        return f64::INFINITY;
    }
    let mut pts: Vec<f64> = f
        .knots()
        .iter()
        .copied()
        .filter(|&x| x > a && x < b)
        .collect();
    pts.insert(0, a);
    pts.push(b);
    let diff = |x: f64| f.eval(x) - d.log_density(x);
    let mut worst: f64 = 0.0;
    for w in pts.windows(2) {
        worst = worst.max(diff(w[0]).abs()).max(diff(w[1]).abs());
        // maximize the concave φ₀ − φ on the piece
        let (mut lo, mut hi) = (w[0], w[1]);
        let r = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..80 {
            let x1 = hi - r * (hi - lo);
            let x2 = lo + r * (hi - lo);
            if -diff(x1) < -diff(x2) {
                lo = x1;
            } else {
                hi = x2;
            }
        }
        worst = worst.max(diff(0.5 * (lo + hi)).abs());
    }
    worst
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Metric {
    /// Hellinger distance to the truth.
    Hellinger,
    /// `sup |φ̂ − φ₀|` over the central 50% quantile range.
    SupnormK,
    /// Distance between the knots just above and just below the mode.
    KnotGap,
    /// `sup |φ̂⁰ − φ̂|` on `m ± n^{−1/5}`.
    NearModeDiff,
}

impl Metric {
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "hellinger" => Ok(Metric::Hellinger),
            "supnorm" | "supnorm_K" | "supnorm_k" => Ok(Metric::SupnormK),
            "knot-gap" | "knot_gap" => Ok(Metric::KnotGap),
            "near-mode" | "near_mode" | "near_mode_diff" => Ok(Metric::NearModeDiff),
            other => Err(Error::InvalidArgument(format!("unknown metric {other:?}"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Metric::Hellinger => "hellinger",
            Metric::SupnormK => "supnorm_K",
            Metric::KnotGap => "knot_gap",
            Metric::NearModeDiff => "near_mode_diff",
        }
    }

    /// Exponent of `n` in the rate the metric is expected to follow.
    pub fn rate_exponent(self) -> f64 {
        match self {
            Metric::KnotGap => -0.2,
            _ => -0.4,
        }
    }
}

/// Knots of `fit` nearest to `m` strictly on either side.
fn knot_gap(fit: &Fit, m: f64) -> f64 {
    let knots = fit.knots();
    let above = knots.iter().copied().filter(|&t| t > m).fold(f64::INFINITY, f64::min);
    let below = knots.iter().copied().filter(|&t| t < m).fold(f64::NEG_INFINITY, f64::max);
    above - below
}

/// `sup |f − g|` over `[a, b]` for piecewise-linear `f`, `g`.
fn sup_diff_on(f: &PwlConcave, g: &PwlConcave, a: f64, b: f64) -> f64 {
    let a = a.max(f.lo()).max(g.lo());
    let b = b.min(f.hi()).min(g.hi());
    if !(b >= a) {
        return f64::NAN;
    }
    f.knots()
        .iter()
        .chain(g.knots())
        .copied()
        .filter(|&x| x > a && x < b)
        .chain([a, b])
        .map(|x| (f.eval(x) - g.eval(x)).abs())
        .fold(0.0, f64::max)
}

/// One error measurement of `metric` on `s` drawn from `d`.
pub fn metric_value(
    d: &TrueDensity,
    metric: Metric,
    s: &SortedSample,
    constrained: bool,
    opts: &SolverOptions,
) -> Result<f64> {
    let m = d.mode();
    let fit = |con: bool| {
        if con {
            fit_constrained(s, m, opts)
        } else {
            fit_unconstrained(s, opts)
        }
    };
    Ok(match metric {
        Metric::Hellinger => hellinger(&fit(constrained)?.estimate, d),
        Metric::SupnormK => {
            let (a, b) = (d.quantile(0.25), d.quantile(0.75));
            sup_log_error(&fit(constrained)?.estimate, d, a, b)
        }
        Metric::KnotGap => knot_gap(&fit(constrained)?, m),
        Metric::NearModeDiff => {
            let fu = fit(false)?;
            let fc = fit(true)?;
            let h = (s.n_raw() as f64).powf(-0.2);
            sup_diff_on(&fc.estimate, &fu.estimate, m - h, m + h)
        }
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    pub metric: Metric,
    pub n_grid: Vec<usize>,
    pub replications: usize,
    pub median_errors: Vec<f64>,
    /// Least-squares slope of log median error on log n; needs two sizes.
    pub slope: Option<f64>,
    /// 1.96 standard errors; needs three sizes.
    pub slope_ci_halfwidth: Option<f64>,
    /// Replications that failed to converge, per sample size.
    pub skipped: Vec<usize>,
    /// Every recorded error, per sample size.
    pub errors: Vec<Vec<f64>>,
}

/// Monte Carlo estimate of the rate at which `metric` shrinks with `n`.
pub fn rate_experiment(
    d: &TrueDensity,
    metric: Metric,
    n_grid: &[usize],
    reps: usize,
    seed: u64,
    constrained: bool,
    opts: &SolverOptions,
) -> Result<RateReport> {
    if n_grid.is_empty() || n_grid.windows(2).any(|w| w[0] >= w[1]) || n_grid[0] < 2 {
        return Err(Error::InvalidArgument(
            "sample sizes must be strictly increasing and at least 2".into(),
        ));
    }
    if reps == 0 {
        return Err(Error::InvalidArgument("need at least one replication".into()));
    }
    let mut medians = Vec::new();
    let mut skipped = Vec::new();
    let mut errors = Vec::new();
    for &n in n_grid {
        let results: Vec<Result<f64>> = (0..reps)
            .into_par_iter()
            .map(|rep| {
                let s = sample_density(d, n, rep_seed(seed, n as u64, rep as u64))?;
                metric_value(d, metric, &s, constrained, opts)
            })
            .collect();
        let mut vals = Vec::with_capacity(reps);
        let mut skip = 0;
        for r in results {
            match r {
                Ok(v) => vals.push(v),
                Err(Error::NonConvergence { .. }) => skip += 1,
                Err(e) => return Err(e),
            }
        }
        medians.push(median(&vals));
        skipped.push(skip);
        errors.push(vals);
    }
    let total_skipped: usize = skipped.iter().sum();
    let total = reps * n_grid.len();
    if total_skipped * 100 > total {
        return Err(Error::TooManyFailures {
            skipped: total_skipped,
            total,
        });
    }
    let lx: Vec<f64> = n_grid.iter().map(|&n| (n as f64).ln()).collect();
    let ly: Vec<f64> = medians.iter().map(|m| m.ln()).collect();
    let fit = ols_slope(&lx, &ly);
    Ok(RateReport {
        metric,
        n_grid: n_grid.to_vec(),
        replications: reps,
        median_errors: medians,
        slope: fit.map(|f| f.0),
        slope_ci_halfwidth: fit.map(|f| 1.96 * f.1).filter(|h| h.is_finite()),
        skipped,
        errors,
    })
}

/// One abscissa of the estimator panels.
#[derive(Debug, Clone, PartialEq)]
pub struct PanelRow {
    pub x: f64,
    pub f_true: f64,
    pub f_unc: f64,
    pub f_con: f64,
    pub logf_true: f64,
    pub logf_unc: f64,
    pub logf_con: f64,
    pub cdf_true: f64,
    pub cdf_emp: f64,
    pub cdf_unc: f64,
    pub cdf_con: f64,
    /// `Y − H` for the unconstrained fit; NaN outside the data range.
    pub y_minus_h: f64,
    /// `Y_L − H_L` for the constrained fit; NaN right of the mode.
    pub yl_minus_hl: f64,
    /// `Y_R − H_R` for the constrained fit; NaN left of the mode.
    pub yr_minus_hr: f64,
    pub knot_unc: bool,
    pub knot_con: bool,
}

impl PanelRow {
    /// `U`, `C`, `UC` or empty.
    pub fn knot_flags(&self) -> &'static str {
        match (self.knot_unc, self.knot_con) {
            (true, true) => "UC",
            (true, false) => "U",
            (false, true) => "C",
            (false, false) => "",
        }
    }
}

#[derive(Debug, Clone)]
pub struct PanelTable {
    pub m: f64,
    pub rows: Vec<PanelRow>,
    pub unconstrained: Fit,
    pub constrained: Fit,
}

impl PanelTable {
    /// Smallest value of the three difference processes.
    pub fn min_difference(&self) -> f64 {
        self.rows
            .iter()
            .flat_map(|r| [r.y_minus_h, r.yl_minus_hl, r.yr_minus_hr])
            .filter(|v| !v.is_nan())
            .fold(f64::INFINITY, f64::min)
    }
}

/// Points of the panel grid.
pub const PANEL_POINTS: usize = 512;

/// Both estimators and their difference processes on a 512-point grid over
/// `[Z_1, Z_N]` with the knots merged in.
pub fn figure_panels(
    s: &SortedSample,
    m: f64,
    truth: Option<&TrueDensity>,
    opts: &SolverOptions,
) -> Result<PanelTable> {
    let fu = fit_unconstrained(s, opts)?;
    let fc = fit_constrained(s, m, opts)?;
    let (lo, hi) = (fc.estimate.lo(), fc.estimate.hi());
    let ku = fu.knots();
    let kc = fc.knots();
    let mut xs: Vec<f64> = (0..PANEL_POINTS)
        .map(|i| (lo + (hi - lo) * i as f64 / (PANEL_POINTS - 1) as f64).min(hi))
        .chain(ku.iter().copied())
        .chain(kc.iter().copied())
        .collect();
    xs.push(hi);
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let pu = Processes::new(&fu.estimate, s, None);
    let pc = Processes::new(&fc.estimate, s, Some(m));
    let nan = f64::NAN;
    let mut rows = Vec::with_capacity(xs.len());
    for &x in &xs {
        let ru = pu.at(x).ok();
        let rc = pc.at(x)?;
        let (ft, lt, ct) = match truth {
            Some(d) => (d.density(x), d.log_density(x), d.cdf(x)),
            None => (nan, nan, nan),
        };
        rows.push(PanelRow {
            x,
            f_true: ft,
            f_unc: fu.estimate.density(x),
            f_con: fc.estimate.density(x),
            logf_true: lt,
            logf_unc: fu.estimate.eval(x),
            logf_con: fc.estimate.eval(x),
            cdf_true: ct,
            cdf_emp: s.ecdf(x),
            cdf_unc: fu.estimate.cdf(x),
            cdf_con: fc.estimate.cdf(x),
            y_minus_h: ru.map_or(nan, |r| r.y_left - r.h_left),
            yl_minus_hl: if x <= m { rc.y_left - rc.h_left } else { nan },
            yr_minus_hr: if x >= m { rc.y_right - rc.h_right } else { nan },
            knot_unc: ku.contains(&x),
            knot_con: kc.contains(&x),
        });
    }
    Ok(PanelTable {
        m,
        rows,
        unconstrained: fu,
        constrained: fc,
    })
}

/// The four panel scenarios: well-specified normal, normal with the mode
/// misplaced at 1, Gumbel and gamma, each at its stated mode.
pub fn figure_scenarios() -> Vec<(TrueDensity, f64)> {
    vec![
        (TrueDensity::StdNormal, 0.0),
        (TrueDensity::StdNormal, 1.0),
        (TrueDensity::Gumbel, 0.0),
        (TrueDensity::Gamma2, 1.0),
    ]
}

/// Interior kinks of both estimators in a panel table.
pub fn panel_kinks(t: &PanelTable) -> (Vec<f64>, Vec<f64>) {
    (kinks(&t.unconstrained.estimate), kinks(&t.constrained.estimate))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn densities_at_their_modes() {
        let e1 = (-1f64).exp();
        assert!((TrueDensity::StdNormal.density(0.0) - 0.398_942_280_401_432_7).abs() < 1e-15);
        assert!((TrueDensity::Gumbel.density(0.0) - e1).abs() < 1e-15);
        assert!((TrueDensity::Gamma2.density(1.0) - e1).abs() < 1e-15);
        assert_eq!(TrueDensity::Gamma2.density(-1.0), 0.0);
    }

    #[test]
    fn quantiles_invert_cdfs() {
        for d in [TrueDensity::StdNormal, TrueDensity::Gumbel, TrueDensity::Gamma2] {
            for p in [0.01, 0.25, 0.5, 0.9] {
                assert!((d.cdf(d.quantile(p)) - p).abs() < 1e-12, "{} {p}", d.name());
            }
        }
        assert!((TrueDensity::StdNormal.quantile(0.75) - 0.674_489_750_196_081_7).abs() < 1e-10);
    }

    #[test]
    fn sampling_is_reproducible() {
        let a = sample_density(&TrueDensity::Gumbel, 50, 3).unwrap();
        let b = sample_density(&TrueDensity::Gumbel, 50, 3).unwrap();
        assert_eq!(a, b);
        let c = sample_density(&TrueDensity::Gumbel, 50, 4).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn hellinger_of_identical_densities_is_zero() {
        let u = PwlConcave::uniform(0.0, 1.0).unwrap();
        assert!(hellinger(&u, &TrueDensity::custom(&u)) < 1e-7);
        let f = PwlConcave::new(vec![-1.0, 0.5, 2.0], vec![-2.0, -0.5, -1.5]).unwrap();
        assert!(hellinger(&f.normalized(), &TrueDensity::custom(&f)) < 1e-7);
    }

    #[test]
    fn metric_names_round_trip() {
        for m in [Metric::Hellinger, Metric::SupnormK, Metric::KnotGap, Metric::NearModeDiff] {
            assert_eq!(Metric::from_name(m.name()).unwrap(), m);
        }
        assert!(Metric::from_name("bogus").is_err());
    }
}
