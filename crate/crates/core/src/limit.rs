//! The Gaussian limit problem behind the local behaviour of both estimators.
//!
//! On a uniform grid of cells of width `δ` centred at `x_j = (j − M) δ` the
//! driver `X(t) = σ W(t) − 4 a t³` enters only through its cell increments
//! `ΔX_j`. The limit of the localized estimator is approximated by the
//! concave `g` minimizing
//!
//! ```text
//! ½ δ Σ g_j² − Σ g_j ΔX_j
//! ```
//!
//! (a concave regression of `ΔX_j / δ`), and the limit of the mode-constrained
//! estimator by the same problem over concave `g` peaking at the centre cell.
//! With the discrete processes
//!
//! ```text
//! F̂(k) = δ Σ_{j≤k} g_j    X̃(k) = Σ_{j≤k} ΔX_j
//! H(i) = δ Σ_{k<i} F̂(k)    Y(i) = δ Σ_{k<i} X̃(k)
//! ```
//!
//! optimality is `H ≤ Y` with equality where `g` kinks, and for the
//! constrained fit the mirrored pair on the right of the mode.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::active_set::{Engine, EngineOptions, GridObjective, SegTerms};
use crate::error::{Error, Result};
use crate::mle::Fit;
use crate::stats::rep_seed;

/// Brownian increments on a symmetric cell grid, with the drift applied.
#[derive(Debug, Clone, PartialEq)]
pub struct DriverPath {
    pub delta: f64,
    /// Number of cells on each side of the centre cell.
    pub half_cells: usize,
    /// Cell centres `(j − M) δ`.
    pub grid: Vec<f64>,
    /// Cell edges `(j − M − ½) δ`, one more than the cells.
    pub edges: Vec<f64>,
    /// `W` at the edges, with `W(0) = 0`.
    pub w_edges: Vec<f64>,
    /// `ΔX_j = σ ΔW_j − 4 a (e_{j+1}³ − e_j³)`.
    pub increments: Vec<f64>,
    pub sigma: f64,
    pub a: f64,
    pub seed: u64,
}

impl DriverPath {
    fn from_w(delta: f64, half_cells: usize, w_edges: Vec<f64>, sigma: f64, a: f64, seed: u64) -> Self {
        let m = half_cells as f64;
        let ncell = 2 * half_cells + 1;
        let grid: Vec<f64> = (0..ncell).map(|j| (j as f64 - m) * delta).collect();
        let edges: Vec<f64> = (0..=ncell).map(|j| (j as f64 - m - 0.5) * delta).collect();
        let increments = (0..ncell)
            .map(|j| {
                sigma * (w_edges[j + 1] - w_edges[j])
                    - 4.0 * a * (edges[j + 1].powi(3) - edges[j].powi(3))
            })
            .collect();
        DriverPath {
            delta,
            half_cells,
            grid,
            edges,
            w_edges,
            increments,
            sigma,
            a,
            seed,
        }
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// Index of the cell containing 0.
    pub fn centre(&self) -> usize {
        self.half_cells
    }

    pub fn half_width(&self) -> f64 {
        self.half_cells as f64 * self.delta
    }

    /// The path of `t ↦ −X(−t)`, which has the same law.
    pub fn reflect(&self) -> DriverPath {
        let w: Vec<f64> = self.w_edges.iter().rev().map(|v| -v).collect();
        DriverPath::from_w(self.delta, self.half_cells, w, self.sigma, self.a, self.seed)
    }

    /// The drift alone, `ΔW ≡ 0`.
    pub fn drift_only(half_width: f64, delta: f64) -> Result<DriverPath> {
        let m = check_grid(half_width, delta)?;
        Ok(DriverPath::from_w(delta, m, vec![0.0; 2 * m + 2], 1.0, 1.0, 0))
    }
}

fn check_grid(half_width: f64, delta: f64) -> Result<usize> {
    if !(half_width >= 4.0 && delta > 0.0 && delta <= 0.01) {
        return Err(Error::InvalidArgument(format!(
            "need half-width ≥ 4 and 0 < δ ≤ 0.01, got {half_width} and {delta}"
        )));
    }
    Ok((half_width / delta).round() as usize)
}

/// A driver path for `X(t) = W(t) − 4t³`.
pub fn simulate_driver(half_width: f64, delta: f64, seed: u64) -> Result<DriverPath> {
    simulate_driver_scaled(half_width, delta, seed, 1.0, 1.0)
}

/// A driver path for `X(t) = σ W(t) − 4 a t³`; the same seed gives the same
/// Gaussian draws for every `(a, σ)`.
pub fn simulate_driver_scaled(
    half_width: f64,
    delta: f64,
    seed: u64,
    a: f64,
    sigma: f64,
) -> Result<DriverPath> {
    let m = check_grid(half_width, delta)?;
    if !(a > 0.0 && sigma > 0.0) {
        return Err(Error::InvalidArgument(format!("need a, σ > 0, got {a}, {sigma}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut z = || -> f64 { StandardNormal.sample(&mut rng) };
    let ne = 2 * m + 2;
    let mut w = vec![0.0; ne];
    // the centre cell [−δ/2, δ/2] is split at 0 so that W(0) = 0
    let half = (0.5 * delta).sqrt();
    w[m + 1] = half * z();
    w[m] = half * z();
    let full = delta.sqrt();
    for e in m + 2..ne {
        w[e] = w[e - 1] + full * z();
    }
    for e in (0..m).rev() {
        w[e] = w[e + 1] + full * z();
    }
    Ok(DriverPath::from_w(delta, m, w, sigma, a, seed))
}

/// The same Brownian path on a grid of half the spacing: `W` at the new
/// edges is drawn from the Brownian bridge between the old edges and `W(0)`.
pub fn refine_halving(p: &DriverPath, seed: u64) -> DriverPath {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut known: Vec<(f64, f64)> = p
        .edges
        .iter()
        .copied()
        .zip(p.w_edges.iter().copied())
        .collect();
    known.push((0.0, 0.0));
    known.sort_by(|a, b| a.0.total_cmp(&b.0));
    let delta = 0.5 * p.delta;
    let m = 2 * p.half_cells;
    let targets: Vec<f64> = (0..2 * m + 2)
        .map(|j| (j as f64 - m as f64 - 0.5) * delta)
        .collect();
    let mut w = Vec::with_capacity(targets.len());
    let mut k = 0;
    let mut left = known[0];
    for &t in &targets {
        while known[k + 1].0 < t {
            k += 1;
            left = known[k];
        }
        let right = known[k + 1];
        if left.0 < known[k].0 {
            left = known[k];
        }
        let span = right.0 - left.0;
        let mean = left.1 + (t - left.0) / span * (right.1 - left.1);
        let var = (t - left.0) * (right.0 - t) / span;
        let z: f64 = StandardNormal.sample(&mut rng);
        let v = mean + var.max(0.0).sqrt() * z;
        w.push(v);
        // later points in the same gap are conditioned on this one
        left = (t, v);
    }
    DriverPath::from_w(delta, m, w, p.sigma, p.a, p.seed)
}

struct RegressionObjective<'a> {
    x: &'a [f64],
    dx: &'a [f64],
    delta: f64,
}

impl GridObjective for RegressionObjective<'_> {
    fn nodes(&self) -> &[f64] {
        self.x
    }

    fn linear(&self) -> &[f64] {
        self.dx
    }

    fn penalty(&self, a: usize, b: usize, ua: f64, ub: f64) -> SegTerms {
        // Σ over nodes a..b−1 of λ-moments, λ = (i − a)/(b − a)
        let l = (b - a) as f64;
        let s1 = (l - 1.0) / 2.0;
        let s2 = (l - 1.0) * (2.0 * l - 1.0) / (6.0 * l);
        let caa = l - 2.0 * s1 + s2;
        let cab = s1 - s2;
        let mut cbb = s2;
        if b == self.x.len() - 1 {
            cbb += 1.0;
        }
        let d = self.delta;
        SegTerms {
            value: 0.5 * d * (caa * ua * ua + 2.0 * cab * ua * ub + cbb * ub * ub),
            ga: d * (caa * ua + cab * ub),
            gb: d * (cab * ua + cbb * ub),
            haa: d * caa,
            hab: d * cab,
            hbb: d * cbb,
        }
    }

    fn node_gradient(&self, v: &[f64]) -> Vec<f64> {
        self.dx.iter().zip(v).map(|(x, g)| x - self.delta * g).collect()
    }
}

/// A discrete invelope derivative.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitFit {
    /// Fitted concave values on the cells.
    pub g: Vec<f64>,
    /// Cells where `g` kinks, where `H` touches `Y`.
    pub touch_set: Vec<usize>,
    /// `½ δ Σ g² − Σ g ΔX`.
    pub objective: f64,
    pub iterations: usize,
    pub constrained: bool,
}

impl LimitFit {
    /// `g` at the centre cell.
    pub fn value_at_zero(&self, p: &DriverPath) -> f64 {
        self.g[p.centre()]
    }

    /// One-sided difference quotients at the centre cell.
    pub fn slopes_at_zero(&self, p: &DriverPath) -> (f64, f64) {
        let k = p.centre();
        (
            (self.g[k] - self.g[k - 1]) / p.delta,
            (self.g[k + 1] - self.g[k]) / p.delta,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitOptions {
    pub max_iter: usize,
    /// Insertion threshold relative to `1 + max |Y|`.
    pub rel_tol: f64,
}

impl Default for LimitOptions {
    fn default() -> Self {
        LimitOptions {
            max_iter: 200_000,
            rel_tol: 1e-14,
        }
    }
}

/// `1 + max |Y|`, the scale of the integrated processes.
pub fn process_scale(p: &DriverPath) -> f64 {
    let mut cum = 0.0;
    let mut y: f64 = 0.0;
    let mut worst: f64 = 0.0;
    for &dx in &p.increments {
        worst = worst.max(y.abs());
        cum += dx;
        y += p.delta * cum;
    }
    1.0 + worst.max(y.abs())
}

/// Second differences of `g` below this (relative) are not kinks.
fn is_kink(g: &[f64], i: usize) -> bool {
    let d2 = g[i + 1] - 2.0 * g[i] + g[i - 1];
    d2 < -1e-9 * (1.0 + g[i - 1].abs() + g[i + 1].abs())
}

fn kinks_of(g: &[f64]) -> Vec<usize> {
    (1..g.len() - 1).filter(|&i| is_kink(g, i)).collect()
}

#[cfg(test)]
fn objective_of(p: &DriverPath, g: &[f64]) -> f64 {
    g.iter()
        .zip(&p.increments)
        .map(|(g, dx)| 0.5 * p.delta * g * g - g * dx)
        .sum()
}

fn run(
    p: &DriverPath,
    mode: Option<usize>,
    start: &[f64],
    opts: &LimitOptions,
) -> Result<LimitFit> {
    let obj = RegressionObjective {
        x: &p.grid,
        dx: &p.increments,
        delta: p.delta,
    };
    let out = Engine::from_values(&obj, mode, start).solve(&EngineOptions {
        max_iter: opts.max_iter,
        damping: 0.5,
        min_step: 1e-12,
        insert_tol: opts.rel_tol * process_scale(p),
    });
    let fit = LimitFit {
        touch_set: kinks_of(&out.values),
        objective: -out.objective,
        g: out.values,
        iterations: out.iterations,
        constrained: mode.is_some(),
    };
    if !out.converged {
        return Err(Error::NonConvergence {
            iterations: out.iterations,
            residual: out.residual,
            best: Box::new(placeholder_fit(&fit, p)),
        });
    }
    Ok(fit)
}

/// Non-convergence carries an estimator fit; for the limit problem it holds
/// `g` as a piecewise-linear function on the cell centres.
fn placeholder_fit(f: &LimitFit, p: &DriverPath) -> Fit {
    let estimate = crate::pwl::PwlConcave::new(p.grid.clone(), f.g.clone())
        .unwrap_or_else(|_| crate::pwl::PwlConcave::constant(p.grid[0], p.grid[p.len() - 1], 0.0).unwrap());
    Fit {
        estimate,
        grid: p.grid.clone(),
        knot_set: f.touch_set.clone(),
        loglik: f64::NAN,
        psi: -f.objective,
        iterations: f.iterations,
        max_certificate_violation: f64::NAN,
        constrained: f.constrained,
        mode: f.constrained.then_some(0.0),
        trace: vec![],
    }
}

/// Concave `g` minimizing `½ δ Σ g² − Σ g ΔX`.
pub fn invelope_unconstrained(p: &DriverPath, opts: &LimitOptions) -> Result<LimitFit> {
    run(p, None, &vec![0.0; p.len()], opts)
}

/// Concave `g` peaking at the centre cell minimizing the same objective,
/// warm-started from the unconstrained fit capped at its centre value.
pub fn invelope_constrained_from(
    p: &DriverPath,
    unconstrained: &LimitFit,
    opts: &LimitOptions,
) -> Result<LimitFit> {
    let k = p.centre();
    let cap = unconstrained.g[k];
    let start: Vec<f64> = unconstrained.g.iter().map(|&v| v.min(cap)).collect();
    run(p, Some(k), &start, opts)
}

pub fn invelope_constrained(p: &DriverPath, opts: &LimitOptions) -> Result<LimitFit> {
    let u = invelope_unconstrained(p, opts)?;
    invelope_constrained_from(p, &u, opts)
}

/// Residuals of the discrete optimality conditions, recomputed from `g` and
/// the path alone.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitCheck {
    pub scale: f64,
    /// Worst positive `H − Y` (each side of 0 for a constrained fit).
    pub max_inequality: f64,
    /// Worst `|H − Y|` at kinks inside the inner 80% of the window.
    pub max_touch_gap: f64,
    /// Concavity (and peak) violation of `g`.
    pub shape_violation: f64,
    /// `|∫_{τ_L}^{τ_R} (g dv − dX)|` for a constrained fit with kinks on both
    /// sides of 0.
    pub mid_residual: Option<f64>,
    /// How far the cumulative balance misses changing sign in the cells of
    /// the first kinks either side of 0.
    pub bracket_violation: Option<f64>,
    /// Largest `|Δg|` between the last rising and the first falling kink.
    pub modal_slope: Option<f64>,
    /// The anchors `τ_L`, `τ_R` inside their kink cells.
    pub anchors: Option<(f64, f64)>,
}

impl LimitCheck {
    pub fn passes(&self, rel_tol: f64, flat_tol: f64) -> bool {
        let t = rel_tol * self.scale;
        self.max_inequality <= t
            && self.max_touch_gap <= t
            && self.shape_violation <= t
            && self.mid_residual.is_none_or(|v| v <= t)
            && self.bracket_violation.is_none_or(|v| v <= t)
            && self.modal_slope.is_none_or(|v| v <= flat_tol)
    }
}

struct Balances {
    /// `Σ_{j≤k} r_j`.
    left: Vec<f64>,
    /// `Σ_{j≥k} r_j`.
    right: Vec<f64>,
    /// `H_L − Y_L` anchored at the left end.
    hl: Vec<f64>,
    /// `H_R − Y_R` anchored at the right end.
    hr: Vec<f64>,
    r: Vec<f64>,
}

fn balances(p: &DriverPath, g: &[f64]) -> Balances {
    let n = g.len();
    let r: Vec<f64> = p
        .increments
        .iter()
        .zip(g)
        .map(|(dx, g)| dx - p.delta * g)
        .collect();
    let mut left = vec![0.0; n];
    let mut acc = 0.0;
    for k in 0..n {
        acc += r[k];
        left[k] = acc;
    }
    let mut right = vec![0.0; n];
    acc = 0.0;
    for k in (0..n).rev() {
        acc += r[k];
        right[k] = acc;
    }
    let mut hl = vec![0.0; n];
    for i in 1..n {
        hl[i] = hl[i - 1] - p.delta * left[i - 1];
    }
    let mut hr = vec![0.0; n];
    for i in (0..n - 1).rev() {
        hr[i] = hr[i + 1] - p.delta * right[i + 1];
    }
    Balances {
        left,
        right,
        hl,
        hr,
        r,
    }
}

fn inner(p: &DriverPath, i: usize) -> bool {
    p.grid[i].abs() <= 0.9 * p.half_width()
}

/// Checks `H ≤ Y` everywhere and `H = Y` at the kinks of an unconstrained fit.
pub fn check_unconstrained(p: &DriverPath, f: &LimitFit) -> LimitCheck {
    let b = balances(p, &f.g);
    let scale = process_scale(p);
    let max_inequality = b.hl.iter().copied().fold(0.0, f64::max);
    let max_touch_gap = kinks_of(&f.g)
        .into_iter()
        .filter(|&i| inner(p, i))
        .map(|i| b.hl[i].abs())
        .fold(0.0, f64::max);
    let shape_violation = (1..f.g.len() - 1)
        .map(|i| f.g[i + 1] - 2.0 * f.g[i] + f.g[i - 1])
        .fold(0.0, f64::max);
    LimitCheck {
        scale,
        max_inequality,
        max_touch_gap,
        shape_violation,
        mid_residual: None,
        bracket_violation: None,
        modal_slope: None,
        anchors: None,
    }
}

/// Checks the left and right systems, the mid-condition and the flat modal
/// stretch of a constrained fit.
pub fn check_constrained(p: &DriverPath, f: &LimitFit) -> LimitCheck {
    let g = &f.g;
    let n = g.len();
    let k = p.centre();
    let b = balances(p, g);
    let scale = process_scale(p);
    let mut max_inequality: f64 = 0.0;
    for i in 0..n {
        if i <= k {
            max_inequality = max_inequality.max(b.hl[i]);
        }
        if i >= k {
            max_inequality = max_inequality.max(b.hr[i]);
        }
    }
    let kinks = kinks_of(g);
    let rising = g[k] - g[k - 1] > 1e-12 * (1.0 + g[k].abs());
    let falling = g[k + 1] - g[k] < -1e-12 * (1.0 + g[k].abs());
    let mut max_touch_gap: f64 = 0.0;
    for &i in kinks.iter().filter(|&&i| inner(p, i)) {
        let gap = if i < k {
            b.hl[i].abs()
        } else if i > k {
            b.hr[i].abs()
        } else {
            let l = if rising { b.hl[i].abs() } else { 0.0 };
            let r = if falling { b.hr[i].abs() } else { 0.0 };
            l.max(r)
        };
        max_touch_gap = max_touch_gap.max(gap);
    }
    let mut shape_violation = (1..n - 1)
        .map(|i| g[i + 1] - 2.0 * g[i] + g[i - 1])
        .fold(0.0, f64::max);
    shape_violation = shape_violation.max(g[k - 1] - g[k]).max(g[k + 1] - g[k]);

    let a = kinks.iter().copied().filter(|&i| i < k).max();
    let c = kinks.iter().copied().filter(|&i| i > k).min();
    let (mut mid_residual, mut bracket_violation, mut modal_slope, mut anchors) = (None, None, None, None);
    if let (Some(a), Some(c)) = (a, c) {
        let before = if a == 0 { 0.0 } else { b.left[a - 1] };
        let after = if c == n - 1 { 0.0 } else { b.right[c + 1] };
        bracket_violation = Some(before.max(-b.left[a]).max(after).max(-b.right[c]).max(0.0));
        let theta = if b.r[a] != 0.0 { (-before / b.r[a]).clamp(0.0, 1.0) } else { 0.0 };
        let theta_r = if b.r[c] != 0.0 { (-after / b.r[c]).clamp(0.0, 1.0) } else { 0.0 };
        let inside: f64 = b.r[a + 1..c].iter().sum();
        mid_residual = Some((inside + (1.0 - theta) * b.r[a] + (1.0 - theta_r) * b.r[c]).abs());
        anchors = Some((
            p.edges[a] + theta * p.delta,
            p.edges[c + 1] - theta_r * p.delta,
        ));
        // the flat stretch runs between the last rising and first falling kink
        let lo = if rising { k } else { a };
        let hi = if falling { k } else { c };
        modal_slope = Some(
            (lo..hi)
                .map(|j| (g[j + 1] - g[j]).abs())
                .fold(0.0, f64::max),
        );
    }
    LimitCheck {
        scale,
        max_inequality,
        max_touch_gap,
        shape_violation,
        mid_residual,
        bracket_violation,
        modal_slope,
        anchors,
    }
}

/// Constants of the pointwise limit at a point with density `f0` and
/// log-density curvature `curvature < 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitConstants {
    pub c_f: f64,
    pub d_f: f64,
    pub c_phi: f64,
    pub d_phi: f64,
}

pub fn limit_constants(f0_at_mode: f64, curvature: f64) -> Result<LimitConstants> {
    if !(curvature < 0.0) {
        return Err(Error::InvalidArgument(format!(
            "curvature must be negative, got {curvature}"
        )));
    }
    if !(f0_at_mode > 0.0 && f0_at_mode.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "density must be positive, got {f0_at_mode}"
        )));
    }
    let k = curvature.abs();
    let f = f0_at_mode;
    let fact = 24.0;
    let p = 0.2;
    Ok(LimitConstants {
        c_f: (f.powi(3) * k / fact).powf(p),
        d_f: (f.powi(4) * k.powi(3) / fact.powi(3)).powf(p),
        c_phi: (k / (f * f * fact)).powf(p),
        d_phi: (k.powi(3) / (f * fact.powi(3))).powf(p),
    })
}

/// Per-replication values at 0 of both limit fits.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LimitSamples {
    pub phi_unc: Vec<f64>,
    /// Centred difference quotient of the unconstrained fit at 0.
    pub dphi_unc: Vec<f64>,
    pub phi_con: Vec<f64>,
    pub dphi_con_left: Vec<f64>,
    pub dphi_con_right: Vec<f64>,
    pub skipped: usize,
}

impl LimitSamples {
    /// `(name, values)` for each recorded quantity.
    pub fn quantities(&self) -> Vec<(&'static str, &[f64])> {
        vec![
            ("phi_unc_0", &self.phi_unc),
            ("dphi_unc_0", &self.dphi_unc),
            ("phi_con_0", &self.phi_con),
            ("dphi_con_0_left", &self.dphi_con_left),
            ("dphi_con_0_right", &self.dphi_con_right),
        ]
    }
}

/// Simulates `reps` driver paths (optionally reflected, optionally scaled by
/// `(a, σ)`) and records both fits at 0.
#[allow(clippy::too_many_arguments)]
pub fn limit_samples(
    reps: usize,
    half_width: f64,
    delta: f64,
    seed: u64,
    a: f64,
    sigma: f64,
    reflect: bool,
    opts: &LimitOptions,
) -> Result<LimitSamples> {
    check_grid(half_width, delta)?;
    let results: Vec<Result<(f64, f64, f64, f64, f64)>> = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let mut p = simulate_driver_scaled(
                half_width,
                delta,
                rep_seed(seed, 0x004c_494d_4954, rep as u64),
                a,
                sigma,
            )?;
            if reflect {
                p = p.reflect();
            }
            let u = invelope_unconstrained(&p, opts)?;
            let c = invelope_constrained_from(&p, &u, opts)?;
            let k = p.centre();
            let (cl, cr) = c.slopes_at_zero(&p);
            Ok((
                u.g[k],
                (u.g[k + 1] - u.g[k - 1]) / (2.0 * p.delta),
                c.g[k],
                cl,
                cr,
            ))
        })
        .collect();
    let mut out = LimitSamples::default();
    for r in results {
        match r {
            Ok((a, b, c, d, e)) => {
                out.phi_unc.push(a);
                out.dphi_unc.push(b);
                out.phi_con.push(c);
                out.dphi_con_left.push(d);
                out.dphi_con_right.push(e);
            }
            Err(Error::NonConvergence { .. }) => out.skipped += 1,
            Err(e) => return Err(e),
        }
    }
    if out.skipped * 50 > reps {
        return Err(Error::TooManyFailures {
            skipped: out.skipped,
            total: reps,
        });
    }
    Ok(out)
}

/// Empirical samples of `φ̂(0)`, `φ̂'(0)`, `φ̂⁰(0)` and the one-sided slopes of
/// `φ̂⁰` at 0 over `reps` independent driver paths.
pub fn limit_distribution_experiment(
    reps: usize,
    half_width: f64,
    delta: f64,
    seed: u64,
) -> Result<LimitSamples> {
    limit_samples(reps, half_width, delta, seed, 1.0, 1.0, false, &LimitOptions::default())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn drift_increments_telescope() {
        let p = DriverPath::drift_only(4.0, 0.01).unwrap();
        let k = p.centre();
        // from the centre cell's right edge δ/2 to t = 1 + δ/2
        let steps = 100;
        let sum: f64 = p.increments[k + 1..=k + steps].iter().sum();
        let (t0, t1) = (p.edges[k + 1], p.edges[k + 1 + steps]);
        assert!((sum + 4.0 * (t1.powi(3) - t0.powi(3))).abs() < 1e-12);
        assert!((p.grid[k]).abs() < 1e-15);
    }

    #[test]
    fn grid_preconditions() {
        assert!(simulate_driver(3.0, 0.005, 1).is_err());
        assert!(simulate_driver(5.0, 0.02, 1).is_err());
        let p = simulate_driver(5.0, 0.005, 1).unwrap();
        assert_eq!(p.len(), 2001);
        assert!((p.edges[0] + p.edges[p.len()]).abs() < 1e-12);
    }

    #[test]
    fn zero_noise_recovers_the_drift_derivative() {
        let p = DriverPath::drift_only(4.0, 0.01).unwrap();
        let y: Vec<f64> = p.increments.iter().map(|d| d / p.delta).collect();
        let u = invelope_unconstrained(&p, &LimitOptions::default()).unwrap();
        let resid: f64 = u.g.iter().zip(&y).map(|(g, y)| (g - y).powi(2)).sum();
        assert!(resid <= 1e-16, "{resid:e}");
        let c = invelope_constrained(&p, &LimitOptions::default()).unwrap();
        let resid: f64 = c.g.iter().zip(&y).map(|(g, y)| (g - y).powi(2)).sum();
        assert!(resid <= 1e-16, "{resid:e}");
    }

    #[test]
    fn reflection_is_an_involution_and_mirrors_the_fit() {
        let p = simulate_driver(4.0, 0.01, 9).unwrap();
        assert_eq!(p.reflect().reflect(), p);
        let q = p.reflect();
        for j in 0..p.len() {
            assert!((p.increments[j] - q.increments[p.len() - 1 - j]).abs() < 1e-12);
        }
        let opts = LimitOptions::default();
        let a = invelope_unconstrained(&p, &opts).unwrap();
        let b = invelope_unconstrained(&q, &opts).unwrap();
        assert!((a.value_at_zero(&p) - b.value_at_zero(&q)).abs() < 1e-8);
    }

    #[test]
    fn reported_objective_matches_a_direct_sum() {
        let p = simulate_driver(4.0, 0.01, 21).unwrap();
        let u = invelope_unconstrained(&p, &LimitOptions::default()).unwrap();
        assert!((u.objective - objective_of(&p, &u.g)).abs() < 1e-10 * (1.0 + u.objective.abs()));
    }

    #[test]
    fn constants_cancel_at_unit_scale() {
        let c = limit_constants(1.0, -24.0).unwrap();
        assert!((c.c_f - 1.0).abs() < 1e-15);
        assert!((c.c_phi - 1.0).abs() < 1e-15);
        assert!(limit_constants(1.0, 0.0).is_err());
        assert!(limit_constants(1.0, 0.5).is_err());
    }

    #[test]
    fn refinement_keeps_the_coarse_path() {
        let p = simulate_driver(4.0, 0.01, 3).unwrap();
        let q = refine_halving(&p, 11);
        assert_eq!(q.len(), 2 * p.len() - 1);
        assert!((q.delta - 0.005).abs() < 1e-18);
        // W at every other old edge pair is reproduced: old edge (k + ½)δ is
        // a centre of the fine grid, so compare X over whole coarse cells
        for j in 1..p.len() - 1 {
            let fine = 2 * j;
            let coarse_cell: f64 = p.w_edges[j + 1] - p.w_edges[j];
            let fine_cells: f64 = q.w_edges[fine + 1] - q.w_edges[fine - 1];
            // fine edges at ±δ/4 around the old edges differ by a bridge draw
            assert!((coarse_cell - fine_cells).abs() < 1.0);
        }
    }
}
