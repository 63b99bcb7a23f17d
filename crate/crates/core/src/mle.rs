//! Maximum-likelihood estimation of a log-concave density, with or without a
//! prescribed mode, by maximizing `Ψ_n(φ) = P_n φ − ∫ exp(φ)`.

use crate::active_set::{Engine, EngineOptions, GridObjective, Hinge, SegTerms};
use crate::augment::augment;
use crate::characterization::{knot_indices, verify_constrained, verify_unconstrained};
use crate::error::{Error, Result};
use crate::kernels::{j10, SegmentMoments};
use crate::pwl::PwlConcave;
use crate::sample::SortedSample;

/// A solved estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct Fit {
    pub estimate: PwlConcave,
    /// The grid the estimator lives on: the sample points, with the mode
    /// merged in for a constrained fit.
    pub grid: Vec<f64>,
    /// Indices into `grid` where the estimate kinks, endpoints included.
    pub knot_set: Vec<usize>,
    /// `P_n φ̂`.
    pub loglik: f64,
    /// `Ψ_n(φ̂)`.
    pub psi: f64,
    pub iterations: usize,
    pub max_certificate_violation: f64,
    pub constrained: bool,
    pub mode: Option<f64>,
    /// `Ψ_n` after every accepted step.
    pub trace: Vec<f64>,
}

impl Fit {
    pub fn knots(&self) -> Vec<f64> {
        self.knot_set.iter().map(|&i| self.grid[i]).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub tol_certificate: f64,
    pub max_iter: usize,
    pub damping: f64,
    pub min_step: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol_certificate: 1e-8,
            max_iter: 500,
            damping: 0.5,
            min_step: 1e-12,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        let ok = self.tol_certificate > 0.0
            && self.max_iter > 0
            && self.damping > 0.0
            && self.damping < 1.0
            && self.min_step > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("solver options {self:?}")))
        }
    }
}

pub(crate) struct LikelihoodObjective<'a> {
    pub x: &'a [f64],
    pub w: &'a [f64],
}

impl GridObjective for LikelihoodObjective<'_> {
    fn nodes(&self) -> &[f64] {
        self.x
    }

    fn linear(&self) -> &[f64] {
        self.w
    }

    fn penalty(&self, a: usize, b: usize, ua: f64, ub: f64) -> SegTerms {
        let h = self.x[b] - self.x[a];
        let m = SegmentMoments::new(ua, ub);
        SegTerms {
            value: h * m.j00,
            ga: h * m.j10,
            gb: h * m.j01,
            haa: h * m.j20,
            hab: h * m.j11,
            hbb: h * m.j02,
        }
    }

    fn node_gradient(&self, v: &[f64]) -> Vec<f64> {
        let mut r = self.w.to_vec();
        for i in 0..self.x.len() - 1 {
            let h = self.x[i + 1] - self.x[i];
            r[i] -= h * j10(v[i], v[i + 1]);
            r[i + 1] -= h * j10(v[i + 1], v[i]);
        }
        r
    }
}

/// `Ψ_n` of node values on a grid with weights.
pub fn psi_of_values(x: &[f64], w: &[f64], v: &[f64]) -> f64 {
    let lin: f64 = w.iter().zip(v).map(|(a, b)| a * b).sum();
    let mass: f64 = (0..x.len() - 1)
        .map(|i| (x[i + 1] - x[i]) * crate::kernels::j_value(v[i], v[i + 1]))
        .sum();
    lin - mass
}

/// Gradient of [`psi_of_values`] with respect to the node values.
pub fn psi_gradient(x: &[f64], w: &[f64], v: &[f64]) -> Vec<f64> {
    LikelihoodObjective { x, w }.node_gradient(v)
}

fn solve(
    s: &SortedSample,
    grid: &[f64],
    weights: &[f64],
    mode: Option<(usize, f64)>,
    opts: &SolverOptions,
) -> Result<Fit> {
    opts.validate()?;
    let n = grid.len();
    let obj = LikelihoodObjective { x: grid, w: weights };
    let start = vec![-(grid[n - 1] - grid[0]).ln(); n];
    let mode_index = mode.map(|(k, _)| k);
    let mut insert_tol = 1e-3 * opts.tol_certificate;
    let mut values = start;
    let mut iterations = 0;
    let mut trace = Vec::new();
    // a second pass with a tighter insertion threshold polishes the rare fit
    // whose independent certificate lands just above tolerance
    for pass in 0..2 {
        let engine = Engine::from_values(&obj, mode_index, &values);
        let out = engine.solve(&EngineOptions {
            max_iter: opts.max_iter.saturating_sub(iterations).max(1),
            damping: opts.damping,
            min_step: opts.min_step,
            insert_tol,
        });
        iterations += out.iterations;
        trace.extend(out.trace);
        values = out.values;
        let fit = assemble(s, grid, weights, mode, &out.kinks, &values, iterations, &trace)?;
        if out.converged && fit.max_certificate_violation <= opts.tol_certificate {
            return Ok(fit);
        }
        if pass == 1 || iterations >= opts.max_iter {
            return Err(Error::NonConvergence {
                iterations,
                residual: fit.max_certificate_violation.max(out.residual),
                best: Box::new(fit),
            });
        }
        insert_tol = 0.0;
    }
    unreachable!()
}

#[allow(clippy::too_many_arguments)]
fn assemble(
    s: &SortedSample,
    grid: &[f64],
    weights: &[f64],
    mode: Option<(usize, f64)>,
    kinks: &[(Hinge, f64)],
    values: &[f64],
    iterations: usize,
    trace: &[f64],
) -> Result<Fit> {
    let n = grid.len();
    let mut idx: Vec<usize> = kinks.iter().map(|(h, _)| h.node()).collect();
    idx.push(0);
    idx.push(n - 1);
    if let Some((k, _)) = mode {
        idx.push(k);
    }
    idx.sort_unstable();
    idx.dedup();
    let estimate = PwlConcave::new(
        idx.iter().map(|&i| grid[i]).collect(),
        idx.iter().map(|&i| values[i]).collect(),
    )?;
    let knot_set = knot_indices(&estimate, grid);
    let loglik: f64 = weights.iter().zip(values).map(|(w, v)| w * v).sum();
    let psi = loglik - estimate.exp_integral();
    let report = match mode {
        None => verify_unconstrained(&estimate, s, f64::INFINITY)?,
        Some((_, m)) => verify_constrained(&estimate, s, m, f64::INFINITY)?,
    };
    Ok(Fit {
        estimate,
        grid: grid.to_vec(),
        knot_set,
        loglik,
        psi,
        iterations,
        max_certificate_violation: report.max_residual(),
        constrained: mode.is_some(),
        mode: mode.map(|(_, m)| m),
        trace: trace.to_vec(),
    })
}

/// The log-concave MLE on `[X_(1), X_(n)]`.
pub fn fit_unconstrained(s: &SortedSample, opts: &SolverOptions) -> Result<Fit> {
    if s.len() < 2 {
        return Err(Error::DegenerateSample(s.len()));
    }
    solve(s, s.points(), s.weights(), None, opts)
}

/// The log-concave MLE among log-densities peaking at `m`, on `[Z_1, Z_N]`.
pub fn fit_constrained(s: &SortedSample, m: f64, opts: &SolverOptions) -> Result<Fit> {
    if !m.is_finite() {
        return Err(Error::InvalidArgument(format!("mode {m} is not finite")));
    }
    let a = augment(s, m);
    if a.len() < 2 {
        return Err(Error::DegenerateSample(a.len()));
    }
    solve(s, &a.z, &a.weights, Some((a.mode_index, m)), opts)
}

/// `2 n (P_n φ̂ − P_n φ̂⁰)` from two fits of the same sample.
pub fn lr_from_fits(s: &SortedSample, unconstrained: &Fit, constrained: &Fit) -> f64 {
    2.0 * s.n_raw() as f64 * (unconstrained.loglik - constrained.loglik)
}

/// The likelihood-ratio statistic `2 log λ_n` for the mode `m`.
pub fn lr_statistic(s: &SortedSample, m: f64, opts: &SolverOptions) -> Result<f64> {
    let fu = fit_unconstrained(s, opts)?;
    let fc = fit_constrained(s, m, opts)?;
    Ok(lr_from_fits(s, &fu, &fc))
}
