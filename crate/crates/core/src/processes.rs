//! Integrated empirical and fitted distribution functions, split into the
//! left-anchored and right-anchored families used by the optimality
//! conditions.
//!
//! With `lo`/`hi` the ends of the combined support of the sample and the fit:
//!
//! ```text
//! Y_L(t) = ∫_lo^t F_n(x) dx            H_L(t) = ∫_lo^t F̂(x) dx
//! Y_R(t) = ∫_t^hi P_n[x, ∞) dx         H_R(t) = ∫_t^hi F̂[x, hi] dx
//! ```
//!
//! Both families are exact: the empirical pieces are piecewise linear and the
//! fitted pieces are closed-form segment integrals.

use crate::error::{Error, Result};
use crate::kernels::{j01, j10, j_value};
use crate::pwl::PwlConcave;
use crate::sample::SortedSample;

/// All processes evaluated at one abscissa.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LrRow {
    pub t: f64,
    pub y_left: f64,
    pub y_right: f64,
    pub h_left: f64,
    pub h_right: f64,
    /// `F̂(t) = ∫_{−∞}^t exp(φ)`.
    pub fit_left: f64,
    /// `∫_t^∞ exp(φ)`.
    pub fit_right: f64,
    /// `P_n((−∞, t])`.
    pub emp_left: f64,
    /// `P_n([t, ∞))`, closed at `t`.
    pub emp_right: f64,
}

/// Precomputed processes on the merged grid of data points, fit knots and
/// (optionally) the mode.
#[derive(Debug, Clone)]
pub struct Processes {
    nodes: Vec<f64>,
    phi: Vec<f64>,
    inside: Vec<bool>,
    emp_left: Vec<f64>,
    emp_right: Vec<f64>,
    y_left: Vec<f64>,
    y_right: Vec<f64>,
    fit_left: Vec<f64>,
    fit_right: Vec<f64>,
    h_left: Vec<f64>,
    h_right: Vec<f64>,
}

impl Processes {
    pub fn new(f: &PwlConcave, s: &SortedSample, m: Option<f64>) -> Self {
        let lo = s.min().min(f.lo());
        let hi = s.max().max(f.hi());
        let mut nodes: Vec<f64> = s
            .points()
            .iter()
            .chain(f.knots())
            .copied()
            .chain(m.filter(|x| *x >= lo && *x <= hi))
            .collect();
        nodes.sort_by(f64::total_cmp);
        nodes.dedup();
        let k = nodes.len();

        let phi: Vec<f64> = nodes.iter().map(|&x| f.eval(x)).collect();
        // a segment is inside the domain iff both ends are
        let inside: Vec<bool> = (0..k - 1)
            .map(|i| phi[i].is_finite() && phi[i + 1].is_finite())
            .collect();

        let mut emp_left = vec![0.0; k];
        let mut emp_right = vec![0.0; k];
        let atoms: Vec<f64> = nodes.iter().map(|&x| s.atom(x)).collect();
        let mut acc = 0.0;
        for i in 0..k {
            acc += atoms[i];
            emp_left[i] = acc.min(1.0);
        }
        acc = 0.0;
        for i in (0..k).rev() {
            acc += atoms[i];
            emp_right[i] = acc.min(1.0);
        }

        let mut y_left = vec![0.0; k];
        let mut fit_left = vec![0.0; k];
        let mut h_left = vec![0.0; k];
        for i in 0..k - 1 {
            let h = nodes[i + 1] - nodes[i];
            y_left[i + 1] = y_left[i] + h * emp_left[i];
            let (mass, second) = if inside[i] {
                (h * j_value(phi[i], phi[i + 1]), h * h * j10(phi[i], phi[i + 1]))
            } else {
                (0.0, 0.0)
            };
            fit_left[i + 1] = fit_left[i] + mass;
            h_left[i + 1] = h_left[i] + h * fit_left[i] + second;
        }

        let mut y_right = vec![0.0; k];
        let mut fit_right = vec![0.0; k];
        let mut h_right = vec![0.0; k];
        for i in (0..k - 1).rev() {
            let h = nodes[i + 1] - nodes[i];
            y_right[i] = y_right[i + 1] + h * emp_right[i + 1];
            let (mass, second) = if inside[i] {
                (h * j_value(phi[i], phi[i + 1]), h * h * j01(phi[i], phi[i + 1]))
            } else {
                (0.0, 0.0)
            };
            fit_right[i] = fit_right[i + 1] + mass;
            h_right[i] = h_right[i + 1] + h * fit_right[i + 1] + second;
        }

        Processes {
            nodes,
            phi,
            inside,
            emp_left,
            emp_right,
            y_left,
            y_right,
            fit_left,
            fit_right,
            h_left,
            h_right,
        }
    }

    pub fn lo(&self) -> f64 {
        self.nodes[0]
    }

    pub fn hi(&self) -> f64 {
        self.nodes[self.nodes.len() - 1]
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn node_row(&self, i: usize) -> LrRow {
        LrRow {
            t: self.nodes[i],
            y_left: self.y_left[i],
            y_right: self.y_right[i],
            h_left: self.h_left[i],
            h_right: self.h_right[i],
            fit_left: self.fit_left[i],
            fit_right: self.fit_right[i],
            emp_left: self.emp_left[i],
            emp_right: self.emp_right[i],
        }
    }

    pub fn at(&self, t: f64) -> Result<LrRow> {
        if !(t >= self.lo() && t <= self.hi()) {
            return Err(Error::OutOfDomain(t, self.lo(), self.hi()));
        }
        let j = self.nodes.partition_point(|&x| x < t);
        if j < self.nodes.len() && self.nodes[j] == t {
            return Ok(self.node_row(j));
        }
        let i = j - 1;
        let (x0, x1) = (self.nodes[i], self.nodes[i + 1]);
        let (a, b) = (t - x0, x1 - t);
        let mut row = LrRow {
            t,
            y_left: self.y_left[i] + a * self.emp_left[i],
            y_right: self.y_right[i + 1] + b * self.emp_right[i + 1],
            h_left: self.h_left[i] + a * self.fit_left[i],
            h_right: self.h_right[i + 1] + b * self.fit_right[i + 1],
            fit_left: self.fit_left[i],
            fit_right: self.fit_right[i + 1],
            emp_left: self.emp_left[i],
            emp_right: self.emp_right[i + 1],
        };
        if self.inside[i] {
            let w = a / (x1 - x0);
            let pt = self.phi[i] + w * (self.phi[i + 1] - self.phi[i]);
            row.fit_left += a * j_value(self.phi[i], pt);
            row.h_left += a * a * j10(self.phi[i], pt);
            row.fit_right += b * j_value(pt, self.phi[i + 1]);
            row.h_right += b * b * j01(pt, self.phi[i + 1]);
        }
        Ok(row)
    }
}

/// Evaluates the processes of `f` against `s` at each abscissa in `eval_at`.
pub fn lr_processes(
    f: &PwlConcave,
    s: &SortedSample,
    m: Option<f64>,
    eval_at: &[f64],
) -> Result<Vec<LrRow>> {
    let p = Processes::new(f, s, m);
    eval_at.iter().map(|&t| p.at(t)).collect()
}
