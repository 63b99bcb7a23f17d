//! Active-set Newton ascent over concave functions that are piecewise linear
//! on a fixed grid.
//!
//! A candidate function is written as a constant plus nonnegative multiples of
//! hinge functions anchored at grid nodes,
//!
//! ```text
//! left hinge at t:   min(x − t, 0)      right hinge at t:   min(t − x, 0)
//! ```
//!
//! so concavity, and the mode constraint when present, become sign constraints
//! on the hinge coefficients. Without a mode the left hinges at interior nodes
//! plus a free affine part span the concave cone; with a mode at node `k` the
//! left hinges at nodes `1..=k` and the right hinges at nodes `k..N-1` do, the
//! two hinges at `k` carrying the one-sided slopes there.
//!
//! The Newton steps are taken in the values at the breakpoints of the current
//! function, where the Hessian is tridiagonal. A step that would push an active
//! hinge coefficient below zero is cut at the boundary and the hinge removed;
//! once the restricted problem is solved the inactive hinge with the largest
//! directional derivative is added. Those directional derivatives are exactly
//! the integrated-process residuals of the characterization, so the loop stops
//! on the same quantity the certificates check.

use crate::linalg::solve_tridiagonal_spd;

/// Convex penalty over one breakpoint segment and its derivatives with respect
/// to the two end values.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct SegTerms {
    pub value: f64,
    pub ga: f64,
    pub gb: f64,
    pub haa: f64,
    pub hab: f64,
    pub hbb: f64,
}

/// Objective `Σ c_i v_i − P(v)` over node values `v` with `P` convex and
/// additive over linear segments.
pub(crate) trait GridObjective {
    fn nodes(&self) -> &[f64];
    fn linear(&self) -> &[f64];
    /// `P` restricted to the segment between nodes `a < b` on which the
    /// function is linear from `ua` to `ub`.
    fn penalty(&self, a: usize, b: usize, ua: f64, ub: f64) -> SegTerms;
    /// Gradient of the objective with respect to every node value.
    fn node_gradient(&self, values: &[f64]) -> Vec<f64>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub(crate) enum Hinge {
    Left(usize),
    Right(usize),
}

impl Hinge {
    pub fn node(self) -> usize {
        match self {
            Hinge::Left(i) | Hinge::Right(i) => i,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct EngineOptions {
    pub max_iter: usize,
    pub damping: f64,
    pub min_step: f64,
    pub insert_tol: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct EngineOutcome {
    pub values: Vec<f64>,
    /// Active hinges with strictly positive coefficient, and the coefficients.
    pub kinks: Vec<(Hinge, f64)>,
    pub objective: f64,
    pub iterations: usize,
    /// Worst KKT violation over all hinges.
    pub residual: f64,
    pub converged: bool,
    /// Objective after every accepted step.
    pub trace: Vec<f64>,
}

pub(crate) struct Engine<'a, O: GridObjective> {
    obj: &'a O,
    n: usize,
    mode: Option<usize>,
    left: Vec<bool>,
    right: Vec<bool>,
    // structure derived from the active set
    bps: Vec<usize>,
    group: Vec<usize>,
    ngroups: usize,
    data: Vec<f64>,
    y: Vec<f64>,
}

struct Eval {
    value: f64,
    grad: Vec<f64>,
    diag: Vec<f64>,
    off: Vec<f64>,
}

impl<'a, O: GridObjective> Engine<'a, O> {
    /// Starts from the given node values, which must be concave (and peak at
    /// the mode node when one is given). Kinks larger than a relative 1e-9
    /// become the initial active set.
    pub fn from_values(obj: &'a O, mode: Option<usize>, values: &[f64]) -> Self {
        let n = obj.nodes().len();
        assert!(n >= 2 && values.len() == n);
        let mut e = Engine {
            obj,
            n,
            mode,
            left: vec![false; n],
            right: vec![false; n],
            bps: vec![],
            group: vec![],
            ngroups: 0,
            data: vec![],
            y: vec![],
        };
        let x = obj.nodes();
        let slope = |i: usize| (values[i + 1] - values[i]) / (x[i + 1] - x[i]);
        let big = |d: f64, s: f64| d > 1e-9 * (1.0 + s.abs());
        for h in e.candidates() {
            let on = match h {
                Hinge::Left(i) if Some(i) == mode => big(slope(i - 1), 0.0),
                Hinge::Right(i) if Some(i) == mode => big(-slope(i), 0.0),
                Hinge::Left(i) | Hinge::Right(i) => big(slope(i - 1) - slope(i), slope(i)),
            };
            e.set_active(h, on);
        }
        e.rebuild(values);
        e
    }

    fn candidates(&self) -> Vec<Hinge> {
        let n = self.n;
        match self.mode {
            None => (1..n - 1).map(Hinge::Left).collect(),
            Some(k) => (1..=k)
                .map(Hinge::Left)
                .chain((k..n - 1).map(Hinge::Right))
                .collect(),
        }
    }

    fn is_active(&self, h: Hinge) -> bool {
        match h {
            Hinge::Left(i) => self.left[i],
            Hinge::Right(i) => self.right[i],
        }
    }

    fn set_active(&mut self, h: Hinge, on: bool) {
        match h {
            Hinge::Left(i) => self.left[i] = on,
            Hinge::Right(i) => self.right[i] = on,
        }
    }

    fn active(&self) -> Vec<Hinge> {
        self.candidates()
            .into_iter()
            .filter(|&h| self.is_active(h))
            .collect()
    }

    /// Recomputes breakpoints, tie groups and data coefficients, and sets the
    /// free variables from node values.
    fn rebuild(&mut self, values: &[f64]) {
        let n = self.n;
        let mut bps: Vec<usize> = (0..n)
            .filter(|&i| {
                i == 0 || i == n - 1 || Some(i) == self.mode || self.left[i] || self.right[i]
            })
            .collect();
        bps.dedup();
        let mut group = vec![0usize; bps.len()];
        let mut g = 0;
        for p in 1..bps.len() {
            let tied = match self.mode {
                Some(k) if bps[p] == k => !self.left[k],
                Some(k) if bps[p - 1] == k => !self.right[k],
                _ => false,
            };
            if !tied {
                g += 1;
            }
            group[p] = g;
        }
        let ngroups = g + 1;

        let x = self.obj.nodes();
        let c = self.obj.linear();
        let mut data = vec![0.0; bps.len()];
        for p in 0..bps.len() - 1 {
            let (a, b) = (bps[p], bps[p + 1]);
            let len = x[b] - x[a];
            for i in a..b {
                let lam = (x[i] - x[a]) / len;
                data[p] += c[i] * (1.0 - lam);
                data[p + 1] += c[i] * lam;
            }
        }
        *data.last_mut().unwrap() += c[n - 1];

        let mut y = vec![0.0; ngroups];
        let mut cnt = vec![0usize; ngroups];
        for (p, &i) in bps.iter().enumerate() {
            y[group[p]] += values[i];
            cnt[group[p]] += 1;
        }
        for (v, c) in y.iter_mut().zip(&cnt) {
            *v /= *c as f64;
        }
        self.bps = bps;
        self.group = group;
        self.ngroups = ngroups;
        self.data = data;
        self.y = y;
    }

    fn breakpoint_values(&self, y: &[f64]) -> Vec<f64> {
        self.group.iter().map(|&g| y[g]).collect()
    }

    fn node_values(&self, y: &[f64]) -> Vec<f64> {
        let u = self.breakpoint_values(y);
        let x = self.obj.nodes();
        let mut v = vec![0.0; self.n];
        for p in 0..self.bps.len() - 1 {
            let (a, b) = (self.bps[p], self.bps[p + 1]);
            let len = x[b] - x[a];
            for i in a..b {
                v[i] = u[p] + (x[i] - x[a]) / len * (u[p + 1] - u[p]);
            }
        }
        v[self.n - 1] = *u.last().unwrap();
        v
    }

    fn evaluate(&self, y: &[f64], derivatives: bool) -> Eval {
        let u = self.breakpoint_values(y);
        let nb = self.bps.len();
        let mut value: f64 = self.data.iter().zip(&u).map(|(d, v)| d * v).sum();
        let mut gu = self.data.clone();
        let mut du = vec![0.0; nb];
        let mut ou = vec![0.0; nb.saturating_sub(1)];
        for p in 0..nb - 1 {
            let t = self.obj.penalty(self.bps[p], self.bps[p + 1], u[p], u[p + 1]);
            value -= t.value;
            if derivatives {
                gu[p] -= t.ga;
                gu[p + 1] -= t.gb;
                du[p] += t.haa;
                du[p + 1] += t.hbb;
                ou[p] += t.hab;
            }
        }
        if !derivatives {
            return Eval {
                value,
                grad: vec![],
                diag: vec![],
                off: vec![],
            };
        }
        // collapse tie groups, which are contiguous, so the result stays tridiagonal
        let ng = self.ngroups;
        let mut grad = vec![0.0; ng];
        let mut diag = vec![0.0; ng];
        let mut off = vec![0.0; ng.saturating_sub(1)];
        for p in 0..nb {
            let g = self.group[p];
            grad[g] += gu[p];
            diag[g] += du[p];
            if p + 1 < nb {
                let h = self.group[p + 1];
                if h == g {
                    diag[g] += 2.0 * ou[p];
                } else {
                    off[g] += ou[p];
                }
            }
        }
        Eval {
            value,
            grad,
            diag,
            off,
        }
    }

    /// Coefficients of the active hinges, a linear function of the
    /// breakpoint values.
    fn thetas(&self, hinges: &[Hinge], u: &[f64]) -> Vec<f64> {
        let x = self.obj.nodes();
        let pos = |i: usize| self.bps.binary_search(&i).expect("active hinge is a breakpoint");
        let slope = |p: usize| (u[p + 1] - u[p]) / (x[self.bps[p + 1]] - x[self.bps[p]]);
        hinges
            .iter()
            .map(|&h| {
                let p = pos(h.node());
                match h {
                    Hinge::Left(i) if Some(i) == self.mode => slope(p - 1),
                    Hinge::Right(i) if Some(i) == self.mode => -slope(p),
                    _ => slope(p - 1) - slope(p),
                }
            })
            .collect()
    }

    /// Directional derivatives of the objective along every hinge.
    fn hinge_gradients(&self, values: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let r = self.obj.node_gradient(values);
        let x = self.obj.nodes();
        let n = self.n;
        let mut left = vec![0.0; n];
        let mut acc_r = 0.0;
        let mut acc_g = 0.0;
        for i in 0..n - 1 {
            acc_r += r[i];
            acc_g += (x[i + 1] - x[i]) * acc_r;
            left[i + 1] = -acc_g;
        }
        let mut right = vec![0.0; n];
        acc_r = 0.0;
        acc_g = 0.0;
        for i in (1..n).rev() {
            acc_r += r[i];
            acc_g += (x[i] - x[i - 1]) * acc_r;
            right[i - 1] = -acc_g;
        }
        (left, right)
    }

    pub fn solve(mut self, opts: &EngineOptions) -> EngineOutcome {
        let mut iterations = 0usize;
        let mut trace = Vec::new();
        loop {
            let budget_left = self.newton(opts, &mut iterations, &mut trace);
            let values = self.node_values(&self.y);
            let (gl, gr) = self.hinge_gradients(&values);
            let grad_of = |h: Hinge| match h {
                Hinge::Left(i) => gl[i],
                Hinge::Right(i) => gr[i],
            };
            let mut residual: f64 = 0.0;
            let mut best: Option<(Hinge, f64)> = None;
            for h in self.candidates() {
                let g = grad_of(h);
                if self.is_active(h) {
                    residual = residual.max(g.abs());
                } else {
                    residual = residual.max(g);
                    if g > opts.insert_tol && best.is_none_or(|(_, b)| g > b) {
                        best = Some((h, g));
                    }
                }
            }
            match best {
                Some((h, _)) if budget_left => {
                    self.set_active(h, true);
                    self.rebuild(&values);
                }
                _ => {
                    let converged = best.is_none();
                    return self.outcome(values, residual, iterations, converged, trace);
                }
            }
        }
    }

    /// Newton iterations on the current active set. Returns `false` once the
    /// iteration budget is spent.
    fn newton(&mut self, opts: &EngineOptions, iterations: &mut usize, trace: &mut Vec<f64>) -> bool {
        loop {
            if *iterations >= opts.max_iter {
                return false;
            }
            let ev = self.evaluate(&self.y, true);
            // `diag`/`off` hold the penalty Hessian, the negated objective Hessian
            let Some(step) = solve_tridiagonal_spd(&ev.diag, &ev.off, &ev.grad) else {
                return true;
            };
            let dec: f64 = ev.grad.iter().zip(&step).map(|(g, s)| g * s).sum();
            let vscale = 1.0 + ev.value.abs();
            if !(dec > 1e-30 * vscale) {
                return true;
            }
            let active = self.active();
            let th = self.thetas(&active, &self.breakpoint_values(&self.y));
            let dth = self.thetas(&active, &self.breakpoint_values(&step));
            let mut amax = f64::INFINITY;
            let mut block = None;
            for (j, (&t, &dt)) in th.iter().zip(&dth).enumerate() {
                if dt < 0.0 {
                    let a = t.max(0.0) / -dt;
                    if a < amax {
                        amax = a;
                        block = Some(active[j]);
                    }
                }
            }
            let hits = amax <= 1.0;
            let start = amax.min(1.0);
            let mut alpha = start;
            *iterations += 1;
            let accepted = loop {
                let ytry: Vec<f64> = self.y.iter().zip(&step).map(|(y, s)| y + alpha * s).collect();
                let v = self.evaluate(&ytry, false).value;
                // below the resolution of the objective the full step is taken
                if v >= ev.value + 1e-4 * alpha * dec
                    || (alpha == start && dec < 1e-14 * vscale)
                    || (hits && alpha == start && v >= ev.value - 1e-13 * vscale)
                {
                    break Some((alpha, ytry, v));
                }
                alpha *= opts.damping;
                if alpha < opts.min_step {
                    break None;
                }
            };
            let Some((alpha, ytry, v)) = accepted else {
                return true;
            };
            debug_assert!(v >= ev.value - 1e-12 * vscale, "ascent violated: {} -> {}", ev.value, v);
            trace.push(v);
            self.y = ytry;
            if hits && alpha == start {
                let values = self.node_values(&self.y);
                self.set_active(block.expect("blocking hinge"), false);
                self.rebuild(&values);
            } else if dec < 1e-20 * vscale {
                return true;
            }
        }
    }

    fn outcome(
        &self,
        values: Vec<f64>,
        residual: f64,
        iterations: usize,
        converged: bool,
        trace: Vec<f64>,
    ) -> EngineOutcome {
        let active = self.active();
        let th = self.thetas(&active, &self.breakpoint_values(&self.y));
        let kinks = active
            .into_iter()
            .zip(th)
            .filter(|&(_, t)| t > 0.0)
            .collect();
        EngineOutcome {
            objective: self.evaluate(&self.y, false).value,
            values,
            kinks,
            iterations,
            residual,
            converged,
            trace,
        }
    }
}
