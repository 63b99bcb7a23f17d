//! Exact solutions for tiny samples by enumerating every knot configuration.
//!
//! For each subset of interior grid points, and for a constrained fit each
//! way of tying the slopes next to the mode to zero, the criterion is
//! maximized over functions linear between the chosen breakpoints with a dense
//! Newton method. The best configuration that is concave (and peaks at the
//! mode) is the estimator.

use crate::augment::augment;
use crate::characterization::{knot_indices, verify_constrained, verify_unconstrained};
use crate::error::{Error, Result};
use crate::kernels::{j10, SegmentMoments};
use crate::linalg::solve_dense;
use crate::mle::{psi_of_values, Fit};
use crate::pwl::PwlConcave;
use crate::sample::SortedSample;

/// Largest grid the enumeration accepts.
pub const MAX_GRID: usize = 8;

#[derive(Debug, Clone)]
pub struct OracleResult {
    pub best: Fit,
    pub subsets_tried: usize,
    pub feasible_count: usize,
}

struct Reduced<'a> {
    x: &'a [f64],
    w: &'a [f64],
    /// `v = B y`, row-major `N × G`.
    b: Vec<Vec<f64>>,
}

impl Reduced<'_> {
    fn values(&self, y: &[f64]) -> Vec<f64> {
        self.b
            .iter()
            .map(|row| row.iter().zip(y).map(|(a, b)| a * b).sum())
            .collect()
    }

    fn psi(&self, y: &[f64]) -> f64 {
        psi_of_values(self.x, self.w, &self.values(y))
    }

    /// Gradient and negated Hessian of `Ψ_n` in the reduced coordinates.
    fn derivatives(&self, y: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>) {
        let n = self.x.len();
        let g = y.len();
        let v = self.values(y);
        let mut r = self.w.to_vec();
        let mut hess = vec![vec![0.0; n]; n];
        for i in 0..n - 1 {
            let h = self.x[i + 1] - self.x[i];
            let m = SegmentMoments::new(v[i], v[i + 1]);
            r[i] -= h * j10(v[i], v[i + 1]);
            r[i + 1] -= h * j10(v[i + 1], v[i]);
            hess[i][i] += h * m.j20;
            hess[i][i + 1] += h * m.j11;
            hess[i + 1][i] += h * m.j11;
            hess[i + 1][i + 1] += h * m.j02;
        }
        let mut grad = vec![0.0; g];
        let mut red = vec![vec![0.0; g]; g];
        for i in 0..n {
            for a in 0..g {
                grad[a] += self.b[i][a] * r[i];
            }
        }
        for i in 0..n {
            for j in 0..n {
                if hess[i][j] == 0.0 {
                    continue;
                }
                for a in 0..g {
                    if self.b[i][a] == 0.0 {
                        continue;
                    }
                    for c in 0..g {
                        red[a][c] += self.b[i][a] * hess[i][j] * self.b[j][c];
                    }
                }
            }
        }
        (grad, red)
    }

    /// Damped Newton to a gradient norm of 1e-12. `None` if the criterion has
    /// no maximizer in this configuration.
    fn maximize(&self, start: f64) -> Option<Vec<f64>> {
        let mut y = vec![start; self.b[0].len()];
        let mut val = self.psi(&y);
        for _ in 0..200 {
            let (grad, neg_hess) = self.derivatives(&y);
            if grad.iter().all(|g| g.abs() < 1e-12) {
                return Some(y);
            }
            let tiny = |dec: f64| dec < 1e-14 * (1.0 + val.abs());
            let step = solve_dense(neg_hess, grad.clone())?;
            let dec: f64 = grad.iter().zip(&step).map(|(a, b)| a * b).sum();
            if !(dec > 0.0) {
                return None;
            }
            let mut alpha = 1.0;
            loop {
                let trial: Vec<f64> = y.iter().zip(&step).map(|(a, b)| a + alpha * b).collect();
                let tv = self.psi(&trial);
                // below the resolution of the criterion a full Newton step is taken
                if tv.is_finite() && (tv >= val + 1e-4 * alpha * dec || tiny(dec)) {
                    y = trial;
                    val = tv;
                    break;
                }
                alpha *= 0.5;
                if alpha < 1e-14 {
                    // no further progress possible at machine precision
                    return None;
                }
            }
            if y.iter().any(|v| !v.is_finite() || v.abs() > 500.0) {
                return None;
            }
        }
        None
    }
}

/// Breakpoints and tie groups of one configuration.
fn configuration(n: usize, subset: u32, mode: Option<(usize, bool, bool)>) -> (Vec<usize>, Vec<usize>) {
    let mut bps: Vec<usize> = (0..n)
        .filter(|&i| {
            i == 0
                || i == n - 1
                || (i < n - 1 && subset & (1 << (i - 1)) != 0)
                || mode.is_some_and(|(k, _, _)| k == i)
        })
        .collect();
    bps.dedup();
    let mut group = vec![0usize; bps.len()];
    let mut g = 0;
    for p in 1..bps.len() {
        let tied = match mode {
            Some((k, left_free, _)) if bps[p] == k => !left_free,
            Some((k, _, right_free)) if bps[p - 1] == k => !right_free,
            _ => false,
        };
        if !tied {
            g += 1;
        }
        group[p] = g;
    }
    (bps, group)
}

fn interpolation(x: &[f64], bps: &[usize], group: &[usize]) -> Vec<Vec<f64>> {
    let g = group[group.len() - 1] + 1;
    let mut b = vec![vec![0.0; g]; x.len()];
    for p in 0..bps.len() - 1 {
        let (lo, hi) = (bps[p], bps[p + 1]);
        for i in lo..hi {
            let lam = (x[i] - x[lo]) / (x[hi] - x[lo]);
            b[i][group[p]] += 1.0 - lam;
            b[i][group[p + 1]] += lam;
        }
    }
    b[x.len() - 1][group[bps.len() - 1]] = 1.0;
    b
}

fn feasible(x: &[f64], bps: &[usize], u: &[f64], mode: Option<usize>) -> bool {
    let slopes: Vec<f64> = (0..bps.len() - 1)
        .map(|p| (u[p + 1] - u[p]) / (x[bps[p + 1]] - x[bps[p]]))
        .collect();
    let concave = slopes
        .windows(2)
        .all(|s| s[1] <= s[0] + 1e-9 * (1.0 + s[0].abs()));
    let peaked = mode.is_none_or(|k| {
        let p = bps.iter().position(|&i| i == k).expect("mode is a breakpoint");
        (p == 0 || slopes[p - 1] >= -1e-9) && (p == bps.len() - 1 || slopes[p] <= 1e-9)
    });
    concave && peaked
}

/// Exact estimator for samples whose (augmented) grid has at most
/// [`MAX_GRID`] points; constrained when `m` is given.
pub fn fit_exact_small(s: &SortedSample, m: Option<f64>) -> Result<OracleResult> {
    let (grid, weights, mode) = match m {
        None => (s.points().to_vec(), s.weights().to_vec(), None),
        Some(m) => {
            let a = augment(s, m);
            (a.z.clone(), a.weights.clone(), Some(a.mode_index))
        }
    };
    let n = grid.len();
    if n > MAX_GRID {
        return Err(Error::TooLarge(n));
    }
    if n < 2 {
        return Err(Error::DegenerateSample(n));
    }
    let start = -(grid[n - 1] - grid[0]).ln();
    let patterns: Vec<Option<(usize, bool, bool)>> = match mode {
        None => vec![None],
        Some(k) => {
            let lefts: &[bool] = if k == 0 { &[false] } else { &[false, true] };
            let rights: &[bool] = if k == n - 1 { &[false] } else { &[false, true] };
            lefts
                .iter()
                .flat_map(|&l| rights.iter().map(move |&r| Some((k, l, r))))
                .collect()
        }
    };
    let mut tried = 0;
    let mut feasible_count = 0;
    let mut best: Option<(f64, Vec<usize>, Vec<f64>)> = None;
    for subset in 0u32..(1 << (n - 2)) {
        if mode.is_some_and(|k| k > 0 && k < n - 1 && subset & (1 << (k - 1)) != 0) {
            // the mode is a breakpoint in every configuration
            continue;
        }
        for &pattern in &patterns {
            tried += 1;
            let (bps, group) = configuration(n, subset, pattern);
            let red = Reduced {
                x: &grid,
                w: &weights,
                b: interpolation(&grid, &bps, &group),
            };
            let Some(y) = red.maximize(start) else {
                continue;
            };
            let u: Vec<f64> = group.iter().map(|&g| y[g]).collect();
            if !feasible(&grid, &bps, &u, mode) {
                continue;
            }
            feasible_count += 1;
            let psi = red.psi(&y);
            if best.as_ref().is_none_or(|b| psi > b.0) {
                best = Some((psi, bps, u));
            }
        }
    }
    let (psi, bps, u) = best.ok_or_else(|| Error::Inconsistent("no feasible configuration".into()))?;
    let estimate = PwlConcave::new(bps.iter().map(|&i| grid[i]).collect(), u)?;
    let values: Vec<f64> = grid.iter().map(|&x| estimate.eval(x)).collect();
    let loglik: f64 = weights.iter().zip(&values).map(|(w, v)| w * v).sum();
    let report = match m {
        None => verify_unconstrained(&estimate, s, 1e-6)?,
        Some(m) => verify_constrained(&estimate, s, m, 1e-6)?,
    };
    if !report.pass {
        return Err(Error::Inconsistent(format!(
            "enumerated optimum fails its certificate (residual {:.3e})",
            report.max_residual()
        )));
    }
    Ok(OracleResult {
        best: Fit {
            knot_set: knot_indices(&estimate, &grid),
            estimate,
            grid,
            loglik,
            psi,
            iterations: 0,
            max_certificate_violation: report.max_residual(),
            constrained: m.is_some(),
            mode: m,
            trace: vec![],
        },
        subsets_tried: tried,
        feasible_count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(xs: &[f64]) -> SortedSample {
        SortedSample::from_observations(xs).unwrap()
    }

    #[test]
    fn two_points() {
        let r = fit_exact_small(&sample(&[0.0, 1.0]), None).unwrap();
        assert!((r.best.psi + 1.0).abs() < 1e-12);
        assert!(r.best.estimate.values().iter().all(|v| v.abs() < 1e-12));
        let c = fit_exact_small(&sample(&[0.0, 1.0]), Some(0.5)).unwrap();
        assert!(c.best.estimate.sup_distance(&r.best.estimate, 0.0) < 1e-12);
    }

    #[test]
    fn skewed_three_points_beat_the_uniform() {
        let s = sample(&[0.0, 0.1, 1.0]);
        let r = fit_exact_small(&s, None).unwrap();
        assert!(r.best.psi > -1.0 + 1e-3);
        assert_eq!(r.subsets_tried, 2);
    }

    #[test]
    fn rejects_large_grids() {
        let s = sample(&[0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]);
        assert!(matches!(fit_exact_small(&s, None), Err(Error::TooLarge(9))));
        let s = sample(&[0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0]);
        assert!(matches!(fit_exact_small(&s, Some(0.5)), Err(Error::TooLarge(9))));
    }

    #[test]
    fn interpolation_rows_sum_to_one() {
        let x = [0.0, 0.5, 1.0, 3.0, 4.0];
        let (bps, group) = configuration(5, 0b010, Some((1, false, true)));
        assert_eq!(bps, vec![0, 1, 2, 4]);
        assert_eq!(group, vec![0, 0, 1, 2]);
        for row in interpolation(&x, &bps, &group) {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        }
    }
}
