//! Small linear solvers.

/// Solves `A x = rhs` for symmetric positive definite tridiagonal `A` given by
/// its diagonal and off-diagonal. Returns `None` if a pivot is not positive.
pub fn solve_tridiagonal_spd(diag: &[f64], off: &[f64], rhs: &[f64]) -> Option<Vec<f64>> {
    let n = diag.len();
    debug_assert_eq!(off.len() + 1, n.max(1));
    debug_assert_eq!(rhs.len(), n);
    let mut d = diag.to_vec();
    let mut b = rhs.to_vec();
    for i in 1..n {
        if !(d[i - 1] > 0.0) {
            return None;
        }
        let l = off[i - 1] / d[i - 1];
        d[i] -= l * off[i - 1];
        b[i] -= l * b[i - 1];
    }
    if n == 0 || !(d[n - 1] > 0.0) {
        return if n == 0 { Some(vec![]) } else { None };
    }
    let mut x = vec![0.0; n];
    x[n - 1] = b[n - 1] / d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = (b[i] - off[i] * x[i + 1]) / d[i];
    }
    Some(x)
}

/// Gaussian elimination with partial pivoting on a dense row-major matrix.
pub fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f != 0.0 {
                for k in col..n {
                    a[row][k] -= f * a[col][k];
                }
                b[row] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| a[i][k] * x[k]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tridiagonal_matches_dense() {
        let diag = [4.0, 5.0, 6.0, 3.0];
        let off = [1.0, -2.0, 0.5];
        let rhs = [1.0, 2.0, 3.0, 4.0];
        let x = solve_tridiagonal_spd(&diag, &off, &rhs).unwrap();
        let mut a = vec![vec![0.0; 4]; 4];
        for i in 0..4 {
            a[i][i] = diag[i];
            if i < 3 {
                a[i][i + 1] = off[i];
                a[i + 1][i] = off[i];
            }
        }
        let y = solve_dense(a, rhs.to_vec()).unwrap();
        for (p, q) in x.iter().zip(&y) {
            assert!((p - q).abs() < 1e-14);
        }
        assert_eq!(solve_tridiagonal_spd(&[2.0], &[], &[4.0]).unwrap(), vec![2.0]);
        assert!(solve_tridiagonal_spd(&[1.0, 1.0], &[2.0], &[0.0, 0.0]).is_none());
    }
}
