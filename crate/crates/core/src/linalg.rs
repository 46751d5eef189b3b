//! Linear solvers used by the prediction step: a direct tridiagonal
//! (Thomas) solve and a matrix-free Jacobi-preconditioned conjugate gradient.

use crate::error::{Error, Result};

/// Solves a tridiagonal system in place of `rhs`.
///
/// `lower[k]` multiplies `x[k - 1]` in row `k` (`lower[0]` unused) and
/// `upper[k]` multiplies `x[k + 1]` (`upper[n - 1]` unused). No pivoting;
/// the matrix must be diagonally dominant by rows or by columns.
pub fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &mut [f64]) -> Result<()> {
    let n = diag.len();
    if lower.len() != n || upper.len() != n || rhs.len() != n {
        return Err(Error::LengthMismatch { expected: n, actual: rhs.len() });
    }
    if n == 0 {
        return Ok(());
    }
    let mut c = vec![0.0; n];
    let mut beta = diag[0];
    if beta == 0.0 {
        return Err(Error::LinearSolve { iterations: 0, residual: f64::INFINITY });
    }
    rhs[0] /= beta;
    for k in 1..n {
        c[k - 1] = upper[k - 1] / beta;
        beta = diag[k] - lower[k] * c[k - 1];
        if beta == 0.0 {
            return Err(Error::LinearSolve { iterations: k, residual: f64::INFINITY });
        }
        rhs[k] = (rhs[k] - lower[k] * rhs[k - 1]) / beta;
    }
    for k in (0..n - 1).rev() {
        rhs[k] -= c[k] * rhs[k + 1];
    }
    Ok(())
}

/// Outcome of an iterative solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    /// Final residual norm relative to the right-hand side norm.
    pub residual: f64,
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Preconditioned conjugate gradient for a symmetric positive definite
/// operator given only through `apply(x, out)`.
///
/// `x` holds the initial guess on entry and the solution on return.
/// Converges when `||b - A x|| <= tol * max(||b||, 1e-300)`.
pub fn conjugate_gradient<F>(
    apply: F,
    inv_diag: &[f64],
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
) -> Result<SolveStats>
where
    F: Fn(&[f64], &mut [f64]),
{
    let n = b.len();
    let bnorm = dot(b, b).sqrt();
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(SolveStats { iterations: 0, residual: 0.0 });
    }
    let target = tol * bnorm;

    let mut ax = vec![0.0; n];
    apply(x, &mut ax);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    let mut rnorm = dot(&r, &r).sqrt();
    if rnorm <= target {
        return Ok(SolveStats { iterations: 0, residual: rnorm / bnorm });
    }
    let mut z: Vec<f64> = r.iter().zip(inv_diag).map(|(ri, d)| ri * d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = ax;

    for it in 1..=max_iter {
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::LinearSolve { iterations: it, residual: rnorm / bnorm });
        }
        let alpha = rz / pap;
        for k in 0..n {
            x[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
        }
        rnorm = dot(&r, &r).sqrt();
        if rnorm <= target {
            return Ok(SolveStats { iterations: it, residual: rnorm / bnorm });
        }
        for k in 0..n {
            z[k] = r[k] * inv_diag[k];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for k in 0..n {
            p[k] = z[k] + beta * p[k];
        }
    }
    Err(Error::LinearSolve { iterations: max_iter, residual: rnorm / bnorm })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_mul(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
        a.iter().map(|row| dot(row, x)).collect()
    }

    #[test]
    fn thomas_small_system() {
        // [2 1 0; 1 3 1; 0 1 2] x = [3, 5, 3] -> x = [1, 1, 1]
        let mut rhs = vec![3.0, 5.0, 3.0];
        solve_tridiagonal(&[0.0, 1.0, 1.0], &[2.0, 3.0, 2.0], &[1.0, 1.0, 0.0], &mut rhs).unwrap();
        for v in rhs {
            assert!((v - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn thomas_rejects_length_mismatch() {
        let mut rhs = vec![1.0; 2];
        assert!(solve_tridiagonal(&[0.0; 3], &[1.0; 3], &[0.0; 3], &mut rhs).is_err());
    }

    #[test]
    fn cg_matches_dense_spd() {
        let n = 12;
        let a: Vec<Vec<f64>> = (0..n)
            .map(|i: usize| {
                (0..n)
                    .map(|j| match i.abs_diff(j) {
                        0 => 4.0 + i as f64 * 0.1,
                        1 => -1.0,
                        2 => 0.25,
                        _ => 0.0,
                    })
                    .collect()
            })
            .collect();
        let x_true: Vec<f64> = (0..n).map(|i| (i as f64 * 0.7).sin()).collect();
        let b = dense_mul(&a, &x_true);
        let inv_diag: Vec<f64> = (0..n).map(|i| 1.0 / a[i][i]).collect();
        let mut x = vec![0.0; n];
        let stats =
            conjugate_gradient(|v, out| out.copy_from_slice(&dense_mul(&a, v)), &inv_diag, &b, &mut x, 1e-13, 100)
                .unwrap();
        assert!(stats.iterations <= n + 2);
        for (xi, ti) in x.iter().zip(&x_true) {
            assert!((xi - ti).abs() < 1e-11);
        }
    }

    #[test]
    fn cg_reports_non_convergence() {
        let b = vec![1.0, 2.0, 3.0, 4.0];
        let mut x = vec![0.0; 4];
        let diag = [1.0, 10.0, 100.0, 1000.0];
        let err = conjugate_gradient(
            |v, out| {
                for k in 0..4 {
                    out[k] = diag[k] * v[k];
                }
            },
            &[1.0; 4],
            &b,
            &mut x,
            1e-14,
            1,
        )
        .unwrap_err();
        assert!(matches!(err, Error::LinearSolve { iterations: 1, .. }));
    }

    #[test]
    fn cg_zero_rhs() {
        let mut x = vec![3.0; 3];
        let s = conjugate_gradient(|v, o| o.copy_from_slice(v), &[1.0; 3], &[0.0; 3], &mut x, 1e-10, 5).unwrap();
        assert_eq!(s.iterations, 0);
        assert!(x.iter().all(|&v| v == 0.0));
    }
}
