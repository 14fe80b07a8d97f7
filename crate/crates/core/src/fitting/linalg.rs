//! Dense symmetric positive definite solves for the small normal-equation
//! systems of the fitters (at most 6x6).

use crate::scalar::Scalar;

/// In-place lower Cholesky factor of a row-major `n x n` matrix. On failure
/// returns the index of the first pivot that was not positive (relative to
/// the original diagonal entry times `rel_tol`).
pub fn cholesky<T: Scalar>(a: &mut [T], n: usize, rel_tol: T) -> Result<(), usize> {
    let diag: Vec<T> = (0..n).map(|k| a[k * n + k]).collect();
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d = d - a[j * n + k] * a[j * n + k];
        }
        if !(d > rel_tol * diag[j].abs()) || !d.is_finite() {
            return Err(j);
        }
        let d = d.sqrt();
        a[j * n + j] = d;
        for i in (j + 1)..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s = s - a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = s / d;
        }
        for i in 0..j {
            a[i * n + j] = T::zero();
        }
    }
    Ok(())
}

/// Solves `L L^T x = b` given the factor from [`cholesky`].
pub fn cholesky_solve<T: Scalar>(l: &[T], n: usize, b: &[T]) -> Vec<T> {
    let mut y = b.to_vec();
    for i in 0..n {
        let mut s = y[i];
        for k in 0..i {
            s = s - l[i * n + k] * y[k];
        }
        y[i] = s / l[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in (i + 1)..n {
            s = s - l[k * n + i] * y[k];
        }
        y[i] = s / l[i * n + i];
    }
    y
}

/// Solves `a x = b` for symmetric positive definite `a`.
pub fn spd_solve<T: Scalar>(a: &[T], n: usize, b: &[T]) -> Option<Vec<T>> {
    let mut l = a.to_vec();
    cholesky(&mut l, n, T::zero()).ok()?;
    Some(cholesky_solve(&l, n, b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_system() {
        let a = [4.0, 2.0, 0.6, 2.0, 5.0, 1.0, 0.6, 1.0, 3.0];
        let x = [1.0, -2.0, 0.5];
        let b: Vec<f64> = (0..3).map(|i| (0..3).map(|j| a[i * 3 + j] * x[j]).sum()).collect();
        let got = spd_solve(&a, 3, &b).unwrap();
        for (g, w) in got.iter().zip(x) {
            assert!((g - w).abs() < 1e-14);
        }
    }

    #[test]
    fn reports_failing_pivot() {
        // second column duplicates the first
        let mut a = vec![1.0, 1.0, 0.0, 1.0, 1.0, 0.0, 0.0, 0.0, 2.0];
        assert_eq!(cholesky(&mut a, 3, 1e-10), Err(1));
    }
}
