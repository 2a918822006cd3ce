//! Small dense symmetric solves. Matrices are row-major `k * k` slices;
//! dimensions here never exceed ~61.

use crate::scalar::Scalar;

/// In-place Cholesky factorization `A = L Lᵀ`; the lower triangle of `a`
/// is overwritten with `L`. Returns `false` if `a` is not numerically
/// positive definite.
pub fn cholesky<F: Scalar>(a: &mut [F], k: usize) -> bool {
    debug_assert_eq!(a.len(), k * k);
    for j in 0..k {
        let mut d = a[j * k + j];
        for t in 0..j {
            d = d - a[j * k + t] * a[j * k + t];
        }
        if !(d > F::zero()) || !d.is_finite() {
            return false;
        }
        let d = d.sqrt();
        a[j * k + j] = d;
        for i in j + 1..k {
            let mut s = a[i * k + j];
            for t in 0..j {
                s = s - a[i * k + t] * a[j * k + t];
            }
            a[i * k + j] = s / d;
        }
    }
    true
}

/// Solves `L Lᵀ x = b` given the factor from [`cholesky`].
pub fn cholesky_solve<F: Scalar>(l: &[F], k: usize, b: &[F]) -> Vec<F> {
    let mut y = b.to_vec();
    for i in 0..k {
        let mut s = y[i];
        for t in 0..i {
            s = s - l[i * k + t] * y[t];
        }
        y[i] = s / l[i * k + i];
    }
    for i in (0..k).rev() {
        let mut s = y[i];
        for t in i + 1..k {
            s = s - l[t * k + i] * y[t];
        }
        y[i] = s / l[i * k + i];
    }
    y
}

/// Solves the symmetric positive-definite system `A x = b`.
pub fn solve_spd<F: Scalar>(a: &[F], k: usize, b: &[F]) -> Option<Vec<F>> {
    let mut l = a.to_vec();
    if !cholesky(&mut l, k) {
        return None;
    }
    Some(cholesky_solve(&l, k, b))
}
