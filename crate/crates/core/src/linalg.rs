//! Small dense linear-algebra helpers shared by the observer and the controller.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Result of a (possibly regularised) least-squares solve.
#[derive(Clone, Debug, PartialEq)]
pub struct Solve {
    pub value: DVector<f64>,
    /// True when singular directions were truncated or damped.
    pub degraded: bool,
    pub sigma_min: f64,
    pub sigma_max: f64,
}

/// `A⁺ b` via SVD, discarding singular values below `rel_cutoff · σ_max`.
pub fn pinv_solve(a: &DMatrix<f64>, b: &DVector<f64>, rel_cutoff: f64) -> Solve {
    let svd = a.clone().svd(true, true);
    let u = svd.u.as_ref().expect("u requested");
    let vt = svd.v_t.as_ref().expect("v_t requested");
    let s = &svd.singular_values;
    let sigma_max = s.max();
    let sigma_min = s.min();
    let cutoff = rel_cutoff * sigma_max;
    let mut coeffs = u.transpose() * b;
    let mut degraded = false;
    for (i, c) in coeffs.iter_mut().enumerate() {
        if s[i] > cutoff && s[i] > 0.0 {
            *c /= s[i];
        } else {
            *c = 0.0;
            degraded = true;
        }
    }
    Solve {
        value: vt.transpose() * coeffs,
        degraded,
        sigma_min,
        sigma_max,
    }
}

/// Damped least squares with damping that fades in below `onset · σ_max`.
///
/// `λ² = λ_max² (1 − (σ_min / ε)²)` for `σ_min < ε`, zero otherwise, with
/// `λ_max = damping · σ_max` and `ε = onset · σ_max`. Away from singularities
/// this is the exact inverse.
pub fn dls_solve(a: &DMatrix<f64>, b: &DVector<f64>, damping: f64, onset: f64) -> Solve {
    let svd = a.clone().svd(true, true);
    let u = svd.u.as_ref().expect("u requested");
    let vt = svd.v_t.as_ref().expect("v_t requested");
    let s = &svd.singular_values;
    let sigma_max = s.max();
    let sigma_min = s.min();
    let eps = onset * sigma_max;
    let lambda_max = damping * sigma_max;
    let lambda2 = if sigma_min < eps {
        lambda_max * lambda_max * (1.0 - (sigma_min / eps).powi(2))
    } else {
        0.0
    };
    let mut coeffs = u.transpose() * b;
    for (i, c) in coeffs.iter_mut().enumerate() {
        let denom = s[i] * s[i] + lambda2;
        *c = if denom > 0.0 { *c * s[i] / denom } else { 0.0 };
    }
    Solve {
        value: vt.transpose() * coeffs,
        degraded: lambda2 > 0.0,
        sigma_min,
        sigma_max,
    }
}

/// Smallest eigenvalue of the symmetric part of `m`.
pub fn min_sym_eigenvalue(m: &DMatrix<f64>) -> f64 {
    let sym = (m + m.transpose()) * 0.5;
    SymmetricEigen::new(sym).eigenvalues.min()
}

pub fn matrix_rank(m: &DMatrix<f64>, rel_tol: f64) -> usize {
    let s = m.clone().svd(false, false).singular_values;
    let max = s.max();
    s.iter().filter(|&&x| x > rel_tol * max).count()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pinv_recovers_square_solution() {
        let a = DMatrix::from_row_slice(3, 3, &[2.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 4.0]);
        let x = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        let s = pinv_solve(&a, &(&a * &x), 1e-8);
        assert!(!s.degraded);
        assert!((s.value - x).norm() < 1e-12);
    }

    #[test]
    fn pinv_minimum_norm_on_rank_deficiency() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let b = DVector::from_vec(vec![2.0, 2.0]);
        let s = pinv_solve(&a, &b, 1e-8);
        assert!(s.degraded);
        assert!((s.value - DVector::from_vec(vec![1.0, 1.0])).norm() < 1e-12);
    }

    #[test]
    fn dls_is_exact_when_well_conditioned() {
        let a = DMatrix::from_row_slice(2, 2, &[3.0, 0.5, -0.5, 2.0]);
        let b = DVector::from_vec(vec![1.0, 1.0]);
        let s = dls_solve(&a, &b, 1e-3, 1e-2);
        assert!(!s.degraded);
        assert!((&a * &s.value - b).norm() < 1e-12);
    }

    #[test]
    fn dls_bounded_at_singularity() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let b = DVector::from_vec(vec![0.0, 1.0]);
        let s = dls_solve(&a, &b, 1e-3, 1e-2);
        assert!(s.degraded);
        assert!(s.value.norm() <= 1.0 / (2.0 * 1e-3) + 1e-9);
    }
}
