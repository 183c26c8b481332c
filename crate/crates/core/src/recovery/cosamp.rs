use nalgebra::{DMatrix, DVector, RealField};
use serde::{Deserialize, Serialize};

use super::linalg::{hard_threshold, lstsq_on_support, scatter, support_of, top_k};
use super::{check_dims, Algorithm, RecoveryResult, SolverStatus};
use crate::Result;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CosampParams {
    pub max_iters: usize,
    /// Relative residual `||r|| / ||y||` below which the loop stops.
    pub tol: f64,
}

impl Default for CosampParams {
    fn default() -> Self {
        Self {
            max_iters: 100,
            tol: 1e-12,
        }
    }
}

/// Compressive sampling matching pursuit: identify `2s` atoms from the
/// residual proxy, merge with the current support, least squares, prune to `s`.
pub fn cosamp<T: RealField + Copy>(
    a: &DMatrix<T>,
    y: &DVector<T>,
    s: usize,
    params: &CosampParams,
) -> Result<RecoveryResult<T>> {
    check_dims(a, y)?;
    let y_norm = y.norm();
    if s == 0 || y_norm == T::zero() {
        return Ok(RecoveryResult::zero(a, y, Algorithm::Cosamp));
    }
    let n = a.ncols();
    let tol = y_norm * nalgebra::convert::<f64, T>(params.tol);
    let mut x = DVector::zeros(n);
    let mut residual = y.clone();
    let mut res_norm = y_norm;
    let mut proxy = DVector::zeros(n);
    let mut status = SolverStatus::default();
    let mut iterations = 0;

    while iterations < params.max_iters {
        iterations += 1;
        proxy.gemv_tr(T::one(), a, &residual, T::zero());
        let mut merged = top_k(&proxy, 2 * s);
        merged.extend(support_of(&x));
        merged.sort_unstable();
        merged.dedup();
        let (coef, deficient) = lstsq_on_support(a, y, &merged);
        status.rank_deficient |= deficient;
        let candidate = hard_threshold(&scatter(n, &merged, &coef), s);
        let cand_residual = y - a * &candidate;
        let cand_norm = cand_residual.norm();
        if cand_norm >= res_norm {
            // no progress; keep the better iterate
            status.converged = true;
            break;
        }
        x = candidate;
        residual = cand_residual;
        res_norm = cand_norm;
        if res_norm <= tol {
            status.converged = true;
            break;
        }
    }
    Ok(RecoveryResult::new(a, y, x, iterations, Algorithm::Cosamp, status))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_exact() {
        let a = DMatrix::<f64>::identity(6, 6);
        let x = DVector::from_vec(vec![0.0, 2.0, 0.0, -1.0, 0.0, 0.0]);
        let r = cosamp(&a, &x, 2, &CosampParams::default()).unwrap();
        assert_eq!(r.x_hat, x);
    }

    #[test]
    fn zero_measurements_give_zero() {
        let a = DMatrix::<f64>::identity(4, 4);
        let r = cosamp(&a, &DVector::zeros(4), 2, &CosampParams::default()).unwrap();
        assert_eq!(r.x_hat, DVector::zeros(4));
    }

    #[test]
    fn output_is_s_sparse() {
        let a = DMatrix::<f64>::from_fn(10, 20, |i, j| ((i * 13 + j * 7) % 9) as f64 - 4.0);
        let y = DVector::from_fn(10, |i, _| (i as f64 * 0.7).cos());
        let r = cosamp(&a, &y, 3, &CosampParams::default()).unwrap();
        assert!(r.support().len() <= 3);
    }
}
