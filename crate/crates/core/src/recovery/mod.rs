//! Sparse recovery on the observed system and the success criterion.

mod cosamp;
mod iht;
mod lasso;
mod linalg;
mod omp;

use nalgebra::{DMatrix, DVector, RealField};
use serde::{Deserialize, Serialize};

pub use cosamp::{cosamp, CosampParams};
pub use iht::{iht, IhtParams, IhtStep};
pub use lasso::{debias, kkt_violation, lasso, lasso_objective, LambdaPolicy, LassoParams};
pub use linalg::soft_threshold;
pub use omp::omp;

/// Relative error below which a recovery counts as successful.
pub const DEFAULT_SUCCESS_THRESHOLD: f64 = 1e-2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Omp,
    Iht,
    Cosamp,
    Lasso,
}

/// Termination flags.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct SolverStatus {
    pub converged: bool,
    /// A least-squares step hit a rank-deficient column set.
    pub rank_deficient: bool,
    pub diverged: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RecoveryResult<T: RealField> {
    pub x_hat: DVector<T>,
    pub iterations: usize,
    /// `||y - A x_hat||`.
    pub residual_norm: T,
    pub algorithm: Algorithm,
    pub status: SolverStatus,
}

impl<T: RealField + Copy> RecoveryResult<T> {
    pub(crate) fn new(
        a: &DMatrix<T>,
        y: &DVector<T>,
        x_hat: DVector<T>,
        iterations: usize,
        algorithm: Algorithm,
        status: SolverStatus,
    ) -> Self {
        let residual_norm = (y - a * &x_hat).norm();
        Self {
            x_hat,
            iterations,
            residual_norm,
            algorithm,
            status,
        }
    }

    pub(crate) fn zero(a: &DMatrix<T>, y: &DVector<T>, algorithm: Algorithm) -> Self {
        Self::new(
            a,
            y,
            DVector::zeros(a.ncols()),
            0,
            algorithm,
            SolverStatus {
                converged: true,
                ..Default::default()
            },
        )
    }

    pub fn support(&self) -> Vec<usize> {
        linalg::support_of(&self.x_hat)
    }
}

pub(crate) fn check_dims<T: RealField>(a: &DMatrix<T>, y: &DVector<T>) -> crate::Result<()> {
    if a.nrows() != y.len() {
        return Err(crate::Error::invalid(format!(
            "A has {} rows but y has {} entries",
            a.nrows(),
            y.len()
        )));
    }
    if a.nrows() == 0 {
        return Err(crate::Error::EmptyObservation);
    }
    Ok(())
}

/// `||x - x_hat|| / ||x|| < threshold`; for `x = 0`, true iff `x_hat = 0`.
pub fn recovery_success_with<T: RealField + Copy>(x: &DVector<T>, x_hat: &DVector<T>, threshold: T) -> bool {
    let norm = x.norm();
    if norm == T::zero() {
        return x_hat.norm() == T::zero();
    }
    (x - x_hat).norm() / norm < threshold
}

/// Success test at the default `1e-2` threshold.
pub fn recovery_success<T: RealField + Copy>(x: &DVector<T>, x_hat: &DVector<T>) -> bool {
    recovery_success_with(x, x_hat, nalgebra::convert(DEFAULT_SUCCESS_THRESHOLD))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn success_examples() {
        let x = DVector::from_vec(vec![1.0, -2.0, 0.0]);
        assert!(recovery_success(&x, &x));
        assert!(!recovery_success(&x, &(&x * 0.5)));
        // exactly at the threshold: 1/100
        let x = DVector::from_vec(vec![100.0]);
        let x_hat = DVector::from_vec(vec![99.0]);
        assert_eq!((&x - &x_hat).norm() / x.norm(), 0.01);
        assert!(!recovery_success(&x, &x_hat));
    }

    #[test]
    fn success_zero_signal() {
        let z = DVector::<f64>::zeros(3);
        assert!(recovery_success(&z, &z));
        assert!(!recovery_success(&z, &DVector::from_vec(vec![0.0, 1e-9, 0.0])));
    }
}
