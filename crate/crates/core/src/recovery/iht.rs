use nalgebra::{DMatrix, DVector, RealField};
use serde::{Deserialize, Serialize};

use super::linalg::{hard_threshold, support_of, top_k};
use super::{check_dims, Algorithm, RecoveryResult, SolverStatus};
use crate::{Error, Result};

/// Step size rule for [`iht`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IhtStep {
    /// Fixed step, halved whenever an update would raise the objective.
    Fixed(f64),
    /// Step `||g_S||^2 / ||A_S g_S||^2` on the current support, then halved
    /// as needed. Invariant under rescaling of `(A, y)`.
    Normalized,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IhtParams {
    pub max_iters: usize,
    pub step: IhtStep,
    /// Relative change in the iterate below which the loop stops.
    pub tol: f64,
}

impl Default for IhtParams {
    fn default() -> Self {
        Self {
            max_iters: 300,
            step: IhtStep::Fixed(1.0),
            tol: 1e-12,
        }
    }
}

/// Consecutive rejected updates after which the run is flagged as diverged.
const MAX_REJECTIONS: usize = 10;

/// Iterative hard thresholding `x <- H_s(x + mu A^T (y - A x))`.
///
/// Updates that increase `||y - A x||` are rejected and the step halved, so
/// the objective is non-increasing over accepted iterations.
pub fn iht<T: RealField + Copy>(
    a: &DMatrix<T>,
    y: &DVector<T>,
    s: usize,
    params: &IhtParams,
) -> Result<RecoveryResult<T>> {
    check_dims(a, y)?;
    if let IhtStep::Fixed(mu) = params.step {
        if !(mu > 0.0) {
            return Err(Error::invalid("IHT step must be positive"));
        }
    }
    if s == 0 || y.norm() == T::zero() {
        return Ok(RecoveryResult::zero(a, y, Algorithm::Iht));
    }
    let n = a.ncols();
    let tol: T = nalgebra::convert(params.tol);
    let half: T = nalgebra::convert(0.5);
    let mut x = DVector::zeros(n);
    let mut residual = y.clone();
    let mut objective = residual.norm_squared();
    let mut grad = DVector::zeros(n);
    let mut fixed_step: T = match params.step {
        IhtStep::Fixed(mu) => nalgebra::convert(mu),
        IhtStep::Normalized => T::one(),
    };
    let mut status = SolverStatus::default();
    let mut iterations = 0;

    'outer: while iterations < params.max_iters {
        iterations += 1;
        grad.gemv_tr(T::one(), a, &residual, T::zero());
        let mut step = match params.step {
            IhtStep::Fixed(_) => fixed_step,
            IhtStep::Normalized => {
                let support = if x.iter().all(|v| *v == T::zero()) {
                    top_k(&grad, s)
                } else {
                    support_of(&x)
                };
                let g_s = DVector::from_iterator(support.len(), support.iter().map(|&j| grad[j]));
                let ag = a.select_columns(&support) * &g_s;
                let den = ag.norm_squared();
                if den == T::zero() {
                    status.converged = true;
                    break;
                }
                g_s.norm_squared() / den
            }
        };
        let mut rejections = 0;
        loop {
            let candidate = hard_threshold(&(&x + &grad * step), s);
            let cand_residual = y - a * &candidate;
            let cand_objective = cand_residual.norm_squared();
            if cand_objective <= objective {
                let change = (&candidate - &x).norm();
                let scale = candidate.norm();
                x = candidate;
                residual = cand_residual;
                objective = cand_objective;
                if change <= tol * scale || objective == T::zero() {
                    status.converged = true;
                    break 'outer;
                }
                break;
            }
            rejections += 1;
            step *= half;
            if let IhtStep::Fixed(_) = params.step {
                fixed_step = step;
            }
            if rejections >= MAX_REJECTIONS {
                status.diverged = true;
                break 'outer;
            }
        }
    }
    Ok(RecoveryResult::new(a, y, x, iterations, Algorithm::Iht, status))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orthonormal_columns_one_iteration() {
        let a = DMatrix::<f64>::identity(5, 5);
        let x = DVector::from_vec(vec![0.0, 3.0, 0.0, -1.0, 0.0]);
        let r = iht(&a, &x, 2, &IhtParams::default()).unwrap();
        assert_eq!(r.x_hat, x);
        assert_eq!(r.iterations, 1);
        assert!(r.status.converged);
    }

    #[test]
    fn zero_sparsity_gives_zero() {
        let a = DMatrix::<f64>::identity(3, 3);
        let y = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let r = iht(&a, &y, 0, &IhtParams::default()).unwrap();
        assert_eq!(r.x_hat, DVector::zeros(3));
    }

    #[test]
    fn rejects_nonpositive_step() {
        let a = DMatrix::<f64>::identity(3, 3);
        let y = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let params = IhtParams {
            step: IhtStep::Fixed(0.0),
            ..Default::default()
        };
        assert!(iht(&a, &y, 1, &params).is_err());
    }

    #[test]
    fn large_step_backtracks() {
        let a = DMatrix::<f64>::identity(4, 4) * 3.0;
        let x = DVector::from_vec(vec![1.0, 0.0, 0.0, 2.0]);
        let y = &a * &x;
        let params = IhtParams {
            step: IhtStep::Fixed(10.0),
            max_iters: 200,
            tol: 1e-14,
        };
        let r = iht(&a, &y, 2, &params).unwrap();
        assert!((r.x_hat - x).norm() < 1e-10);
        assert!(!r.status.diverged);
    }
}
