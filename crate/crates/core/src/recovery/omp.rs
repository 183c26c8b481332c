use nalgebra::{DMatrix, DVector, RealField};

use super::linalg::{lstsq_on_support, scatter};
use super::{check_dims, Algorithm, RecoveryResult, SolverStatus};
use crate::Result;

/// Orthogonal matching pursuit with at most `s` atoms.
///
/// Each step adds the column most correlated with the residual (lowest
/// index on ties) and refits by least squares on the grown support.
pub fn omp<T: RealField + Copy>(a: &DMatrix<T>, y: &DVector<T>, s: usize) -> Result<RecoveryResult<T>> {
    check_dims(a, y)?;
    let y_norm = y.norm();
    if s == 0 || y_norm == T::zero() {
        return Ok(RecoveryResult::zero(a, y, Algorithm::Omp));
    }
    let n = a.ncols();
    let tol = y_norm * nalgebra::convert::<f64, T>(1e-12);
    let mut support: Vec<usize> = Vec::with_capacity(s);
    let mut selected = vec![false; n];
    let mut coef = DVector::zeros(0);
    let mut residual = y.clone();
    let mut corr = DVector::zeros(n);
    let mut status = SolverStatus::default();
    let mut iterations = 0;

    while support.len() < s.min(n) {
        corr.gemv_tr(T::one(), a, &residual, T::zero());
        let mut best: Option<(usize, T)> = None;
        for (j, c) in corr.iter().enumerate() {
            if selected[j] {
                continue;
            }
            let c = c.abs();
            if best.is_none_or(|(_, b)| c > b) {
                best = Some((j, c));
            }
        }
        let Some((j, c)) = best else { break };
        if c == T::zero() {
            break;
        }
        iterations += 1;
        support.push(j);
        selected[j] = true;
        let (z, deficient) = lstsq_on_support(a, y, &support);
        status.rank_deficient |= deficient;
        coef = z;
        residual = y - a.select_columns(&support) * &coef;
        if residual.norm() <= tol {
            break;
        }
    }
    status.converged = true;
    let x_hat = scatter(n, &support, &coef);
    Ok(RecoveryResult::new(a, y, x_hat, iterations, Algorithm::Omp, status))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_exact() {
        let a = DMatrix::<f64>::identity(6, 6);
        let x = DVector::from_vec(vec![0.0, 2.0, 0.0, -1.0, 0.0, 0.5]);
        let r = omp(&a, &x, 4).unwrap();
        assert!((&r.x_hat - &x).amax() < 1e-14);
        assert_eq!(r.support(), vec![1, 3, 5]);
    }

    #[test]
    fn zero_measurements_give_zero() {
        let a = DMatrix::<f64>::from_fn(4, 6, |i, j| ((i * 7 + j * 3) % 5) as f64 - 2.0);
        let r = omp(&a, &DVector::zeros(4), 3).unwrap();
        assert_eq!(r.x_hat, DVector::zeros(6));
        let r = omp(&a, &DVector::from_element(4, 1.0), 0).unwrap();
        assert_eq!(r.x_hat, DVector::zeros(6));
    }

    #[test]
    fn residual_orthogonal_to_selected() {
        let a = DMatrix::<f64>::from_fn(8, 12, |i, j| ((i * 31 + j * 17) % 11) as f64 - 5.0);
        let y = DVector::from_fn(8, |i, _| (i as f64).sin());
        let r = omp(&a, &y, 3).unwrap();
        let res = &y - &a * &r.x_hat;
        for j in r.support() {
            let dot = a.column(j).dot(&res);
            assert!(dot.abs() <= 1e-10 * a.column(j).norm() * y.norm(), "{dot}");
        }
        assert!(r.support().len() <= 3);
    }

    #[test]
    fn equal_correlations_pick_lowest_index() {
        let a = DMatrix::<f64>::identity(3, 3);
        let y = DVector::from_vec(vec![1.0, 1.0, 1.0]);
        let r = omp(&a, &y, 1).unwrap();
        assert_eq!(r.support(), vec![0]);
    }
}
