use nalgebra::{DMatrix, DVector, RealField};
use serde::{Deserialize, Serialize};

use super::linalg::{lstsq_on_support, scatter, soft_threshold, spectral_norm_squared, support_of};
use super::{check_dims, Algorithm, RecoveryResult, SolverStatus};
use crate::{Error, Result};

/// How the regularization weight is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaPolicy {
    /// `lambda = factor * ||A^T y||_inf`.
    Relative(f64),
    Absolute(f64),
}

impl Default for LambdaPolicy {
    fn default() -> Self {
        LambdaPolicy::Relative(0.01)
    }
}

impl LambdaPolicy {
    pub fn resolve<T: RealField + Copy>(&self, a: &DMatrix<T>, y: &DVector<T>) -> T {
        match *self {
            LambdaPolicy::Relative(f) => (a.transpose() * y).amax() * nalgebra::convert::<f64, T>(f),
            LambdaPolicy::Absolute(v) => nalgebra::convert(v),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LassoParams {
    pub lambda: LambdaPolicy,
    pub max_iters: usize,
    /// Relative change `||x_k - x_{k-1}|| / ||x_k||` at which the loop stops.
    pub tol: f64,
    /// Refit by least squares on the recovered support.
    pub debias: bool,
}

impl Default for LassoParams {
    fn default() -> Self {
        Self {
            lambda: LambdaPolicy::default(),
            max_iters: 20_000,
            tol: 1e-10,
            debias: false,
        }
    }
}

/// Minimizes `0.5 ||y - A x||^2 + lambda ||x||_1` by accelerated proximal
/// gradient (FISTA) with gradient-based momentum restart. Step `1 / L`,
/// `L` a slightly inflated power-iteration estimate of `||A||_2^2`.
///
/// With `debias` the returned estimate is the least-squares refit on the
/// support of the LASSO solution.
pub fn lasso<T: RealField + Copy>(a: &DMatrix<T>, y: &DVector<T>, params: &LassoParams) -> Result<RecoveryResult<T>> {
    check_dims(a, y)?;
    let lambda = params.lambda.resolve(a, y);
    if !(lambda > T::zero()) {
        if y.norm() == T::zero() {
            return Ok(RecoveryResult::zero(a, y, Algorithm::Lasso));
        }
        return Err(Error::invalid("LASSO weight must be positive"));
    }
    let n = a.ncols();
    let lipschitz = spectral_norm_squared(a) * nalgebra::convert::<f64, T>(1.01);
    if lipschitz == T::zero() {
        return Ok(RecoveryResult::zero(a, y, Algorithm::Lasso));
    }
    let step = T::one() / lipschitz;
    let threshold = lambda * step;
    let tol: T = nalgebra::convert(params.tol);
    let two: T = nalgebra::convert(2.0);
    let four: T = nalgebra::convert(4.0);

    let mut x = DVector::zeros(n);
    let mut z = DVector::zeros(n);
    let mut t = T::one();
    let mut az = DVector::zeros(a.nrows());
    let mut grad = DVector::zeros(n);
    let mut status = SolverStatus::default();
    let mut iterations = 0;

    while iterations < params.max_iters {
        iterations += 1;
        // grad = A^T (A z - y)
        az.copy_from(y);
        az.gemv(T::one(), a, &z, -T::one());
        grad.gemv_tr(T::one(), a, &az, T::zero());
        let mut x_new = z.clone();
        x_new.axpy(-step, &grad, T::one());
        let x_new = soft_threshold(&x_new, threshold);

        let diff = &x_new - &x;
        let change = diff.norm();
        let scale = x_new.norm();
        let t_new = (T::one() + (T::one() + four * t * t).sqrt()) / two;
        // restart when the momentum direction opposes the gradient step
        if (&z - &x_new).dot(&diff) > T::zero() {
            t = T::one();
            z.copy_from(&x_new);
        } else {
            z = &x_new + diff * ((t - T::one()) / t_new);
            t = t_new;
        }
        x = x_new;
        if change <= tol * scale || (scale == T::zero() && change == T::zero()) {
            status.converged = true;
            break;
        }
    }

    if params.debias {
        let (x_db, deficient) = debias(a, y, &x);
        status.rank_deficient = deficient;
        x = x_db;
    }
    Ok(RecoveryResult::new(a, y, x, iterations, Algorithm::Lasso, status))
}

/// Least-squares refit of `y` on the support of `x`.
pub fn debias<T: RealField + Copy>(a: &DMatrix<T>, y: &DVector<T>, x: &DVector<T>) -> (DVector<T>, bool) {
    let support = support_of(x);
    if support.is_empty() {
        return (DVector::zeros(a.ncols()), false);
    }
    let (coef, deficient) = lstsq_on_support(a, y, &support);
    (scatter(a.ncols(), &support, &coef), deficient)
}

/// Largest violation of the LASSO optimality conditions at `x`:
/// `| |a_j^T r| - lambda |` on the support and `max(|a_j^T r| - lambda, 0)` off it.
pub fn kkt_violation<T: RealField + Copy>(a: &DMatrix<T>, y: &DVector<T>, x: &DVector<T>, lambda: T) -> (T, T) {
    let corr = a.transpose() * (y - a * x);
    let mut on = T::zero();
    let mut off = T::zero();
    for (c, xi) in corr.iter().zip(x.iter()) {
        if *xi != T::zero() {
            // sign must also agree: a_j^T r = lambda sign(x_j)
            let target = if *xi > T::zero() { lambda } else { -lambda };
            on = on.max((*c - target).abs());
        } else {
            off = off.max(c.abs() - lambda);
        }
    }
    (on, off.max(T::zero()))
}

/// `0.5 ||y - A x||^2 + lambda ||x||_1`.
pub fn lasso_objective<T: RealField + Copy>(a: &DMatrix<T>, y: &DVector<T>, x: &DVector<T>, lambda: T) -> T {
    let half: T = nalgebra::convert(0.5);
    (y - a * x).norm_squared() * half + x.lp_norm(1) * lambda
}
