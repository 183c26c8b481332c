//! Small dense helpers shared by the solvers.

use std::cmp::Ordering;

use nalgebra::{DMatrix, DVector, RealField};

/// Least-squares coefficients of `y` on the columns `support` of `a`.
///
/// Rank-deficient systems get the minimum-norm solution; the flag reports
/// whether that happened.
pub(crate) fn lstsq_on_support<T: RealField + Copy>(
    a: &DMatrix<T>,
    y: &DVector<T>,
    support: &[usize],
) -> (DVector<T>, bool) {
    if support.is_empty() || a.nrows() == 0 {
        return (DVector::zeros(support.len()), !support.is_empty());
    }
    let sub = a.select_columns(support);
    let svd = sub.svd(true, true);
    let smax = svd.singular_values.max();
    let dim: T = nalgebra::convert((a.nrows().max(support.len())) as f64);
    let cutoff = T::default_epsilon() * dim * smax;
    let rank = svd.singular_values.iter().filter(|&&v| v > cutoff).count();
    let coef = svd.solve(y, cutoff).unwrap_or_else(|_| DVector::zeros(support.len()));
    (coef, rank < support.len())
}

/// Scatters `coef` into a length-`n` vector at `support`.
pub(crate) fn scatter<T: RealField + Copy>(n: usize, support: &[usize], coef: &DVector<T>) -> DVector<T> {
    let mut x = DVector::zeros(n);
    for (&j, &c) in support.iter().zip(coef.iter()) {
        x[j] = c;
    }
    x
}

/// Indices of the `k` largest magnitudes, ties broken towards the lower
/// index, returned sorted ascending.
pub(crate) fn top_k<T: RealField + Copy>(v: &DVector<T>, k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&i, &j| {
        v[j].abs()
            .partial_cmp(&v[i].abs())
            .unwrap_or(Ordering::Equal)
            .then(i.cmp(&j))
    });
    idx.truncate(k.min(v.len()));
    idx.sort_unstable();
    idx
}

/// Keeps the `k` largest-magnitude entries and zeroes the rest.
pub(crate) fn hard_threshold<T: RealField + Copy>(v: &DVector<T>, k: usize) -> DVector<T> {
    let keep = top_k(v, k);
    let mut out = DVector::zeros(v.len());
    for j in keep {
        out[j] = v[j];
    }
    out
}

pub(crate) fn support_of<T: RealField + Copy>(v: &DVector<T>) -> Vec<usize> {
    v.iter()
        .enumerate()
        .filter_map(|(j, x)| (*x != T::zero()).then_some(j))
        .collect()
}

/// Elementwise soft thresholding `sign(v) max(|v| - t, 0)`.
pub fn soft_threshold<T: RealField + Copy>(v: &DVector<T>, t: T) -> DVector<T> {
    v.map(|x| {
        if x > t {
            x - t
        } else if x < -t {
            x + t
        } else {
            T::zero()
        }
    })
}

/// Largest eigenvalue of `a^T a` by power iteration from a fixed start.
pub(crate) fn spectral_norm_squared<T: RealField + Copy>(a: &DMatrix<T>) -> T {
    let n = a.ncols();
    if n == 0 || a.nrows() == 0 {
        return T::zero();
    }
    let mut v = DVector::from_element(n, T::one() / nalgebra::convert::<f64, T>((n as f64).sqrt()));
    let mut av = DVector::zeros(a.nrows());
    let mut w = DVector::zeros(n);
    let mut lambda = T::zero();
    let tol: T = nalgebra::convert(1e-10);
    for _ in 0..1000 {
        av.gemv(T::one(), a, &v, T::zero());
        w.gemv_tr(T::one(), a, &av, T::zero());
        let norm = w.norm();
        if norm == T::zero() {
            return T::zero();
        }
        let done = (norm - lambda).abs() <= tol * norm;
        lambda = norm;
        v.copy_from(&w);
        v /= norm;
        if done {
            break;
        }
    }
    lambda
}
