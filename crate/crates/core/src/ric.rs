//! Restricted isometry constants.
//!
//! `delta_s` is the largest deviation from 1 of the eigenvalues of any
//! `s`-column Gram matrix `A_S^T A_S`. [`ric_exact`] enumerates every
//! support; [`ric_sampled`] takes a running maximum over random supports
//! and is therefore a lower bound.

use nalgebra::{DMatrix, RealField};
use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::sensing::{generate_matrix, EnsembleFamily, Normalization, SensingEnsemble};
use crate::topology::{ErasureParams, Topology};
use crate::{Error, Result};

/// Largest number of supports [`ric_exact`] will enumerate.
pub const MAX_SUBSETS: u128 = 1_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RicMode {
    Exact,
    SampledLowerBound,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RicEstimate<T> {
    pub value: T,
    pub mode: RicMode,
    pub subsets_examined: u64,
    /// Support attaining `value` (first in lexicographic order on ties).
    pub extremal_support: Vec<usize>,
}

/// `C(n, k)`, or `None` on overflow.
pub fn binomial(n: usize, k: usize) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.checked_mul((n - i) as u128)? / (i as u128 + 1);
    }
    Some(acc)
}

/// `max(lambda_max - 1, 1 - lambda_min)` of the Gram submatrix on `support`.
pub fn support_deviation<T: RealField + Copy>(gram: &DMatrix<T>, support: &[usize]) -> T {
    let sub = gram.select_rows(support).select_columns(support);
    let eig = sub.symmetric_eigenvalues();
    let hi = eig.max();
    let lo = eig.min();
    (hi - T::one()).max(T::one() - lo)
}

fn validate<T: RealField>(a: &DMatrix<T>, s: usize) -> Result<()> {
    if s == 0 || s > a.ncols() {
        return Err(Error::invalid(format!(
            "sparsity s = {s} must satisfy 1 <= s <= N = {}",
            a.ncols()
        )));
    }
    Ok(())
}

/// Advances `comb` to the next `k`-subset of `0..n` in lexicographic order.
fn next_combination(comb: &mut [usize], n: usize) -> bool {
    let k = comb.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if comb[i] < n - k + i {
            comb[i] += 1;
            for j in i + 1..k {
                comb[j] = comb[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Exact `delta_s` by enumerating all `C(N, s)` supports of an already
/// normalized matrix.
///
/// Supports are split by their first column and processed in parallel; the
/// max-reduction keeps the lexicographically first maximizer, so the result
/// does not depend on the thread count.
pub fn ric_exact<T: RealField + Copy>(a: &DMatrix<T>, s: usize) -> Result<RicEstimate<T>> {
    validate(a, s)?;
    let n = a.ncols();
    let total = binomial(n, s).filter(|&c| c <= MAX_SUBSETS).ok_or_else(|| {
        Error::Capacity(format!(
            "C({n}, {s}) supports exceed the enumeration cap of {MAX_SUBSETS}; use sampled mode"
        ))
    })?;
    let gram = a.transpose() * a;
    let best = (0..=n - s)
        .into_par_iter()
        .map(|first| {
            let mut comb: Vec<usize> = (first..first + s).collect();
            let mut best = (support_deviation(&gram, &comb), comb.clone());
            while next_combination(&mut comb, n) && comb[0] == first {
                let v = support_deviation(&gram, &comb);
                if v > best.0 {
                    best = (v, comb.clone());
                }
            }
            best
        })
        .reduce_with(|x, y| if y.0 > x.0 || (y.0 == x.0 && y.1 < x.1) { y } else { x })
        .expect("at least one support exists");
    Ok(RicEstimate {
        value: best.0,
        mode: RicMode::Exact,
        subsets_examined: total as u64,
        extremal_support: best.1,
    })
}

/// Running maximum of the support deviation over `trials` uniformly random
/// supports. Never exceeds the exact value.
pub fn ric_sampled<T, R>(a: &DMatrix<T>, s: usize, trials: usize, rng: &mut R) -> Result<RicEstimate<T>>
where
    T: RealField + Copy,
    R: Rng + ?Sized,
{
    validate(a, s)?;
    if trials == 0 {
        return Err(Error::invalid("sampled RIC needs at least one trial"));
    }
    let gram = a.transpose() * a;
    let mut best: Option<(T, Vec<usize>)> = None;
    for _ in 0..trials {
        let mut support = index::sample(rng, a.ncols(), s).into_vec();
        support.sort_unstable();
        let v = support_deviation(&gram, &support);
        if best.as_ref().is_none_or(|(b, _)| v > *b) {
            best = Some((v, support));
        }
    }
    let (value, extremal_support) = best.expect("trials >= 1");
    Ok(RicEstimate {
        value,
        mode: RicMode::SampledLowerBound,
        subsets_examined: trials as u64,
        extremal_support,
    })
}

/// Monte Carlo frequency of `delta_s(scale * A_T) < delta_target` over joint
/// draws of the matrix and the observation set.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RicEmpiricalReport {
    pub trials: usize,
    pub successes: usize,
    /// Trials where nothing reached the fusion center (counted as failures).
    pub empty_observations: usize,
    pub frequency: f64,
    pub stderr: f64,
    /// 95% Wilson score interval.
    pub ci_low: f64,
    pub ci_high: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RicExperiment {
    pub family: EnsembleFamily,
    /// Signal length `N` (columns of `A`).
    pub n: usize,
    pub topology: Topology,
    pub params: ErasureParams<f64>,
    pub s: usize,
    pub delta_target: f64,
    pub trials: usize,
    pub normalization: Normalization,
}

/// 95% Wilson score interval for `successes` out of `trials`.
pub fn wilson_interval(successes: usize, trials: usize) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let z = 1.959_963_984_540_054_f64;
    let n = trials as f64;
    let phat = successes as f64 / n;
    let den = 1.0 + z * z / n;
    let center = (phat + z * z / (2.0 * n)) / den;
    let half = z * (phat * (1.0 - phat) / n + z * z / (4.0 * n * n)).sqrt() / den;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Empirical probability that the observed, normalized matrix meets the
/// RIC target. Draw order per trial: matrix, then channels.
pub fn ric_empirical_vs_bound<R: Rng + ?Sized>(exp: &RicExperiment, rng: &mut R) -> Result<RicEmpiricalReport> {
    let m = exp.topology.measurements();
    let ensemble = SensingEnsemble::new(exp.family, m, exp.n);
    if exp.s == 0 || exp.s > exp.n {
        return Err(Error::invalid("sparsity must satisfy 1 <= s <= N"));
    }
    if binomial(exp.n, exp.s).is_none_or(|c| c > MAX_SUBSETS) {
        return Err(Error::Capacity(format!(
            "C({}, {}) supports exceed the enumeration cap",
            exp.n, exp.s
        )));
    }
    let mut successes = 0;
    let mut empty = 0;
    for _ in 0..exp.trials {
        let a: DMatrix<f64> = generate_matrix(&ensemble, rng);
        let outcome = exp.topology.sample_observation(&exp.params, rng);
        if outcome.is_empty() {
            empty += 1;
            continue;
        }
        let a_t = a.select_rows(&outcome.observed) * exp.normalization.factor(outcome.len());
        if ric_exact(&a_t, exp.s)?.value < exp.delta_target {
            successes += 1;
        }
    }
    let n = exp.trials.max(1) as f64;
    let frequency = successes as f64 / n;
    let (ci_low, ci_high) = wilson_interval(successes, exp.trials);
    Ok(RicEmpiricalReport {
        trials: exp.trials,
        successes,
        empty_observations: empty,
        frequency,
        stderr: (frequency * (1.0 - frequency) / n).sqrt(),
        ci_low,
        ci_high,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn gaussian(rows: usize, cols: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a: DMatrix<f64> = generate_matrix(&SensingEnsemble::new(EnsembleFamily::Gaussian, rows, cols), &mut rng);
        a / (rows as f64).sqrt()
    }

    #[test]
    fn binomial_values() {
        assert_eq!(binomial(12, 2), Some(66));
        assert_eq!(binomial(5, 6), Some(0));
        assert_eq!(binomial(200, 20), Some(1_613_587_787_967_350_073_386_147_640));
        assert!(binomial(1000, 500).is_none());
    }

    #[test]
    fn orthonormal_columns_have_zero_ric() {
        let a = DMatrix::<f64>::identity(6, 4);
        for s in 1..=4 {
            let r = ric_exact(&a, s).unwrap();
            assert!(r.value.abs() < 1e-14);
        }
    }

    #[test]
    fn singleton_reduction() {
        let a = gaussian(30, 8, 4);
        let expected = (0..8)
            .map(|j| (a.column(j).norm_squared() - 1.0).abs())
            .fold(0.0, f64::max);
        let r = ric_exact(&a, 1).unwrap();
        assert!((r.value - expected).abs() < 1e-14);
        assert_eq!(r.subsets_examined, 8);
    }

    #[test]
    fn pairs_match_closed_form_eigenvalues() {
        let a = gaussian(40, 12, 17);
        let mut expected = 0.0f64;
        for i in 0..12 {
            for j in i + 1..12 {
                let (gii, gjj) = (a.column(i).norm_squared(), a.column(j).norm_squared());
                let gij = a.column(i).dot(&a.column(j));
                let mean = 0.5 * (gii + gjj);
                let rad = (0.25 * (gii - gjj).powi(2) + gij * gij).sqrt();
                expected = expected.max((mean + rad - 1.0).max(1.0 - (mean - rad)));
            }
        }
        let r = ric_exact(&a, 2).unwrap();
        assert!((r.value - expected).abs() < 1e-10);
        assert_eq!(r.subsets_examined, 66);
        assert_eq!(r.mode, RicMode::Exact);
    }

    #[test]
    fn nondecreasing_in_s() {
        let a = gaussian(25, 10, 3);
        let mut last = 0.0;
        for s in 1..=5 {
            let v = ric_exact(&a, s).unwrap().value;
            assert!(v >= last - 1e-12);
            last = v;
        }
    }

    #[test]
    fn capacity_error() {
        let a = gaussian(10, 60, 1);
        assert!(ric_exact(&a, 8).unwrap_err().is_capacity());
    }

    #[test]
    fn sampled_exhaustive_matches_exact() {
        let a = gaussian(12, 5, 9);
        let exact = ric_exact(&a, 2).unwrap();
        let sampled = ric_sampled(&a, 2, 2000, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(sampled.value, exact.value);
        assert_eq!(sampled.extremal_support, exact.extremal_support);
    }

    #[test]
    fn sampled_is_lower_bound_and_monotone_in_trials() {
        let a = gaussian(20, 10, 2);
        let exact = ric_exact(&a, 3).unwrap().value;
        let mut last = 0.0;
        for trials in [1, 5, 20, 80] {
            let v = ric_sampled(&a, 3, trials, &mut ChaCha8Rng::seed_from_u64(5))
                .unwrap()
                .value;
            assert!(v <= exact);
            assert!(v >= last);
            last = v;
        }
    }

    #[test]
    fn wilson_is_sane() {
        let (lo, hi) = wilson_interval(50, 100);
        assert!(lo < 0.5 && hi > 0.5 && lo > 0.39 && hi < 0.61);
        assert_eq!(wilson_interval(0, 10).0, 0.0);
    }
}
