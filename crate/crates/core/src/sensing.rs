//! Random sensing matrices, sparse test signals, bounded noise, and the
//! observed subsystem `(A_T, y_T)`.
//!
//! All draws come from the caller's random stream in a fixed order: matrix
//! entries row by row, then the signal support and amplitudes, then noise.

use nalgebra::{DMatrix, DVector, RealField};
use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::topology::ObservationOutcome;
use crate::{Error, Result};

/// Zero-mean, unit-variance subGaussian entry laws.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnsembleFamily {
    #[default]
    Gaussian,
    /// +-1 with equal probability.
    Rademacher,
    /// Uniform on `[-sqrt(3), sqrt(3)]`.
    UniformSym,
}

impl EnsembleFamily {
    fn sample<R: Rng + ?Sized>(self, rng: &mut R) -> f64 {
        match self {
            EnsembleFamily::Gaussian => StandardNormal.sample(rng),
            EnsembleFamily::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            EnsembleFamily::UniformSym => {
                let h = 3f64.sqrt();
                rng.random_range(-h..=h)
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SensingEnsemble {
    pub family: EnsembleFamily,
    pub rows: usize,
    pub cols: usize,
}

impl SensingEnsemble {
    pub fn new(family: EnsembleFamily, rows: usize, cols: usize) -> Self {
        Self { family, rows, cols }
    }
}

/// Draws an `rows x cols` matrix with i.i.d. entries, filled row by row.
pub fn generate_matrix<T, R>(ensemble: &SensingEnsemble, rng: &mut R) -> DMatrix<T>
where
    T: RealField + Copy,
    R: Rng + ?Sized,
{
    let SensingEnsemble { family, rows, cols } = *ensemble;
    let entries: Vec<T> = (0..rows * cols)
        .map(|_| nalgebra::convert::<f64, T>(family.sample(rng)))
        .collect();
    DMatrix::from_row_slice(rows, cols, &entries)
}

/// Law of the nonzero signal amplitudes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AmplitudeLaw {
    /// +-1 with equal probability.
    #[default]
    UnitSign,
    StandardNormal,
}

/// A sparse vector together with its support.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseSignal<T: RealField> {
    pub x: DVector<T>,
    /// Sorted support indices.
    pub support: Vec<usize>,
}

/// Draws an `s`-sparse vector of length `n` with a uniformly random support.
pub fn generate_sparse_signal<T, R>(n: usize, s: usize, law: AmplitudeLaw, rng: &mut R) -> Result<SparseSignal<T>>
where
    T: RealField + Copy,
    R: Rng + ?Sized,
{
    if s == 0 || s > n {
        return Err(Error::invalid(format!(
            "sparsity s = {s} must satisfy 1 <= s <= N = {n}"
        )));
    }
    let mut support = index::sample(rng, n, s).into_vec();
    support.sort_unstable();
    let mut x = DVector::zeros(n);
    for &j in &support {
        let v: f64 = match law {
            AmplitudeLaw::UnitSign => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            AmplitudeLaw::StandardNormal => loop {
                // an exact zero would break the support count
                let v: f64 = StandardNormal.sample(rng);
                if v != 0.0 {
                    break v;
                }
            },
        };
        x[j] = nalgebra::convert(v);
    }
    Ok(SparseSignal { x, support })
}

/// Law of the bounded noise within `[-sigma, sigma]`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseLaw {
    #[default]
    Uniform,
    /// Normal with standard deviation `sigma / 2`, rejected outside `[-sigma, sigma]`.
    TruncatedNormal,
}

/// Draws `m` noise samples with `|w_i| <= sigma`.
pub fn generate_bounded_noise<T, R>(m: usize, sigma: f64, law: NoiseLaw, rng: &mut R) -> Result<DVector<T>>
where
    T: RealField + Copy,
    R: Rng + ?Sized,
{
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::invalid(format!("noise bound sigma = {sigma} must be >= 0")));
    }
    if sigma == 0.0 {
        return Ok(DVector::zeros(m));
    }
    let draw = |rng: &mut R| -> f64 {
        match law {
            NoiseLaw::Uniform => rng.random_range(-sigma..=sigma),
            NoiseLaw::TruncatedNormal => loop {
                let v: f64 = StandardNormal.sample(rng);
                let v = 0.5 * sigma * v;
                if v.abs() <= sigma {
                    break v;
                }
            },
        }
    };
    Ok(DVector::from_iterator(m, (0..m).map(|_| nalgebra::convert(draw(rng)))))
}

/// Signal plus the full-length noise vector and its bound.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseProblem<T: RealField> {
    pub signal: SparseSignal<T>,
    pub sigma: f64,
    pub noise: DVector<T>,
}

impl<T: RealField + Copy> SparseProblem<T> {
    pub fn x(&self) -> &DVector<T> {
        &self.signal.x
    }

    /// `A x + w` over all `m` measurements.
    pub fn measure(&self, a: &DMatrix<T>) -> DVector<T> {
        a * &self.signal.x + &self.noise
    }
}

/// Scaling applied to the observed rows.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    None,
    /// `|T|^{-1/2}`: unit expected squared row norm.
    #[default]
    InvSqrt,
    /// `|T|^{-1}`, the exponent as literally printed in the theorems.
    Inverse,
}

impl Normalization {
    pub fn factor(self, observed: usize) -> f64 {
        match self {
            Normalization::None => 1.0,
            Normalization::InvSqrt => 1.0 / (observed as f64).sqrt(),
            Normalization::Inverse => 1.0 / observed as f64,
        }
    }
}

/// The rows of the system that reached the fusion center.
#[derive(Clone, Debug, PartialEq)]
pub struct ObservedSystem<T: RealField> {
    pub a: DMatrix<T>,
    pub y: DVector<T>,
    /// Factor already applied to `a` and `y`.
    pub scale: T,
}

impl<T: RealField> ObservedSystem<T> {
    pub fn rows(&self) -> usize {
        self.a.nrows()
    }
}

/// Selects the rows indexed by `outcome.observed` (ascending) and applies
/// the normalization to both `A_T` and `y_T`.
pub fn assemble_observed<T: RealField + Copy>(
    a: &DMatrix<T>,
    problem: &SparseProblem<T>,
    outcome: &ObservationOutcome,
    normalization: Normalization,
) -> Result<ObservedSystem<T>> {
    let rows = &outcome.observed;
    if let Some(&bad) = rows.iter().find(|&&i| i >= a.nrows()) {
        return Err(Error::IndexOutOfRange {
            index: bad,
            len: a.nrows(),
        });
    }
    if rows.is_empty() && normalization != Normalization::None {
        return Err(Error::EmptyObservation);
    }
    let y_full = problem.measure(a);
    let scale: T = nalgebra::convert(normalization.factor(rows.len()));
    let mut a_t = a.select_rows(rows);
    let mut y_t = y_full.select_rows(rows);
    if normalization != Normalization::None {
        a_t *= scale;
        y_t *= scale;
    }
    Ok(ObservedSystem { a: a_t, y: y_t, scale })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{ErasureParams, Topology};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn column_stats(a: &DMatrix<f64>, j: usize) -> (f64, f64) {
        let col = a.column(j);
        let n = col.len() as f64;
        let mean = col.sum() / n;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (mean, var)
    }

    #[test]
    fn rademacher_support() {
        let a: DMatrix<f64> = generate_matrix(&SensingEnsemble::new(EnsembleFamily::Rademacher, 2, 2), &mut rng(3));
        assert!(a.iter().all(|&v| v == 1.0 || v == -1.0));
    }

    #[test]
    fn gaussian_moments() {
        let a: DMatrix<f64> = generate_matrix(&SensingEnsemble::new(EnsembleFamily::Gaussian, 10_000, 10), &mut rng(5));
        for j in 0..10 {
            let (mean, var) = column_stats(&a, j);
            assert!(mean.abs() < 4.0 / 100.0, "mean {mean}");
            assert!((var - 1.0).abs() < 0.06, "var {var}");
        }
    }

    #[test]
    fn uniform_moments_and_range() {
        let a: DMatrix<f64> = generate_matrix(
            &SensingEnsemble::new(EnsembleFamily::UniformSym, 10_000, 2),
            &mut rng(6),
        );
        let h = 3f64.sqrt();
        assert!(a.iter().all(|v| v.abs() <= h));
        for j in 0..2 {
            let (_, var) = column_stats(&a, j);
            assert!((var - 1.0).abs() < 0.06, "var {var}");
        }
    }

    #[test]
    fn sparse_signal_examples() {
        let sig: SparseSignal<f64> = generate_sparse_signal(5, 5, AmplitudeLaw::UnitSign, &mut rng(1)).unwrap();
        assert!(sig.x.iter().all(|&v| v != 0.0));
        let sig: SparseSignal<f64> = generate_sparse_signal(200, 20, AmplitudeLaw::UnitSign, &mut rng(2)).unwrap();
        assert_eq!(sig.x.iter().filter(|v| **v != 0.0).count(), 20);
        assert_eq!(sig.support.len(), 20);
        assert!(sig.support.windows(2).all(|w| w[0] < w[1]));
        assert!(sig.x.iter().all(|&v| v == 0.0 || v.abs() == 1.0));
        let sig: SparseSignal<f64> = generate_sparse_signal(50, 7, AmplitudeLaw::StandardNormal, &mut rng(2)).unwrap();
        assert_eq!(sig.x.iter().filter(|v| **v != 0.0).count(), 7);
        assert!(generate_sparse_signal::<f64, _>(5, 6, AmplitudeLaw::UnitSign, &mut rng(1)).is_err());
    }

    #[test]
    fn noise_examples() {
        let w: DVector<f64> = generate_bounded_noise(10, 0.0, NoiseLaw::Uniform, &mut rng(1)).unwrap();
        assert!(w.iter().all(|&v| v == 0.0));
        for law in [NoiseLaw::Uniform, NoiseLaw::TruncatedNormal] {
            let w: DVector<f64> = generate_bounded_noise(100_000, 0.1, law, &mut rng(2)).unwrap();
            assert!(w.amax() <= 0.1);
        }
        let w: DVector<f64> = generate_bounded_noise(100_000, 1.0, NoiseLaw::Uniform, &mut rng(3)).unwrap();
        let var = w.iter().map(|v| v * v).sum::<f64>() / 1e5;
        assert!((var - 1.0 / 3.0).abs() < 0.01, "var {var}");
        assert!(generate_bounded_noise::<f64, _>(3, -1.0, NoiseLaw::Uniform, &mut rng(1)).is_err());
    }

    fn problem(m: usize, n: usize, seed: u64) -> (DMatrix<f64>, SparseProblem<f64>) {
        let mut r = rng(seed);
        let a = generate_matrix(&SensingEnsemble::new(EnsembleFamily::Gaussian, m, n), &mut r);
        let signal = generate_sparse_signal(n, 2, AmplitudeLaw::UnitSign, &mut r).unwrap();
        let noise = generate_bounded_noise(m, 0.05, NoiseLaw::Uniform, &mut r).unwrap();
        (
            a,
            SparseProblem {
                signal,
                sigma: 0.05,
                noise,
            },
        )
    }

    #[test]
    fn assemble_full_selection_is_identity() {
        let (a, prob) = problem(3, 6, 11);
        let topo = Topology::star(3).unwrap();
        let sys = assemble_observed(&a, &prob, &ObservationOutcome::full(&topo), Normalization::None).unwrap();
        assert_eq!(sys.a, a);
        assert_eq!(sys.y, &a * prob.x() + &prob.noise);
    }

    #[test]
    fn assemble_single_row() {
        let (a, prob) = problem(3, 6, 12);
        let topo = Topology::star(3).unwrap();
        let outcome = topo.resolve(&[false, true, false]);
        let sys = assemble_observed(&a, &prob, &outcome, Normalization::None).unwrap();
        assert_eq!(sys.rows(), 1);
        assert_eq!(sys.a.row(0), a.row(1));
        assert_eq!(sys.y[0], prob.measure(&a)[1]);
    }

    #[test]
    fn assemble_normalized_scales_by_inverse_sqrt() {
        let (a, prob) = problem(6, 4, 13);
        let topo = Topology::star(6).unwrap();
        let outcome = topo.resolve(&[true, false, true, true, false, true]);
        let raw = assemble_observed(&a, &prob, &outcome, Normalization::None).unwrap();
        let sys = assemble_observed(&a, &prob, &outcome, Normalization::InvSqrt).unwrap();
        assert_eq!(sys.scale, 0.5);
        assert_eq!(sys.a, &raw.a * 0.5);
        assert_eq!(sys.y, &raw.y * 0.5);
        let lit = assemble_observed(&a, &prob, &outcome, Normalization::Inverse).unwrap();
        assert_eq!(lit.scale, 0.25);
    }

    #[test]
    fn assemble_empty_normalized_is_error() {
        let (a, prob) = problem(2, 4, 14);
        let topo = Topology::star(2).unwrap();
        let none = topo.sample_observation(&ErasureParams::with_p(0.0).unwrap(), &mut rng(0));
        assert!(matches!(
            assemble_observed(&a, &prob, &none, Normalization::InvSqrt),
            Err(Error::EmptyObservation)
        ));
        assert_eq!(
            assemble_observed(&a, &prob, &none, Normalization::None).unwrap().rows(),
            0
        );
    }

    #[test]
    fn seed_determinism() {
        let (a1, p1) = problem(20, 30, 77);
        let (a2, p2) = problem(20, 30, 77);
        assert_eq!(a1, a2);
        assert_eq!(p1, p2);
    }

    #[test]
    fn works_in_f32() {
        let a: DMatrix<f32> = generate_matrix(&SensingEnsemble::new(EnsembleFamily::Gaussian, 4, 3), &mut rng(1));
        assert_eq!(a.shape(), (4, 3));
    }
}
