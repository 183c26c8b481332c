//! Compressed sensing over lossy sensor networks.
//!
//! The crate covers the whole pipeline from network model to recovery
//! statistics:
//!
//! * [`topology`]: star, tree and serial-star networks with Bernoulli
//!   erasure links, and sampling of the observed measurement set `T`;
//! * [`pmf`]: the exact law of `|T|` from generating polynomials, plus a
//!   brute-force enumeration oracle;
//! * [`bounds`]: closed-form sufficient measurement counts and their limits;
//! * [`sensing`]: subGaussian matrices, sparse signals, bounded noise;
//! * [`recovery`]: OMP, IHT, CoSaMP and LASSO;
//! * [`ric`]: restricted isometry constants by enumeration or sampling;
//! * [`experiment`]: seeded Monte Carlo phase maps, transition fits and
//!   topology comparisons.
//!
//! The numerical core is generic over the scalar type. The aliases below fix
//! the common choices.

// `!(x > 0)` style checks are meant to reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod config;
mod error;
pub mod experiment;
pub mod pmf;
pub mod recovery;
pub mod ric;
pub mod scalar;
pub mod sensing;
pub mod topology;

pub use error::{Error, Result};

/// Exact rational scalar for oracle comparisons.
pub type Rational = num_rational::BigRational;

pub type Pmf = pmf::CardinalityPmf<f64>;
pub type ExactPmf = pmf::CardinalityPmf<Rational>;
pub type Bound = bounds::BoundResult<f64>;
pub type Query = bounds::BoundQuery<f64>;
pub type Matrix = nalgebra::DMatrix<f64>;
pub type Vector = nalgebra::DVector<f64>;
pub type Recovery = recovery::RecoveryResult<f64>;
pub type Ric = ric::RicEstimate<f64>;
