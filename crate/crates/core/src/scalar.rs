//! Scalar traits shared by the generic numerical code.

use std::fmt::Debug;

use num_traits::{Float, Num};

/// Anything that can carry a probability exactly or approximately: `f32`,
/// `f64`, or an exact rational such as [`num_rational::BigRational`].
pub trait Probability: Num + Clone + PartialOrd + Debug {}

impl<T> Probability for T where T: Num + Clone + PartialOrd + Debug {}

/// Floating point scalar used by the closed-form bounds.
pub trait Real: Float + Debug {
    fn from_f64_lossy(v: f64) -> Self;
}

impl<T: Float + Debug> Real for T {
    fn from_f64_lossy(v: f64) -> Self {
        T::from(v).expect("finite f64 converts to every float type")
    }
}

/// `base^exp` by repeated squaring; works for exact rationals.
pub fn powu<T: Probability>(base: &T, mut exp: usize) -> T {
    let mut acc = T::one();
    let mut b = base.clone();
    while exp > 0 {
        if exp & 1 == 1 {
            acc = acc * b.clone();
        }
        exp >>= 1;
        if exp > 0 {
            b = b.clone() * b;
        }
    }
    acc
}

pub(crate) fn check_unit_interval<T: Probability>(name: &str, v: &T) -> crate::Result<()> {
    if *v < T::zero() || *v > T::one() {
        return Err(crate::Error::invalid(format!("{name} = {v:?} is outside [0, 1]")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::BigRational;

    #[test]
    fn powu_matches_powi() {
        for e in 0..20 {
            assert_eq!(powu(&0.5f64, e), 0.5f64.powi(e as i32));
        }
        let third = BigRational::new(1.into(), 3.into());
        assert_eq!(powu(&third, 3), BigRational::new(1.into(), 27.into()));
    }
}
