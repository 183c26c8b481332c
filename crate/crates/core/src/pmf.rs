//! Exact distribution of the number of observed measurements `|T|`.
//!
//! Star networks give a binomial law. Trees and serial-star networks are
//! handled through their probability generating functions: the per-relay
//! (or per-branch) polynomial is raised to the `R`-th power by iterated
//! convolution, so entry `i` of the coefficient vector is `P{|T| = i}`.
//! Every routine is generic over [`Probability`], so the same code runs in
//! `f64` and in exact rational arithmetic.

use serde::Serialize;

use crate::scalar::{check_unit_interval, powu, Probability, Real};
use crate::topology::{ErasureParams, Topology};
use crate::{Error, Result};

/// Largest `m = R * K` accepted by the analytic routines.
pub const MAX_MEASUREMENTS: usize = 10_000;

/// Largest channel count accepted by [`pmf_bruteforce`] (2^24 states).
pub const MAX_BRUTEFORCE_CHANNELS: usize = 24;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CardinalityPmf<T> {
    pub topology: Topology,
    /// Entry `i` is `P{|T| = i}`; length `m + 1`.
    pub probabilities: Vec<T>,
}

impl<T: Probability> CardinalityPmf<T> {
    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }

    /// Evaluates the generating function `sum_i P{|T| = i} x^i` by Horner's rule.
    pub fn evaluate(&self, x: &T) -> T {
        self.probabilities
            .iter()
            .rev()
            .fold(T::zero(), |acc, c| acc * x.clone() + c.clone())
    }

    pub fn total(&self) -> T {
        self.probabilities.iter().fold(T::zero(), |acc, c| acc + c.clone())
    }

    /// Expected number of observed measurements.
    pub fn mean(&self) -> T {
        let mut i = T::zero();
        let mut acc = T::zero();
        for c in &self.probabilities {
            acc = acc + i.clone() * c.clone();
            i = i + T::one();
        }
        acc
    }
}

impl<T: Real> CardinalityPmf<T> {
    /// Nonnegative entries (with `-1e-15` slack) summing to one within `1e-12`.
    pub fn is_valid(&self) -> bool {
        let slack = T::from_f64_lossy(-1e-15);
        self.probabilities.iter().all(|&v| v >= slack)
            && (self.total() - T::one()).abs() <= T::from_f64_lossy(1e-12)
            && self.probabilities.len() == self.topology.measurements() + 1
    }
}

/// `sum_i pmf_i x^i`.
pub fn pmf_transform_evaluate<T: Probability>(pmf: &CardinalityPmf<T>, x: &T) -> T {
    pmf.evaluate(x)
}

/// Coefficients of the product of two polynomials.
pub fn convolve<T: Probability>(a: &[T], b: &[T]) -> Vec<T> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![T::zero(); a.len() + b.len() - 1];
    for (i, ai) in a.iter().enumerate() {
        if ai.is_zero() {
            continue;
        }
        for (j, bj) in b.iter().enumerate() {
            out[i + j] = out[i + j].clone() + ai.clone() * bj.clone();
        }
    }
    out
}

/// `base^power` by repeated multiplication with `base`.
fn poly_power<T: Probability>(base: &[T], power: usize) -> Vec<T> {
    let mut acc = vec![T::one()];
    for _ in 0..power {
        acc = convolve(&acc, base);
    }
    acc
}

fn check_size(r: usize, k: usize) -> Result<()> {
    if r == 0 || k == 0 {
        return Err(Error::DegenerateTopology(format!("R = {r}, K = {k}")));
    }
    match r.checked_mul(k) {
        Some(m) if m <= MAX_MEASUREMENTS => Ok(()),
        _ => Err(Error::Capacity(format!(
            "R * K = {r} * {k} exceeds the analytic limit of {MAX_MEASUREMENTS}"
        ))),
    }
}

/// Binomial law of `|T|` for a star of `m` sensors.
///
/// Built by the Pascal-type recurrence `t'_i = (1 - p) t_i + p t_{i-1}`,
/// which only ever adds nonnegative terms and so never underflows the way
/// `(1 - p)^m * C(m, i) * ...` does for large `m`.
pub fn pmf_star<T: Probability>(m: usize, p: T) -> Result<CardinalityPmf<T>> {
    check_unit_interval("p", &p)?;
    check_size(m, 1)?;
    let link = [T::one() - p.clone(), p];
    Ok(CardinalityPmf {
        topology: Topology::Star { sensors: m },
        probabilities: poly_power(&link, m),
    })
}

/// Coefficients of `g(x) = [1 - q + q (1 - p + p x)^K]^R`.
pub fn pmf_tree<T: Probability>(r: usize, k: usize, p: T, q: T) -> Result<CardinalityPmf<T>> {
    check_unit_interval("p", &p)?;
    check_unit_interval("q", &q)?;
    check_size(r, k)?;
    let mut relay: Vec<T> = pmf_star(k, p)?
        .probabilities
        .into_iter()
        .map(|c| c * q.clone())
        .collect();
    relay[0] = relay[0].clone() + T::one() - q;
    Ok(CardinalityPmf {
        topology: Topology::Tree {
            relays: r,
            per_relay: k,
        },
        probabilities: poly_power(&relay, r),
    })
}

/// Per-branch polynomial `b(x) = p^K x^K + sum_{k<K} (1 - p) p^k x^k`.
pub fn serial_branch_polynomial<T: Probability>(k: usize, p: &T) -> Vec<T> {
    let mut coeffs = Vec::with_capacity(k + 1);
    let mut pk = T::one();
    for _ in 0..k {
        coeffs.push((T::one() - p.clone()) * pk.clone());
        pk = pk * p.clone();
    }
    coeffs.push(pk);
    coeffs
}

/// Coefficients of `h(x) = b(x)^R`.
pub fn pmf_serial<T: Probability>(r: usize, k: usize, p: T) -> Result<CardinalityPmf<T>> {
    check_unit_interval("p", &p)?;
    check_size(r, k)?;
    Ok(CardinalityPmf {
        topology: Topology::SerialStar {
            branches: r,
            per_branch: k,
        },
        probabilities: poly_power(&serial_branch_polynomial(k, &p), r),
    })
}

/// Analytic PMF for any non-degenerate topology.
pub fn pmf_analytic<T: Probability>(topology: &Topology, params: &ErasureParams<T>) -> Result<CardinalityPmf<T>> {
    match *topology {
        Topology::Star { sensors } => pmf_star(sensors, params.p.clone()),
        Topology::Tree { relays, per_relay } => pmf_tree(relays, per_relay, params.p.clone(), params.q.clone()),
        Topology::SerialStar { branches, per_branch } => pmf_serial(branches, per_branch, params.p.clone()),
    }
}

/// Enumerates every channel-state combination and accumulates the exact
/// mass of each `|T|` value. Independent of the generating functions.
pub fn pmf_bruteforce<T: Probability>(topology: &Topology, params: &ErasureParams<T>) -> Result<CardinalityPmf<T>> {
    check_unit_interval("p", &params.p)?;
    check_unit_interval("q", &params.q)?;
    let channels = topology.channel_count();
    if channels > MAX_BRUTEFORCE_CHANNELS {
        return Err(Error::Capacity(format!(
            "{channels} channels exceed the enumeration cap of {MAX_BRUTEFORCE_CHANNELS}"
        )));
    }
    let hops = topology.channel_hops();
    let success: Vec<T> = hops.iter().map(|&h| params.hop_probability(h).clone()).collect();
    let failure: Vec<T> = success.iter().map(|s| T::one() - s.clone()).collect();
    let mut probabilities = vec![T::zero(); topology.measurements() + 1];
    let mut states = vec![false; channels];
    for mask in 0u32..(1u32 << channels) {
        let mut mass = T::one();
        for (c, state) in states.iter_mut().enumerate() {
            *state = mask >> c & 1 == 1;
            mass = mass * if *state { success[c].clone() } else { failure[c].clone() };
        }
        if mass.is_zero() {
            continue;
        }
        let count = topology.resolve(&states).len();
        probabilities[count] = probabilities[count].clone() + mass;
    }
    debug_assert!(hops.len() == channels);
    Ok(CardinalityPmf {
        topology: *topology,
        probabilities,
    })
}

/// Closed form `[1 - q + q (1 - p + p x)^K]^R`.
pub fn tree_generating_function<T: Probability>(r: usize, k: usize, p: &T, q: &T, x: &T) -> T {
    let inner = T::one() - p.clone() + p.clone() * x.clone();
    let relay = T::one() - q.clone() + q.clone() * powu(&inner, k);
    powu(&relay, r)
}

/// Closed form `[(1 - p + p^{K+1} x^K (1 - x)) / (1 - p x)]^R`; `None` at the
/// removable singularity `p x = 1`.
pub fn serial_generating_function<T: Real>(r: usize, k: usize, p: T, x: T) -> Option<T> {
    let den = T::one() - p * x;
    if den == T::zero() {
        return None;
    }
    let num = T::one() - p + p.powi(k as i32 + 1) * x.powi(k as i32) * (T::one() - x);
    Some((num / den).powi(r as i32))
}
