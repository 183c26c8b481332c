//! Closed-form measurement bounds for star, tree and serial-star networks.
//!
//! Every bound has the shape `numerator / log_denominator`, where the
//! numerator is the shared bracket
//!
//! ```text
//! (4/3) s ln(eN/s) + (14/3) s + (4/3) ln(2/eps)
//! ```
//!
//! and the log-denominator depends on the topology. A zero log-denominator
//! (nothing ever reaches the fusion center) yields `+inf`; an infinite one
//! (a perfect link in a limiting bound) yields `0` with the degenerate flag
//! set. The log-denominators are evaluated through `ln_1p`/`exp_m1` so the
//! algebraic special-case identities hold to a few ulps.

use serde::{Deserialize, Serialize};

use crate::scalar::Real;
use crate::{Error, Result};

/// Recovery algorithms with known RIC requirements.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundAlgorithm {
    #[serde(rename = "bp")]
    BasisPursuit,
    Iht,
    Cosamp,
}

/// Sparsity multiplier and RIC threshold required by an algorithm.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AlgoConstants<T> {
    pub r_algo: usize,
    pub delta_algo: T,
}

impl BoundAlgorithm {
    pub fn constants<T: Real>(self) -> AlgoConstants<T> {
        let f = T::from_f64_lossy;
        match self {
            BoundAlgorithm::BasisPursuit => AlgoConstants {
                r_algo: 2,
                delta_algo: f(4.0) / f(41.0).sqrt(),
            },
            BoundAlgorithm::Iht => AlgoConstants {
                r_algo: 6,
                delta_algo: T::one() / f(3.0).sqrt(),
            },
            BoundAlgorithm::Cosamp => AlgoConstants {
                r_algo: 8,
                delta_algo: ((f(11.0) / f(3.0)).sqrt() - T::one()).sqrt() / f(2.0),
            },
        }
    }
}

/// Which closed form produced a [`BoundResult`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Formula {
    Classic,
    Star,
    StarAlgo,
    Tree,
    Serial,
    RelayLowerBound,
    BranchLowerBound,
    OversamplingBaseline,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BoundResult<T> {
    pub formula: Formula,
    /// May be `+inf`.
    pub value: T,
    pub numerator: T,
    pub log_denominator: T,
    /// Set when the log-denominator is infinite and the value collapses to 0.
    pub degenerate: bool,
}

impl<T: Real> BoundResult<T> {
    fn from_parts(formula: Formula, numerator: T, log_denominator: T) -> Self {
        let (value, degenerate) = if log_denominator.is_infinite() {
            (T::zero(), true)
        } else if log_denominator <= T::zero() {
            (T::infinity(), false)
        } else {
            (numerator / log_denominator, false)
        };
        Self {
            formula,
            value,
            numerator,
            log_denominator,
            degenerate,
        }
    }

    pub fn is_infinite(&self) -> bool {
        self.value.is_infinite()
    }
}

/// Inputs shared by all bounds. Topology fields that a formula does not use
/// are ignored.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundQuery<T> {
    /// Signal length `N`.
    pub n: usize,
    /// Sparsity `s`.
    pub s: usize,
    /// Target RIC.
    pub delta: T,
    /// Failure probability.
    pub epsilon: T,
    /// SubGaussian concentration constant.
    pub c: T,
    pub p: T,
    pub q: T,
    /// Sensors per relay or branch.
    pub k: usize,
    pub algorithm: Option<BoundAlgorithm>,
}

impl<T: Real> BoundQuery<T> {
    /// Query with `C = 1`, `p = q = 1`, `K = 1` and no algorithm.
    pub fn new(n: usize, s: usize, delta: T, epsilon: T) -> Self {
        Self {
            n,
            s,
            delta,
            epsilon,
            c: T::one(),
            p: T::one(),
            q: T::one(),
            k: 1,
            algorithm: None,
        }
    }

    pub fn with_c(mut self, c: T) -> Self {
        self.c = c;
        self
    }

    pub fn with_p(mut self, p: T) -> Self {
        self.p = p;
        self
    }

    pub fn with_q(mut self, q: T) -> Self {
        self.q = q;
        self
    }

    pub fn with_k(mut self, k: usize) -> Self {
        self.k = k;
        self
    }

    pub fn with_delta(mut self, delta: T) -> Self {
        self.delta = delta;
        self
    }

    pub fn with_algorithm(mut self, algorithm: BoundAlgorithm) -> Self {
        self.algorithm = Some(algorithm);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let zero = T::zero();
        let one = T::one();
        if self.s == 0 || self.s > self.n {
            return Err(Error::invalid(format!(
                "sparsity s = {} must satisfy 1 <= s <= N = {}",
                self.s, self.n
            )));
        }
        // delta may exceed 1 when it is a rescaled sqrt(K) * delta argument
        if !(self.delta > zero) {
            return Err(Error::invalid("delta must be positive"));
        }
        if !(self.epsilon > zero && self.epsilon < one) {
            return Err(Error::invalid("epsilon must lie in (0, 1)"));
        }
        if !(self.c > zero) {
            return Err(Error::invalid("C must be positive"));
        }
        for (name, v) in [("p", self.p), ("q", self.q)] {
            if !(v >= zero && v <= one) {
                return Err(Error::invalid(format!("{name} must lie in [0, 1]")));
            }
        }
        Ok(())
    }

    /// `exp(-C delta^2)`.
    fn decay(&self) -> T {
        (-self.c * self.delta * self.delta).exp()
    }

    /// `exp(-C delta^2) - 1`, accurate for small exponents.
    fn decay_m1(&self) -> T {
        (-self.c * self.delta * self.delta).exp_m1()
    }
}

/// `(4/3) s ln(eN/s) + (14/3) s + (4/3) ln(2/eps)`.
pub fn bracket<T: Real>(n: usize, s: usize, epsilon: T) -> T {
    let f = T::from_f64_lossy;
    let st = f(s as f64);
    let ratio = f(n as f64) / st;
    f(4.0) / f(3.0) * st * (T::one() + ratio.ln()) + f(14.0) / f(3.0) * st + f(4.0) / f(3.0) * (f(2.0) / epsilon).ln()
}

fn numerator<T: Real>(q: &BoundQuery<T>) -> T {
    bracket(q.n, q.s, q.epsilon)
}

/// `ln(1 / (1 - p + p e^{-C delta^2}))`.
fn star_log_denominator<T: Real>(q: &BoundQuery<T>, p: T) -> T {
    -(p * q.decay_m1()).ln_1p()
}

/// No-erasure bound `beta(delta) = bracket / (C delta^2)`.
pub fn beta_classic<T: Real>(q: &BoundQuery<T>) -> Result<BoundResult<T>> {
    q.validate()?;
    Ok(BoundResult::from_parts(
        Formula::Classic,
        numerator(q),
        q.c * q.delta * q.delta,
    ))
}

/// Bound on `m` for a star network.
pub fn beta_star<T: Real>(q: &BoundQuery<T>) -> Result<BoundResult<T>> {
    q.validate()?;
    Ok(BoundResult::from_parts(
        Formula::Star,
        numerator(q),
        star_log_denominator(q, q.p),
    ))
}

/// Star bound with the algorithm's `r_algo * s` and `delta_algo` substituted.
pub fn beta_star_algo<T: Real>(q: &BoundQuery<T>) -> Result<BoundResult<T>> {
    let algo = q
        .algorithm
        .ok_or_else(|| Error::invalid("beta_star_algo needs an algorithm"))?;
    let consts = algo.constants::<T>();
    let rs = consts.r_algo * q.s;
    if rs > q.n {
        return Err(Error::Domain(format!(
            "r_algo * s = {} * {} = {rs} exceeds N = {}",
            consts.r_algo, q.s, q.n
        )));
    }
    let sub = BoundQuery {
        s: rs,
        delta: consts.delta_algo,
        ..*q
    };
    sub.validate()?;
    Ok(BoundResult::from_parts(
        Formula::StarAlgo,
        numerator(&sub),
        star_log_denominator(&sub, sub.p),
    ))
}

/// Bound on the relay count `R` of a tree.
pub fn beta_tree<T: Real>(q: &BoundQuery<T>) -> Result<BoundResult<T>> {
    q.validate()?;
    // ln(1 - p + p d), then (1 - p + p d)^K - 1 = expm1(K * that)
    let log_relay = (q.p * q.decay_m1()).ln_1p();
    let k_log = T::from_f64_lossy(q.k as f64) * log_relay;
    let inner_m1 = k_log.exp_m1();
    let shifted = q.q * inner_m1;
    // A = 1 - q + q b^K; near 0 the sum of positives is exact, near 1 log1p is
    let log_den = if shifted < T::from_f64_lossy(-0.5) {
        -((T::one() - q.q) + q.q * k_log.exp()).ln()
    } else {
        -shifted.ln_1p()
    };
    Ok(BoundResult::from_parts(Formula::Tree, numerator(q), log_den))
}

/// Bound on the branch count `R` of a serial-star network.
pub fn beta_serial<T: Real>(q: &BoundQuery<T>) -> Result<BoundResult<T>> {
    q.validate()?;
    let d = q.decay();
    let one_minus_d = -q.decay_m1();
    let pd = q.p * d;
    let pd_k = pd.powi(q.k as i32);
    let tail = (T::one() - q.p) + q.p * one_minus_d * pd_k;
    // ln((1 - pd) / tail) = ln(1 + p (1 - d) (1 - (pd)^K) / tail), no cancellation
    let one_minus_pd_k = -(T::from_f64_lossy(q.k as f64) * pd.ln()).exp_m1();
    let log_den = (q.p * one_minus_d * one_minus_pd_k / tail).ln_1p();
    Ok(BoundResult::from_parts(Formula::Serial, numerator(q), log_den))
}

/// `K -> inf` limit of [`beta_tree`]: `bracket / ln(1 / (1 - q))`.
pub fn relay_lower_bound<T: Real>(q: &BoundQuery<T>) -> Result<BoundResult<T>> {
    q.validate()?;
    let log_den = -(-q.q).ln_1p();
    Ok(BoundResult::from_parts(Formula::RelayLowerBound, numerator(q), log_den))
}

/// `K -> inf` limit of [`beta_serial`]: `bracket / ln((1 - p d) / (1 - p))`.
pub fn branch_lower_bound<T: Real>(q: &BoundQuery<T>) -> Result<BoundResult<T>> {
    q.validate()?;
    let pd = q.p * q.decay();
    let log_den = (-pd).ln_1p() - (-q.p).ln_1p();
    Ok(BoundResult::from_parts(
        Formula::BranchLowerBound,
        numerator(q),
        log_den,
    ))
}

/// Average-RIC oversampling requirement `beta(delta) / p`.
pub fn oversampling_baseline<T: Real>(q: &BoundQuery<T>) -> Result<BoundResult<T>> {
    let classic = beta_classic(q)?;
    Ok(BoundResult::from_parts(
        Formula::OversamplingBaseline,
        classic.numerator,
        classic.log_denominator * q.p,
    ))
}

/// Bound selector used by sweeps and the CLI.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    Classic,
    Star,
    StarAlgo,
    Tree,
    Serial,
    RelayLowerBound,
    BranchLowerBound,
    OversamplingBaseline,
}

impl BoundKind {
    pub fn evaluate<T: Real>(self, q: &BoundQuery<T>) -> Result<BoundResult<T>> {
        match self {
            BoundKind::Classic => beta_classic(q),
            BoundKind::Star => beta_star(q),
            BoundKind::StarAlgo => beta_star_algo(q),
            BoundKind::Tree => beta_tree(q),
            BoundKind::Serial => beta_serial(q),
            BoundKind::RelayLowerBound => relay_lower_bound(q),
            BoundKind::BranchLowerBound => branch_lower_bound(q),
            BoundKind::OversamplingBaseline => oversampling_baseline(q),
        }
    }
}

/// Parameter swept by [`verify_monotonicity`].
#[derive(Clone, Debug, PartialEq)]
pub enum Sweep<T> {
    P(Vec<T>),
    Q(Vec<T>),
    Delta(Vec<T>),
    K(Vec<usize>),
}

impl<T: Real> Sweep<T> {
    fn len(&self) -> usize {
        match self {
            Sweep::P(v) | Sweep::Q(v) | Sweep::Delta(v) => v.len(),
            Sweep::K(v) => v.len(),
        }
    }

    fn apply(&self, base: &BoundQuery<T>, i: usize) -> BoundQuery<T> {
        match self {
            Sweep::P(v) => base.with_p(v[i]),
            Sweep::Q(v) => base.with_q(v[i]),
            Sweep::Delta(v) => base.with_delta(v[i]),
            Sweep::K(v) => base.with_k(v[i]),
        }
    }

    fn label(&self, i: usize) -> f64 {
        match self {
            Sweep::P(v) | Sweep::Q(v) | Sweep::Delta(v) => v[i].to_f64().unwrap_or(f64::NAN),
            Sweep::K(v) => v[i] as f64,
        }
    }

    fn strictly_increasing(&self) -> bool {
        match self {
            Sweep::P(v) | Sweep::Q(v) | Sweep::Delta(v) => v.windows(2).all(|w| w[0] < w[1]),
            Sweep::K(v) => v.windows(2).all(|w| w[0] < w[1]),
        }
    }
}

/// An adjacent grid pair where the bound failed to strictly decrease.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MonotonicityViolation {
    pub at: f64,
    pub next: f64,
    pub value: f64,
    pub next_value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MonotonicityReport {
    pub kind: BoundKind,
    pub points: usize,
    pub violations: Vec<MonotonicityViolation>,
    /// Adjacent pairs equal up to rounding (a `K` sweep close to its limit)
    /// whose exact log-denominator increment is positive.
    pub ties_resolved: usize,
}

impl MonotonicityReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks that `kind` strictly decreases along `sweep`.
pub fn verify_monotonicity<T: Real>(
    kind: BoundKind,
    base: &BoundQuery<T>,
    sweep: &Sweep<T>,
) -> Result<MonotonicityReport> {
    if !sweep.strictly_increasing() {
        return Err(Error::invalid("sweep grid must be strictly increasing"));
    }
    let values = (0..sweep.len())
        .map(|i| kind.evaluate(&sweep.apply(base, i)).map(|r| r.value))
        .collect::<Result<Vec<T>>>()?;
    let mut violations = Vec::new();
    let mut ties_resolved = 0;
    for (i, w) in values.windows(2).enumerate() {
        if w[1] < w[0] {
            continue;
        }
        // within a few ulps: rounding cannot tell, ask the exact increment
        let ulps = w[0].abs() * T::epsilon() * T::from_f64_lossy(4.0);
        if w[0].is_finite() && w[1] - w[0] <= ulps {
            if let Sweep::K(ks) = sweep {
                let step = k_step_total(kind, &sweep.apply(base, i), ks[i], ks[i + 1]);
                if step.is_some_and(|s| s > T::zero()) {
                    ties_resolved += 1;
                    continue;
                }
            }
        }
        violations.push(MonotonicityViolation {
            at: sweep.label(i),
            next: sweep.label(i + 1),
            value: w[0].to_f64().unwrap_or(f64::NAN),
            next_value: w[1].to_f64().unwrap_or(f64::NAN),
        });
    }
    Ok(MonotonicityReport {
        kind,
        points: values.len(),
        violations,
        ties_resolved,
    })
}

/// Exact-sign increase of the log-denominator from `K = from` to `K = to`,
/// summed one step at a time without cancellation. `None` for bounds that
/// do not depend on `K`.
fn k_step_total<T: Real>(kind: BoundKind, q: &BoundQuery<T>, from: usize, to: usize) -> Option<T> {
    let one = T::one();
    let mut total = T::zero();
    for k in from..to {
        let kf = T::from_f64_lossy(k as f64);
        let step = match kind {
            BoundKind::Tree => {
                // b = 1 - p (1 - d); step = ln(1 + q b^K (1 - b) / (1 - q + q b^(K+1)))
                let log_b = (q.p * q.decay_m1()).ln_1p();
                let b_k = (kf * log_b).exp();
                let one_minus_b = -(q.p * q.decay_m1());
                let next = (one - q.q) + q.q * b_k * (one - one_minus_b);
                (q.q * b_k * one_minus_b / next).ln_1p()
            }
            BoundKind::Serial => {
                // tail_K - tail_(K+1) = p (1 - d) (pd)^K (1 - pd)
                let pd = q.p * q.decay();
                let one_minus_d = -q.decay_m1();
                let pd_k = pd.powi(k as i32);
                let next = (one - q.p) + q.p * one_minus_d * pd_k * pd;
                (q.p * one_minus_d * pd_k * (one - pd) / next).ln_1p()
            }
            _ => return None,
        };
        total = total + step;
    }
    Some(total)
}
