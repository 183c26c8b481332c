//! Network topologies, erasure parameters and the observation mechanism.
//!
//! Measurements are indexed `0..m` branch-major, position-minor. For a tree
//! the index `r * K + k` is sensor `k` of relay `r`. For a serial-star
//! network the index `r * K + k` is position `k` of branch `r`, where
//! position `0` is the sensor farthest from the fusion center and position
//! `K - 1` is adjacent to it.
//!
//! Channels are drawn in one fixed order so that a seed reproduces the same
//! outcome:
//!
//! * star: sensor links in index order;
//! * tree: for each relay, its fusion-center link first, then its `K`
//!   sensor links in index order;
//! * serial-star: for each branch, the `K` hop channels from position `0`
//!   towards the fusion center. Channel `k` carries everything collected by
//!   positions `0..=k`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::scalar::{check_unit_interval, powu, Probability};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Topology {
    /// `sensors` sensors, each linked directly to the fusion center.
    Star { sensors: usize },
    /// `relays` relays with `per_relay` sensors each.
    Tree { relays: usize, per_relay: usize },
    /// `branches` serial chains of `per_branch` sensors each.
    SerialStar { branches: usize, per_branch: usize },
}

/// Which probability governs a channel.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Hop {
    /// Sensor-side link, observability `p`.
    Sensor,
    /// Relay to fusion center link, observability `q`.
    Relay,
}

/// Group (relay or branch) and position of a measurement, both zero based.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Location {
    pub group: usize,
    pub position: usize,
}

impl Topology {
    pub fn star(sensors: usize) -> Result<Self> {
        if sensors == 0 {
            return Err(Error::DegenerateTopology("star with zero sensors".into()));
        }
        Ok(Topology::Star { sensors })
    }

    pub fn tree(relays: usize, per_relay: usize) -> Result<Self> {
        if relays == 0 || per_relay == 0 {
            return Err(Error::DegenerateTopology(format!(
                "tree with R = {relays}, K = {per_relay}"
            )));
        }
        Ok(Topology::Tree { relays, per_relay })
    }

    pub fn serial_star(branches: usize, per_branch: usize) -> Result<Self> {
        if branches == 0 || per_branch == 0 {
            return Err(Error::DegenerateTopology(format!(
                "serial-star with R = {branches}, K = {per_branch}"
            )));
        }
        Ok(Topology::SerialStar { branches, per_branch })
    }

    /// Short lowercase name used in configs and CSV headers.
    pub fn kind_name(&self) -> &'static str {
        match self {
            Topology::Star { .. } => "star",
            Topology::Tree { .. } => "tree",
            Topology::SerialStar { .. } => "serial",
        }
    }

    /// Total number of measurements `m`.
    pub fn measurements(&self) -> usize {
        self.groups() * self.group_size()
    }

    /// Number of relays or branches; `m` for a star.
    pub fn groups(&self) -> usize {
        match *self {
            Topology::Star { sensors } => sensors,
            Topology::Tree { relays, .. } => relays,
            Topology::SerialStar { branches, .. } => branches,
        }
    }

    /// Sensors per relay or branch; 1 for a star.
    pub fn group_size(&self) -> usize {
        match *self {
            Topology::Star { .. } => 1,
            Topology::Tree { per_relay, .. } => per_relay,
            Topology::SerialStar { per_branch, .. } => per_branch,
        }
    }

    pub fn is_degenerate(&self) -> bool {
        self.measurements() == 0
    }

    pub fn locate(&self, index: usize) -> Result<Location> {
        let m = self.measurements();
        if index >= m {
            return Err(Error::IndexOutOfRange { index, len: m });
        }
        let k = self.group_size();
        Ok(Location {
            group: index / k,
            position: index % k,
        })
    }

    /// Number of independent erasure channels in the network.
    pub fn channel_count(&self) -> usize {
        match *self {
            Topology::Star { sensors } => sensors,
            Topology::Tree { relays, per_relay } => relays * (per_relay + 1),
            Topology::SerialStar { branches, per_branch } => branches * per_branch,
        }
    }

    /// Hop class of every channel, in draw order.
    pub fn channel_hops(&self) -> Vec<Hop> {
        match *self {
            Topology::Tree { relays, per_relay } => (0..relays)
                .flat_map(|_| std::iter::once(Hop::Relay).chain(std::iter::repeat_n(Hop::Sensor, per_relay)))
                .collect(),
            _ => vec![Hop::Sensor; self.channel_count()],
        }
    }

    /// Probability that measurement `index` reaches the fusion center.
    pub fn observe_probability<T: Probability>(&self, params: &ErasureParams<T>, index: usize) -> Result<T> {
        let loc = self.locate(index)?;
        Ok(match *self {
            Topology::Star { .. } => params.p.clone(),
            Topology::Tree { .. } => params.p.clone() * params.q.clone(),
            Topology::SerialStar { per_branch, .. } => powu(&params.p, per_branch - loc.position),
        })
    }

    /// `observe_probability` for every index.
    pub fn marginal_index_probabilities<T: Probability>(&self, params: &ErasureParams<T>) -> Vec<T> {
        (0..self.measurements())
            .map(|i| {
                self.observe_probability(params, i)
                    .expect("index is in range by construction")
            })
            .collect()
    }

    /// Applies the topology mechanics to one realization of all channel
    /// states (in draw order, `true` = delivered).
    pub fn resolve(&self, channels: &[bool]) -> ObservationOutcome {
        assert_eq!(
            channels.len(),
            self.channel_count(),
            "channel state vector has the wrong length"
        );
        let trace = match *self {
            Topology::Star { .. } => ChannelTrace::Star {
                links: channels.to_vec(),
            },
            Topology::Tree { relays, per_relay } => {
                let mut relay_links = Vec::with_capacity(relays);
                let mut sensor_links = Vec::with_capacity(relays * per_relay);
                for chunk in channels.chunks(per_relay + 1) {
                    relay_links.push(chunk[0]);
                    sensor_links.extend_from_slice(&chunk[1..]);
                }
                ChannelTrace::Tree {
                    relay_links,
                    sensor_links,
                }
            }
            Topology::SerialStar { per_branch, .. } => ChannelTrace::SerialStar {
                last_failure: channels
                    .chunks(per_branch)
                    .map(|branch| branch.iter().rposition(|ok| !ok).map_or(0, |j| j + 1))
                    .collect(),
            },
        };
        let observed = trace.observed(self);
        ObservationOutcome { observed, trace }
    }

    /// Draws every channel once and returns the resulting observation set.
    ///
    /// Degenerate (empty) networks yield an empty outcome.
    pub fn sample_observation<R: Rng + ?Sized>(&self, params: &ErasureParams<f64>, rng: &mut R) -> ObservationOutcome {
        let channels: Vec<bool> = self
            .channel_hops()
            .into_iter()
            .map(|hop| {
                let prob = match hop {
                    Hop::Sensor => params.p,
                    Hop::Relay => params.q,
                };
                rng.random::<f64>() < prob
            })
            .collect();
        self.resolve(&channels)
    }
}

/// Probabilities of observability. `q` only matters for trees.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErasureParams<T = f64> {
    pub p: T,
    pub q: T,
}

impl<T: Probability> ErasureParams<T> {
    pub fn new(p: T, q: T) -> Result<Self> {
        check_unit_interval("p", &p)?;
        check_unit_interval("q", &q)?;
        Ok(Self { p, q })
    }

    /// Single-hop parameters; `q` is fixed to 1.
    pub fn with_p(p: T) -> Result<Self> {
        Self::new(p, T::one())
    }

    /// Probability that the channel at draw position `hop` delivers.
    pub fn hop_probability(&self, hop: Hop) -> &T {
        match hop {
            Hop::Sensor => &self.p,
            Hop::Relay => &self.q,
        }
    }
}

/// Channel states that produced an observation set.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelTrace {
    Star {
        links: Vec<bool>,
    },
    Tree {
        relay_links: Vec<bool>,
        sensor_links: Vec<bool>,
    },
    /// Per branch, the one-based position of the last failed channel
    /// (0 when every channel delivered).
    SerialStar {
        last_failure: Vec<usize>,
    },
}

impl ChannelTrace {
    /// Recomputes the observed index set implied by this trace.
    pub fn observed(&self, topology: &Topology) -> Vec<usize> {
        match self {
            ChannelTrace::Star { links } => links
                .iter()
                .enumerate()
                .filter_map(|(i, &ok)| ok.then_some(i))
                .collect(),
            ChannelTrace::Tree {
                relay_links,
                sensor_links,
            } => {
                let k = topology.group_size();
                sensor_links
                    .iter()
                    .enumerate()
                    .filter_map(|(i, &ok)| (ok && relay_links[i / k]).then_some(i))
                    .collect()
            }
            ChannelTrace::SerialStar { last_failure } => {
                let k = topology.group_size();
                last_failure
                    .iter()
                    .enumerate()
                    .flat_map(|(r, &j)| (r * k + j)..((r + 1) * k))
                    .collect()
            }
        }
    }
}

/// The realized index set `T` together with the channel trace behind it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservationOutcome {
    /// Sorted zero-based indices of measurements that reached the fusion center.
    pub observed: Vec<usize>,
    pub trace: ChannelTrace,
}

impl ObservationOutcome {
    /// Outcome in which every measurement arrived.
    pub fn full(topology: &Topology) -> Self {
        topology.resolve(&vec![true; topology.channel_count()])
    }

    pub fn len(&self) -> usize {
        self.observed.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observed.is_empty()
    }

    /// True when `observed` matches what the trace implies.
    pub fn is_consistent(&self, topology: &Topology) -> bool {
        self.trace.observed(topology) == self.observed
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn params(p: f64, q: f64) -> ErasureParams {
        ErasureParams::new(p, q).unwrap()
    }

    #[test]
    fn observe_probability_examples() {
        let star = Topology::star(5).unwrap();
        assert_eq!(star.observe_probability(&params(0.3, 1.0), 1).unwrap(), 0.3);

        let tree = Topology::tree(2, 3).unwrap();
        assert_eq!(tree.observe_probability(&params(0.5, 0.5), 3).unwrap(), 0.25);

        let serial = Topology::serial_star(1, 3).unwrap();
        assert_eq!(serial.observe_probability(&params(0.5, 1.0), 0).unwrap(), 0.125);

        for topo in [star, tree, serial] {
            for i in 0..topo.measurements() {
                assert_eq!(topo.observe_probability(&params(1.0, 1.0), i).unwrap(), 1.0);
            }
        }
    }

    #[test]
    fn observe_probability_rejects_out_of_range() {
        let star = Topology::star(5).unwrap();
        assert!(matches!(
            star.observe_probability(&params(0.3, 1.0), 5),
            Err(Error::IndexOutOfRange { index: 5, len: 5 })
        ));
    }

    #[test]
    fn marginals_examples() {
        let p = Topology::star(3)
            .unwrap()
            .marginal_index_probabilities(&params(0.4, 1.0));
        assert_eq!(p, vec![0.4, 0.4, 0.4]);
        let p = Topology::serial_star(1, 2)
            .unwrap()
            .marginal_index_probabilities(&params(0.5, 1.0));
        assert_eq!(p, vec![0.25, 0.5]);
        let p = Topology::tree(1, 2)
            .unwrap()
            .marginal_index_probabilities(&params(0.6, 0.5));
        assert_eq!(p, vec![0.3, 0.3]);
    }

    #[test]
    fn constructors_reject_zero_counts() {
        assert!(matches!(Topology::star(0), Err(Error::DegenerateTopology(_))));
        assert!(matches!(Topology::tree(0, 3), Err(Error::DegenerateTopology(_))));
        assert!(matches!(Topology::tree(3, 0), Err(Error::DegenerateTopology(_))));
        assert!(matches!(Topology::serial_star(2, 0), Err(Error::DegenerateTopology(_))));
    }

    #[test]
    fn params_validate_range() {
        assert!(ErasureParams::new(1.1, 0.5).is_err());
        assert!(ErasureParams::new(0.5, -0.1).is_err());
        assert!(ErasureParams::new(0.0, 1.0).is_ok());
    }

    #[test]
    fn degenerate_sampling_is_empty() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let topo = Topology::Tree {
            relays: 0,
            per_relay: 4,
        };
        let out = topo.sample_observation(&params(1.0, 1.0), &mut rng);
        assert!(out.is_empty());
    }

    #[test]
    fn extreme_probabilities() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for topo in [
            Topology::star(6).unwrap(),
            Topology::tree(2, 3).unwrap(),
            Topology::serial_star(3, 2).unwrap(),
        ] {
            let full = topo.sample_observation(&params(1.0, 1.0), &mut rng);
            assert_eq!(full.observed, (0..topo.measurements()).collect::<Vec<_>>());
            assert_eq!(full, ObservationOutcome::full(&topo));
            let none = topo.sample_observation(&params(0.0, 0.0), &mut rng);
            assert!(none.is_empty());
        }
    }

    #[test]
    fn serial_last_failure_gives_suffix() {
        let topo = Topology::serial_star(2, 4).unwrap();
        // branch 0: channel 2 (1-based) fails; branch 1: all deliver
        let out = topo.resolve(&[true, false, true, true, true, true, true, true]);
        assert_eq!(
            out.trace,
            ChannelTrace::SerialStar {
                last_failure: vec![2, 0]
            }
        );
        assert_eq!(out.observed, vec![2, 3, 4, 5, 6, 7]);
    }

    #[test]
    fn tree_relay_failure_blocks_group() {
        let topo = Topology::tree(2, 2).unwrap();
        // relay 0 down, relay 1 up with its first sensor lost
        let out = topo.resolve(&[false, true, true, true, false, true]);
        assert_eq!(out.observed, vec![3]);
        assert!(out.is_consistent(&topo));
    }

    #[test]
    fn identical_seeds_identical_outcomes() {
        let topo = Topology::tree(4, 5).unwrap();
        let a = topo.sample_observation(&params(0.6, 0.7), &mut ChaCha8Rng::seed_from_u64(99));
        let b = topo.sample_observation(&params(0.6, 0.7), &mut ChaCha8Rng::seed_from_u64(99));
        assert_eq!(a, b);
    }
}
