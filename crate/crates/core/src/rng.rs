//! Named, mutually independent random streams derived from one master seed.

use std::collections::BTreeMap;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Purpose of a random stream. Each subsystem draws only from its own stream
/// so that extra draws in one place never shift another's sequence.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum StreamLabel {
    Mobility,
    Traffic,
    MacBackoff,
    Topology,
}

impl StreamLabel {
    pub const ALL: [StreamLabel; 4] = [
        StreamLabel::Mobility,
        StreamLabel::Traffic,
        StreamLabel::MacBackoff,
        StreamLabel::Topology,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StreamLabel::Mobility => "mobility",
            StreamLabel::Traffic => "traffic",
            StreamLabel::MacBackoff => "mac-backoff",
            StreamLabel::Topology => "topology",
        }
    }
}

impl fmt::Display for StreamLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Dist {
    /// Uniform over `[lo, hi)`.
    Uniform { lo: f64, hi: f64 },
    /// Uniform integer over `[lo, hi]`, returned as f64.
    UniformInt { lo: u64, hi: u64 },
    /// Exponential with the given rate.
    Exponential { rate: f64 },
}

/// Hashes `(master seed, label)` into a per-stream 64-bit seed.
pub fn derive_seed(master: u64, label: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update(label.as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().unwrap())
}

pub struct RandomStreams {
    master: u64,
    streams: BTreeMap<StreamLabel, ChaCha8Rng>,
}

impl RandomStreams {
    /// All four standard streams registered.
    pub fn new(master_seed: u64) -> Self {
        Self::with_labels(master_seed, &StreamLabel::ALL)
    }

    pub fn with_labels(master_seed: u64, labels: &[StreamLabel]) -> Self {
        let streams = labels
            .iter()
            .map(|&l| {
                let rng = ChaCha8Rng::seed_from_u64(derive_seed(master_seed, l.name()));
                (l, rng)
            })
            .collect();
        RandomStreams {
            master: master_seed,
            streams,
        }
    }

    pub fn master_seed(&self) -> u64 {
        self.master
    }

    /// Direct access to a stream's generator.
    ///
    /// Panics if `label` was not registered at construction.
    pub fn stream(&mut self, label: StreamLabel) -> &mut ChaCha8Rng {
        match self.streams.get_mut(&label) {
            Some(r) => r,
            None => panic!("random stream `{label}` was not registered"),
        }
    }

    pub fn draw(&mut self, label: StreamLabel, dist: Dist) -> f64 {
        let rng = self.stream(label);
        match dist {
            Dist::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
            Dist::UniformInt { lo, hi } => rng.random_range(lo..=hi) as f64,
            Dist::Exponential { rate } => {
                let u: f64 = rng.random();
                -(1.0 - u).ln() / rate
            }
        }
    }

    pub fn uniform(&mut self, label: StreamLabel, lo: f64, hi: f64) -> f64 {
        self.draw(label, Dist::Uniform { lo, hi })
    }

    pub fn uniform_int(&mut self, label: StreamLabel, lo: u64, hi: u64) -> u64 {
        self.stream(label).random_range(lo..=hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_unit_interval() {
        let mut s = RandomStreams::new(3);
        for _ in 0..10_000 {
            let x = s.uniform(StreamLabel::Traffic, 0.0, 1.0);
            assert!((0.0..1.0).contains(&x));
        }
    }

    #[test]
    fn same_seed_replays() {
        let mut a = RandomStreams::new(42);
        let mut b = RandomStreams::new(42);
        for _ in 0..1000 {
            assert_eq!(
                a.uniform(StreamLabel::Mobility, 0.0, 1.0).to_bits(),
                b.uniform(StreamLabel::Mobility, 0.0, 1.0).to_bits()
            );
        }
    }

    #[test]
    fn streams_are_isolated() {
        let mut isolated = RandomStreams::new(9);
        let expected: Vec<u64> = (0..200)
            .map(|_| isolated.uniform_int(StreamLabel::MacBackoff, 0, 1023))
            .collect();

        let mut mixed = RandomStreams::new(9);
        let got: Vec<u64> = (0..200)
            .map(|i| {
                for _ in 0..(i % 3) {
                    mixed.uniform(StreamLabel::Mobility, 0.0, 1.0);
                }
                mixed.uniform_int(StreamLabel::MacBackoff, 0, 1023)
            })
            .collect();
        assert_eq!(expected, got);
    }

    #[test]
    fn labels_get_distinct_sequences() {
        let mut s = RandomStreams::new(1);
        let a: Vec<u64> = (0..8).map(|_| s.uniform_int(StreamLabel::Traffic, 0, u64::MAX)).collect();
        let b: Vec<u64> = (0..8).map(|_| s.uniform_int(StreamLabel::Topology, 0, u64::MAX)).collect();
        assert_ne!(a, b);
    }

    #[test]
    #[should_panic(expected = "not registered")]
    fn unknown_label_is_fatal() {
        let mut s = RandomStreams::with_labels(1, &[StreamLabel::Mobility]);
        s.uniform(StreamLabel::Traffic, 0.0, 1.0);
    }

    #[test]
    fn exponential_is_positive() {
        let mut s = RandomStreams::new(5);
        let mean: f64 = (0..20_000)
            .map(|_| s.draw(StreamLabel::Traffic, Dist::Exponential { rate: 4.0 }))
            .sum::<f64>()
            / 20_000.0;
        assert!((mean - 0.25).abs() < 0.01, "mean {mean}");
    }
}
