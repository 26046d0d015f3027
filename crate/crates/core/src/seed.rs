//! Deterministic derivation of independent random streams.
//!
//! Every random decision in the toolkit draws from a stream whose seed is a
//! pure function of the run's master seed and a path of labels, for example
//! `("pair", source_id, target_rank)`. Work items can therefore be processed
//! in any order, on any number of threads, without changing the output.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The RNG used throughout the crate.
pub type StreamRng = ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |h, &b| {
        (h ^ u64::from(b)).wrapping_mul(FNV_PRIME)
    })
}

/// A node in the stream-derivation tree.
///
/// ```
/// use avblend::seed::StreamSeed;
///
/// let a = StreamSeed::new(7).with_str("pair").with_str("s001_v0").with_u64(3);
/// let b = StreamSeed::new(7).with_str("pair").with_str("s001_v0").with_u64(3);
/// assert_eq!(a.value(), b.value());
/// assert_ne!(a.value(), StreamSeed::new(7).with_str("pair").value());
/// ```
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamSeed(u64);

impl StreamSeed {
    pub fn new(master: u64) -> Self {
        StreamSeed(splitmix64(master))
    }

    /// Rebuilds a node from a previously recorded [`value`](Self::value).
    pub fn from_value(value: u64) -> Self {
        StreamSeed(value)
    }

    pub fn with_str(self, label: &str) -> Self {
        // Length prefix keeps ("ab","c") and ("a","bc") apart.
        let mixed = self.0 ^ splitmix64(label.len() as u64) ^ fnv1a(label.as_bytes());
        StreamSeed(splitmix64(mixed.rotate_left(23)))
    }

    pub fn with_u64(self, label: u64) -> Self {
        StreamSeed(splitmix64(
            self.0.rotate_left(17) ^ splitmix64(label ^ 0x5851_f42d_4c95_7f2d),
        ))
    }

    pub fn value(self) -> u64 {
        self.0
    }

    pub fn rng(self) -> StreamRng {
        StreamRng::seed_from_u64(self.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn labels_are_not_concatenated() {
        let a = StreamSeed::new(1).with_str("ab").with_str("c");
        let b = StreamSeed::new(1).with_str("a").with_str("bc");
        assert_ne!(a, b);
    }

    #[test]
    fn order_of_labels_matters() {
        let a = StreamSeed::new(1).with_u64(1).with_u64(2);
        let b = StreamSeed::new(1).with_u64(2).with_u64(1);
        assert_ne!(a, b);
    }

    #[test]
    fn streams_reproduce_from_value() {
        let s = StreamSeed::new(99).with_str("x");
        let mut r1 = s.rng();
        let mut r2 = StreamSeed::from_value(s.value()).rng();
        for _ in 0..16 {
            assert_eq!(r1.random::<u64>(), r2.random::<u64>());
        }
    }

    #[test]
    fn frozen_values() {
        // Pinned so that serialized provenance seeds stay stable across releases.
        assert_eq!(StreamSeed::new(0).value(), 0xe220_a839_7b1d_cdaf);
    }
}
