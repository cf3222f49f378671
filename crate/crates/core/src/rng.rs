//! Deterministic RNG substreams.
//!
//! Every random draw in the simulator comes from a stream derived from the
//! experiment seed and a path of integer labels (layer, tile, modulus,
//! attempt, trial...). Streams depend only on their path, so results do not
//! change with scheduling or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A position in the substream tree.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Stream(u64);

impl Stream {
    pub fn root(seed: u64) -> Self {
        Stream(splitmix64(seed))
    }

    pub fn child(self, label: u64) -> Self {
        Stream(splitmix64(self.0 ^ splitmix64(label.wrapping_add(0x632b_e59b_d9b4_e019))))
    }

    pub fn path(self, labels: &[u64]) -> Self {
        labels.iter().fold(self, |s, &l| s.child(l))
    }

    pub fn rng(self) -> StreamRng {
        ChaCha8Rng::seed_from_u64(self.0)
    }

    pub fn id(self) -> u64 {
        self.0
    }
}
