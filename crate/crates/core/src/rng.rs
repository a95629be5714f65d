//! Reproducible random streams.
//!
//! Every random quantity in the crate is drawn from a [`ChaCha8Rng`] whose seed
//! is derived from a master seed and a short path of integer labels
//! (repetition index, time step, sample index, ...). Two different label paths
//! give statistically independent streams, and the derivation does not depend
//! on the order in which streams are requested, so parallel workers reproduce
//! the single-threaded result bit for bit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator used throughout the crate.
pub type StreamRng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from `master` and a label path.
///
/// `derive_seed(s, &[a, b])` equals `derive_seed(derive_seed(s, &[a]), &[b])`,
/// and the empty path returns `master` unchanged.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    path.iter().fold(master, |acc, &label| {
        splitmix64(acc ^ splitmix64(label.wrapping_add(0x632B_E59B_D9B4_E019)))
    })
}

/// A named source of independent streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedTree {
    seed: u64,
}

impl SeedTree {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Sub-tree for the given label path.
    pub fn child(&self, path: &[u64]) -> SeedTree {
        SeedTree {
            seed: derive_seed(self.seed, path),
        }
    }

    /// Generator for the given label path.
    pub fn rng(&self, path: &[u64]) -> StreamRng {
        StreamRng::seed_from_u64(derive_seed(self.seed, path))
    }
}
