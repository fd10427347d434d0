//! Seed discipline.
//!
//! Every random stream in a run is derived from one master seed by a
//! counter-style split keyed on `(master, label, index)`. Adding a new consumer
//! never shifts the values seen by existing ones.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SeedTree {
    master: u64,
}

impl SeedTree {
    pub fn new(master: u64) -> Self {
        Self { master }
    }

    pub fn master(&self) -> u64 {
        self.master
    }

    pub fn seed(&self, label: &str, index: u64) -> u64 {
        let mut h = splitmix(self.master ^ 0x4c32_4520_5345_4544);
        h = splitmix(h ^ fnv1a(label.as_bytes()));
        splitmix(h ^ index.wrapping_mul(0x9e37_79b9_7f4a_7c15))
    }

    pub fn stream(&self, label: &str, index: u64) -> Rng {
        Rng::seed_from_u64(self.seed(label, index))
    }

    /// A child tree, so nested components can keep deriving by label.
    pub fn child(&self, label: &str, index: u64) -> SeedTree {
        SeedTree::new(self.seed(label, index))
    }
}

/// Fresh generator seeded from the next value of a parent stream.
pub fn fork(rng: &mut Rng) -> Rng {
    Rng::seed_from_u64(rng.next_u64())
}

pub fn from_seed(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, &b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}
