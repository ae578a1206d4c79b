//! Named random sub-streams derived from one master seed.
//!
//! Every consumer asks for a stream by a path-like name such as
//! `"drift/realization-3/sensor-7"`. The stream seed is the SHA-256 digest of
//! the master seed and the name, so adding a sensor or a source never shifts
//! the numbers drawn by any other stream.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// The generator behind every stream. ChaCha output is stable across platforms
/// and crate versions, which `StdRng` does not promise.
pub type SimRng = ChaCha8Rng;

const DOMAIN: &[u8] = b"wsn-calib/stream/v1\0";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Streams {
    master: u64,
}

impl Streams {
    pub fn new(master_seed: u64) -> Self {
        Self { master: master_seed }
    }

    pub fn master_seed(&self) -> u64 {
        self.master
    }

    pub fn seed_for(&self, name: &str) -> [u8; 32] {
        let mut hasher = Sha256::new();
        hasher.update(DOMAIN);
        hasher.update(self.master.to_le_bytes());
        hasher.update(name.as_bytes());
        hasher.finalize().into()
    }

    pub fn stream(&self, name: &str) -> SimRng {
        SimRng::from_seed(self.seed_for(name))
    }
}
