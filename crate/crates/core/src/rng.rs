//! Seed management: every source of randomness in a run is derived from one
//! root seed expanded into named substreams, so individual components stay
//! reproducible in isolation.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// FNV-1a 64-bit hash; stable across platforms and releases.
fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// A deterministic generator for named substreams of a root seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedTree {
    root: u64,
}

impl SeedTree {
    pub fn new(root: u64) -> Self {
        SeedTree { root }
    }

    pub fn root(&self) -> u64 {
        self.root
    }

    /// RNG for the substream identified by `name`.
    pub fn stream(&self, name: &str) -> ChaCha12Rng {
        let mut rng = ChaCha12Rng::seed_from_u64(self.root);
        rng.set_stream(fnv1a(name.as_bytes()));
        rng
    }

    /// RNG for a substream indexed by up to three counters, e.g. one noise
    /// stream per (target row, horizon offset, draw).
    pub fn indexed_stream(&self, name: &str, a: u64, b: u64, c: u64) -> ChaCha12Rng {
        let mut key = Vec::with_capacity(name.len() + 27);
        key.extend_from_slice(name.as_bytes());
        key.push(b'/');
        key.extend_from_slice(&a.to_le_bytes());
        key.extend_from_slice(&b.to_le_bytes());
        key.extend_from_slice(&c.to_le_bytes());
        let mut rng = ChaCha12Rng::seed_from_u64(self.root);
        rng.set_stream(fnv1a(&key));
        rng
    }
}
