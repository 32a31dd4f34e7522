//! Deterministic substream derivation.
//!
//! Every randomized operation owns a stream derived from (master seed,
//! domain tag, unit key), so results never depend on processing order or
//! worker count. ChaCha12 keyed through SHA-256 gives independent streams
//! for distinct keys.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use sha2::{Digest, Sha256};

/// Stream for a named unit (e.g. a question id).
pub fn keyed_stream(seed: u64, domain: &str, key: &str) -> ChaCha12Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update([0u8]);
    h.update(domain.as_bytes());
    h.update([0u8]);
    h.update(key.as_bytes());
    ChaCha12Rng::from_seed(h.finalize().into())
}

/// Stream for an indexed unit (e.g. question index x trial).
pub fn indexed_stream(seed: u64, domain: &str, a: u64, b: u64) -> ChaCha12Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update([0u8]);
    h.update(domain.as_bytes());
    h.update([0u8]);
    h.update(a.to_le_bytes());
    h.update(b.to_le_bytes());
    ChaCha12Rng::from_seed(h.finalize().into())
}

/// Neumaier compensated accumulator; makes parallel reductions insensitive
/// to summation order at the 1e-12 level the determinism contract demands.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}
