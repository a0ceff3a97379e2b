//! Hierarchical, replayable random streams.
//!
//! A stream is identified by a master seed plus a path of `(label, index)`
//! segments. The identity is hashed with SHA-256 into a ChaCha8 key, so the
//! value sequence depends only on that identity: never on how many values a
//! parent or sibling stream has already produced, on thread scheduling, or on
//! the platform.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// One step of a stream path.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PathSegment {
    pub label: String,
    pub index: u64,
}

/// Deterministic random stream. Single owner; fork before handing work to
/// another thread.
#[derive(Debug, Clone)]
pub struct RngStream {
    master_seed: u64,
    path: Vec<PathSegment>,
    core: ChaCha8Rng,
}

impl RngStream {
    pub fn new(master_seed: u64) -> Self {
        Self::from_path(master_seed, Vec::new())
    }

    /// Reconstructs the stream at `path`, positioned at its first value.
    pub fn from_path(master_seed: u64, path: Vec<PathSegment>) -> Self {
        let key = derive_key(master_seed, &path);
        Self {
            master_seed,
            path,
            core: ChaCha8Rng::from_seed(key),
        }
    }

    /// Child stream with `(label, index)` appended. Does not consume from
    /// `self`.
    pub fn fork(&self, label: &str, index: u64) -> RngStream {
        let mut path = self.path.clone();
        path.push(PathSegment {
            label: label.to_string(),
            index,
        });
        Self::from_path(self.master_seed, path)
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn path(&self) -> &[PathSegment] {
        &self.path
    }

    /// Uniform in `[0, 1)` with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        self.core.random::<f64>()
    }

    /// Uniform in `[lo, hi)`.
    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Uniform integer in `[lo, hi]`.
    pub fn int_inclusive(&mut self, lo: u64, hi: u64) -> u64 {
        assert!(lo <= hi, "empty integer range [{lo}, {hi}]");
        self.core.random_range(lo..=hi)
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    /// Standard normal draw.
    pub fn normal(&mut self) -> f64 {
        self.core.sample(StandardNormal)
    }

    /// Picks an index with probability proportional to `weights`.
    pub fn categorical(&mut self, weights: &[f64]) -> usize {
        let total: f64 = weights.iter().sum();
        let mut u = self.uniform() * total;
        for (i, &w) in weights.iter().enumerate() {
            if u < w {
                return i;
            }
            u -= w;
        }
        // Only reachable through rounding; fall back to the last positive weight.
        weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.int_inclusive(0, i as u64) as usize;
            items.swap(i, j);
        }
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.core.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.core.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.core.fill_bytes(dst)
    }
}

fn derive_key(master_seed: u64, path: &[PathSegment]) -> [u8; 32] {
    let mut hasher = Sha256::new();
    hasher.update(b"noisepair.rng.v1");
    hasher.update(master_seed.to_le_bytes());
    for seg in path {
        hasher.update((seg.label.len() as u64).to_le_bytes());
        hasher.update(seg.label.as_bytes());
        hasher.update(seg.index.to_le_bytes());
    }
    hasher.finalize().into()
}
