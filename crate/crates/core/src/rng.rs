//! Deterministic, splittable randomness.
//!
//! Every random draw in the library comes from a stream keyed by the root seed
//! and a [`SeedPath`]. The key is the SHA-256 digest of both, which seeds a
//! ChaCha12 stream cipher. Streams for distinct paths are independent, and a
//! stream never depends on which thread created it, so parallel loops replay
//! bit-identically.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;
use sha2::{Digest, Sha256};

pub type Stream = ChaCha12Rng;

/// Tags the purpose of a stream so that two consumers at the same indices never collide.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Purpose {
    Init = 1,
    Subsample = 2,
    Noise = 3,
    Simulate = 4,
    Marginalize = 5,
    Ingest = 6,
    Multimodal = 7,
    SamplePath = 8,
    Bridge = 9,
    Cluster = 10,
    GridSubsample = 11,
    GapTrials = 12,
    Jitter = 13,
    Eval = 14,
    Other = 99,
}

/// Hierarchical identifier of a random stream.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct SeedPath(Vec<u64>);

impl SeedPath {
    pub fn new(components: impl IntoIterator<Item = u64>) -> Self {
        Self(components.into_iter().collect())
    }

    /// Path for a `(phase, iteration, marginal, particle, purpose)` tuple.
    pub fn step(phase: usize, iteration: usize, marginal: usize, particle: usize, purpose: Purpose) -> Self {
        Self(vec![
            phase as u64,
            iteration as u64,
            marginal as u64,
            particle as u64,
            purpose as u64,
        ])
    }

    pub fn purpose(purpose: Purpose) -> Self {
        Self(vec![purpose as u64])
    }

    pub fn child(&self, component: u64) -> Self {
        let mut c = self.0.clone();
        c.push(component);
        Self(c)
    }

    pub fn components(&self) -> &[u64] {
        &self.0
    }
}

impl From<Vec<u64>> for SeedPath {
    fn from(v: Vec<u64>) -> Self {
        Self(v)
    }
}

/// Creates the random stream for `path` under `root_seed`.
pub fn derive_rng(root_seed: u64, path: &SeedPath) -> Stream {
    let mut h = Sha256::new();
    h.update(b"dptraj-seed-v1");
    h.update(root_seed.to_le_bytes());
    h.update((path.0.len() as u64).to_le_bytes());
    for c in &path.0 {
        h.update(c.to_le_bytes());
    }
    let digest: [u8; 32] = h.finalize().into();
    ChaCha12Rng::from_seed(digest)
}

/// A root seed together with a stream path; the handle operations pass around.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RngKey {
    pub seed: u64,
    pub path: SeedPath,
}

impl RngKey {
    pub fn new(seed: u64, path: SeedPath) -> Self {
        Self { seed, path }
    }

    pub fn root(seed: u64) -> Self {
        Self::new(seed, SeedPath::default())
    }

    pub fn child(&self, component: u64) -> Self {
        Self::new(self.seed, self.path.child(component))
    }

    pub fn purpose(&self, purpose: Purpose) -> Self {
        self.child(purpose as u64)
    }

    /// Appends every component of `path`.
    pub fn join(&self, path: &SeedPath) -> Self {
        let mut p = self.path.clone();
        p.0.extend_from_slice(path.components());
        Self::new(self.seed, p)
    }

    pub fn stream(&self) -> Stream {
        derive_rng(self.seed, &self.path)
    }
}
