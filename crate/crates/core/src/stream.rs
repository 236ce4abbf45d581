//! Deterministic hierarchical randomness.
//!
//! A [`StreamKey`] names one independent random source: a root seed plus a
//! path of signed integers, the same tuples the recursive estimator uses to
//! index its children (`(θ, i, k)`, `(θ, -i, k)`, `(θ, 0, -k)`). The key is
//! hashed with SHA-256 into a ChaCha8 key, so a stream depends only on its key
//! and never on the order in which streams are created or consumed.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use sha2::{Digest, Sha256};
use statrs::function::erf::erfc_inv;

use crate::error::{MlpError, Result};

const DOMAIN_TAG: &[u8] = b"mlp-stream-v1";
const TWO_POW_NEG_53: f64 = 1.0 / (1u64 << 53) as f64;

/// Address of one random source: `(root_seed, path)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct StreamKey {
    pub root_seed: u64,
    pub path: Vec<i64>,
}

impl StreamKey {
    pub fn new(root_seed: u64, path: impl Into<Vec<i64>>) -> Self {
        Self {
            root_seed,
            path: path.into(),
        }
    }

    pub fn root(root_seed: u64) -> Self {
        Self::new(root_seed, Vec::new())
    }

    /// Key of the child addressed by appending `suffix` to this path.
    pub fn child(&self, suffix: &[i64]) -> Self {
        let mut path = Vec::with_capacity(self.path.len() + suffix.len());
        path.extend_from_slice(&self.path);
        path.extend_from_slice(suffix);
        Self {
            root_seed: self.root_seed,
            path,
        }
    }

    pub fn stream(&self) -> Stream {
        derive_stream(self.root_seed, &self.path)
    }
}

/// Sequential draw source for one key.
#[derive(Clone, Debug)]
pub struct Stream {
    rng: ChaCha8Rng,
    draws: u64,
}

/// Hash the length-prefixed path and key a counter-mode ChaCha8 generator with it.
pub fn derive_stream(root_seed: u64, path: &[i64]) -> Stream {
    let mut hasher = Sha256::new();
    hasher.update(DOMAIN_TAG);
    hasher.update(root_seed.to_le_bytes());
    hasher.update((path.len() as u64).to_le_bytes());
    for element in path {
        hasher.update(element.to_le_bytes());
    }
    let digest = hasher.finalize();
    let mut seed = [0u8; 32];
    seed.copy_from_slice(&digest);
    Stream {
        rng: ChaCha8Rng::from_seed(seed),
        draws: 0,
    }
}

impl Stream {
    /// Uniform on `[0, 1)` with 53 random bits.
    pub fn next_uniform(&mut self) -> f64 {
        self.draws += 1;
        (self.rng.next_u64() >> 11) as f64 * TWO_POW_NEG_53
    }

    /// `d` independent standard normals, one underlying uniform each.
    pub fn next_gaussian_vector(&mut self, d: usize) -> Result<Vec<f64>> {
        let mut out = vec![0.0; d];
        self.fill_gaussian(&mut out)?;
        Ok(out)
    }

    /// Fill `out` with standard normals by inverting the normal CDF.
    pub fn fill_gaussian(&mut self, out: &mut [f64]) -> Result<()> {
        if out.is_empty() {
            return Err(MlpError::EmptyDimension);
        }
        for z in out.iter_mut() {
            // midpoint grid keeps the uniform strictly inside (0, 1)
            let u = ((self.rng.next_u64() >> 11) as f64 + 0.5) * TWO_POW_NEG_53;
            *z = -std::f64::consts::SQRT_2 * erfc_inv(2.0 * u);
        }
        self.draws += out.len() as u64;
        Ok(())
    }

    /// Scalar draws consumed so far.
    pub fn draws(&self) -> u64 {
        self.draws
    }
}
