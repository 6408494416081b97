//! Deterministic random-stream plumbing.
//!
//! Every experiment consumes randomness through named substreams derived from
//! a single 64-bit master seed by a fixed avalanche mix of
//! `(seed, label, index)`. Re-running with the same seed therefore reproduces
//! every draw regardless of evaluation order, and adding work at the end of a
//! stream never perturbs earlier draws.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer; a full-avalanche 64-bit mix.
fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// Derives a child seed from `(seed, label, index)`.
pub fn derive_seed(seed: u64, label: &str, index: u64) -> u64 {
    let s = splitmix64(seed ^ fnv1a64(label.as_bytes()));
    splitmix64(s ^ index)
}

/// A ChaCha8 generator keyed by `(seed, label, index)`.
pub fn substream(seed: u64, label: &str, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, label, index))
}

/// Uniform draw in `[0, 1)` from the top 53 bits of one `u64`.
pub fn unit_open(rng: &mut impl RngCore) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Standard normal draws via Marsaglia's polar method.
///
/// Consumption order is fixed: pairs of uniforms are drawn until one lands in
/// the open unit disk, producing two normals; the second is cached and
/// returned by the next call.
pub struct GaussianSource<R: RngCore> {
    rng: R,
    spare: Option<f64>,
}

impl<R: RngCore> GaussianSource<R> {
    pub fn new(rng: R) -> Self {
        GaussianSource { rng, spare: None }
    }

    pub fn next_normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        loop {
            let u = 2.0 * unit_open(&mut self.rng) - 1.0;
            let v = 2.0 * unit_open(&mut self.rng) - 1.0;
            let s = u * u + v * v;
            if s > 0.0 && s < 1.0 {
                let k = (-2.0 * s.ln() / s).sqrt();
                self.spare = Some(v * k);
                return u * k;
            }
        }
    }

    /// Uniform point on the unit sphere in `R^p`.
    pub fn sphere_point(&mut self, p: usize) -> Vec<f64> {
        loop {
            let mut x: Vec<f64> = (0..p).map(|_| self.next_normal()).collect();
            if crate::linalg::normalize(&mut x) > 0.0 {
                return x;
            }
        }
    }
}
