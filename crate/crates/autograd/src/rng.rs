//! Seeded random number helpers.
//!
//! All randomness in the workspace flows through explicitly seeded ChaCha8
//! streams so runs are reproducible bit for bit on any platform.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};

use crate::scalar::Scalar;

pub type SeededRng = ChaCha8Rng;

pub fn seeded(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derives an independent stream for a named component from a base seed.
pub fn derive(seed: u64, stream: u64) -> SeededRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn normal_vec<T: Scalar>(rng: &mut impl Rng, n: usize, mean: f64, std: f64) -> Vec<T> {
    let dist = Normal::new(mean, std).expect("normal_vec: std must be finite and non-negative");
    (0..n).map(|_| T::lit(dist.sample(rng))).collect()
}

pub fn uniform_vec<T: Scalar>(rng: &mut impl Rng, n: usize, lo: f64, hi: f64) -> Vec<T> {
    let dist = Uniform::new(lo, hi);
    (0..n).map(|_| T::lit(dist.sample(rng))).collect()
}
