//! Deterministic randomness.
//!
//! One `RngHandle` owns one ChaCha8 stream. Identical seeds reproduce
//! identical draw sequences on every platform: the uniform and Gaussian
//! transforms below are pinned here (53-bit uniforms, Box-Muller through
//! `libm`) rather than delegated to a distributions crate, so the values
//! never shift under a dependency upgrade.
//!
//! Handles are single-owner. Parallel work must derive independent child
//! streams with [`RngHandle::child`]; children are stateless functions of
//! `(seed, index)`, so a work item's stream does not depend on scheduling.

use alloc::vec::Vec;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::error::{Error, Result};
use crate::math;
use crate::vector::Vec64;

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 finalizer, used to derive child seeds.
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A seeded, splittable, platform-stable random stream.
#[derive(Debug, Clone)]
pub struct RngHandle {
    seed: u64,
    rng: ChaCha8Rng,
    spare_normal: Option<f64>,
}

impl RngHandle {
    pub fn new(seed: u64) -> Self {
        RngHandle {
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
            spare_normal: None,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent child stream `index`. Derivation is stateless, so
    /// children may be created in any order (or concurrently) without
    /// affecting each other or the parent.
    pub fn child(&self, index: u64) -> RngHandle {
        RngHandle::new(mix64(
            self.seed ^ GOLDEN.wrapping_mul(index.wrapping_add(1)),
        ))
    }

    /// Uniform draw in `[0, 1)` with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `[0, n)`. Uses rejection from a widening
    /// multiply, so the distribution is exact.
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0, "below(0)");
        let n = n as u64;
        // Lemire's method with rejection.
        loop {
            let x = self.rng.next_u64();
            let m = (x as u128).wrapping_mul(n as u128);
            let low = m as u64;
            if low >= n.wrapping_neg() % n {
                return (m >> 64) as usize;
            }
        }
    }

    /// One standard normal draw (Box-Muller; the spare is cached).
    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        // u1 in (0, 1] keeps the log argument positive.
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let radius = math::sqrt(-2.0 * math::ln(u1));
        let angle = core::f64::consts::TAU * u2;
        self.spare_normal = Some(radius * math::sin(angle));
        radius * math::cos(angle)
    }

    /// `dim` i.i.d. standard normal draws.
    pub fn gaussian_vector(&mut self, dim: usize) -> Result<Vec64> {
        if dim == 0 {
            return Err(Error::invalid("gaussian_vector requires dim >= 1"));
        }
        let data: Vec<f64> = (0..dim).map(|_| self.normal()).collect();
        Ok(Vec64::from_vec_unchecked(data))
    }

    /// `count` distinct indices sampled uniformly from `[0, n)` without
    /// replacement, returned sorted ascending. Partial Fisher-Yates, so the
    /// result is a deterministic function of the stream.
    pub fn sample_indices(&mut self, n: usize, count: usize) -> Result<Vec<usize>> {
        if count > n {
            return Err(Error::invalid("cannot sample more indices than exist"));
        }
        let mut pool: Vec<usize> = (0..n).collect();
        for i in 0..count {
            let j = i + self.below(n - i);
            pool.swap(i, j);
        }
        pool.truncate(count);
        pool.sort_unstable();
        Ok(pool)
    }
}
