//! Diffusion noise schedules.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;

/// Default training horizon.
pub const DEFAULT_TRAIN_STEPS: usize = 1000;
const BETA_START: f64 = 1e-4;
const BETA_END: f64 = 2e-2;

/// Cumulative signal levels `ᾱ_t` for `t = 0..=T` (with `ᾱ_0 = 1`), plus
/// the strictly decreasing inference subsequence `t_1 > ... > t_k`.
#[derive(Debug, Clone)]
pub struct NoiseSchedule {
    alpha_bar: Vec<f64>,
    timesteps: Vec<usize>,
}

impl NoiseSchedule {
    /// Linear-beta schedule (`β` from 1e-4 to 2e-2 over `T` training steps)
    /// with `k` inference steps at evenly spaced quantiles of `[1, T]`.
    pub fn linear(train_steps: usize, k: usize) -> Result<Self> {
        if train_steps < 2 {
            return Err(Error::invalid("linear schedule needs T >= 2"));
        }
        let mut alpha_bar = Vec::with_capacity(train_steps + 1);
        alpha_bar.push(1.0);
        let mut acc = 1.0;
        for t in 1..=train_steps {
            let beta =
                BETA_START + (t - 1) as f64 / (train_steps - 1) as f64 * (BETA_END - BETA_START);
            acc *= 1.0 - beta;
            alpha_bar.push(acc);
        }
        Self::from_alpha_bar(alpha_bar, k)
    }

    /// Schedule from explicit `ᾱ` values (`alpha_bar[0]` must be 1 and the
    /// sequence strictly decreasing in `(0, 1]`).
    pub fn from_alpha_bar(alpha_bar: Vec<f64>, k: usize) -> Result<Self> {
        let train_steps = alpha_bar.len().saturating_sub(1);
        if train_steps == 0 {
            return Err(Error::invalid("schedule needs at least one step"));
        }
        if alpha_bar[0] != 1.0 {
            return Err(Error::invalid("alpha_bar[0] must be 1"));
        }
        for w in alpha_bar.windows(2) {
            if !(w[1] > 0.0 && w[1] < w[0]) {
                return Err(Error::invalid("alpha_bar must strictly decrease in (0, 1]"));
            }
        }
        if k == 0 || k > train_steps {
            return Err(Error::invalid("inference steps must satisfy 1 <= k <= T"));
        }
        // Evenly spaced quantiles of [1, T], descending: T, T(k-1)/k, ...
        let mut timesteps = Vec::with_capacity(k);
        for i in 0..k {
            let q = (k - i) as f64 / k as f64;
            let t = math::round(q * train_steps as f64) as usize;
            timesteps.push(t.max(1));
        }
        debug_assert!(timesteps.windows(2).all(|w| w[0] > w[1]), "{timesteps:?}");
        Ok(NoiseSchedule {
            alpha_bar,
            timesteps,
        })
    }

    pub fn train_steps(&self) -> usize {
        self.alpha_bar.len() - 1
    }

    pub fn k(&self) -> usize {
        self.timesteps.len()
    }

    pub fn timesteps(&self) -> &[usize] {
        &self.timesteps
    }

    pub fn alpha_bar(&self, t: usize) -> f64 {
        self.alpha_bar[t]
    }

    pub fn contains(&self, t: usize) -> bool {
        t <= self.train_steps()
    }
}
