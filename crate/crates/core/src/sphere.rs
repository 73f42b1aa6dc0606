//! Sphere-constrained Adam and holdout-based early stopping.
//!
//! The optimizer keeps the latent on the sphere `|z| = r`: the Euclidean
//! gradient is projected to the tangent space, Adam's moments run on that
//! tangent gradient, the preconditioned direction is projected again, and
//! the step is retracted back to the sphere.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;
use crate::rng::RngHandle;
use crate::vector::Vec64;

/// How a step off the sphere returns to it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Retraction {
    /// Rescale the candidate to norm `r` (the default).
    Normalize,
    /// Move along the great circle in the step direction.
    ExpMap,
}

/// Sphere radius policy for a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RadiusRule {
    /// `r = √d`, the typical shell of `N(0, I_d)`.
    SqrtDim,
    /// `r = |z₀|` at initialization.
    InitNorm,
    Fixed(f64),
}

#[derive(Debug, Clone)]
pub struct AdamSphereConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub retraction: Retraction,
    pub radius: RadiusRule,
}

impl Default for AdamSphereConfig {
    fn default() -> Self {
        AdamSphereConfig {
            learning_rate: 0.02,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            retraction: Retraction::Normalize,
            radius: RadiusRule::SqrtDim,
        }
    }
}

impl AdamSphereConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::invalid("learning rate must be positive"));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::InvalidArgument(alloc::format!(
                    "{name} must be in [0, 1)"
                )));
            }
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::invalid("epsilon must be positive"));
        }
        if let RadiusRule::Fixed(r) = self.radius {
            if !(r > 0.0) {
                return Err(Error::invalid("radius must be positive"));
            }
        }
        Ok(())
    }
}

/// Projects `g` onto the tangent space of the sphere of radius `r` at `z`:
/// `g - (<g, z>/r²) z`.
pub fn tangent_project(z: &Vec64, g: &Vec64, r: f64) -> Result<Vec64> {
    if !(r > 0.0) {
        return Err(Error::invalid("sphere radius must be positive"));
    }
    if z.len() != g.len() {
        return Err(Error::dims(z.len(), g.len()));
    }
    Ok(g.add_scaled(-g.dot(z) / (r * r), z))
}

/// Optimizer state for one latent run. `z` stays on the sphere after every
/// step (`||z| - r| <= 1e-9 r`).
#[derive(Debug, Clone)]
pub struct SphereRunState {
    pub z: Vec64,
    first_moment: Vec64,
    second_moment: Vec64,
    step: usize,
    radius: f64,
    /// Times the zero-candidate retry halved the step (measure-zero event).
    pub retry_halvings: usize,
    pub loss_history: Vec<f64>,
}

impl SphereRunState {
    /// Retracts `z0` onto the sphere chosen by the radius rule.
    pub fn init(z0: &Vec64, rule: RadiusRule) -> Result<Self> {
        let norm = z0.norm();
        if !(norm > 0.0) {
            return Err(Error::invalid("initial latent must be nonzero"));
        }
        let radius = match rule {
            RadiusRule::SqrtDim => math::sqrt(z0.len() as f64),
            RadiusRule::InitNorm => norm,
            RadiusRule::Fixed(r) => {
                if !(r > 0.0) {
                    return Err(Error::invalid("radius must be positive"));
                }
                r
            }
        };
        Ok(SphereRunState {
            z: z0.scaled(radius / norm),
            first_moment: Vec64::zeros(z0.len()),
            second_moment: Vec64::zeros(z0.len()),
            step: 0,
            radius,
            retry_halvings: 0,
            loss_history: Vec::new(),
        })
    }

    pub fn step_count(&self) -> usize {
        self.step
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }
}

/// One AdamSphere update with the Euclidean gradient of the loss at `z`.
pub fn adam_sphere_step(
    state: &mut SphereRunState,
    config: &AdamSphereConfig,
    gradient: &Vec64,
) -> Result<()> {
    config.validate()?;
    if gradient.len() != state.z.len() {
        return Err(Error::dims(state.z.len(), gradient.len()));
    }
    let r = state.radius;
    let tangent_grad = tangent_project(&state.z, gradient, r)?;

    state.step += 1;
    let t = state.step as i32;
    let b1 = config.beta1;
    let b2 = config.beta2;
    state.first_moment = state.first_moment.scaled(b1).add_scaled(1.0 - b1, &tangent_grad);
    let g2 = Vec64::from_vec_unchecked(tangent_grad.iter().map(|g| g * g).collect());
    state.second_moment = state.second_moment.scaled(b2).add_scaled(1.0 - b2, &g2);

    let bias1 = 1.0 - libm::pow(b1, t as f64);
    let bias2 = 1.0 - libm::pow(b2, t as f64);
    let direction: Vec<f64> = state
        .first_moment
        .iter()
        .zip(state.second_moment.iter())
        .map(|(m, v)| (m / bias1) / (math::sqrt(v / bias2) + config.epsilon))
        .collect();
    let direction = tangent_project(&state.z, &Vec64::from_vec_unchecked(direction), r)?;

    let mut eta = config.learning_rate;
    loop {
        let next = match config.retraction {
            Retraction::Normalize => {
                let candidate = state.z.add_scaled(-eta, &direction);
                let norm = candidate.norm();
                if norm == 0.0 {
                    state.retry_halvings += 1;
                    eta *= 0.5;
                    continue;
                }
                candidate.scaled(r / norm)
            }
            Retraction::ExpMap => {
                let dn = direction.norm();
                if dn == 0.0 {
                    state.z.clone()
                } else {
                    let theta = eta * dn / r;
                    // Descent along the great circle toward -direction.
                    state
                        .z
                        .scaled(math::cos(theta))
                        .add_scaled(-r * math::sin(theta) / dn, &direction)
                }
            }
        };
        state.z = next;
        return Ok(());
    }
}

/// Fraction of observed scalars held out, top-K size, and the split seed.
#[derive(Debug, Clone)]
pub struct HoldoutConfig {
    pub fraction: f64,
    pub k: usize,
    pub split_seed: u64,
}

impl Default for HoldoutConfig {
    fn default() -> Self {
        HoldoutConfig {
            fraction: 0.1,
            k: 5,
            split_seed: 0,
        }
    }
}

impl HoldoutConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.fraction > 0.0 && self.fraction <= 0.5) {
            return Err(Error::invalid("holdout fraction must be in (0, 0.5]"));
        }
        if self.k == 0 {
            return Err(Error::invalid("top-K size must be >= 1"));
        }
        Ok(())
    }

    /// Deterministic split driven by the config's own seed.
    pub fn split(&self, omega: &[usize]) -> Result<(Vec<usize>, Vec<usize>)> {
        let mut rng = RngHandle::new(self.split_seed);
        holdout_split(omega, self.fraction, &mut rng)
    }
}

/// Splits `omega` into disjoint, exhaustive fit and holdout subsets with
/// `|holdout| = round(fraction * |omega|)`.
pub fn holdout_split(
    omega: &[usize],
    fraction: f64,
    rng: &mut RngHandle,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if omega.len() < 2 {
        return Err(Error::invalid("holdout split needs at least two indices"));
    }
    if !(fraction > 0.0 && fraction <= 0.5) {
        return Err(Error::invalid("holdout fraction must be in (0, 0.5]"));
    }
    let ho_count = math::round(fraction * omega.len() as f64) as usize;
    if ho_count == 0 {
        return Err(Error::invalid("holdout fraction yields an empty holdout"));
    }
    let picks = rng.sample_indices(omega.len(), ho_count)?;
    let mut is_ho = alloc::vec![false; omega.len()];
    for &p in &picks {
        is_ho[p] = true;
    }
    let mut fit = Vec::with_capacity(omega.len() - ho_count);
    let mut ho = Vec::with_capacity(ho_count);
    for (slot, &idx) in omega.iter().enumerate() {
        if is_ho[slot] {
            ho.push(idx);
        } else {
            fit.push(idx);
        }
    }
    Ok((fit, ho))
}

/// One checkpoint kept by the top-K buffer.
#[derive(Debug, Clone)]
pub struct TopKEntry {
    pub score: f64,
    pub step: usize,
    pub z: Vec64,
}

/// Keeps the `K` lowest-holdout-score iterates seen so far, sorted by
/// score. On a full buffer an insert happens only on strict improvement
/// over the current worst, so ties keep the earlier entry.
#[derive(Debug, Clone)]
pub struct TopKBuffer {
    k: usize,
    entries: Vec<TopKEntry>,
}

impl TopKBuffer {
    pub fn new(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("top-K size must be >= 1"));
        }
        Ok(TopKBuffer {
            k,
            entries: Vec::with_capacity(k),
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[TopKEntry] {
        &self.entries
    }

    pub fn update(&mut self, score: f64, step: usize, z: &Vec64) {
        if self.entries.len() == self.k {
            let worst = self.entries.last().expect("non-empty").score;
            if !(score < worst) {
                return;
            }
            self.entries.pop();
        }
        // Insert after any equal scores so earlier entries keep precedence.
        let pos = self
            .entries
            .iter()
            .position(|e| e.score > score)
            .unwrap_or(self.entries.len());
        self.entries.insert(
            pos,
            TopKEntry {
                score,
                step,
                z: z.clone(),
            },
        );
    }

    /// The latest iterate among the kept top-K.
    pub fn select(&self) -> Result<&TopKEntry> {
        self.entries
            .iter()
            .max_by_key(|e| e.step)
            .ok_or_else(|| Error::InvalidState("select on an empty top-K buffer".into()))
    }

    pub fn best_score(&self) -> Option<f64> {
        self.entries.first().map(|e| e.score)
    }
}
