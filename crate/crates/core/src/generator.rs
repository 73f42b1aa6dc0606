//! Deterministic k-step DDIM generation with an analytic Gaussian-mixture
//! score, plus exact reverse-mode (VJP) and forward-mode (JVP) derivatives
//! of the generator map.
//!
//! Diffusing the mixture `Σ_j w_j N(μ_j, τ_j² I)` to time `t` gives the
//! marginal `p_t(x) = Σ_j w_j N(x; √ᾱ_t μ_j, v_{j,t} I)` with
//! `v_{j,t} = ᾱ_t τ_j² + 1 - ᾱ_t`, so the score and its Jacobian are exact
//! and no denoiser training is involved anywhere.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;
use crate::mixture::GaussianMixturePrior;
use crate::rng::RngHandle;
use crate::schedule::NoiseSchedule;
use crate::vector::Vec64;

/// A deterministic generator `G: R^n -> R^n` given by `k` DDIM steps.
#[derive(Debug, Clone)]
pub struct DdimGenerator {
    schedule: NoiseSchedule,
    prior: GaussianMixturePrior,
}

/// Responsibilities and per-component pull directions at one noise level.
struct ScoreTerms {
    /// Softmax responsibilities `r_j(x)`.
    resp: Vec<f64>,
    /// `g_j = (√ᾱ_t μ_j - x) / v_{j,t}`.
    pulls: Vec<Vec64>,
    /// `Σ_j r_j g_j`, the score itself.
    score: Vec64,
    /// `Σ_j r_j / v_{j,t}`.
    mean_inv_var: f64,
}

impl DdimGenerator {
    pub fn new(schedule: NoiseSchedule, data_prior: GaussianMixturePrior) -> Self {
        DdimGenerator {
            schedule,
            prior: data_prior,
        }
    }

    pub fn dim(&self) -> usize {
        self.prior.dim()
    }

    pub fn k(&self) -> usize {
        self.schedule.k()
    }

    pub fn schedule(&self) -> &NoiseSchedule {
        &self.schedule
    }

    pub fn data_prior(&self) -> &GaussianMixturePrior {
        &self.prior
    }

    fn score_terms(&self, x: &Vec64, t: usize) -> ScoreTerms {
        let ab = self.schedule.alpha_bar(t);
        let sqrt_ab = math::sqrt(ab);
        let n = self.dim() as f64;
        let m = self.prior.components();

        let mut log_resp = Vec::with_capacity(m);
        let mut pulls = Vec::with_capacity(m);
        for j in 0..m {
            let v = ab * self.prior.variance(j) + 1.0 - ab;
            let diff = self.prior.mean(j).scaled(sqrt_ab).sub(x);
            log_resp.push(
                self.prior.log_weights()[j] - 0.5 * n * math::ln(v) - diff.dot(&diff) / (2.0 * v),
            );
            pulls.push(diff.scaled(1.0 / v));
        }
        let norm = math::logsumexp(&log_resp);
        let resp: Vec<f64> = log_resp.iter().map(|lr| math::exp(lr - norm)).collect();

        let mut score = Vec64::zeros(x.len());
        let mut mean_inv_var = 0.0;
        for j in 0..m {
            score = score.add_scaled(resp[j], &pulls[j]);
            let v = ab * self.prior.variance(j) + 1.0 - ab;
            mean_inv_var += resp[j] / v;
        }
        ScoreTerms {
            resp,
            pulls,
            score,
            mean_inv_var,
        }
    }

    /// `∇_x log p_t(x)` for the diffused mixture.
    pub fn analytic_score(&self, x: &Vec64, t: usize) -> Result<Vec64> {
        if !self.schedule.contains(t) {
            return Err(Error::invalid("timestep outside schedule"));
        }
        if x.len() != self.dim() {
            return Err(Error::dims(self.dim(), x.len()));
        }
        Ok(self.score_terms(x, t).score)
    }

    /// Tweedie posterior-mean denoising `x̂₀ = (x + (1-ᾱ_t) s(x, t)) / √ᾱ_t`.
    pub fn tweedie_denoise(&self, x: &Vec64, t: usize) -> Result<Vec64> {
        let ab = self.schedule.alpha_bar(t);
        let s = self.analytic_score(x, t)?;
        Ok(x.add_scaled(1.0 - ab, &s).scaled(1.0 / math::sqrt(ab)))
    }

    fn ddim_step(&self, x: &Vec64, t: usize, t_next: usize, terms: &ScoreTerms) -> Vec64 {
        let ab = self.schedule.alpha_bar(t);
        let ab_next = self.schedule.alpha_bar(t_next);
        let x0 = x
            .add_scaled(1.0 - ab, &terms.score)
            .scaled(1.0 / math::sqrt(ab));
        let eps = x
            .add_scaled(-math::sqrt(ab), &x0)
            .scaled(1.0 / math::sqrt(1.0 - ab));
        x0.scaled(math::sqrt(ab_next))
            .add_scaled(math::sqrt(1.0 - ab_next), &eps)
    }

    /// Runs the deterministic (η = 0) sampler from `z`.
    pub fn generate(&self, z: &Vec64) -> Result<Vec64> {
        Ok(self.pullback(z)?.0)
    }

    /// Forward pass that also records the per-step states needed to apply
    /// the exact Jacobian in either direction.
    pub fn pullback(&self, z: &Vec64) -> Result<(Vec64, GeneratorTape<'_>)> {
        if z.len() != self.dim() {
            return Err(Error::dims(self.dim(), z.len()));
        }
        let steps = self.schedule.timesteps();
        let mut states = Vec::with_capacity(steps.len());
        let mut x = z.clone();
        for (i, &t) in steps.iter().enumerate() {
            let t_next = if i + 1 < steps.len() { steps[i + 1] } else { 0 };
            let terms = self.score_terms(&x, t);
            let next = self.ddim_step(&x, t, t_next, &terms);
            states.push(StepState {
                x,
                t,
                t_next,
                terms,
            });
            x = next;
        }
        Ok((
            x,
            GeneratorTape {
                generator: self,
                states,
            },
        ))
    }

    /// `(∂G/∂z)ᵀ · cotangent` at `z`.
    pub fn generate_vjp(&self, z: &Vec64, cotangent: &Vec64) -> Result<Vec64> {
        let (_, tape) = self.pullback(z)?;
        tape.vjp(cotangent)
    }

    /// `(∂G/∂z) · tangent` at `z` (forward mode).
    pub fn generate_jvp(&self, z: &Vec64, tangent: &Vec64) -> Result<Vec64> {
        let (_, tape) = self.pullback(z)?;
        tape.jvp(tangent)
    }

    /// `G` applied to `count` i.i.d. standard Gaussian latents.
    pub fn sample_prior(&self, rng: &mut RngHandle, count: usize) -> Result<Vec<Vec64>> {
        if count == 0 {
            return Err(Error::invalid("sample count must be >= 1"));
        }
        let mut out = Vec::with_capacity(count);
        for _ in 0..count {
            let z = rng.gaussian_vector(self.dim())?;
            out.push(self.generate(&z)?);
        }
        Ok(out)
    }
}

/// `H u` for the Hessian of `log p_t` at the point the terms were built:
/// `H = -(Σ_j r_j/v_j) I + Σ_j r_j g_j g_jᵀ - s sᵀ` (symmetric).
fn hessian_apply(terms: &ScoreTerms, u: &Vec64) -> Vec64 {
    let mut out = u.scaled(-terms.mean_inv_var);
    for (rj, gj) in terms.resp.iter().zip(&terms.pulls) {
        out = out.add_scaled(rj * gj.dot(u), gj);
    }
    out.add_scaled(-terms.score.dot(u), &terms.score)
}

/// Score terms and Tweedie denoising at one `(x, t)` point, exposing the
/// exact denoiser Jacobian for measurement-guided sampling.
pub struct DenoisePoint<'a> {
    generator: &'a DdimGenerator,
    x: Vec64,
    t: usize,
    terms: ScoreTerms,
}

impl DdimGenerator {
    pub fn denoise_point(&self, x: &Vec64, t: usize) -> Result<DenoisePoint<'_>> {
        if !self.schedule.contains(t) {
            return Err(Error::invalid("timestep outside schedule"));
        }
        if x.len() != self.dim() {
            return Err(Error::dims(self.dim(), x.len()));
        }
        let terms = self.score_terms(x, t);
        Ok(DenoisePoint {
            generator: self,
            x: x.clone(),
            t,
            terms,
        })
    }
}

impl DenoisePoint<'_> {
    /// The Tweedie estimate `x̂₀`.
    pub fn x0(&self) -> Vec64 {
        let ab = self.generator.schedule.alpha_bar(self.t);
        self.x
            .add_scaled(1.0 - ab, &self.terms.score)
            .scaled(1.0 / math::sqrt(ab))
    }

    /// Deterministic DDIM transition to `t_next` (0 lands on `x̂₀`).
    pub fn ddim_next(&self, t_next: usize) -> Vec64 {
        self.generator.ddim_step(&self.x, self.t, t_next, &self.terms)
    }

    /// `J_{x̂₀}ᵀ u = J_{x̂₀} u = (u + (1-ᾱ_t) H u) / √ᾱ_t` (symmetric).
    pub fn denoiser_jacobian_apply(&self, u: &Vec64) -> Vec64 {
        let ab = self.generator.schedule.alpha_bar(self.t);
        let hu = hessian_apply(&self.terms, u);
        u.add_scaled(1.0 - ab, &hu).scaled(1.0 / math::sqrt(ab))
    }
}

struct StepState {
    x: Vec64,
    t: usize,
    t_next: usize,
    terms: ScoreTerms,
}

/// Stored forward states of one `generate` call. `k` is small, so the tape
/// holds every intermediate iterate.
pub struct GeneratorTape<'a> {
    generator: &'a DdimGenerator,
    states: Vec<StepState>,
}

impl GeneratorTape<'_> {
    /// One-step Jacobian (symmetric): `a · J_{x̂₀} + b · I` with
    /// `J_{x̂₀} = (I + (1-ᾱ_t) H) / √ᾱ_t`.
    fn step_jacobian_apply(&self, state: &StepState, u: &Vec64) -> Vec64 {
        let sched = self.generator.schedule();
        let ab = sched.alpha_bar(state.t);
        let ab_next = sched.alpha_bar(state.t_next);
        let noise_ratio = math::sqrt((1.0 - ab_next) / (1.0 - ab));
        let a = math::sqrt(ab_next) - noise_ratio * math::sqrt(ab);
        let b = noise_ratio;

        let hu = hessian_apply(&state.terms, u);
        let x0_dir = u.add_scaled(1.0 - ab, &hu).scaled(1.0 / math::sqrt(ab));
        x0_dir.scaled(a).add_scaled(b, u)
    }

    /// Reverse-mode pullback through the recorded steps.
    pub fn vjp(&self, cotangent: &Vec64) -> Result<Vec64> {
        if cotangent.len() != self.generator.dim() {
            return Err(Error::dims(self.generator.dim(), cotangent.len()));
        }
        let mut u = cotangent.clone();
        for state in self.states.iter().rev() {
            u = self.step_jacobian_apply(state, &u);
        }
        Ok(u)
    }

    /// Forward-mode push-forward through the recorded steps.
    pub fn jvp(&self, tangent: &Vec64) -> Result<Vec64> {
        if tangent.len() != self.generator.dim() {
            return Err(Error::dims(self.generator.dim(), tangent.len()));
        }
        let mut v = tangent.clone();
        for state in self.states.iter() {
            v = self.step_jacobian_apply(state, &v);
        }
        Ok(v)
    }
}
