//! Validation of the δ₀-identifiability assumption: dataset gap statistics
//! (the random-inpainting procedure), Monte-Carlo verification of the
//! random-inpainting identifiability bound, and box-inpainting gap sweeps.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::forward::{GridShape, LinearOperator, Observation};
use crate::grid::SyntheticDataset;
use crate::math;
use crate::mixture::GaussianMixturePrior;
use crate::posterior::{component_scores, per_dim_gap};
use crate::rng::RngHandle;
use crate::vector::Vec64;

/// Gap statistics over a dataset under fresh random inpainting masks.
#[derive(Debug, Clone)]
pub struct GapStats {
    /// Per-image score gaps `δ_i` (dimensionless, Eq.-style normalization
    /// by `2(σ² + τ²)` and the observed dimension).
    pub gaps: Vec<f64>,
    /// Per-image unnormalized per-dimension MSE gaps
    /// (`2(σ² + τ²) · δ_i`), the raw observed-pixel MSE difference.
    pub mse_gaps: Vec<f64>,
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub mse_mean: f64,
    pub mse_std: f64,
    pub mse_min: f64,
    pub keep_fraction: f64,
    pub dataset: String,
    /// How often the source image itself won.
    pub self_winner_count: usize,
    /// Images whose best and runner-up scores tied.
    pub degenerate_count: usize,
}

fn mean_std_min(xs: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    let min = xs.iter().copied().fold(f64::INFINITY, f64::min);
    (mean, math::sqrt(var), min)
}

/// The random-inpainting gap procedure: for each image, draw a fresh mask,
/// observe that image with noise, score every dataset image as a candidate
/// mean, and record the per-dimension gap between best and runner-up.
pub fn dataset_gap_stats(
    dataset: &SyntheticDataset,
    keep_fraction: f64,
    sigma: f64,
    tau: f64,
    rng: &mut RngHandle,
) -> Result<GapStats> {
    if dataset.len() < 2 {
        return Err(Error::invalid(
            "gap statistics need at least two images (no runner-up otherwise)",
        ));
    }
    let first = &dataset.items()[0];
    let shape = GridShape::new(first.height(), first.width(), first.channels())?;
    let tau2 = tau * tau;

    let candidates: Vec<Vec64> = dataset
        .items()
        .iter()
        .map(|g| g.pixels().clone())
        .collect();
    let prior = GaussianMixturePrior::homogeneous(
        alloc::vec![1.0 / candidates.len() as f64; candidates.len()],
        candidates.clone(),
        tau2.max(f64::MIN_POSITIVE),
    )?;

    let mut gaps = Vec::with_capacity(dataset.len());
    let mut mse_gaps = Vec::with_capacity(dataset.len());
    let mut self_winner_count = 0usize;
    let mut degenerate_count = 0usize;

    for (i, image) in candidates.iter().enumerate() {
        // One fresh mask per observation, shared across all candidates.
        let op = LinearOperator::random_mask(shape, keep_fraction, rng)?;
        let obs = op.observe(image, sigma, rng)?;
        let scores = component_scores(&prior, &obs)?;
        let gap = per_dim_gap(&scores.residual_scores, op.m());
        if gap.winner == i {
            self_winner_count += 1;
        }
        if !gap.identifiable {
            degenerate_count += 1;
        }
        gaps.push(gap.delta);
        mse_gaps.push(gap.delta * 2.0 * (sigma * sigma + tau2));
    }

    let (mean, std, min) = mean_std_min(&gaps);
    let (mse_mean, mse_std, mse_min) = mean_std_min(&mse_gaps);
    Ok(GapStats {
        gaps,
        mse_gaps,
        mean,
        std,
        min,
        mse_mean,
        mse_std,
        mse_min,
        keep_fraction,
        dataset: dataset.label().into(),
        self_winner_count,
        degenerate_count,
    })
}

/// Monte-Carlo check of the random-inpainting identifiability bound.
#[derive(Debug, Clone)]
pub struct HoeffdingCheck {
    /// Full-dimension separation `Δ = min_j (1/n)|μ_j - μ_{j*}|²`.
    pub separation: f64,
    pub measurement_dim: usize,
    pub components: usize,
    /// Identifiability threshold `Δ / (8(σ² + τ²))`.
    pub threshold: f64,
    /// `2(M-1)[exp(-mΔ²/32) + exp(-mΔ²/(32(σ²+τ²)))]`.
    pub predicted_bound: f64,
    pub trials: usize,
    pub empirical_failures: usize,
    pub empirical_frequency: f64,
    /// Binomial standard error of the empirical frequency.
    pub standard_error: f64,
    /// `freq <= min(bound, 1) + 3 SE`.
    pub passed: bool,
    /// Sub-check on the subsampled separation `d̂_j`: deviations
    /// `|d̂_j - d_j| >= Δ/2` vs the Hoeffding bound `2(M-1)exp(-mΔ²/32)`.
    pub dhat_deviations: usize,
    pub dhat_frequency: f64,
    pub dhat_bound: f64,
    pub dhat_passed: bool,
}

/// Runs `trials` independent draws of (mask, signal noise, measurement
/// noise) from the component-`j_star` model and counts how often the
/// per-dimension gap falls below the identifiability threshold.
///
/// The mask is a uniform subset of `m` scalar coordinates out of `n`,
/// sampled without replacement, which is the regime the Hoeffding bound
/// addresses.
pub fn hoeffding_validate(
    means: &[Vec64],
    j_star: usize,
    m: usize,
    sigma: f64,
    tau: f64,
    trials: usize,
    rng: &mut RngHandle,
) -> Result<HoeffdingCheck> {
    if means.len() < 2 {
        return Err(Error::invalid("need at least two candidate means"));
    }
    if j_star >= means.len() {
        return Err(Error::invalid("j_star out of range"));
    }
    let n = means[0].len();
    if means.iter().any(|mu| mu.len() != n) {
        return Err(Error::invalid("means must share one dimension"));
    }
    if m == 0 || m > n {
        return Err(Error::invalid("need 1 <= m <= n"));
    }
    if trials == 0 {
        return Err(Error::invalid("need at least one trial"));
    }
    for mu in means {
        if mu.iter().any(|v| v.abs() > 1.0) {
            return Err(Error::invalid("mean entries must satisfy |mu| <= 1"));
        }
    }

    let noise_var = sigma * sigma + tau * tau;
    let mut separation = f64::INFINITY;
    let mut pop_seps = Vec::with_capacity(means.len());
    for (j, mu) in means.iter().enumerate() {
        let d = mu.squared_distance(&means[j_star]) / n as f64;
        pop_seps.push(d);
        if j != j_star {
            separation = separation.min(d);
        }
    }
    let threshold = separation / (8.0 * noise_var);
    let m_f = m as f64;
    let others = (means.len() - 1) as f64;
    let hoeffding_term = math::exp(-m_f * separation * separation / 32.0);
    let gaussian_term = math::exp(-m_f * separation * separation / (32.0 * noise_var));
    let predicted_bound = 2.0 * others * (hoeffding_term + gaussian_term);
    let dhat_bound = 2.0 * others * hoeffding_term;

    let mut failures = 0usize;
    let mut dhat_deviations = 0usize;
    for trial in 0..trials {
        let mut child = rng.child(trial as u64);
        let omega = child.sample_indices(n, m)?;

        // y = P_Ω μ_{j*} + P_Ω ξ + ε on the observed coordinates.
        let mut y = alloc::vec![0.0; m];
        for (slot, &i) in omega.iter().enumerate() {
            y[slot] = means[j_star][i] + tau * child.normal();
        }
        for v in &mut y {
            *v += sigma * child.normal();
        }

        let mut min_gap = f64::INFINITY;
        let mut dhat_violation = false;
        let s_star: f64 = omega
            .iter()
            .enumerate()
            .map(|(slot, &i)| {
                let d = y[slot] - means[j_star][i];
                d * d
            })
            .sum();
        for (j, mu) in means.iter().enumerate() {
            if j == j_star {
                continue;
            }
            let mut s_j = 0.0;
            let mut subsampled = 0.0;
            for (slot, &i) in omega.iter().enumerate() {
                let d = y[slot] - mu[i];
                s_j += d * d;
                let md = means[j_star][i] - mu[i];
                subsampled += md * md;
            }
            let gap = (s_j - s_star) / (2.0 * noise_var * m_f);
            min_gap = min_gap.min(gap);
            if math::abs(subsampled / m_f - pop_seps[j]) >= separation / 2.0 {
                dhat_violation = true;
            }
        }
        if min_gap < threshold {
            failures += 1;
        }
        if dhat_violation {
            dhat_deviations += 1;
        }
    }

    let freq = failures as f64 / trials as f64;
    let se = math::sqrt(freq * (1.0 - freq) / trials as f64);
    let dhat_frequency = dhat_deviations as f64 / trials as f64;
    let dhat_se = math::sqrt(dhat_frequency * (1.0 - dhat_frequency) / trials as f64);
    Ok(HoeffdingCheck {
        separation,
        measurement_dim: m,
        components: means.len(),
        threshold,
        predicted_bound,
        trials,
        empirical_failures: failures,
        empirical_frequency: freq,
        standard_error: se,
        passed: freq <= predicted_bound.min(1.0) + 3.0 * se,
        dhat_deviations,
        dhat_frequency,
        dhat_bound,
        dhat_passed: dhat_frequency <= dhat_bound.min(1.0) + 3.0 * dhat_se,
    })
}

/// One row of a box-inpainting gap sweep.
#[derive(Debug, Clone, Copy)]
pub struct BoxGapRow {
    pub box_fraction: f64,
    pub mean_delta: f64,
    pub observed_dim: usize,
}

/// Sweeps box-mask fractions over a world, measuring the mean selection
/// gap `δ(y)` across fresh draws from the world per fraction. A fraction
/// of 0 means no box (every pixel observed). On worlds whose means agree
/// outside a box, gaps collapse to zero once the mask covers it.
pub fn box_gap_sweep(
    world: &GaussianMixturePrior,
    shape: GridShape,
    box_fractions: &[f64],
    sigma: f64,
    draws_per_fraction: usize,
    rng: &mut RngHandle,
) -> Result<Vec<BoxGapRow>> {
    if world.dim() != shape.scalars() {
        return Err(Error::dims(shape.scalars(), world.dim()));
    }
    if draws_per_fraction == 0 {
        return Err(Error::invalid("need at least one draw per fraction"));
    }
    if box_fractions.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("fractions must be strictly increasing"));
    }
    let mut rows = Vec::with_capacity(box_fractions.len());
    for (fi, &fraction) in box_fractions.iter().enumerate() {
        if !(0.0..1.0).contains(&fraction) {
            return Err(Error::invalid("fractions must lie in [0, 1)"));
        }
        let op = if fraction == 0.0 {
            LinearOperator::mask_from_indices(shape, (0..shape.scalars()).collect())?
        } else {
            LinearOperator::box_mask(shape, fraction)?
        };
        let mut acc = 0.0;
        for d in 0..draws_per_fraction {
            let mut child = rng.child((fi * draws_per_fraction + d) as u64);
            let (_, x_true) = world.sample(&mut child);
            let obs = op.observe(&x_true, sigma, &mut child)?;
            let scores = component_scores(world, &obs)?;
            let gap = per_dim_gap(&scores.selection_scores, op.m());
            acc += gap.delta;
        }
        rows.push(BoxGapRow {
            box_fraction: fraction,
            mean_delta: acc / draws_per_fraction as f64,
            observed_dim: op.m(),
        });
    }
    Ok(rows)
}
