//! Posterior consistency under i.i.d. observations: two very different
//! mixture priors both concentrate around the truth as the number of
//! observations grows. Concentration is quantified as posterior mass of a
//! ball around the true signal.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::forward::LinearOperator;
use crate::math;
use crate::mixture::GaussianMixturePrior;
use crate::posterior::{exact_posterior, posterior_for_iid_stack, PosteriorCovariance, PosteriorMixture};
use crate::rng::RngHandle;
use crate::vector::Vec64;

/// One sweep row: posterior ball mass around `x*` under both priors after
/// `N` observations. Standard errors are zero on the analytic (n <= 2)
/// path and binomial on the Monte-Carlo path.
#[derive(Debug, Clone, Copy)]
pub struct ConsistencyRow {
    pub n_observations: usize,
    pub mass_a: f64,
    pub se_a: f64,
    pub mass_b: f64,
    pub se_b: f64,
}

/// `P(|x - center| <= radius)` for one Gaussian component. Exact via the
/// normal CDF in one dimension; polar quadrature in two (the posterior
/// covariance is anisotropic, so this is the correct analytic route);
/// `None` above two dimensions.
fn component_ball_mass(
    mean: &Vec64,
    cov: &PosteriorCovariance,
    center: &Vec64,
    radius: f64,
) -> Option<f64> {
    match mean.len() {
        1 => {
            let sd = math::sqrt(cov.diagonal_entry(0));
            let hi = (center[0] + radius - mean[0]) / sd;
            let lo = (center[0] - radius - mean[0]) / sd;
            Some(math::normal_cdf(hi) - math::normal_cdf(lo))
        }
        2 => {
            let (c00, c01, c11) = match cov {
                PosteriorCovariance::Diagonal(d) => (d[0], 0.0, d[1]),
                PosteriorCovariance::Dense(m) => (m[(0, 0)], m[(0, 1)], m[(1, 1)]),
            };
            let det = c00 * c11 - c01 * c01;
            let (i00, i01, i11) = (c11 / det, -c01 / det, c00 / det);
            let norm = 1.0 / (core::f64::consts::TAU * math::sqrt(det));
            let density = |x: f64, y: f64| -> f64 {
                let dx = x - mean[0];
                let dy = y - mean[1];
                norm * math::exp(-0.5 * (i00 * dx * dx + 2.0 * i01 * dx * dy + i11 * dy * dy))
            };

            // Simpson in radius, trapezoid over the periodic angle.
            let radial = 513usize;
            let angular = 256usize;
            let dr = radius / (radial - 1) as f64;
            let dtheta = core::f64::consts::TAU / angular as f64;
            let mut mass = 0.0;
            for ri in 0..radial {
                let rho = ri as f64 * dr;
                let simpson = if ri == 0 || ri == radial - 1 {
                    1.0 / 3.0
                } else if ri % 2 == 1 {
                    4.0 / 3.0
                } else {
                    2.0 / 3.0
                };
                let mut ring = 0.0;
                for ai in 0..angular {
                    let theta = ai as f64 * dtheta;
                    ring += density(
                        center[0] + rho * math::cos(theta),
                        center[1] + rho * math::sin(theta),
                    );
                }
                mass += simpson * dr * rho * ring * dtheta;
            }
            Some(mass)
        }
        _ => None,
    }
}

/// Ball mass of the posterior mixture around `center`: analytic for
/// `n <= 2`, Monte Carlo (with its standard error) otherwise.
pub fn posterior_ball_mass(
    post: &PosteriorMixture,
    center: &Vec64,
    radius: f64,
    mc_samples: usize,
    rng: &mut RngHandle,
) -> Result<(f64, f64)> {
    if center.len() != post.dim() {
        return Err(Error::dims(post.dim(), center.len()));
    }
    if !(radius > 0.0) {
        return Err(Error::invalid("ball radius must be positive"));
    }
    if post.dim() <= 2 {
        let mut mass = 0.0;
        for j in 0..post.components() {
            let cm = component_ball_mass(&post.means[j], &post.covariances[j], center, radius)
                .expect("n <= 2");
            mass += post.weight(j) * cm;
        }
        return Ok((mass, 0.0));
    }
    if mc_samples == 0 {
        return Err(Error::invalid("Monte-Carlo path needs samples"));
    }
    let sampler = post.sampler()?;
    let mut hits = 0usize;
    let r2 = radius * radius;
    for _ in 0..mc_samples {
        let x = sampler.sample(rng);
        if x.squared_distance(center) <= r2 {
            hits += 1;
        }
    }
    let p = hits as f64 / mc_samples as f64;
    Ok((p, math::sqrt(p * (1.0 - p) / mc_samples as f64)))
}

/// Prior ball mass (the `N = 0` row), through the same machinery with
/// covariance `τ_j² I`.
pub fn prior_ball_mass(
    prior: &GaussianMixturePrior,
    center: &Vec64,
    radius: f64,
    mc_samples: usize,
    rng: &mut RngHandle,
) -> Result<(f64, f64)> {
    if prior.dim() <= 2 {
        let mut mass = 0.0;
        for j in 0..prior.components() {
            let cov = PosteriorCovariance::Diagonal(alloc::vec![
                prior.variance(j);
                prior.dim()
            ]);
            let cm = component_ball_mass(prior.mean(j), &cov, center, radius).expect("n <= 2");
            mass += prior.weights()[j] * cm;
        }
        return Ok((mass, 0.0));
    }
    if mc_samples == 0 {
        return Err(Error::invalid("Monte-Carlo path needs samples"));
    }
    let mut hits = 0usize;
    let r2 = radius * radius;
    for _ in 0..mc_samples {
        let (_, x) = prior.sample(rng);
        if x.squared_distance(center) <= r2 {
            hits += 1;
        }
    }
    let p = hits as f64 / mc_samples as f64;
    Ok((p, math::sqrt(p * (1.0 - p) / mc_samples as f64)))
}

/// Sweeps the observation count: fixed `x*` and operator, i.i.d.
/// measurements `y_i = A x* + σ ε_i`, posterior via sufficient statistics,
/// and ball mass of `{|x - x*| <= radius}` under both priors. Entries of
/// `n_list` must be strictly increasing; `0` reports prior mass. The
/// default radius is half the minimum positive inter-mean distance across
/// both priors.
///
/// Observation draws are shared across rows (row `N` uses the first `N`
/// draws), matching a growing-dataset experiment.
#[allow(clippy::too_many_arguments)]
pub fn consistency_sweep(
    prior_a: &GaussianMixturePrior,
    prior_b: &GaussianMixturePrior,
    x_star: &Vec64,
    operator: &LinearOperator,
    sigma: f64,
    n_list: &[usize],
    ball_radius: Option<f64>,
    mc_samples: usize,
    rng: &mut RngHandle,
) -> Result<Vec<ConsistencyRow>> {
    if prior_a.dim() != prior_b.dim() {
        return Err(Error::dims(prior_a.dim(), prior_b.dim()));
    }
    if x_star.len() != operator.n() || prior_a.dim() != operator.n() {
        return Err(Error::dims(operator.n(), x_star.len()));
    }
    if n_list.is_empty() || n_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("n_list must be non-empty and increasing"));
    }
    if !(sigma > 0.0) {
        return Err(Error::invalid("sigma must be positive"));
    }

    let radius = match ball_radius {
        Some(r) if r > 0.0 => r,
        Some(_) => return Err(Error::invalid("ball radius must be positive")),
        None => {
            let mut best = f64::INFINITY;
            let all: Vec<&Vec64> = prior_a.means().iter().chain(prior_b.means()).collect();
            for i in 0..all.len() {
                for j in (i + 1)..all.len() {
                    let d = all[i].squared_distance(all[j]);
                    if d > 0.0 {
                        best = best.min(d);
                    }
                }
            }
            if !best.is_finite() {
                return Err(Error::invalid(
                    "cannot derive a default radius from coincident means",
                ));
            }
            0.5 * math::sqrt(best)
        }
    };

    let max_n = *n_list.last().unwrap();
    let mut ys: Vec<Vec64> = Vec::with_capacity(max_n);
    for _ in 0..max_n {
        let obs = operator.observe(x_star, sigma, rng)?;
        ys.push(obs.y);
    }

    let mut rows = Vec::with_capacity(n_list.len());
    for &count in n_list {
        let (mass_a, se_a, mass_b, se_b) = if count == 0 {
            let (ma, sa) = prior_ball_mass(prior_a, x_star, radius, mc_samples, rng)?;
            let (mb, sb) = prior_ball_mass(prior_b, x_star, radius, mc_samples, rng)?;
            (ma, sa, mb, sb)
        } else {
            let post_a = posterior_for_iid_stack(prior_a, operator, &ys[..count], sigma)?;
            let post_b = posterior_for_iid_stack(prior_b, operator, &ys[..count], sigma)?;
            let (ma, sa) = posterior_ball_mass(&post_a, x_star, radius, mc_samples, rng)?;
            let (mb, sb) = posterior_ball_mass(&post_b, x_star, radius, mc_samples, rng)?;
            (ma, sa, mb, sb)
        };
        rows.push(ConsistencyRow {
            n_observations: count,
            mass_a,
            se_a,
            mass_b,
            se_b,
        });
    }
    Ok(rows)
}

/// The default two-prior demonstration: `n = m = 2`, one dense operator
/// drawn from the seed, three shared component means, and opposite weight
/// profiles so the priors place their mass on disjoint modes.
pub struct ConsistencyPreset {
    pub prior_a: GaussianMixturePrior,
    pub prior_b: GaussianMixturePrior,
    pub x_star: Vec64,
    pub operator: LinearOperator,
    pub sigma: f64,
    pub n_list: Vec<usize>,
    pub ball_radius: Option<f64>,
    pub mc_samples: usize,
}

pub fn default_preset(seed: u64) -> Result<ConsistencyPreset> {
    let means = alloc::vec![
        Vec64::new(alloc::vec![0.0, 0.0])?,
        Vec64::new(alloc::vec![4.0, 0.0])?,
        Vec64::new(alloc::vec![0.0, 4.0])?,
    ];
    let tau2 = 0.09;
    let prior_a =
        GaussianMixturePrior::new(alloc::vec![0.98, 0.01, 0.01], means.clone(), alloc::vec![tau2; 3])?;
    let prior_b =
        GaussianMixturePrior::new(alloc::vec![0.01, 0.01, 0.98], means, alloc::vec![tau2; 3])?;

    // One dense well-conditioned operator drawn from the seed.
    let mut rng = RngHandle::new(seed);
    let entries = loop {
        let e: Vec<f64> = (0..4).map(|_| rng.normal()).collect();
        let det = e[0] * e[3] - e[1] * e[2];
        if math::abs(det) >= 0.5 {
            break e;
        }
    };
    let operator = LinearOperator::dense(2, 2, entries)?;
    let x_star = Vec64::new(alloc::vec![0.15, -0.1])?;

    Ok(ConsistencyPreset {
        prior_a,
        prior_b,
        x_star,
        operator,
        sigma: 2.0,
        n_list: alloc::vec![0, 1, 2, 4, 8, 16, 32, 64, 128, 256, 512],
        ball_radius: None,
        mc_samples: 100_000,
    })
}

/// Runs the preset end to end.
pub fn run_preset(preset: &ConsistencyPreset, rng: &mut RngHandle) -> Result<Vec<ConsistencyRow>> {
    consistency_sweep(
        &preset.prior_a,
        &preset.prior_b,
        &preset.x_star,
        &preset.operator,
        preset.sigma,
        &preset.n_list,
        preset.ball_radius,
        preset.mc_samples,
        rng,
    )
}
