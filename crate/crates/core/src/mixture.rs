//! The isotropic Gaussian-mixture prior, with optional per-component
//! variances.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;
use crate::vector::Vec64;

/// `π(x) = Σ_j w_j N(x; μ_j, τ_j² I_n)`. Homogeneous when all `τ_j²` agree.
#[derive(Debug, Clone)]
pub struct GaussianMixturePrior {
    weights: Vec<f64>,
    log_weights: Vec<f64>,
    means: Vec<Vec64>,
    variances: Vec<f64>,
}

impl GaussianMixturePrior {
    /// Weights must already sum to 1 (within 1e-12).
    pub fn new(weights: Vec<f64>, means: Vec<Vec64>, variances: Vec<f64>) -> Result<Self> {
        let sum: f64 = weights.iter().sum();
        if math::abs(sum - 1.0) > 1e-12 {
            return Err(Error::InvalidArgument(alloc::format!(
                "weights sum to {sum}, expected 1"
            )));
        }
        Self::from_unnormalized(weights, means, variances)
    }

    /// Accepts any nonnegative weight vector with positive total mass and
    /// rescales it. Posterior quantities are invariant to the rescaling.
    pub fn from_unnormalized(
        weights: Vec<f64>,
        means: Vec<Vec64>,
        variances: Vec<f64>,
    ) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::invalid("mixture needs at least one component"));
        }
        if weights.len() != means.len() || weights.len() != variances.len() {
            return Err(Error::invalid(
                "weights, means and variances must have equal length",
            ));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::invalid("weights must be finite and >= 0"));
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::invalid("weights must have positive total mass"));
        }
        if variances.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
            return Err(Error::invalid("variances must be positive"));
        }
        let n = means[0].len();
        if means.iter().any(|m| m.len() != n) {
            return Err(Error::invalid("component means must share one dimension"));
        }
        let weights: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let log_weights = weights
            .iter()
            .map(|&w| if w > 0.0 { math::ln(w) } else { f64::NEG_INFINITY })
            .collect();
        Ok(GaussianMixturePrior {
            weights,
            log_weights,
            means,
            variances,
        })
    }

    /// Equal component variance `tau2` everywhere.
    pub fn homogeneous(weights: Vec<f64>, means: Vec<Vec64>, tau2: f64) -> Result<Self> {
        let m = weights.len();
        Self::from_unnormalized(weights, means, vec![tau2; m])
    }

    pub fn components(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.means[0].len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    pub fn means(&self) -> &[Vec64] {
        &self.means
    }

    pub fn mean(&self, j: usize) -> &Vec64 {
        &self.means[j]
    }

    pub fn variances(&self) -> &[f64] {
        &self.variances
    }

    pub fn variance(&self, j: usize) -> f64 {
        self.variances[j]
    }

    pub fn is_homogeneous(&self) -> bool {
        self.variances
            .iter()
            .all(|&t| t == self.variances[0])
    }

    /// Weight-ratio constant `C = max_{i,j} w_i / w_j` over components with
    /// positive weight (zero-weight components carry no posterior mass and
    /// are excluded).
    pub fn weight_ratio_bound(&self) -> f64 {
        let mut lo = f64::INFINITY;
        let mut hi: f64 = 0.0;
        for &w in &self.weights {
            if w > 0.0 {
                lo = lo.min(w);
                hi = hi.max(w);
            }
        }
        hi / lo
    }

    /// Mixture mean `Σ_j w_j μ_j`.
    pub fn barycenter(&self) -> Vec64 {
        let mut acc = Vec64::zeros(self.dim());
        for (w, mu) in self.weights.iter().zip(&self.means) {
            acc = acc.add_scaled(*w, mu);
        }
        acc
    }

    /// A mixture draw: component by weight, then `μ_J + τ_J ξ`.
    pub fn sample(&self, rng: &mut crate::rng::RngHandle) -> (usize, Vec64) {
        let u = rng.uniform();
        let mut acc = 0.0;
        let mut j = self.weights.len() - 1;
        for (i, &w) in self.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                j = i;
                break;
            }
        }
        let tau = math::sqrt(self.variances[j]);
        let noise = rng.gaussian_vector(self.dim()).expect("dim >= 1");
        (j, self.means[j].add_scaled(tau, &noise))
    }

    /// Same means and variances, new weights.
    pub fn with_weights(&self, weights: Vec<f64>) -> Result<Self> {
        Self::from_unnormalized(weights, self.means.clone(), self.variances.clone())
    }

    /// Minimum pairwise full-dimension mean separation
    /// `min_{i≠j} (1/n) ||μ_i - μ_j||²`.
    pub fn min_separation(&self) -> f64 {
        let n = self.dim() as f64;
        let mut best = f64::INFINITY;
        for i in 0..self.means.len() {
            for j in (i + 1)..self.means.len() {
                best = best.min(self.means[i].squared_distance(&self.means[j]) / n);
            }
        }
        best
    }

    /// Index of the component mean nearest to `x`.
    pub fn nearest_mean(&self, x: &Vec64) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (j, mu) in self.means.iter().enumerate() {
            let d = x.squared_distance(mu);
            if d < best_d {
                best_d = d;
                best = j;
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngHandle;

    fn means2() -> Vec<Vec64> {
        vec![
            Vec64::new(vec![0.0, 0.0]).unwrap(),
            Vec64::new(vec![1.0, 1.0]).unwrap(),
        ]
    }

    #[test]
    fn constructor_validations() {
        assert!(GaussianMixturePrior::new(vec![0.5, 0.6], means2(), vec![1.0, 1.0]).is_err());
        assert!(GaussianMixturePrior::new(vec![0.5, 0.5], means2(), vec![1.0, 0.0]).is_err());
        assert!(GaussianMixturePrior::new(vec![0.5, 0.5], means2(), vec![1.0]).is_err());
        let p = GaussianMixturePrior::from_unnormalized(vec![2.0, 6.0], means2(), vec![1.0; 2])
            .unwrap();
        assert_eq!(p.weights(), &[0.25, 0.75]);
        assert_eq!(p.weight_ratio_bound(), 3.0);
    }

    #[test]
    fn zero_weight_components_excluded_from_ratio() {
        let means = vec![
            Vec64::new(vec![0.0]).unwrap(),
            Vec64::new(vec![1.0]).unwrap(),
            Vec64::new(vec![2.0]).unwrap(),
        ];
        let p =
            GaussianMixturePrior::new(vec![0.25, 0.75, 0.0], means, vec![1.0; 3]).unwrap();
        assert_eq!(p.weight_ratio_bound(), 3.0);
    }

    #[test]
    fn sampling_respects_weights() {
        let p = GaussianMixturePrior::homogeneous(vec![0.8, 0.2], means2(), 0.0001).unwrap();
        let mut rng = RngHandle::new(77);
        let mut count0 = 0usize;
        for _ in 0..10_000 {
            let (j, x) = p.sample(&mut rng);
            if j == 0 {
                count0 += 1;
            }
            assert_eq!(p.nearest_mean(&x), j);
        }
        let freq = count0 as f64 / 10_000.0;
        assert!((freq - 0.8).abs() < 0.02, "component 0 frequency {freq}");
    }

    #[test]
    fn separation_and_barycenter() {
        let p = GaussianMixturePrior::homogeneous(vec![0.5, 0.5], means2(), 1.0).unwrap();
        assert_eq!(p.min_separation(), 1.0); // (1+1)/2
        assert_eq!(p.barycenter().as_slice(), &[0.5, 0.5]);
    }
}
