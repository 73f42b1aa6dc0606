//! Scalar math helpers for the `no_std` build.
//!
//! Transcendentals go through `libm` so results are bit-identical across
//! platforms; this matters because the acceptance tests pin exact values
//! derived from seeded random streams.

#[inline]
pub fn exp(x: f64) -> f64 {
    libm::exp(x)
}

#[inline]
pub fn expm1(x: f64) -> f64 {
    libm::expm1(x)
}

#[inline]
pub fn ln(x: f64) -> f64 {
    libm::log(x)
}

#[inline]
pub fn ln_1p(x: f64) -> f64 {
    libm::log1p(x)
}

#[inline]
pub fn log10(x: f64) -> f64 {
    libm::log10(x)
}

#[inline]
pub fn sqrt(x: f64) -> f64 {
    libm::sqrt(x)
}

#[inline]
pub fn cos(x: f64) -> f64 {
    libm::cos(x)
}

#[inline]
pub fn sin(x: f64) -> f64 {
    libm::sin(x)
}

#[inline]
pub fn erf(x: f64) -> f64 {
    libm::erf(x)
}

#[inline]
pub fn round(x: f64) -> f64 {
    libm::round(x)
}

#[inline]
pub fn ceil(x: f64) -> f64 {
    libm::ceil(x)
}

#[inline]
pub fn abs(x: f64) -> f64 {
    libm::fabs(x)
}

/// Standard normal CDF.
#[inline]
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + erf(x / core::f64::consts::SQRT_2))
}

/// log(Σ exp(x_i)), stable against overflow/underflow. `-inf` entries are
/// handled (they contribute nothing); an empty or all `-inf` input returns
/// `-inf`.
pub fn logsumexp(xs: &[f64]) -> f64 {
    let mx = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !mx.is_finite() {
        return mx; // empty, all -inf, or a NaN/inf already present
    }
    let sum: f64 = xs.iter().map(|&x| exp(x - mx)).sum();
    mx + ln(sum)
}

/// Index of the smallest entry; ties resolve to the lowest index.
pub fn argmin(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x < xs[best] {
            best = i;
        }
    }
    best
}

/// Index of the largest entry; ties resolve to the lowest index.
pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// Smallest and second-smallest values of a slice with at least one entry.
/// Returns `(min, second_min_or_inf, argmin)`.
pub fn two_smallest(xs: &[f64]) -> (f64, f64, usize) {
    let j = argmin(xs);
    let mut second = f64::INFINITY;
    for (i, &x) in xs.iter().enumerate() {
        if i != j && x < second {
            second = x;
        }
    }
    (xs[j], second, j)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn logsumexp_matches_naive_in_safe_range() {
        let xs = [0.3, -1.2, 2.0, 0.0];
        let naive = xs.iter().map(|x| x.exp()).sum::<f64>().ln();
        assert_relative_eq!(logsumexp(&xs), naive, max_relative = 1e-14);
    }

    #[test]
    fn logsumexp_survives_extreme_shifts() {
        let xs = [-100_000.0, -100_001.0];
        let expected = -100_000.0 + (1.0f64 + (-1.0f64).exp()).ln();
        assert_relative_eq!(logsumexp(&xs), expected, max_relative = 1e-14);
        assert_eq!(logsumexp(&[]), f64::NEG_INFINITY);
        assert_eq!(logsumexp(&[f64::NEG_INFINITY]), f64::NEG_INFINITY);
    }

    #[test]
    fn two_smallest_reports_order_stats() {
        let (a, b, j) = two_smallest(&[5.0, 3.0, 4.0]);
        assert_eq!((a, b, j), (3.0, 4.0, 1));
        let (a, b, j) = two_smallest(&[7.0]);
        assert_eq!((a, b, j), (7.0, f64::INFINITY, 0));
    }

    #[test]
    fn argmin_breaks_ties_low() {
        assert_eq!(argmin(&[1.0, 0.5, 0.5]), 1);
    }

    #[test]
    fn normal_cdf_symmetry() {
        assert_relative_eq!(normal_cdf(0.0), 0.5, max_relative = 1e-15);
        assert_relative_eq!(normal_cdf(1.0) + normal_cdf(-1.0), 1.0, max_relative = 1e-14);
    }
}
