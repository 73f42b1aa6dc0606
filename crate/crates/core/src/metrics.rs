//! Reconstruction metrics: PSNR and single-scale SSIM.

use crate::error::{Error, Result};
use crate::grid::ImageGrid;
use crate::math;
use crate::vector::Vec64;

/// Default PSNR/SSIM peak for `[-1, 1]` data.
pub const DEFAULT_PEAK: f64 = 2.0;

const SSIM_WINDOW: usize = 8;

pub fn mse(a: &Vec64, b: &Vec64) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::dims(a.len(), b.len()));
    }
    Ok(a.squared_distance(b) / a.len() as f64)
}

/// `10 log10(peak² / MSE)`; identical inputs give `+inf`.
pub fn psnr(x_hat: &Vec64, x_ref: &Vec64, peak: f64) -> Result<f64> {
    if !(peak > 0.0) {
        return Err(Error::invalid("peak must be positive"));
    }
    let err = mse(x_hat, x_ref)?;
    if err == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * math::log10(peak * peak / err))
}

/// Single-scale SSIM with uniform 8x8 windows, stride 1, biased moments,
/// `C1 = (0.01 peak)²`, `C2 = (0.03 peak)²`; mean over windows and
/// channels. The peak comes from the grids' value range.
pub fn ssim(x_hat: &ImageGrid, x_ref: &ImageGrid) -> Result<f64> {
    if !x_hat.same_shape(x_ref) {
        return Err(Error::invalid("ssim requires equal shapes"));
    }
    let peak = x_ref.value_range().width();
    Ok(ssim_flat(
        x_hat.pixels().as_slice(),
        x_ref.pixels().as_slice(),
        x_hat.height(),
        x_hat.width(),
        x_hat.channels(),
        peak,
    ))
}

/// SSIM on raw row-major channel-last buffers. Windows shrink to the image
/// when a side is smaller than 8.
pub fn ssim_flat(a: &[f64], b: &[f64], h: usize, w: usize, c: usize, peak: f64) -> f64 {
    let wy = SSIM_WINDOW.min(h);
    let wx = SSIM_WINDOW.min(w);
    let c1 = (0.01 * peak) * (0.01 * peak);
    let c2 = (0.03 * peak) * (0.03 * peak);
    let count = (wy * wx) as f64;

    let mut total = 0.0;
    let mut windows = 0usize;
    for ch in 0..c {
        for y0 in 0..=(h - wy) {
            for x0 in 0..=(w - wx) {
                let mut sa = 0.0;
                let mut sb = 0.0;
                let mut saa = 0.0;
                let mut sbb = 0.0;
                let mut sab = 0.0;
                for dy in 0..wy {
                    for dx in 0..wx {
                        let idx = ((y0 + dy) * w + (x0 + dx)) * c + ch;
                        let va = a[idx];
                        let vb = b[idx];
                        sa += va;
                        sb += vb;
                        saa += va * va;
                        sbb += vb * vb;
                        sab += va * vb;
                    }
                }
                let ma = sa / count;
                let mb = sb / count;
                let var_a = saa / count - ma * ma;
                let var_b = sbb / count - mb * mb;
                let cov = sab / count - ma * mb;
                total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2))
                    / ((ma * ma + mb * mb + c1) * (var_a + var_b + c2));
                windows += 1;
            }
        }
    }
    total / windows as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::ValueRange;
    use crate::rng::RngHandle;
    use approx::assert_relative_eq;

    #[test]
    fn psnr_formula_cases() {
        let a = Vec64::new(vec![0.1, 0.2, -0.3]).unwrap();
        assert_eq!(psnr(&a, &a, 2.0).unwrap(), f64::INFINITY);

        // MSE = peak^2 / 100 gives exactly 20 dB.
        let peak = 2.0f64;
        let delta = (peak * peak / 100.0f64).sqrt();
        let b = Vec64::new(a.iter().map(|v| v + delta).collect()).unwrap();
        assert_relative_eq!(psnr(&b, &a, peak).unwrap(), 20.0, max_relative = 1e-12);
        assert!(psnr(&a, &a, 0.0).is_err());
    }

    #[test]
    fn ssim_identity_is_one() {
        let mut rng = RngHandle::new(1);
        let px: Vec<f64> = (0..192).map(|_| rng.uniform() * 2.0 - 1.0).collect();
        let g = ImageGrid::from_pixels_clamped(8, 8, 3, &px, ValueRange::UNIT).unwrap();
        assert_relative_eq!(ssim(&g, &g).unwrap(), 1.0, max_relative = 1e-12);
    }

    /// Independent two-pass reference: centered moments computed from
    /// explicit deviations instead of running sums.
    fn ssim_reference(a: &[f64], b: &[f64], h: usize, w: usize, c: usize, peak: f64) -> f64 {
        let wy = 8usize.min(h);
        let wx = 8usize.min(w);
        let c1 = (0.01 * peak) * (0.01 * peak);
        let c2 = (0.03 * peak) * (0.03 * peak);
        let mut vals = Vec::new();
        for ch in 0..c {
            for y0 in 0..=(h - wy) {
                for x0 in 0..=(w - wx) {
                    let mut wa = Vec::new();
                    let mut wb = Vec::new();
                    for dy in 0..wy {
                        for dx in 0..wx {
                            let idx = ((y0 + dy) * w + (x0 + dx)) * c + ch;
                            wa.push(a[idx]);
                            wb.push(b[idx]);
                        }
                    }
                    let n = wa.len() as f64;
                    let ma = wa.iter().sum::<f64>() / n;
                    let mb = wb.iter().sum::<f64>() / n;
                    let var_a = wa.iter().map(|v| (v - ma) * (v - ma)).sum::<f64>() / n;
                    let var_b = wb.iter().map(|v| (v - mb) * (v - mb)).sum::<f64>() / n;
                    let cov = wa
                        .iter()
                        .zip(&wb)
                        .map(|(x, y)| (x - ma) * (y - mb))
                        .sum::<f64>()
                        / n;
                    vals.push(
                        ((2.0 * ma * mb + c1) * (2.0 * cov + c2))
                            / ((ma * ma + mb * mb + c1) * (var_a + var_b + c2)),
                    );
                }
            }
        }
        vals.iter().sum::<f64>() / vals.len() as f64
    }

    #[test]
    fn ssim_matches_independent_reference() {
        let mut rng = RngHandle::new(9);
        for trial in 0..5u64 {
            let mut r = rng.child(trial);
            let (h, w, c) = (12, 10, 2);
            let a: Vec<f64> = (0..h * w * c).map(|_| r.uniform() * 2.0 - 1.0).collect();
            let b: Vec<f64> = a
                .iter()
                .map(|v| (v + 0.1 * r.normal()).clamp(-1.0, 1.0))
                .collect();
            let fast = ssim_flat(&a, &b, h, w, c, 2.0);
            let slow = ssim_reference(&a, &b, h, w, c, 2.0);
            assert!((fast - slow).abs() < 1e-9, "{fast} vs {slow}");
        }
    }

    #[test]
    fn ssim_penalizes_noise() {
        let mut rng = RngHandle::new(3);
        let base: Vec<f64> = (0..256)
            .map(|i| ((i % 16) as f64 / 8.0 - 1.0) * 0.9)
            .collect();
        let noisy: Vec<f64> = base
            .iter()
            .map(|v| (v + 0.4 * rng.normal()).clamp(-1.0, 1.0))
            .collect();
        let g1 = ImageGrid::from_pixels_clamped(16, 16, 1, &base, ValueRange::UNIT).unwrap();
        let g2 = ImageGrid::from_pixels_clamped(16, 16, 1, &noisy, ValueRange::UNIT).unwrap();
        let s = ssim(&g1, &g2).unwrap();
        assert!(s < 0.9 && s > 0.0, "ssim {s}");
    }

    #[test]
    fn tiny_images_use_shrunk_window() {
        let a = [0.1, 0.4, -0.2, 0.3];
        let b = [0.1, 0.4, -0.2, 0.3];
        assert_relative_eq!(ssim_flat(&a, &b, 2, 2, 1, 2.0), 1.0, max_relative = 1e-12);
    }
}
