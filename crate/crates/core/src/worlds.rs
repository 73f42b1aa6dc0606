//! Construction of synthetic Gaussian-mixture "image worlds" used by the
//! experiment presets and tests. Worlds are built, never fitted.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::forward::GridShape;
use crate::grid::{ImageGrid, SyntheticDataset, ValueRange};
use crate::mixture::GaussianMixturePrior;
use crate::rng::RngHandle;
use crate::vector::Vec64;

/// A homogeneous mixture world on a pixel grid: component means drawn
/// i.i.d. uniform in `[-amplitude, amplitude]` per scalar.
pub fn random_world(
    shape: GridShape,
    components: usize,
    amplitude: f64,
    tau2: f64,
    rng: &mut RngHandle,
) -> Result<GaussianMixturePrior> {
    if components == 0 {
        return Err(Error::invalid("world needs at least one component"));
    }
    if !(amplitude > 0.0 && amplitude <= 1.0) {
        return Err(Error::invalid("amplitude must be in (0, 1]"));
    }
    let n = shape.scalars();
    let mut means = Vec::with_capacity(components);
    for _ in 0..components {
        let data: Vec<f64> = (0..n)
            .map(|_| amplitude * (2.0 * rng.uniform() - 1.0))
            .collect();
        means.push(Vec64::new(data)?);
    }
    GaussianMixturePrior::homogeneous(vec![1.0 / components as f64; components], means, tau2)
}

/// A world whose component means agree outside a centered box covering
/// `box_fraction` of `min(h, w)` and differ (strongly) inside it. Box
/// inpainting at or above that fraction hides every pixel where the means
/// disagree, collapsing the score gap to zero.
pub fn box_differing_world(
    shape: GridShape,
    components: usize,
    box_fraction: f64,
    amplitude: f64,
    tau2: f64,
    rng: &mut RngHandle,
) -> Result<GaussianMixturePrior> {
    if components < 2 {
        return Err(Error::invalid("box world needs at least two components"));
    }
    if !(box_fraction > 0.0 && box_fraction < 1.0) {
        return Err(Error::invalid("box fraction must be in (0, 1)"));
    }
    if !(amplitude > 0.0 && amplitude <= 1.0) {
        return Err(Error::invalid("amplitude must be in (0, 1]"));
    }
    let n = shape.scalars();
    let base: Vec<f64> = (0..n)
        .map(|_| 0.5 * amplitude * (2.0 * rng.uniform() - 1.0))
        .collect();

    let min_side = shape.height.min(shape.width);
    let side = crate::math::ceil(box_fraction * min_side as f64) as usize;
    let top = (shape.height - side) / 2;
    let left = (shape.width - side) / 2;

    let mut means = Vec::with_capacity(components);
    for _ in 0..components {
        let mut data = base.clone();
        for y in top..top + side {
            for x in left..left + side {
                for ch in 0..shape.channels {
                    let idx = (y * shape.width + x) * shape.channels + ch;
                    data[idx] = amplitude * (2.0 * rng.uniform() - 1.0);
                }
            }
        }
        means.push(Vec64::new(data)?);
    }
    GaussianMixturePrior::homogeneous(vec![1.0 / components as f64; components], means, tau2)
}

/// Reweights a world within a bounded ratio, keeping means and variances:
/// the "mismatched prior" of the robustness experiments. Weights are a
/// deterministic rotation of `(1, ratio, 1, ratio, ...)` so that
/// `max w_i / w_j = ratio`.
pub fn mismatched_weights(
    world: &GaussianMixturePrior,
    ratio: f64,
) -> Result<GaussianMixturePrior> {
    if !(ratio >= 1.0) {
        return Err(Error::invalid("weight ratio must be >= 1"));
    }
    let m = world.components();
    let weights: Vec<f64> = (0..m)
        .map(|j| if j % 2 == 0 { ratio } else { 1.0 })
        .collect();
    world.with_weights(weights)
}

/// Draws `count` images from the world, clamping each sample into the
/// grid's value range.
pub fn dataset_from_world(
    world: &GaussianMixturePrior,
    shape: GridShape,
    count: usize,
    label: impl Into<String>,
    rng: &mut RngHandle,
) -> Result<SyntheticDataset> {
    if world.dim() != shape.scalars() {
        return Err(Error::dims(shape.scalars(), world.dim()));
    }
    let mut items = Vec::with_capacity(count);
    for _ in 0..count {
        let (_, x) = world.sample(rng);
        items.push(ImageGrid::from_pixels_clamped(
            shape.height,
            shape.width,
            shape.channels,
            x.as_slice(),
            ValueRange::UNIT,
        )?);
    }
    SyntheticDataset::new(items, label)
}

/// One ground-truth draw: the component index and the clamped signal.
pub fn sample_truth(
    world: &GaussianMixturePrior,
    rng: &mut RngHandle,
) -> (usize, Vec64) {
    let (j, x) = world.sample(rng);
    let clamped: Vec<f64> = x.iter().map(|v| v.clamp(-1.0, 1.0)).collect();
    (j, Vec64::from_vec_unchecked(clamped))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_world_bounds_and_separation() {
        let mut rng = RngHandle::new(0);
        let shape = GridShape::new(8, 8, 3).unwrap();
        let world = random_world(shape, 4, 0.8, 0.01, &mut rng).unwrap();
        assert_eq!(world.components(), 4);
        assert_eq!(world.dim(), 192);
        for mu in world.means() {
            assert!(mu.iter().all(|v| v.abs() <= 0.8));
        }
        // Independent uniform(-0.8, 0.8) coordinates: E (a-b)^2 = 2 var ~ 0.43.
        let sep = world.min_separation();
        assert!(sep > 0.2 && sep < 0.7, "separation {sep}");
    }

    #[test]
    fn box_world_means_agree_outside_box() {
        let mut rng = RngHandle::new(1);
        let shape = GridShape::new(16, 16, 1).unwrap();
        let world = box_differing_world(shape, 3, 0.5, 0.9, 0.01, &mut rng).unwrap();
        let side = 8usize; // ceil(0.5 * 16)
        let top = (16 - side) / 2;
        for y in 0..16 {
            for x in 0..16 {
                let inside =
                    y >= top && y < top + side && x >= top && x < top + side;
                let idx = y * 16 + x;
                let all_equal = (1..3).all(|j| {
                    world.mean(j)[idx] == world.mean(0)[idx]
                });
                if !inside {
                    assert!(all_equal, "means differ outside the box at ({y},{x})");
                }
            }
        }
        // The inside must actually differ.
        let d01 = world.mean(0).squared_distance(world.mean(1));
        assert!(d01 > 0.0);
    }

    #[test]
    fn mismatched_weights_bounded_ratio() {
        let mut rng = RngHandle::new(2);
        let shape = GridShape::new(4, 4, 1).unwrap();
        let world = random_world(shape, 4, 0.8, 0.01, &mut rng).unwrap();
        let skewed = mismatched_weights(&world, 8.0).unwrap();
        assert_eq!(skewed.weight_ratio_bound(), 8.0);
        assert_eq!(skewed.means()[0], world.means()[0]);
    }

    #[test]
    fn dataset_samples_are_clamped_and_shaped() {
        let mut rng = RngHandle::new(3);
        let shape = GridShape::new(4, 4, 3).unwrap();
        let world = random_world(shape, 2, 0.95, 0.25, &mut rng).unwrap();
        let ds = dataset_from_world(&world, shape, 5, "worldA", &mut rng).unwrap();
        assert_eq!(ds.len(), 5);
        assert_eq!(ds.label(), "worldA");
        for g in ds.items() {
            assert!(g.pixels().iter().all(|v| (-1.0..=1.0).contains(v)));
        }
    }
}
