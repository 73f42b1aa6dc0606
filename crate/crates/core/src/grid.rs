//! Image containers: row-major, channel-last grids of 64-bit pixels.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::vector::Vec64;

/// Closed interval of valid pixel values. Measurements may exceed the
/// nominal normalization once noise is added, so the default is the closed
/// interval `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValueRange {
    pub lo: f64,
    pub hi: f64,
}

impl ValueRange {
    pub const UNIT: ValueRange = ValueRange { lo: -1.0, hi: 1.0 };

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.lo && v <= self.hi
    }

    pub fn clamp(&self, v: f64) -> f64 {
        v.clamp(self.lo, self.hi)
    }
}

impl Default for ValueRange {
    fn default() -> Self {
        ValueRange::UNIT
    }
}

/// An image of shape `height x width x channels`, stored row-major with the
/// channel index fastest. Pixel `(y, x, ch)` lives at `(y*w + x)*c + ch`, so
/// per-pixel inpainting masks cover contiguous scalar runs.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageGrid {
    height: usize,
    width: usize,
    channels: usize,
    pixels: Vec64,
    value_range: ValueRange,
}

impl ImageGrid {
    pub fn new(
        height: usize,
        width: usize,
        channels: usize,
        pixels: Vec64,
        value_range: ValueRange,
    ) -> Result<Self> {
        if height == 0 || width == 0 || channels == 0 {
            return Err(Error::invalid("grid dimensions must be positive"));
        }
        let expected = height * width * channels;
        if pixels.len() != expected {
            return Err(Error::dims(expected, pixels.len()));
        }
        if let Some(bad) = pixels.iter().find(|v| !value_range.contains(**v)) {
            return Err(Error::InvalidArgument(alloc::format!(
                "pixel {bad} outside [{}, {}]",
                value_range.lo,
                value_range.hi
            )));
        }
        Ok(ImageGrid {
            height,
            width,
            channels,
            pixels,
            value_range,
        })
    }

    /// Builds a grid from arbitrary finite values by clamping into range.
    /// Used when converting unconstrained reconstructions for display or
    /// windowed metrics.
    pub fn from_pixels_clamped(
        height: usize,
        width: usize,
        channels: usize,
        pixels: &[f64],
        value_range: ValueRange,
    ) -> Result<Self> {
        let clamped: Vec<f64> = pixels.iter().map(|&v| value_range.clamp(v)).collect();
        ImageGrid::new(height, width, channels, Vec64::new(clamped)?, value_range)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn value_range(&self) -> ValueRange {
        self.value_range
    }

    pub fn pixels(&self) -> &Vec64 {
        &self.pixels
    }

    pub fn into_pixels(self) -> Vec64 {
        self.pixels
    }

    pub fn pixel(&self, y: usize, x: usize, ch: usize) -> f64 {
        self.pixels[(y * self.width + x) * self.channels + ch]
    }

    pub fn same_shape(&self, other: &ImageGrid) -> bool {
        self.height == other.height
            && self.width == other.width
            && self.channels == other.channels
    }
}

/// A non-empty list of same-shape images with a text tag, standing in for
/// the image datasets of the gap-statistics procedure.
#[derive(Debug, Clone)]
pub struct SyntheticDataset {
    items: Vec<ImageGrid>,
    label: String,
}

impl SyntheticDataset {
    pub fn new(items: Vec<ImageGrid>, label: impl Into<String>) -> Result<Self> {
        let first = items
            .first()
            .ok_or_else(|| Error::invalid("dataset must be non-empty"))?;
        if !items.iter().all(|g| g.same_shape(first)) {
            return Err(Error::invalid("dataset images must share one shape"));
        }
        Ok(SyntheticDataset {
            items,
            label: label.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn items(&self) -> &[ImageGrid] {
        &self.items
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}
