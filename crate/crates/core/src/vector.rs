//! `Vec64`: the finite 64-bit float vector every module works with.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;

/// A non-empty vector of finite `f64` values. Signals `x`, measurements `y`
/// and latents `z` are all `Vec64`s.
#[derive(Debug, Clone, PartialEq)]
pub struct Vec64(Vec<f64>);

impl Vec64 {
    /// Validating constructor: rejects empty input and any NaN/Inf entry.
    pub fn new(data: Vec<f64>) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::invalid("Vec64 must be non-empty"));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(alloc::format!(
                "non-finite entry {} at index {pos}",
                data[pos]
            )));
        }
        Ok(Vec64(data))
    }

    /// Construction without the finiteness check, for internal arithmetic.
    /// Intermediate solver states may transiently overflow; the latent
    /// optimizer detects that and aborts with a diagnostic instead of
    /// panicking here.
    pub(crate) fn from_vec_unchecked(data: Vec<f64>) -> Self {
        debug_assert!(!data.is_empty());
        Vec64(data)
    }

    pub fn zeros(len: usize) -> Self {
        assert!(len > 0, "Vec64::zeros(0)");
        Vec64(vec![0.0; len])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn iter(&self) -> core::slice::Iter<'_, f64> {
        self.0.iter()
    }

    pub fn dot(&self, other: &Vec64) -> f64 {
        debug_assert_eq!(self.len(), other.len());
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }

    pub fn norm(&self) -> f64 {
        math::sqrt(self.dot(self))
    }

    pub fn squared_distance(&self, other: &Vec64) -> f64 {
        debug_assert_eq!(self.len(), other.len());
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }

    /// `self + c * other`.
    pub fn add_scaled(&self, c: f64, other: &Vec64) -> Vec64 {
        debug_assert_eq!(self.len(), other.len());
        Vec64(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| a + c * b)
                .collect(),
        )
    }

    pub fn scaled(&self, c: f64) -> Vec64 {
        Vec64(self.0.iter().map(|a| a * c).collect())
    }

    pub fn sub(&self, other: &Vec64) -> Vec64 {
        self.add_scaled(-1.0, other)
    }

    pub fn mean(&self) -> f64 {
        self.0.iter().sum::<f64>() / self.0.len() as f64
    }

    pub fn all_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl core::ops::Deref for Vec64 {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl core::ops::Index<usize> for Vec64 {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl<'a> IntoIterator for &'a Vec64 {
    type Item = &'a f64;
    type IntoIter = core::slice::Iter<'a, f64>;
    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}
