//! Weak generative priors for linear inverse problems, at desk scale.
//!
//! This crate contains the numeric core: exact Gaussian-mixture posteriors
//! under linear-Gaussian measurements (with collapse bounds and
//! identifiability diagnostics), a deterministic few-step DDIM generator
//! driven by the analytic mixture score (with exact gradient pullbacks),
//! a sphere-constrained Adam optimizer with holdout-based early stopping,
//! and the end-to-end latent-optimization and guided-sampling solvers.
//!
//! The crate is `no_std` (with `alloc`); all IO, file formats and the CLI
//! live in the companion `weakprior` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod consistency;
pub mod error;
pub mod forward;
pub mod generator;
pub mod grid;
pub mod identifiability;
pub mod linalg;
pub mod math;
pub mod metrics;
pub mod mixture;
pub mod posterior;
pub mod rng;
pub mod schedule;
pub mod solve;
pub mod sphere;
pub mod vector;
pub mod worlds;

pub use error::{Error, Result};
pub use forward::{AatStructure, GridShape, LinearOperator, Observation};
pub use generator::DdimGenerator;
pub use grid::{ImageGrid, SyntheticDataset, ValueRange};
pub use mixture::GaussianMixturePrior;
pub use posterior::{CollapseReport, PosteriorMixture};
pub use rng::RngHandle;
pub use schedule::NoiseSchedule;
pub use vector::Vec64;

// Re-exported so downstream crates use the same matrix types.
pub use nalgebra;
