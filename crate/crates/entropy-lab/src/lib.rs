//! Numerical laboratory for entropy inequalities of log-concave and
//! κ-concave probability measures: a zoo of densities with exact oracles,
//! differential-entropy estimators, affine positioning, and one checker per
//! inequality, driven by a config-based experiment CLI.

pub mod convolution;
pub mod entropy;
pub mod error;
pub mod geometry;
pub mod lab;
pub mod linalg;
mod optim;
pub mod positioning;
pub mod rng;
pub mod zoo;

pub use error::{LabError, Result};
