//! Adaptive-step-size Langevin samplers, their limiting-diffusion stationary
//! densities, and the tooling to compare the two empirically.
//!
//! The library is organized in layers: [`targets`] and [`geometry`] define the
//! log-posterior and metric machinery, [`samplers`] provides the transition
//! kernels and chain runner, [`stationary`] computes closed-form 1-D
//! stationary densities by quadrature, [`estimation`] and [`analysis`] build
//! and score ergodic histograms, and [`runner`]/[`config`]/[`plot`] implement
//! the experiment CLI on top. [`oracles`] holds independent verification
//! quadrature used by the test suite.

pub mod analysis;
pub mod config;
pub mod error;
pub mod estimation;
pub mod geometry;
pub mod oracles;
pub mod plot;
pub mod runner;
pub mod samplers;
pub mod stationary;
pub mod targets;

pub use error::{Error, Result};
