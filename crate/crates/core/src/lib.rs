//! Center-outward ranks, signs and rank-based tests for multivariate
//! location, MANOVA and multiple-output regression.

pub mod assignment;
pub mod baselines;
pub mod center_outward;
pub mod checks;
pub mod cli;
pub mod distributions;
pub mod error;
pub mod rank_tests;
pub mod scores;
pub mod special;
pub mod simulation;
pub mod sphere_grid;

pub use error::{CorankError, Result};
