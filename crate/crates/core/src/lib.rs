//! Predictive distributions for the Gaussian sequence model
//! `X_i = θ_i + ε W_i`, `Y_i = θ_i + ε̃ W̃_i`.
//!
//! Gaussian-prior predictives tuned to an ellipsoid by water-filling, the
//! adaptive blockwise Stein predictive on weakly geometric blocks, and the
//! Monte Carlo machinery to compare them.

pub mod error;
pub mod function_view;
pub mod model;
pub mod quadrature;
pub mod report;
pub mod risk;
pub mod rng;
pub mod special;
pub mod stein;
pub mod verify;
pub mod waterfill;

pub use error::{Error, Result};
