//! Blockwise Stein priors on weakly geometric blocks.

mod blocks;
mod posterior;
mod truncgamma;

pub use blocks::{dimension_for, wgb_blocks, wgb_blocks_with_dim, wgb_rho, BlockSystem};
pub use posterior::{
    blockwise_posterior_mean, blockwise_predictive_density, blockwise_stein_predictive_sample,
    oracle_bound, stein_posterior_block, BlockPosterior, BlockwiseStein, SteinPosteriorDraw,
};
pub use truncgamma::{truncated_gamma_sample, TruncatedGamma};
