//! Matching and weighting strategies.

pub mod blossom;
mod brute;
mod heuristic;
mod median;
mod plugin;

pub use brute::{brute_force_best_matching, brute_force_max_matching, BRUTE_FORCE_MAX_N};
pub use heuristic::{cross_bin_matching, neighbour_matching, BinCount, CrossBinConfig};
pub use median::isotonic_median_matching;
pub use plugin::{
    fit_plugin_moments, max_weight_matching, oracle_weights, FnMoments, MomentEstimates,
    PartialLinearFit, PluginMoments,
};
