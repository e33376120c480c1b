//! Standard Gaussian distribution helpers.

use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::erf::erfc;

/// Standard normal CDF, `Phi(x) = erfc(-x / sqrt 2) / 2`.
pub fn cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Upper tail `1 - Phi(x)`, accurate in the far right tail.
pub fn sf(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

/// Inverse CDF.
pub fn quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}

/// Inverse of the upper tail: the `z` with `1 - Phi(z) = alpha`.
pub fn upper_quantile(alpha: f64) -> f64 {
    -quantile(alpha)
}
