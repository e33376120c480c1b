//! Conditional independence tests under stochastic monotonicity by
//! randomly swapping the responses within matched pairs.
//!
//! A test has three ingredients: a [`Matching`] of observations whose
//! controls are ordered, nonnegative [`WeightVector`] weights, and an
//! anti-monotone [`Kernel`]. The p-value compares the weighted kernel sum
//! with its values under within-pair swaps, either exhaustively or by
//! Monte Carlo.
//!
//! ```
//! use pairswap::{run_test, Dataset, Method, Strategy, TestConfig};
//!
//! let d = Dataset::new(vec![1.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]).unwrap();
//! let cfg = TestConfig { method: Method::Exact, ..TestConfig::default() };
//! let result = run_test(&d, &cfg, &Strategy::Neighbour).unwrap();
//! assert_eq!(result.p_value, 0.5);
//! ```

pub mod checks;
pub mod error;
pub mod inference;
pub mod isotonic;
pub mod kernels;
pub mod matching;
pub mod model;
pub mod normal;
pub mod rng;
pub mod simulation;
pub mod subsample;

pub use error::{Error, Result};
pub use inference::{
    exact_p_value, monte_carlo_p_value, run_test, statistic, theoretical_power, Strategy,
    TestConfig,
};
pub use kernels::{check_anti_monotonicity, eval_kernel, CustomKernel, Kernel};
pub use model::{
    apply_swap, validate_matching, validate_matching_multivariate, validate_matching_on, Dataset,
    Matching, Method, SwapVector, TestResult, WeightVector,
};
