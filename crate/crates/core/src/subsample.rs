//! Repeated half-sample studies, optionally with a monotone synthetic
//! response refitted on each complement.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::inference::{run_test, Strategy, TestConfig};
use crate::isotonic::MonotoneBernoulli;
use crate::model::Dataset;
use crate::rng::derive_seed;

/// Levels at which rejection fractions are reported.
pub const REPORT_LEVELS: [f64; 3] = [0.01, 0.05, 0.1];

#[derive(Debug, Clone)]
pub struct SubsampleConfig {
    pub repeats: usize,
    /// Replace `X` on each half-sample by a draw from the monotone
    /// Bernoulli fit on the complement. Requires binary `X`.
    pub synthetic: bool,
    pub seed: u64,
    pub test: TestConfig,
    pub strategy: Strategy,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Rejection {
    pub alpha: f64,
    pub fraction: f64,
    pub std_err: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubsampleReport {
    pub repeats: usize,
    pub synthetic: bool,
    pub subsample_size: usize,
    pub mean_p_value: f64,
    /// Standard error of the mean p-value across repeats.
    pub std_err: f64,
    pub rejections: Vec<Rejection>,
    pub p_values: Vec<f64>,
}

impl SubsampleReport {
    /// Fraction of repeats with `p <= alpha` and its binomial standard error.
    pub fn rejection_at(&self, alpha: f64) -> Rejection {
        let r = self.p_values.len() as f64;
        let fraction = self.p_values.iter().filter(|&&p| p <= alpha).count() as f64 / r;
        Rejection {
            alpha,
            fraction,
            std_err: (fraction * (1.0 - fraction) / r).sqrt(),
        }
    }
}

/// One repeat: draw the half-sample, optionally synthesise `X`, run the test.
fn one_repeat(d: &Dataset, cfg: &SubsampleConfig, r: u64) -> Result<f64> {
    let n = d.len();
    let seed = derive_seed(cfg.seed, r);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0));
    let mut chosen = sample(&mut rng, n, n / 2).into_vec();
    chosen.sort_unstable();
    let mut sub = d.select(&chosen)?;
    if cfg.synthetic {
        let mut in_sub = vec![false; n];
        chosen.iter().for_each(|&i| in_sub[i] = true);
        let rest: Vec<usize> = (0..n).filter(|&i| !in_sub[i]).collect();
        let complement = d.select(&rest)?;
        let model = MonotoneBernoulli::fit(complement.x(), complement.z())?;
        sub = sub.with_x(model.sample(sub.z(), derive_seed(seed, 1)))?;
    }
    let test = TestConfig {
        seed: derive_seed(seed, 2),
        ..cfg.test.clone()
    };
    Ok(run_test(&sub, &test, &cfg.strategy)?.p_value)
}

/// Runs `cfg.repeats` half-sample tests and summarises their p-values.
pub fn subsample_study(d: &Dataset, cfg: &SubsampleConfig) -> Result<SubsampleReport> {
    if d.len() < 4 {
        return Err(Error::TooFewObservations {
            required: 4,
            actual: d.len(),
        });
    }
    if cfg.repeats == 0 {
        return Err(Error::InvalidParameter("repeats must be at least 1".into()));
    }
    if cfg.synthetic {
        if let Some(index) = d.x().iter().position(|&v| v != 0.0 && v != 1.0) {
            return Err(Error::NonBinary {
                index,
                value: d.x()[index],
            });
        }
    }
    let p_values: Vec<f64> = (0..cfg.repeats as u64)
        .into_par_iter()
        .map(|r| one_repeat(d, cfg, r))
        .collect::<Result<_>>()?;
    let r = p_values.len() as f64;
    let mean = p_values.iter().sum::<f64>() / r;
    let var = if p_values.len() > 1 {
        p_values.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (r - 1.0)
    } else {
        0.0
    };
    let mut report = SubsampleReport {
        repeats: cfg.repeats,
        synthetic: cfg.synthetic,
        subsample_size: d.len() / 2,
        mean_p_value: mean,
        std_err: (var / r).sqrt(),
        rejections: Vec::new(),
        p_values,
    };
    report.rejections = REPORT_LEVELS.iter().map(|&a| report.rejection_at(a)).collect();
    Ok(report)
}
