//! Data-generating models and seeded Monte Carlo experiments for Type I
//! error and power.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::{run_test, Strategy, TestConfig};
use crate::model::Dataset;
use crate::normal;
use crate::rng::derive_seed;

/// Default number of Monte Carlo draws per test inside experiments.
pub const EXPERIMENT_DRAWS: u64 = 511;

/// A model parameter that is either fixed or a power of the sample size,
/// written `0.5`, `n^-1/3` or `1.5*n^-0.5`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Rate {
    Fixed(f64),
    /// `scale * n^exponent`
    Power { scale: f64, exponent: f64 },
}

impl Rate {
    pub fn at(self, n: usize) -> f64 {
        match self {
            Self::Fixed(v) => v,
            Self::Power { scale, exponent } => scale * (n as f64).powf(exponent),
        }
    }
}

impl From<f64> for Rate {
    fn from(v: f64) -> Self {
        Self::Fixed(v)
    }
}

impl fmt::Display for Rate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Fixed(v) => write!(f, "{v}"),
            Self::Power { scale, exponent } if *scale == 1.0 => write!(f, "n^{exponent}"),
            Self::Power { scale, exponent } => write!(f, "{scale}*n^{exponent}"),
        }
    }
}

fn parse_number(s: &str) -> Option<f64> {
    match s.split_once('/') {
        Some((a, b)) => {
            let (a, b): (f64, f64) = (a.trim().parse().ok()?, b.trim().parse().ok()?);
            (b != 0.0).then(|| a / b)
        }
        None => s.trim().parse().ok(),
    }
    .filter(|v: &f64| v.is_finite())
}

impl FromStr for Rate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidParameter(format!("invalid rate `{s}`"));
        let t = s.trim();
        let Some((head, exponent)) = t.split_once("n^") else {
            return parse_number(t).map(Self::Fixed).ok_or_else(bad);
        };
        let exponent = parse_number(exponent).ok_or_else(bad)?;
        let head = head.trim();
        let scale = if head.is_empty() {
            1.0
        } else {
            parse_number(head.strip_suffix('*').ok_or_else(bad)?).ok_or_else(bad)?
        };
        Ok(Self::Power { scale, exponent })
    }
}

impl From<Rate> for String {
    fn from(r: Rate) -> Self {
        r.to_string()
    }
}

impl TryFrom<String> for Rate {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

/// Mean shape of the additive null model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MuShape {
    Identity,
    GaussCdf,
}

impl MuShape {
    pub fn eval(self, t: f64) -> f64 {
        match self {
            Self::Identity => t,
            Self::GaussCdf => normal::cdf(t),
        }
    }
}

impl fmt::Display for MuShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Identity => "identity",
            Self::GaussCdf => "gauss_cdf",
        })
    }
}

impl FromStr for MuShape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "identity" => Ok(Self::Identity),
            "gauss_cdf" => Ok(Self::GaussCdf),
            other => Err(Error::InvalidParameter(format!("unknown mean shape `{other}`"))),
        }
    }
}

/// Conditional law of `X` given `(Y, Z)`, with `zeta ~ N(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ModelKind {
    /// `Y, Z` independent standard normal; `X = mu(gamma Z) + zeta`.
    NullAdditive { mu: MuShape, gamma: f64 },
    /// `(Y, Z)` standard bivariate normal with correlation `rho`;
    /// `X = beta Y + gamma Z + zeta`.
    PartialLinear { beta: Rate, gamma: f64, rho: f64 },
    /// `Y ~ U[-1, 1]` independent of `Z ~ N(0, 1)`;
    /// `X = Z + beta Y + sigma zeta`.
    BoundedPartialLinear { beta: Rate, sigma: f64 },
}

/// A model together with its sample size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    #[serde(flatten)]
    pub kind: ModelKind,
    pub n: usize,
}

impl ModelSpec {
    pub fn new(kind: ModelKind, n: usize) -> Result<Self> {
        let bad = |msg: &str| Err(Error::InvalidParameter(msg.to_string()));
        if n == 0 {
            return bad("n must be positive");
        }
        match kind {
            ModelKind::NullAdditive { gamma, .. } if !(gamma.is_finite() && gamma >= 0.0) => {
                return bad("the additive null model needs gamma >= 0");
            }
            ModelKind::PartialLinear { beta, gamma, rho } => {
                if !(rho > -1.0 && rho < 1.0) {
                    return bad("rho must lie in (-1, 1)");
                }
                if !(beta.at(n).is_finite() && beta.at(n) >= 0.0 && gamma.is_finite()) {
                    return bad("beta must be finite and nonnegative, gamma finite");
                }
            }
            ModelKind::BoundedPartialLinear { beta, sigma } => {
                if !(sigma.is_finite() && sigma > 0.0) {
                    return bad("sigma must be positive");
                }
                if !(beta.at(n).is_finite() && beta.at(n) >= 0.0) {
                    return bad("beta must be finite and nonnegative");
                }
            }
            _ => {}
        }
        Ok(Self { kind, n })
    }

    /// Same model at another sample size.
    pub fn with_n(&self, n: usize) -> Result<Self> {
        Self::new(self.kind, n)
    }

    /// Whether the model satisfies conditional independence with a
    /// stochastically monotone response.
    pub fn is_null(&self) -> bool {
        match self.kind {
            ModelKind::NullAdditive { gamma, .. } => gamma >= 0.0,
            ModelKind::PartialLinear { beta, gamma, .. } => beta.at(self.n) == 0.0 && gamma >= 0.0,
            ModelKind::BoundedPartialLinear { beta, .. } => beta.at(self.n) == 0.0,
        }
    }
}

/// Draws one dataset; bit-identical for equal `(spec, seed)`.
pub fn generate(spec: &ModelSpec, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = spec.n;
    let (mut x, mut y, mut z) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    let gauss = |rng: &mut ChaCha8Rng| -> f64 { rng.sample(StandardNormal) };
    for _ in 0..n {
        let (xi, yi, zi) = match spec.kind {
            ModelKind::NullAdditive { mu, gamma } => {
                let (yi, zi) = (gauss(&mut rng), gauss(&mut rng));
                (mu.eval(gamma * zi) + gauss(&mut rng), yi, zi)
            }
            ModelKind::PartialLinear { beta, gamma, rho } => {
                let (e1, e2) = (gauss(&mut rng), gauss(&mut rng));
                let zi = e1;
                let yi = rho * e1 + (1.0 - rho * rho).sqrt() * e2;
                (beta.at(n) * yi + gamma * zi + gauss(&mut rng), yi, zi)
            }
            ModelKind::BoundedPartialLinear { beta, sigma } => {
                let yi = rng.random_range(-1.0..=1.0);
                let zi = gauss(&mut rng);
                (zi + beta.at(n) * yi + sigma * gauss(&mut rng), yi, zi)
            }
        };
        x.push(xi);
        y.push(yi);
        z.push(zi);
    }
    Dataset::new(x, y, z).expect("generated data are finite and aligned")
}

/// Rejection rate at one level, with its binomial standard error.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub alpha: f64,
    pub rejection_rate: f64,
    pub std_err: f64,
    pub trials: usize,
}

/// Per-trial p-values of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialSet {
    pub p_values: Vec<f64>,
    pub num_pairs: Vec<usize>,
}

impl TrialSet {
    /// Fraction of trials with `p <= alpha`.
    pub fn report(&self, alpha: f64) -> ExperimentReport {
        let trials = self.p_values.len();
        let rejections = self.p_values.iter().filter(|&&p| p <= alpha).count();
        let rate = if trials == 0 {
            0.0
        } else {
            rejections as f64 / trials as f64
        };
        ExperimentReport {
            alpha,
            rejection_rate: rate,
            std_err: (rate * (1.0 - rate) / trials.max(1) as f64).sqrt(),
            trials,
        }
    }
}

/// Data and test seeds of trial `t`.
pub fn trial_seeds(master_seed: u64, t: u64) -> (u64, u64) {
    let s = derive_seed(master_seed, t);
    (derive_seed(s, 0), derive_seed(s, 1))
}

/// Runs `trials` independent generate-and-test cycles in parallel.
///
/// The seed in `cfg` is ignored; every trial derives its own data and
/// test seeds from `master_seed`, so results do not depend on scheduling.
pub fn run_trials(
    spec: &ModelSpec,
    cfg: &TestConfig,
    strategy: &Strategy,
    trials: usize,
    master_seed: u64,
) -> Result<TrialSet> {
    let outcomes: Vec<(f64, usize)> = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let (data_seed, test_seed) = trial_seeds(master_seed, t);
            let d = generate(spec, data_seed);
            let cfg = TestConfig {
                seed: test_seed,
                ..cfg.clone()
            };
            run_test(&d, &cfg, strategy).map(|r| (r.p_value, r.num_pairs))
        })
        .collect::<Result<_>>()?;
    let (p_values, num_pairs) = outcomes.into_iter().unzip();
    Ok(TrialSet { p_values, num_pairs })
}

/// Type I error at `cfg.alpha`. Refuses models outside the null.
pub fn type1_experiment(
    spec: &ModelSpec,
    cfg: &TestConfig,
    strategy: &Strategy,
    trials: usize,
    master_seed: u64,
) -> Result<ExperimentReport> {
    if !spec.is_null() {
        return Err(Error::NotNullModel(format!("{:?}", spec.kind)));
    }
    Ok(run_trials(spec, cfg, strategy, trials, master_seed)?.report(cfg.alpha))
}

/// Rejection rate at `cfg.alpha` under any model.
pub fn power_experiment(
    spec: &ModelSpec,
    cfg: &TestConfig,
    strategy: &Strategy,
    trials: usize,
    master_seed: u64,
) -> Result<ExperimentReport> {
    Ok(run_trials(spec, cfg, strategy, trials, master_seed)?.report(cfg.alpha))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matching::BinCount;

    fn null(gamma: f64, n: usize) -> ModelSpec {
        ModelSpec::new(
            ModelKind::NullAdditive {
                mu: MuShape::Identity,
                gamma,
            },
            n,
        )
        .unwrap()
    }

    fn correlation(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
        let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
        let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
        cov / (va * vb).sqrt()
    }

    #[test]
    fn rate_parsing() {
        assert_eq!("0.5".parse::<Rate>().unwrap(), Rate::Fixed(0.5));
        let r: Rate = "n^-1/3".parse().unwrap();
        assert!((r.at(1000) - 0.1).abs() < 1e-12);
        let r: Rate = "1.5*n^-0.5".parse().unwrap();
        assert!((r.at(5000) - 1.5 / 5000f64.sqrt()).abs() < 1e-15);
        assert_eq!(r.to_string().parse::<Rate>().unwrap(), r);
        assert!("n^".parse::<Rate>().is_err());
        assert!("2n^1".parse::<Rate>().is_err());
    }

    #[test]
    fn null_model_decouples_x() {
        let d = generate(&null(0.0, 2000), 2024);
        assert!(correlation(d.x(), d.z()).abs() < 0.1);
        assert!(correlation(d.x(), d.y()).abs() < 0.1);
    }

    #[test]
    fn partial_linear_null_is_centred_on_z() {
        let n = 2000;
        let spec = ModelSpec::new(
            ModelKind::PartialLinear {
                beta: Rate::Fixed(0.0),
                gamma: 1.0,
                rho: 0.0,
            },
            n,
        )
        .unwrap();
        assert!(spec.is_null());
        let d = generate(&spec, 5);
        let mean: f64 = d.x().iter().zip(d.z()).map(|(x, z)| x - z).sum::<f64>() / n as f64;
        assert!(mean.abs() < 3.0 / (n as f64).sqrt());
    }

    #[test]
    fn correlated_controls() {
        let spec = ModelSpec::new(
            ModelKind::PartialLinear {
                beta: Rate::Fixed(0.3),
                gamma: 0.5,
                rho: 0.6,
            },
            4000,
        )
        .unwrap();
        let d = generate(&spec, 3);
        assert!((correlation(d.y(), d.z()) - 0.6).abs() < 0.05);
        assert!(!spec.is_null());
    }

    #[test]
    fn bounded_model_ranges() {
        let spec = ModelSpec::new(
            ModelKind::BoundedPartialLinear {
                beta: "1.5*n^-0.5".parse().unwrap(),
                sigma: 1.0,
            },
            1000,
        )
        .unwrap();
        let d = generate(&spec, 1);
        assert!(d.y().iter().all(|y| (-1.0..=1.0).contains(y)));
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = null(0.5, 300);
        assert_eq!(generate(&spec, 77), generate(&spec, 77));
        assert_ne!(generate(&spec, 77), generate(&spec, 78));
    }

    #[test]
    fn invalid_specs() {
        assert!(ModelSpec::new(
            ModelKind::NullAdditive {
                mu: MuShape::GaussCdf,
                gamma: -1.0
            },
            10
        )
        .is_err());
        assert!(ModelSpec::new(
            ModelKind::PartialLinear {
                beta: Rate::Fixed(0.1),
                gamma: 0.0,
                rho: 1.0
            },
            10
        )
        .is_err());
        assert!(null(0.0, 1).with_n(0).is_err());
    }

    #[test]
    fn type1_experiment_guards_the_null() {
        let alt = ModelSpec::new(
            ModelKind::PartialLinear {
                beta: Rate::Fixed(1.0),
                gamma: 0.0,
                rho: 0.0,
            },
            50,
        )
        .unwrap();
        let cfg = TestConfig {
            draws: 99,
            ..TestConfig::default()
        };
        assert!(matches!(
            type1_experiment(&alt, &cfg, &Strategy::Neighbour, 5, 1),
            Err(Error::NotNullModel(_))
        ));
        let r = type1_experiment(&null(0.0, 50), &cfg, &Strategy::Neighbour, 1, 1).unwrap();
        assert!(r.rejection_rate == 0.0 || r.rejection_rate == 1.0);
    }

    #[test]
    fn experiments_are_reproducible_and_p_values_bounded() {
        let cfg = TestConfig {
            draws: 63,
            alpha: 0.1,
            ..TestConfig::default()
        };
        let strategy = Strategy::CrossBin(BinCount::Power(2.0 / 3.0));
        let a = run_trials(&null(0.5, 200), &cfg, &strategy, 40, 9).unwrap();
        let b = run_trials(&null(0.5, 200), &cfg, &strategy, 40, 9).unwrap();
        assert_eq!(a, b);
        assert!(a.p_values.iter().all(|&p| (1.0 / 64.0..=1.0).contains(&p)));
        let rep = a.report(0.1);
        let expected = (rep.rejection_rate * (1.0 - rep.rejection_rate) / 40.0).sqrt();
        assert_eq!(rep.std_err, expected);
    }

    #[test]
    fn power_grows_with_signal() {
        let cfg = TestConfig {
            draws: 199,
            alpha: 0.1,
            ..TestConfig::default()
        };
        let spec = |beta: f64| {
            ModelSpec::new(
                ModelKind::PartialLinear {
                    beta: Rate::Fixed(beta),
                    gamma: 0.5,
                    rho: 0.0,
                },
                400,
            )
            .unwrap()
        };
        let weak = power_experiment(&spec(0.0), &cfg, &Strategy::Neighbour, 200, 4).unwrap();
        let strong = power_experiment(&spec(1.0), &cfg, &Strategy::Neighbour, 200, 4).unwrap();
        assert!(strong.rejection_rate > weak.rejection_rate + 0.3);
    }
}
