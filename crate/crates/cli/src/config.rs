//! Simulation sweep configuration files (TOML).
//!
//! ```toml
//! seed = 7                      # master seed, default 0
//!
//! [[sweep]]
//! name = "null-desk"            # unique
//! kind = "type1"                # or "power"
//! model = "null_additive"       # or "partial_linear", "bounded_partial_linear"
//! mu = ["identity", "gauss_cdf"]
//! gamma = [0.0, 0.5, 2.0]
//! n = 500
//! strategies = ["neighbour", "crossbin:n^2/3"]
//! alpha = [0.05, 0.1]
//! trials = 2000
//! draws = 511                   # default 511
//! kernel = "linear"             # default linear
//! ```
//!
//! `beta` (a number or a rate such as `"n^-1/3"`), `rho` and `sigma` apply
//! to the partially linear models. Every parameter except `name`, `kind`,
//! `model`, `trials`, `draws` and `kernel` accepts a single value or a
//! list; the sweep runs over all combinations.

use std::collections::HashSet;

use serde::Deserialize;

use pairswap::simulation::{MuShape, Rate, EXPERIMENT_DRAWS};

use crate::error::{CliError, CliResult};

const TOP_KEYS: &[&str] = &["seed", "sweep"];
const SWEEP_KEYS: &[&str] = &[
    "name", "kind", "model", "mu", "gamma", "beta", "rho", "sigma", "n", "strategies", "alpha",
    "trials", "draws", "kernel",
];

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T> OneOrMany<T> {
    fn into_vec(self) -> Vec<T> {
        match self {
            Self::One(v) => vec![v],
            Self::Many(v) => v,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
enum RateValue {
    Number(f64),
    Text(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    Type1,
    Power,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelName {
    NullAdditive,
    PartialLinear,
    BoundedPartialLinear,
}

#[derive(Debug, Deserialize)]
struct RawSweep {
    name: String,
    kind: SweepKind,
    model: ModelName,
    mu: Option<OneOrMany<MuShape>>,
    gamma: Option<OneOrMany<f64>>,
    beta: Option<OneOrMany<RateValue>>,
    rho: Option<OneOrMany<f64>>,
    sigma: Option<OneOrMany<f64>>,
    n: OneOrMany<usize>,
    strategies: OneOrMany<String>,
    alpha: OneOrMany<f64>,
    trials: usize,
    draws: Option<u64>,
    kernel: Option<String>,
}

#[derive(Debug, Deserialize)]
struct RawConfig {
    seed: Option<u64>,
    #[serde(default)]
    sweep: Vec<RawSweep>,
}

/// One declared sweep with defaults filled in.
#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub name: String,
    pub kind: SweepKind,
    pub model: ModelName,
    pub mu: Vec<MuShape>,
    pub gamma: Vec<f64>,
    pub beta: Vec<Rate>,
    pub rho: Vec<f64>,
    pub sigma: Vec<f64>,
    pub n: Vec<usize>,
    pub strategies: Vec<String>,
    pub alpha: Vec<f64>,
    pub trials: usize,
    pub draws: u64,
    pub kernel: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub seed: u64,
    pub sweeps: Vec<Sweep>,
}

fn unknown_keys(doc: &toml::Table) -> Vec<String> {
    let mut unknown: Vec<String> = doc
        .keys()
        .filter(|k| !TOP_KEYS.contains(&k.as_str()))
        .cloned()
        .collect();
    if let Some(toml::Value::Array(sweeps)) = doc.get("sweep") {
        for (i, s) in sweeps.iter().enumerate() {
            if let toml::Value::Table(t) = s {
                unknown.extend(
                    t.keys()
                        .filter(|k| !SWEEP_KEYS.contains(&k.as_str()))
                        .map(|k| format!("sweep[{i}].{k}")),
                );
            }
        }
    }
    unknown
}

fn parse_rate(v: RateValue) -> CliResult<Rate> {
    match v {
        RateValue::Number(x) => Ok(Rate::Fixed(x)),
        RateValue::Text(s) => s.parse().map_err(|e: pairswap::Error| CliError::Usage(e.to_string())),
    }
}

impl SimConfig {
    pub fn parse(text: &str) -> CliResult<Self> {
        let doc: toml::Table = text
            .parse()
            .map_err(|e| CliError::Usage(format!("invalid config: {e}")))?;
        let unknown = unknown_keys(&doc);
        if !unknown.is_empty() {
            return Err(CliError::Usage(format!(
                "unknown config keys: {}",
                unknown.join(", ")
            )));
        }
        let raw: RawConfig = toml::Value::Table(doc)
            .try_into()
            .map_err(|e| CliError::Usage(format!("invalid config: {e}")))?;

        let mut seen = HashSet::new();
        let mut sweeps = Vec::with_capacity(raw.sweep.len());
        for s in raw.sweep {
            if !seen.insert(s.name.clone()) {
                return Err(CliError::Usage(format!("duplicate sweep name `{}`", s.name)));
            }
            let require = |present: bool, key: &str| {
                if present {
                    Ok(())
                } else {
                    Err(CliError::Usage(format!("sweep `{}` needs `{key}`", s.name)))
                }
            };
            match s.model {
                ModelName::NullAdditive => {}
                ModelName::PartialLinear => require(s.beta.is_some(), "beta")?,
                ModelName::BoundedPartialLinear => require(s.beta.is_some(), "beta")?,
            }
            let beta = s
                .beta
                .map(OneOrMany::into_vec)
                .unwrap_or_else(|| vec![RateValue::Number(0.0)])
                .into_iter()
                .map(parse_rate)
                .collect::<CliResult<_>>()?;
            sweeps.push(Sweep {
                mu: s.mu.map_or(vec![MuShape::Identity], OneOrMany::into_vec),
                gamma: s.gamma.map_or(vec![0.0], OneOrMany::into_vec),
                beta,
                rho: s.rho.map_or(vec![0.0], OneOrMany::into_vec),
                sigma: s.sigma.map_or(vec![1.0], OneOrMany::into_vec),
                n: s.n.into_vec(),
                strategies: s.strategies.into_vec(),
                alpha: s.alpha.into_vec(),
                trials: s.trials,
                draws: s.draws.unwrap_or(EXPERIMENT_DRAWS),
                kernel: s.kernel.unwrap_or_else(|| "linear".into()),
                name: s.name,
                kind: s.kind,
                model: s.model,
            });
        }
        Ok(Self {
            seed: raw.seed.unwrap_or(0),
            sweeps,
        })
    }
}
