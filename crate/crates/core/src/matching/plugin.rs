//! Oracle and plug-in matchings: an exact maximum-weight matching whose
//! edge scores come from estimates of the conditional pair moments.

use crate::error::{Error, Result};
use crate::isotonic::{pava_l2, IsotonicFit};
use crate::kernels::Kernel;
use crate::matching::blossom;
use crate::model::{Dataset, Matching, WeightVector};

/// Estimates of the conditional mean and variance of `psi(X_i, X_j)` given
/// the covariates and controls.
pub trait MomentEstimates {
    fn e_hat(&self, i: usize, j: usize) -> f64;
    /// Must be positive for every queried pair.
    fn v_hat(&self, i: usize, j: usize) -> f64;
}

/// Moment estimates given by a pair of closures.
pub struct FnMoments<E, V> {
    pub e_hat: E,
    pub v_hat: V,
}

impl<E, V> MomentEstimates for FnMoments<E, V>
where
    E: Fn(usize, usize) -> f64,
    V: Fn(usize, usize) -> f64,
{
    fn e_hat(&self, i: usize, j: usize) -> f64 {
        (self.e_hat)(i, j)
    }

    fn v_hat(&self, i: usize, j: usize) -> f64 {
        (self.v_hat)(i, j)
    }
}

/// Weight maximising the one-pair signal-to-noise ratio: `max(E, 0) / V`.
pub fn oracle_weights(e: f64, v: f64) -> Result<f64> {
    if !(v > 0.0) {
        return Err(Error::NonPositiveVariance(v));
    }
    Ok(e.max(0.0) / v)
}

/// Target magnitude of the largest quantized edge score.
const SCORE_SCALE: f64 = (1u64 << 40) as f64;

/// Exact maximum-weight matching in the allowed pair set with edge score
/// `W^2`, where `W = max(E, 0) / V`. Returns the pairs with weights `W`.
///
/// For tied controls both orientations are allowed, and the one with the
/// larger score is used (the lower index wins exact ties).
pub fn max_weight_matching<M: MomentEstimates + ?Sized>(
    d: &Dataset,
    me: &M,
) -> Result<(Matching, WeightVector)> {
    let n = d.len();
    if n < 2 {
        return Err(Error::TooFewObservations {
            required: 2,
            actual: n,
        });
    }
    let z = d.z();
    let weight = |i: usize, j: usize| oracle_weights(me.e_hat(i, j), me.v_hat(i, j));

    // (i, j, W) with the orientation already chosen
    let mut candidates: Vec<(usize, usize, f64)> = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let best = if z[i] < z[j] {
                (i, j, weight(i, j)?)
            } else if z[j] < z[i] {
                (j, i, weight(j, i)?)
            } else {
                let (fwd, rev) = (weight(i, j)?, weight(j, i)?);
                if rev > fwd {
                    (j, i, rev)
                } else {
                    (i, j, fwd)
                }
            };
            if best.2 > 0.0 {
                candidates.push(best);
            }
        }
    }
    let max_score = candidates.iter().map(|c| c.2 * c.2).fold(0.0, f64::max);
    if max_score == 0.0 || !max_score.is_finite() {
        return Ok((Matching::empty(), WeightVector::new(Vec::new())?));
    }

    let scale = SCORE_SCALE / max_score;
    let edges: Vec<blossom::Edge> = candidates
        .iter()
        .filter_map(|&(i, j, w)| {
            let q = (w * w * scale).round() as i64;
            (q > 0).then_some((i, j, q))
        })
        .collect();
    let mate = blossom::max_weight_matching(n, &edges);

    let chosen: std::collections::HashMap<(usize, usize), (usize, usize, f64)> = candidates
        .into_iter()
        .map(|c| ((c.0.min(c.1), c.0.max(c.1)), c))
        .collect();
    let mut pairs = Vec::new();
    let mut weights = Vec::new();
    for (v, m) in mate.iter().enumerate() {
        if let Some(u) = *m {
            if v < u {
                let (i, j, w) = chosen[&(v, u)];
                pairs.push((i, j));
                weights.push(w);
            }
        }
    }
    Ok((Matching::new(pairs)?, WeightVector::new(weights)?))
}

/// Backfitted partially linear model `X ~ a * Y + g(Z)` with `g`
/// nondecreasing, and the residual variance.
#[derive(Debug, Clone)]
pub struct PartialLinearFit {
    slope: f64,
    g: IsotonicFit,
    sigma2: f64,
    iterations: usize,
}

impl PartialLinearFit {
    pub const MAX_ITERATIONS: usize = 20;
    pub const TOLERANCE: f64 = 1e-8;

    /// Fitted coefficient `a` of the covariate.
    pub fn slope(&self) -> f64 {
        self.slope
    }

    /// Residual mean square.
    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// Fitted conditional mean `a * y + g(z)`; `g` is a step function
    /// between training controls.
    pub fn mean(&self, y: f64, z: f64) -> f64 {
        self.slope * y + self.g.predict(z)
    }

    /// Moment estimates for the pairs of `d`:
    /// `E_ij = mu_i - mu_j`, `V_ij = 2 sigma^2`.
    pub fn moments(&self, d: &Dataset) -> PluginMoments {
        PluginMoments {
            mu: d
                .y()
                .iter()
                .zip(d.z())
                .map(|(&y, &z)| self.mean(y, z))
                .collect(),
            variance: 2.0 * self.sigma2,
        }
    }
}

/// Moments from a [`PartialLinearFit`] evaluated on a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct PluginMoments {
    pub mu: Vec<f64>,
    pub variance: f64,
}

impl MomentEstimates for PluginMoments {
    fn e_hat(&self, i: usize, j: usize) -> f64 {
        self.mu[i] - self.mu[j]
    }

    fn v_hat(&self, _i: usize, _j: usize) -> f64 {
        self.variance
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Least-squares slope of `r` on `y`, or `None` if `y` has no spread.
fn ols_slope(y: &[f64], r: &[f64]) -> Option<f64> {
    let (my, mr) = (mean(y), mean(r));
    let sxx: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    let sxy: f64 = y.iter().zip(r).map(|(a, b)| (a - my) * (b - mr)).sum();
    let scale: f64 = y.iter().map(|v| v * v).sum::<f64>().max(f64::MIN_POSITIVE);
    (sxx > 1e-12 * scale).then(|| sxy / sxx)
}

/// Residuals of `v` after a linear fit on `z` (with intercept).
fn residualize(v: &[f64], z: &[f64]) -> Vec<f64> {
    let slope = ols_slope(z, v).unwrap_or(0.0);
    let (mv, mz) = (mean(v), mean(z));
    v.iter()
        .zip(z)
        .map(|(a, b)| a - mv - slope * (b - mz))
        .collect()
}

/// Fits the built-in plug-in model on a training sample.
///
/// Backfitting alternates a least-squares update of `a` with an isotonic
/// update of `g`, starting from the coefficient of `Y` in a linear
/// regression on `(Y, Z)`. Only the linear kernel is supported.
pub fn fit_plugin_moments(train: &Dataset, kernel: &Kernel) -> Result<PartialLinearFit> {
    if !kernel.is_linear() {
        return Err(Error::UnsupportedKernel);
    }
    let n = train.len();
    if n < 3 {
        return Err(Error::TooFewObservations {
            required: 3,
            actual: n,
        });
    }
    let (x, y, z) = (train.x(), train.y(), train.z());
    let degenerate = || {
        Error::DegenerateDesign(
            "the covariate is constant; supply moment estimates directly".into(),
        )
    };
    let mut slope = ols_slope(y, x).ok_or_else(degenerate)?;
    let (yr, xr) = (residualize(y, z), residualize(x, z));
    if let Some(partial) = ols_slope(&yr, &xr) {
        slope = partial;
    }

    let partial_residual = |a: f64| -> Vec<f64> { x.iter().zip(y).map(|(xi, yi)| xi - a * yi).collect() };
    let mut g = pava_l2(&partial_residual(slope), z, None)?;
    let mut iterations = 0;
    while iterations < PartialLinearFit::MAX_ITERATIONS {
        iterations += 1;
        let target: Vec<f64> = x.iter().zip(&g.fitted).map(|(xi, gi)| xi - gi).collect();
        let next = ols_slope(y, &target).ok_or_else(degenerate)?;
        let change = (next - slope).abs();
        slope = next;
        g = pava_l2(&partial_residual(slope), z, None)?;
        if change < PartialLinearFit::TOLERANCE {
            break;
        }
    }

    let rss: f64 = x
        .iter()
        .zip(y)
        .zip(&g.fitted)
        .map(|((xi, yi), gi)| (xi - slope * yi - gi).powi(2))
        .sum();
    let mx = mean(x);
    let var_x = x.iter().map(|v| (v - mx).powi(2)).sum::<f64>() / n as f64;
    let floor = (1e-12 * var_x).max(f64::MIN_POSITIVE);
    Ok(PartialLinearFit {
        slope,
        g,
        sigma2: (rss / n as f64).max(floor),
        iterations,
    })
}
