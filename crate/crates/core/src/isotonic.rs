//! Order-constrained numerics: least-squares isotonic regression, the
//! max-min median projection, empirical isotonic signal-to-noise, the
//! quantile deviance, and monotone synthetic controls.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::sort_permutation;

/// Least-squares nondecreasing fit of `values` against `z`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IsotonicFit {
    /// Fitted values in the caller's original order.
    pub fitted: Vec<f64>,
    /// `||values - fitted||_2`
    pub residual_norm: f64,
    knots: Vec<f64>,
    levels: Vec<f64>,
}

impl IsotonicFit {
    /// Step-function extension of the fit to a new control value: the level
    /// of the largest fitted knot `<= z`, or the first level below the range.
    pub fn predict(&self, z: f64) -> f64 {
        let idx = self.knots.partition_point(|&k| k <= z);
        self.levels[idx.saturating_sub(1)]
    }

    /// Distinct sorted control values and their fitted levels.
    pub fn steps(&self) -> (&[f64], &[f64]) {
        (&self.knots, &self.levels)
    }
}

/// Groups of tied `z` values in sorted order, as index lists.
fn tie_groups(z: &[f64]) -> Vec<Vec<usize>> {
    let order = sort_permutation(z);
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for i in order {
        match groups.last_mut() {
            Some(g) if z[g[0]] == z[i] => g.push(i),
            _ => groups.push(vec![i]),
        }
    }
    groups
}

fn check_lengths(a: usize, b: usize) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            expected: b,
            actual: a,
        })
    }
}

/// Pool-adjacent-violators on `(value, weight)` points already in order.
fn pava_sorted(values: &[f64], weights: &[f64]) -> Vec<f64> {
    // each block: (weight, weighted mean, number of points)
    let mut blocks: Vec<(f64, f64, usize)> = Vec::with_capacity(values.len());
    for (&v, &w) in values.iter().zip(weights) {
        blocks.push((w, v, 1));
        while blocks.len() > 1 {
            let (w2, m2, c2) = blocks[blocks.len() - 1];
            let (w1, m1, c1) = blocks[blocks.len() - 2];
            if m1 <= m2 {
                break;
            }
            blocks.pop();
            let w = w1 + w2;
            *blocks.last_mut().unwrap() = (w, (w1 * m1 + w2 * m2) / w, c1 + c2);
        }
    }
    blocks
        .into_iter()
        .flat_map(|(_, m, c)| std::iter::repeat_n(m, c))
        .collect()
}

/// L2 projection of `values` onto vectors nondecreasing in `z`.
///
/// `z` need not be sorted. Points with equal `z` are pooled first, so they
/// always share a fitted value. Optional `weights` must be positive.
pub fn pava_l2(values: &[f64], z: &[f64], weights: Option<&[f64]>) -> Result<IsotonicFit> {
    check_lengths(values.len(), z.len())?;
    if let Some(w) = weights {
        check_lengths(w.len(), z.len())?;
        if let Some((index, &value)) = w
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v > 0.0))
        {
            return Err(Error::InvalidWeight { index, value });
        }
    }
    if values.is_empty() {
        return Ok(IsotonicFit {
            fitted: Vec::new(),
            residual_norm: 0.0,
            knots: Vec::new(),
            levels: vec![0.0],
        });
    }
    let weight = |i: usize| weights.map_or(1.0, |w| w[i]);
    let groups = tie_groups(z);
    let (group_means, group_weights): (Vec<f64>, Vec<f64>) = groups
        .iter()
        .map(|g| {
            let w: f64 = g.iter().map(|&i| weight(i)).sum();
            let s: f64 = g.iter().map(|&i| weight(i) * values[i]).sum();
            (s / w, w)
        })
        .unzip();
    let levels = pava_sorted(&group_means, &group_weights);

    let mut fitted = vec![0.0; values.len()];
    for (g, &level) in groups.iter().zip(&levels) {
        for &i in g {
            fitted[i] = level;
        }
    }
    let residual_norm = values
        .iter()
        .zip(&fitted)
        .map(|(v, f)| (v - f).powi(2))
        .sum::<f64>()
        .sqrt();
    let knots = groups.iter().map(|g| z[g[0]]).collect();
    Ok(IsotonicFit {
        fitted,
        residual_norm,
        knots,
        levels,
    })
}

/// The same least-squares fit through the max-min formula
/// `fit_i = max_{a <= i} min_{b >= i} mean(values[a..=b])` over tie groups.
///
/// `O(n^2)`; an independent route to [`pava_l2`] for cross-checking.
pub fn isotonic_minmax_l2(values: &[f64], z: &[f64]) -> Result<Vec<f64>> {
    check_lengths(values.len(), z.len())?;
    let groups = tie_groups(z);
    let g = groups.len();
    let sums: Vec<f64> = groups
        .iter()
        .map(|gr| gr.iter().map(|&i| values[i]).sum())
        .collect();
    let counts: Vec<f64> = groups.iter().map(|gr| gr.len() as f64).collect();
    let mut best = vec![f64::NEG_INFINITY; g];
    for a in 0..g {
        // means of groups a..=b for every b, then suffix minima
        let mut means = Vec::with_capacity(g - a);
        let (mut s, mut c) = (0.0, 0.0);
        for b in a..g {
            s += sums[b];
            c += counts[b];
            means.push(s / c);
        }
        let mut running = f64::INFINITY;
        for b in (a..g).rev() {
            running = running.min(means[b - a]);
            best[b] = best[b].max(running);
        }
    }
    let mut fitted = vec![0.0; values.len()];
    for (gr, &level) in groups.iter().zip(&best) {
        for &i in gr {
            fitted[i] = level;
        }
    }
    Ok(fitted)
}

/// Distance of `mu` from the nondecreasing-in-`z` cone, in units of `sigma`.
pub fn empirical_isnr(mu: &[f64], z: &[f64], sigma: f64) -> Result<f64> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "sigma must be positive, got {sigma}"
        )));
    }
    Ok(pava_l2(mu, z, None)?.residual_norm / sigma)
}

/// Median with the midpoint convention for even lengths. `sorted` must be
/// sorted and non-empty.
fn sorted_median(sorted: &[f64]) -> f64 {
    let m = sorted.len();
    if m % 2 == 1 {
        sorted[m / 2]
    } else {
        0.5 * (sorted[m / 2 - 1] + sorted[m / 2])
    }
}

/// Median of an arbitrary non-empty slice (midpoint convention).
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    sorted_median(&v)
}

pub(crate) fn is_sorted(z: &[f64]) -> bool {
    z.windows(2).all(|w| w[0] <= w[1])
}

/// Max-min median projection onto vectors nondecreasing in `z`:
/// `u~_i = max_{z_j <= z_i} min_{z_k >= z_i} Med(u_l : z_j <= z_l <= z_k)`.
///
/// `z` must be sorted ascending. `O(n^3)` in the worst case.
pub fn isotonic_l1_projection(u: &[f64], z: &[f64]) -> Result<Vec<f64>> {
    check_lengths(u.len(), z.len())?;
    if !is_sorted(z) {
        return Err(Error::UnsortedControl);
    }
    let n = u.len();
    // contiguous ranges of tied z
    let mut starts = Vec::new();
    for i in 0..n {
        if i == 0 || z[i] != z[i - 1] {
            starts.push(i);
        }
    }
    let g = starts.len();
    let end = |grp: usize| if grp + 1 < g { starts[grp + 1] } else { n };

    let mut best = vec![f64::NEG_INFINITY; g];
    let mut window: Vec<f64> = Vec::with_capacity(n);
    let mut meds = Vec::with_capacity(g);
    for a in 0..g {
        window.clear();
        meds.clear();
        for b in a..g {
            for &v in &u[starts[b]..end(b)] {
                let at = window.partition_point(|&w| w <= v);
                window.insert(at, v);
            }
            meds.push(sorted_median(&window));
        }
        let mut running = f64::INFINITY;
        for b in (a..g).rev() {
            running = running.min(meds[b - a]);
            best[b] = best[b].max(running);
        }
    }
    let mut out = vec![0.0; n];
    for grp in 0..g {
        out[starts[grp]..end(grp)].fill(best[grp]);
    }
    Ok(out)
}

/// A finitely supported distribution on the real line.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDistribution {
    values: Vec<f64>,
    /// cumulative probabilities; the last entry is exactly 1
    cumulative: Vec<f64>,
    probs: Vec<f64>,
}

impl DiscreteDistribution {
    /// Empirical distribution of a sample (each point has mass `1/n`).
    pub fn from_sample(sample: &[f64]) -> Result<Self> {
        let n = sample.len();
        Self::from_table(sample, &vec![1.0 / n as f64; n])
    }

    /// Atoms `values` with masses proportional to `weights`.
    pub fn from_table(values: &[f64], weights: &[f64]) -> Result<Self> {
        check_lengths(weights.len(), values.len())?;
        if values.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if let Some(row) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                column: "values",
                row,
            });
        }
        if let Some((index, &value)) = weights
            .iter()
            .enumerate()
            .find(|(_, w)| !(w.is_finite() && **w >= 0.0))
        {
            return Err(Error::InvalidWeight { index, value });
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::InvalidParameter("total mass is zero".into()));
        }
        let order = sort_permutation(values);
        let values: Vec<f64> = order.iter().map(|&i| values[i]).collect();
        let probs: Vec<f64> = order.iter().map(|&i| weights[i] / total).collect();
        let mut cumulative: Vec<f64> = probs
            .iter()
            .scan(0.0, |acc, p| {
                *acc += p;
                Some(*acc)
            })
            .collect();
        *cumulative.last_mut().unwrap() = 1.0;
        Ok(Self {
            values,
            cumulative,
            probs,
        })
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().zip(&self.probs).map(|(v, p)| v * p).sum()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.values
            .iter()
            .zip(&self.probs)
            .map(|(v, p)| p * (v - m).powi(2))
            .sum()
    }

    /// Generalised inverse `inf { t : F(t) >= q }` for `q` in `(0, 1]`.
    pub fn quantile(&self, q: f64) -> f64 {
        let idx = self.cumulative.partition_point(|&c| c < q);
        self.values[idx.min(self.values.len() - 1)]
    }

    /// Reflection about the mean, mixed half-and-half with the original.
    pub fn symmetrized(&self) -> Self {
        let m = self.mean();
        let mut values = self.values.clone();
        values.extend(self.values.iter().map(|v| 2.0 * m - v));
        let mut weights = self.probs.clone();
        weights.extend(self.probs.iter().copied());
        Self::from_table(&values, &weights).expect("reflection keeps the table valid")
    }

    /// `E_{q ~ U(0,1)} [(F^{-1}(1-q) - F^{-1}(q))^2]`, integrated exactly
    /// over the pieces where both quantile functions are constant.
    pub fn deviance(&self) -> f64 {
        let mut cuts: Vec<f64> = Vec::with_capacity(2 * self.cumulative.len() + 2);
        cuts.push(0.0);
        for &c in &self.cumulative {
            cuts.push(c);
            cuts.push(1.0 - c);
        }
        cuts.push(1.0);
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        cuts.windows(2)
            .filter(|w| w[1] > w[0])
            .map(|w| {
                let mid = 0.5 * (w[0] + w[1]);
                let gap = self.quantile(1.0 - mid) - self.quantile(mid);
                (w[1] - w[0]) * gap * gap
            })
            .sum()
    }
}

/// Deviance of the empirical distribution of `sample`.
pub fn deviance(sample: &[f64]) -> Result<f64> {
    Ok(DiscreteDistribution::from_sample(sample)?.deviance())
}

fn check_binary(x: &[f64]) -> Result<()> {
    match x.iter().position(|&v| v != 0.0 && v != 1.0) {
        Some(index) => Err(Error::NonBinary {
            index,
            value: x[index],
        }),
        None => Ok(()),
    }
}

/// Monotone model for `P(X = 1 | Z)` fitted by isotonic regression.
#[derive(Debug, Clone)]
pub struct MonotoneBernoulli {
    fit: IsotonicFit,
}

impl MonotoneBernoulli {
    pub fn fit(x_binary: &[f64], z: &[f64]) -> Result<Self> {
        check_binary(x_binary)?;
        if x_binary.is_empty() {
            return Err(Error::EmptyDataset);
        }
        Ok(Self {
            fit: pava_l2(x_binary, z, None)?,
        })
    }

    /// Fitted success probability at `z`, clipped to `[0, 1]`.
    pub fn probability(&self, z: f64) -> f64 {
        self.fit.predict(z).clamp(0.0, 1.0)
    }

    /// Draws one Bernoulli variable per control value.
    pub fn sample(&self, z: &[f64], seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        z.iter()
            .map(|&zi| {
                let p = self.probability(zi);
                if rng.random::<f64>() < p {
                    1.0
                } else {
                    0.0
                }
            })
            .collect()
    }
}

/// Synthetic binary response drawn from the monotone fit of `x_binary` on
/// `z`, so `(x~, y, z)` satisfies the monotone null by construction.
pub fn fit_synthetic_control(x_binary: &[f64], z: &[f64], seed: u64) -> Result<Vec<f64>> {
    check_lengths(x_binary.len(), z.len())?;
    Ok(MonotoneBernoulli::fit(x_binary, z)?.sample(z, seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{any, prop_assert, prop_assert_eq, proptest};

    const SQRT2: f64 = std::f64::consts::SQRT_2;

    #[test]
    fn pava_examples() {
        let z = [1.0, 2.0, 3.0];
        let fit = pava_l2(&[1.0, 2.0, 3.0], &z, None).unwrap();
        assert_eq!(fit.fitted, vec![1.0, 2.0, 3.0]);
        assert_eq!(fit.residual_norm, 0.0);

        let fit = pava_l2(&[3.0, 1.0, 2.0], &z, None).unwrap();
        assert_eq!(fit.fitted, vec![2.0, 2.0, 2.0]);
        assert!((fit.residual_norm - SQRT2).abs() < 1e-12);

        let fit = pava_l2(&[2.0, 0.0, 1.0], &z, None).unwrap();
        assert_eq!(fit.fitted, vec![1.0, 1.0, 1.0]);
        assert!((fit.residual_norm - SQRT2).abs() < 1e-12);
    }

    #[test]
    fn pava_pools_ties_and_handles_unsorted_z() {
        let fit = pava_l2(&[5.0, 0.0, 1.0], &[2.0, 1.0, 1.0], None).unwrap();
        assert_eq!(fit.fitted, vec![5.0, 0.5, 0.5]);
        let fit = pava_l2(&[0.0, 4.0, 1.0], &[3.0, 1.0, 2.0], None).unwrap();
        // sorted order: 4, 1, 0 -> all pooled
        assert!(fit.fitted.iter().all(|&v| (v - 5.0 / 3.0).abs() < 1e-12));
    }

    #[test]
    fn pava_weights() {
        let fit = pava_l2(&[2.0, 0.0], &[0.0, 1.0], Some(&[3.0, 1.0])).unwrap();
        assert_eq!(fit.fitted, vec![1.5, 1.5]);
        assert!(pava_l2(&[1.0], &[0.0], Some(&[0.0])).is_err());
    }

    #[test]
    fn predict_is_a_step_function() {
        let fit = pava_l2(&[0.0, 1.0, 3.0], &[1.0, 2.0, 3.0], None).unwrap();
        assert_eq!(fit.predict(-5.0), 0.0);
        assert_eq!(fit.predict(1.5), 0.0);
        assert_eq!(fit.predict(2.0), 1.0);
        assert_eq!(fit.predict(9.0), 3.0);
    }

    #[test]
    fn isnr_examples() {
        let z = [1.0, 2.0, 3.0];
        assert_eq!(empirical_isnr(&[0.0, 1.0, 1.0], &z, 1.0).unwrap(), 0.0);
        let v = empirical_isnr(&[2.0, 0.0, 1.0], &z, 1.0).unwrap();
        assert!((v - SQRT2).abs() < 1e-12);
        let half = empirical_isnr(&[2.0, 0.0, 1.0], &z, 2.0).unwrap();
        assert!((half - v / 2.0).abs() < 1e-15);
        assert!(empirical_isnr(&[1.0], &[1.0], 0.0).is_err());
    }

    #[test]
    fn l1_projection_examples() {
        let p = isotonic_l1_projection(&[2.0, 0.0, 1.0], &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(p, vec![1.0, 1.0, 1.0]);
        let u = [-1.0, 0.5, 0.5, 4.0];
        assert_eq!(isotonic_l1_projection(&u, &[0.0, 1.0, 2.0, 3.0]).unwrap(), u);
        let p = isotonic_l1_projection(&[1.0, 0.0], &[0.0, 1.0]).unwrap();
        assert_eq!(p, vec![0.5, 0.5]);
        assert_eq!(
            isotonic_l1_projection(&[1.0, 0.0], &[1.0, 0.0]),
            Err(Error::UnsortedControl)
        );
    }

    #[test]
    fn median_convention() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn deviance_examples() {
        assert_eq!(deviance(&[3.0, 3.0, 3.0]).unwrap(), 0.0);
        assert!((deviance(&[-1.0, 1.0]).unwrap() - 4.0).abs() < 1e-12);
        let dev = deviance(&[0.0, 0.0, 1.0, 1.0]).unwrap();
        let var = DiscreteDistribution::from_sample(&[0.0, 0.0, 1.0, 1.0])
            .unwrap()
            .variance();
        assert!((dev - 1.0).abs() < 1e-12);
        assert!((dev - 4.0 * var).abs() < 1e-12);
    }

    #[test]
    fn deviance_of_weighted_table() {
        // P(0) = 3/4, P(1) = 1/4: the quantile gap is 1 on q < 1/4 and
        // q >= 3/4, zero in between
        let d = DiscreteDistribution::from_table(&[0.0, 1.0], &[3.0, 1.0]).unwrap();
        assert!((d.deviance() - 0.5).abs() < 1e-12);
        assert!((d.variance() - 3.0 / 16.0).abs() < 1e-12);
    }

    #[test]
    fn quantile_is_left_continuous_inverse() {
        let d = DiscreteDistribution::from_sample(&[1.0, 2.0]).unwrap();
        assert_eq!(d.quantile(0.5), 1.0);
        assert_eq!(d.quantile(0.5 + 1e-12), 2.0);
        assert_eq!(d.quantile(1.0), 2.0);
    }

    #[test]
    fn synthetic_control_examples() {
        let z = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(fit_synthetic_control(&[0.0; 4], &z, 1).unwrap(), vec![0.0; 4]);
        assert_eq!(fit_synthetic_control(&[1.0; 4], &z, 1).unwrap(), vec![1.0; 4]);
        let x = [0.0, 0.0, 1.0, 1.0];
        assert_eq!(fit_synthetic_control(&x, &z, 99).unwrap(), x.to_vec());
        assert!(matches!(
            fit_synthetic_control(&[0.0, 0.5], &[0.0, 1.0], 1),
            Err(Error::NonBinary { index: 1, .. })
        ));
    }

    proptest! {
        #[test]
        fn pava_projection_properties(
            v in proptest::collection::vec(-10.0f64..10.0, 1..40),
            seed in any::<u64>(),
        ) {
            let n = v.len();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let z: Vec<f64> = (0..n).map(|_| f64::from(rng.random_range(0..8))).collect();
            let fit = pava_l2(&v, &z, None).unwrap();
            let order = sort_permutation(&z);
            for w in order.windows(2) {
                prop_assert!(fit.fitted[w[0]] <= fit.fitted[w[1]] + 1e-12);
                if z[w[0]] == z[w[1]] {
                    prop_assert_eq!(fit.fitted[w[0]], fit.fitted[w[1]]);
                }
            }
            let inner: f64 = v.iter().zip(&fit.fitted).map(|(a, f)| (a - f) * f).sum();
            prop_assert!(inner.abs() < 1e-8);
            let minmax = isotonic_minmax_l2(&v, &z).unwrap();
            for (a, b) in fit.fitted.iter().zip(&minmax) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }

        #[test]
        fn l1_projection_is_monotone(
            u in proptest::collection::vec(-10.0f64..10.0, 1..30),
            ties in proptest::collection::vec(0u8..3, 30),
        ) {
            let mut z = Vec::with_capacity(u.len());
            let mut level = 0.0;
            for t in ties.iter().take(u.len()) {
                if *t > 0 { level += 1.0; }
                z.push(level);
            }
            let p = isotonic_l1_projection(&u, &z).unwrap();
            for w in p.windows(2) {
                prop_assert!(w[0] <= w[1]);
            }
        }

        #[test]
        fn deviance_is_sandwiched_by_variance(
            values in proptest::collection::vec(-5.0f64..5.0, 1..20),
            weights in proptest::collection::vec(0.01f64..1.0, 20),
        ) {
            let d = DiscreteDistribution::from_table(&values, &weights[..values.len()]).unwrap();
            let (dev, var) = (d.deviance(), d.variance());
            prop_assert!(2.0 * var <= dev + 1e-10);
            prop_assert!(dev <= 4.0 * var + 1e-10);
            let s = d.symmetrized();
            prop_assert!((s.deviance() - 4.0 * s.variance()).abs() < 1e-9);
        }
    }
}
