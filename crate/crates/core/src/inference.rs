//! The swap test: statistic, exact and Monte Carlo p-values, the end-to-end
//! runner, and the Gaussian approximation to conditional power.

use rand::RngCore;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernels::Kernel;
use crate::matching::{cross_bin_matching, max_weight_matching, neighbour_matching};
use crate::matching::{BinCount, CrossBinConfig, PartialLinearFit};
use crate::model::{Dataset, Matching, Method, TestResult, WeightVector};
use crate::normal;

/// Largest number of pairs for full swap enumeration.
pub const EXACT_CAP: usize = 20;

/// Default number of Monte Carlo swap draws for a single test.
pub const DEFAULT_DRAWS: u64 = 9999;

/// Per-pair contributions to the statistic before and after swapping.
///
/// Swapped statistics are always summed in pair order, so the identity
/// swap reproduces the observed statistic bit for bit and ties are exact.
#[derive(Debug, Clone)]
struct PairTerms {
    kept: Vec<f64>,
    swapped: Vec<f64>,
}

impl PairTerms {
    fn new(xs: &[f64], m: &Matching, w: &WeightVector, k: &Kernel) -> Result<Self> {
        if w.len() != m.len() {
            return Err(Error::DimensionMismatch {
                expected: m.len(),
                actual: w.len(),
            });
        }
        for &(i, j) in m.pairs() {
            for index in [i, j] {
                if index >= xs.len() {
                    return Err(Error::IndexOutOfBounds { index, n: xs.len() });
                }
            }
        }
        let (kept, swapped) = m
            .pairs()
            .iter()
            .zip(w.as_slice())
            .map(|(&(i, j), &wl)| (wl * k.eval(xs[i], xs[j]), wl * k.eval(xs[j], xs[i])))
            .unzip();
        Ok(Self { kept, swapped })
    }

    fn len(&self) -> usize {
        self.kept.len()
    }

    fn observed(&self) -> f64 {
        self.kept.iter().fold(0.0, |t, v| t + v)
    }

    /// Statistic after swapping the pairs whose bit is set in `bits`
    /// (bit `l % 64` of word `l / 64`).
    fn swapped_by(&self, bits: &[u64]) -> f64 {
        let mut t = 0.0;
        for l in 0..self.len() {
            t += if bits[l / 64] >> (l % 64) & 1 == 1 {
                self.swapped[l]
            } else {
                self.kept[l]
            };
        }
        t
    }
}

/// `T(x) = sum_l w_l psi(x_{i_l}, x_{j_l})`.
pub fn statistic(xs: &[f64], m: &Matching, w: &WeightVector, k: &Kernel) -> Result<f64> {
    Ok(PairTerms::new(xs, m, w, k)?.observed())
}

/// p-value from all `2^L` swaps: the fraction with `T(x^s) >= T(x)`.
pub fn exact_p_value(xs: &[f64], m: &Matching, w: &WeightVector, k: &Kernel) -> Result<TestResult> {
    let terms = PairTerms::new(xs, m, w, k)?;
    let l = terms.len();
    if l > EXACT_CAP {
        return Err(Error::ExactCapExceeded {
            pairs: l,
            cap: EXACT_CAP,
        });
    }
    let t = terms.observed();
    let count = (0..1u64 << l)
        .filter(|&mask| terms.swapped_by(&[mask]) >= t)
        .count();
    Ok(TestResult {
        statistic: t,
        p_value: count as f64 / (1u64 << l) as f64,
        method: Method::Exact,
        num_pairs: l,
        num_draws: None,
        seed: None,
    })
}

/// Work size above which Monte Carlo draws are spread over threads.
const PARALLEL_WORK: u64 = 1 << 16;

/// p-value from `draws` uniform random swaps with the `+1` correction:
/// `(1 + #{T(x^s) >= T(x)}) / (1 + draws)`.
///
/// Draw `m` uses stream `m` of a ChaCha8 generator keyed by `seed`, so the
/// result does not depend on how draws are scheduled.
pub fn monte_carlo_p_value(
    xs: &[f64],
    m: &Matching,
    w: &WeightVector,
    k: &Kernel,
    draws: u64,
    seed: u64,
) -> Result<TestResult> {
    if draws == 0 {
        return Err(Error::InvalidParameter("draws must be at least 1".into()));
    }
    let terms = PairTerms::new(xs, m, w, k)?;
    let t = terms.observed();
    let words = terms.len().div_ceil(64);
    let base = ChaCha8Rng::seed_from_u64(seed);
    let exceeds = |draw: u64, bits: &mut Vec<u64>| -> bool {
        let mut rng = base.clone();
        rng.set_stream(draw);
        bits.iter_mut().for_each(|b| *b = rng.next_u64());
        terms.swapped_by(bits) >= t
    };
    let count: u64 = if draws.saturating_mul(terms.len() as u64) > PARALLEL_WORK {
        (0..draws)
            .into_par_iter()
            .map_init(|| vec![0u64; words], |bits, d| u64::from(exceeds(d, bits)))
            .sum()
    } else {
        let mut bits = vec![0u64; words];
        (0..draws).map(|d| u64::from(exceeds(d, &mut bits))).sum()
    };
    Ok(TestResult {
        statistic: t,
        p_value: (1 + count) as f64 / (1 + draws) as f64,
        method: Method::MonteCarlo,
        num_pairs: terms.len(),
        num_draws: Some(draws),
        seed: Some(seed),
    })
}

/// Kernel, p-value method and Monte Carlo settings for one test.
#[derive(Debug, Clone, PartialEq)]
pub struct TestConfig {
    pub kernel: Kernel,
    pub method: Method,
    pub draws: u64,
    pub seed: u64,
    /// Reporting level; it does not change the p-value.
    pub alpha: f64,
}

impl Default for TestConfig {
    fn default() -> Self {
        Self {
            kernel: Kernel::Linear,
            method: Method::MonteCarlo,
            draws: DEFAULT_DRAWS,
            seed: 0,
            alpha: 0.05,
        }
    }
}

/// How the matching and weights are built from the data.
#[derive(Debug, Clone)]
pub enum Strategy {
    Neighbour,
    CrossBin(BinCount),
    /// Maximum-weight matching from a model fitted on separate data.
    Plugin(PartialLinearFit),
    Fixed(Matching, WeightVector),
}

impl Strategy {
    pub fn build(&self, d: &Dataset) -> Result<(Matching, WeightVector)> {
        match self {
            Self::Neighbour => neighbour_matching(d),
            Self::CrossBin(bins) => {
                let cfg = CrossBinConfig::new(bins.resolve(d.len()), d.len())?;
                cross_bin_matching(d, cfg)
            }
            Self::Plugin(fit) => max_weight_matching(d, &fit.moments(d)),
            Self::Fixed(m, w) => {
                if !crate::model::validate_matching(d, m)? {
                    return Err(Error::InvalidParameter(
                        "matching pairs must have nondecreasing controls".into(),
                    ));
                }
                Ok((m.clone(), w.clone()))
            }
        }
    }
}

/// Builds the matching with `strategy` and computes the p-value.
///
/// An empty matching is not an error: the result has `p = 1` and a warning
/// is logged.
pub fn run_test(d: &Dataset, cfg: &TestConfig, strategy: &Strategy) -> Result<TestResult> {
    let (m, w) = strategy.build(d)?;
    if m.is_empty() {
        log::warn!("the matching has no pairs; the p-value is 1");
    }
    match cfg.method {
        Method::Exact => exact_p_value(d.x(), &m, &w, &cfg.kernel),
        Method::MonteCarlo => {
            monte_carlo_p_value(d.x(), &m, &w, &cfg.kernel, cfg.draws, cfg.seed)
        }
    }
}

/// Gaussian approximation to the conditional power at level `alpha`:
/// `Phi(sum w_l mean_l / sqrt(sum w_l^2 var_l) - Phi_bar^{-1}(alpha))`.
pub fn theoretical_power(means: &[f64], variances: &[f64], w: &WeightVector, alpha: f64) -> Result<f64> {
    let l = w.len();
    for len in [means.len(), variances.len()] {
        if len != l {
            return Err(Error::DimensionMismatch {
                expected: l,
                actual: len,
            });
        }
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    let ws = w.as_slice();
    let signal: f64 = ws.iter().zip(means).map(|(w, m)| w * m).sum();
    let noise: f64 = ws.iter().zip(variances).map(|(w, v)| w * w * v).sum();
    if !(noise > 0.0) {
        return Err(Error::NonPositiveVariance(noise));
    }
    Ok(normal::cdf(signal / noise.sqrt() - normal::upper_quantile(alpha)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{apply_swap, SwapVector};
    use proptest::prelude::{any, prop_assert_eq, proptest};
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn pairs(p: &[(usize, usize)]) -> Matching {
        Matching::from_one_based(p).unwrap()
    }

    fn ones(l: usize) -> WeightVector {
        WeightVector::ones(l)
    }

    #[test]
    fn statistic_examples() {
        let k = Kernel::Linear;
        assert_eq!(statistic(&[3.0, 1.0], &pairs(&[(1, 2)]), &ones(1), &k).unwrap(), 2.0);
        assert_eq!(statistic(&[3.0, 1.0], &Matching::empty(), &ones(0), &k).unwrap(), 0.0);
        let m = pairs(&[(1, 2), (3, 4)]);
        assert_eq!(statistic(&[3.0, 1.0, 0.0, 2.0], &m, &ones(2), &k).unwrap(), 0.0);
        assert!(statistic(&[3.0, 1.0], &m, &ones(1), &k).is_err());
    }

    #[test]
    fn exact_examples() {
        let k = Kernel::Linear;
        let r = exact_p_value(&[1.0], &Matching::empty(), &ones(0), &k).unwrap();
        assert_eq!(r.p_value, 1.0);
        let r = exact_p_value(&[2.0, 1.0], &pairs(&[(1, 2)]), &ones(1), &k).unwrap();
        assert_eq!(r.p_value, 0.5);
        let m = pairs(&[(1, 2), (3, 4)]);
        let r = exact_p_value(&[3.0, 1.0, 0.0, 2.0], &m, &ones(2), &k).unwrap();
        assert_eq!(r.p_value, 0.75);
        assert_eq!(r.num_pairs, 2);
        assert_eq!(r.method, Method::Exact);
    }

    #[test]
    fn exact_refuses_too_many_pairs() {
        let n = 2 * (EXACT_CAP + 1);
        let xs: Vec<f64> = (0..n).map(|v| v as f64).collect();
        let m = Matching::new((0..n / 2).map(|l| (2 * l, 2 * l + 1)).collect()).unwrap();
        let err = exact_p_value(&xs, &m, &ones(n / 2), &Kernel::Linear).unwrap_err();
        assert_eq!(err, Error::ExactCapExceeded { pairs: EXACT_CAP + 1, cap: EXACT_CAP });
    }

    #[test]
    fn monte_carlo_examples() {
        let k = Kernel::Linear;
        let m = pairs(&[(1, 2), (3, 4)]);
        let r = monte_carlo_p_value(&[1.0; 4], &m, &ones(2), &k, 999, 3).unwrap();
        assert_eq!(r.p_value, 1.0);
        let r = monte_carlo_p_value(&[1.0], &Matching::empty(), &ones(0), &k, 50, 3).unwrap();
        assert_eq!(r.p_value, 1.0);
        for seed in [0, 1, 77] {
            let r = monte_carlo_p_value(&[3.0, 1.0, 0.0, 2.0], &m, &ones(2), &k, 100_000, seed).unwrap();
            assert!((r.p_value - 0.75).abs() <= 0.006, "seed {seed}: {}", r.p_value);
            assert_eq!(r.num_draws, Some(100_000));
            assert_eq!(r.seed, Some(seed));
        }
        assert!(monte_carlo_p_value(&[1.0], &Matching::empty(), &ones(0), &k, 0, 3).is_err());
    }

    #[test]
    fn monte_carlo_is_reproducible_and_bounded_below() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 200;
        let xs: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let m = Matching::new((0..n / 2).map(|l| (2 * l, 2 * l + 1)).collect()).unwrap();
        let w = ones(n / 2);
        // large enough to take the parallel path
        let a = monte_carlo_p_value(&xs, &m, &w, &Kernel::Sign, 2000, 9).unwrap();
        let b = monte_carlo_p_value(&xs, &m, &w, &Kernel::Sign, 2000, 9).unwrap();
        assert_eq!(a.p_value.to_bits(), b.p_value.to_bits());
        assert!(a.p_value >= 1.0 / 2001.0);
        // the serial path agrees with the parallel one on the same draws
        let mut count = 0u64;
        let base = ChaCha8Rng::seed_from_u64(9);
        let terms = PairTerms::new(&xs, &m, &w, &Kernel::Sign).unwrap();
        for d in 0..2000 {
            let mut r = base.clone();
            r.set_stream(d);
            let bits = [r.next_u64(), r.next_u64()];
            count += u64::from(terms.swapped_by(&bits) >= terms.observed());
        }
        assert_eq!(a.p_value, (1 + count) as f64 / 2001.0);
    }

    #[test]
    fn run_test_examples() {
        let d = Dataset::new(vec![1.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]).unwrap();
        let cfg = TestConfig {
            method: Method::Exact,
            ..TestConfig::default()
        };
        let r = run_test(&d, &cfg, &Strategy::Neighbour).unwrap();
        assert_eq!(r.p_value, 0.5);
        assert_eq!(r.num_pairs, 1);

        let d = Dataset::new(vec![0.0; 3], vec![1.0, 2.0, 3.0], vec![0.0, 1.0, 2.0]).unwrap();
        let r = run_test(&d, &cfg, &Strategy::CrossBin(BinCount::Fixed(2))).unwrap();
        assert_eq!((r.p_value, r.num_pairs), (1.0, 0));
    }

    #[test]
    fn run_test_under_the_null() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let n = 400;
        let draw = |rng: &mut ChaCha8Rng| -> Vec<f64> { (0..n).map(|_| rng.sample(StandardNormal)).collect() };
        let d = Dataset::new(draw(&mut rng), draw(&mut rng), draw(&mut rng)).unwrap();
        let r = run_test(&d, &TestConfig::default(), &Strategy::Neighbour).unwrap();
        assert!((0.0..=1.0).contains(&r.p_value));
        assert!(r.num_pairs > n / 4 - 30 && r.num_pairs < n / 4 + 30, "L = {}", r.num_pairs);
    }

    #[test]
    fn theoretical_power_examples() {
        let w = ones(3);
        let p = theoretical_power(&[0.0; 3], &[1.0; 3], &w, 0.1).unwrap();
        assert!((p - 0.1).abs() < 1e-10);
        let q = normal::upper_quantile(0.1);
        let p = theoretical_power(&[q], &[1.0], &ones(1), 0.1).unwrap();
        assert!((p - 0.5).abs() < 1e-12);
        let p = theoretical_power(&[1.0], &[1.0], &ones(1), 0.1).unwrap();
        assert!((p - 0.3891).abs() < 5e-5, "{p}");
        assert!(theoretical_power(&[1.0], &[0.0], &ones(1), 0.1).is_err());
    }

    /// Random instance with `l` disjoint pairs `(2k, 2k+1)`.
    fn instance(rng: &mut ChaCha8Rng, l: usize) -> (Vec<f64>, Matching, WeightVector) {
        // small integer grid so ties occur
        let xs = (0..2 * l).map(|_| f64::from(rng.random_range(-3..4))).collect();
        let m = Matching::new((0..l).map(|k| (2 * k, 2 * k + 1)).collect()).unwrap();
        let w = WeightVector::new((0..l).map(|_| f64::from(rng.random_range(0..4))).collect()).unwrap();
        (xs, m, w)
    }

    #[test]
    fn quantile_bound_holds_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..100 {
            let l = rng.random_range(0..=6);
            let (xs, m, w) = instance(&mut rng, l);
            let ps: Vec<f64> = (0..1u64 << l)
                .map(|mask| {
                    let s = SwapVector::from_mask(mask, l);
                    let swapped = apply_swap(&xs, &m, &s).unwrap();
                    exact_p_value(&swapped, &m, &w, &Kernel::Sign).unwrap().p_value
                })
                .collect();
            for a in 1..100 {
                let alpha = f64::from(a) / 100.0;
                let frac = ps.iter().filter(|&&p| p <= alpha).count() as f64 / ps.len() as f64;
                assert!(frac <= alpha);
            }
        }
    }

    #[test]
    fn symmetric_perturbation_does_not_change_the_exact_p_value() {
        let perturbed = Kernel::Custom(
            crate::kernels::CustomKernel::register(
                "linear+sym",
                |a, b| (a - b) + (a * b).sin() + a * a + b * b,
                1,
            )
            .unwrap(),
        );
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..200 {
            let l = rng.random_range(1..=6);
            let (_, m, w) = instance(&mut rng, l);
            let xs: Vec<f64> = (0..2 * l).map(|_| rng.random_range(-2.0..2.0)).collect();
            let base = exact_p_value(&xs, &m, &w, &Kernel::Linear).unwrap().p_value;
            let other = exact_p_value(&xs, &m, &w, &perturbed).unwrap().p_value;
            assert_eq!(base, other);
        }
    }

    #[test]
    fn super_uniform_under_a_sharp_null() {
        let reps = 2000;
        let l = 8;
        let mut ps = Vec::with_capacity(reps);
        let mut rng = ChaCha8Rng::seed_from_u64(2000);
        for _ in 0..reps {
            let xs: Vec<f64> = (0..2 * l).map(|_| rng.sample(StandardNormal)).collect();
            let m = Matching::new((0..l).map(|k| (2 * k, 2 * k + 1)).collect()).unwrap();
            let w = WeightVector::new((0..l).map(|_| rng.random_range(0.1..2.0)).collect()).unwrap();
            ps.push(exact_p_value(&xs, &m, &w, &Kernel::Linear).unwrap().p_value);
        }
        for alpha in [0.01, 0.05, 0.1, 0.5] {
            let rate = ps.iter().filter(|&&p| p <= alpha).count() as f64 / reps as f64;
            let band = 3.0 * (alpha * (1.0 - alpha) / reps as f64).sqrt();
            assert!(rate <= alpha + band, "alpha {alpha}: rate {rate}");
        }
    }

    proptest! {
        #[test]
        fn exact_p_value_is_scale_invariant(seed in any::<u64>(), c in 0.01f64..100.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let l = rng.random_range(0..=6);
            let (_, m, w) = instance(&mut rng, l);
            let xs: Vec<f64> = (0..2 * l).map(|_| rng.random_range(-2.0..2.0)).collect();
            let w = WeightVector::new(w.as_slice().iter().map(|_| rng.random_range(0.1..3.0)).collect()).unwrap();
            let a = exact_p_value(&xs, &m, &w, &Kernel::Sign).unwrap().p_value;
            let b = exact_p_value(&xs, &m, &w.scaled(c).unwrap(), &Kernel::Sign).unwrap().p_value;
            prop_assert_eq!(a, b);
        }
    }
}
