//! Randomized self-checks of the library's structural guarantees.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::inference::exact_p_value;
use crate::isotonic::{empirical_isnr, isotonic_l1_projection, isotonic_minmax_l2, pava_l2, DiscreteDistribution};
use crate::kernels::{check_anti_monotonicity, Kernel};
use crate::matching::brute_force_best_matching;
use crate::model::{apply_swap, Matching, SwapVector, WeightVector};
use crate::rng::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub cases: usize,
    pub failures: usize,
}

impl CheckOutcome {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

fn run<F>(name: &'static str, cases: usize, seed: u64, mut case: F) -> CheckOutcome
where
    F: FnMut(&mut ChaCha8Rng) -> bool,
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let failures = (0..cases).filter(|_| !case(&mut rng)).count();
    CheckOutcome {
        name,
        cases,
        failures,
    }
}

/// Anti-monotonicity and anti-symmetry of the built-in kernels.
pub fn kernel_properties(cases: usize, seed: u64) -> CheckOutcome {
    let kernels = [Kernel::Linear, Kernel::Sign, Kernel::Truncated(1.0)];
    run("kernels", cases, seed, |rng| {
        let x = rng.random_range(-10.0..=10.0);
        let xp = rng.random_range(-10.0..=10.0);
        let (d, dp) = (rng.random_range(0.0..=10.0), rng.random_range(0.0..=10.0));
        kernels.iter().all(|k| {
            check_anti_monotonicity(k, x, xp, d, dp) && k.eval(x, xp) == -k.eval(xp, x)
        })
    })
}

/// PAVA agrees with the max-min formula and is monotone.
pub fn pava_agreement(cases: usize, seed: u64) -> CheckOutcome {
    run("pava", cases, seed, |rng| {
        let n = rng.random_range(1..=30);
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
        let z: Vec<f64> = (0..n).map(|_| f64::from(rng.random_range(0..10))).collect();
        let (Ok(fit), Ok(other)) = (pava_l2(&v, &z, None), isotonic_minmax_l2(&v, &z)) else {
            return false;
        };
        fit.fitted.iter().zip(&other).all(|(a, b)| (a - b).abs() < 1e-9)
    })
}

/// The median projection is nondecreasing.
pub fn l1_projection_monotone(cases: usize, seed: u64) -> CheckOutcome {
    run("l1-projection", cases, seed, |rng| {
        let n = rng.random_range(1..=25);
        let u: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
        let mut z: Vec<f64> = (0..n).map(|_| f64::from(rng.random_range(0..8))).collect();
        z.sort_by(f64::total_cmp);
        isotonic_l1_projection(&u, &z).is_ok_and(|p| p.windows(2).all(|w| w[0] <= w[1]))
    })
}

/// `2 Var <= Dev <= 4 Var`, with equality on the right after symmetrization.
pub fn deviance_bounds(cases: usize, seed: u64) -> CheckOutcome {
    run("deviance", cases, seed, |rng| {
        let n = rng.random_range(1..=15);
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
        let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..1.0)).collect();
        let Ok(d) = DiscreteDistribution::from_table(&v, &w) else {
            return false;
        };
        let (dev, var) = (d.deviance(), d.variance());
        let s = d.symmetrized();
        2.0 * var <= dev + 1e-10
            && dev <= 4.0 * var + 1e-10
            && (s.deviance() - 4.0 * s.variance()).abs() < 1e-9
    })
}

/// Over the swap orbit of any data vector, `p <= alpha` for at most an
/// `alpha` fraction of swaps.
pub fn swap_quantile_bound(cases: usize, seed: u64) -> CheckOutcome {
    run("swap-quantile", cases, seed, |rng| {
        let l = rng.random_range(0..=6);
        let xs: Vec<f64> = (0..2 * l).map(|_| f64::from(rng.random_range(-3..4))).collect();
        let m = Matching::new((0..l).map(|k| (2 * k, 2 * k + 1)).collect()).expect("disjoint pairs");
        let w = WeightVector::ones(l);
        let ps: Vec<f64> = (0..1u64 << l)
            .map(|mask| {
                let swapped = apply_swap(&xs, &m, &SwapVector::from_mask(mask, l)).expect("lengths agree");
                exact_p_value(&swapped, &m, &w, &Kernel::Sign).map_or(f64::NAN, |r| r.p_value)
            })
            .collect();
        (1..100).all(|a| {
            let alpha = f64::from(a) / 100.0;
            let hits = ps.iter().filter(|&&p| p <= alpha).count() as f64;
            hits / ps.len() as f64 <= alpha
        })
    })
}

/// `ISNR^2 <= best matching value <= 2 ISNR^2` for unit noise.
pub fn oracle_sandwich(cases: usize, seed: u64) -> CheckOutcome {
    run("oracle-sandwich", cases, seed, |rng| {
        let n = rng.random_range(1..=8);
        let mu: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let mut z: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        z.sort_by(f64::total_cmp);
        let (Ok(isnr), Ok((_, best))) = (empirical_isnr(&mu, &z, 1.0), brute_force_best_matching(&mu, &z)) else {
            return false;
        };
        let s2 = isnr * isnr;
        s2 <= best + 1e-9 && best <= 2.0 * s2 + 1e-9
    })
}

/// Runs every check with `cases` random instances each.
pub fn run_all(cases: usize, seed: u64) -> Vec<CheckOutcome> {
    let checks: [fn(usize, u64) -> CheckOutcome; 6] = [
        kernel_properties,
        pava_agreement,
        l1_projection_monotone,
        deviance_bounds,
        swap_quantile_bound,
        oracle_sandwich,
    ];
    checks
        .iter()
        .enumerate()
        .map(|(i, check)| check(cases, derive_seed(seed, i as u64)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_checks_pass() {
        for outcome in run_all(200, 1) {
            assert!(outcome.passed(), "{outcome:?}");
            assert_eq!(outcome.cases, 200);
        }
    }
}
