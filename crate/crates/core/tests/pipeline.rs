use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pairswap::isotonic::isotonic_l1_projection;
use pairswap::matching::{fit_plugin_moments, isotonic_median_matching, BinCount};
use pairswap::simulation::{generate, ModelKind, ModelSpec, MuShape, Rate};
use pairswap::{run_test, validate_matching, validate_matching_on, Kernel, Method, Strategy, TestConfig};

fn l1_cost(u: &[f64], p: &[f64]) -> f64 {
    u.iter().zip(p).map(|(a, b)| (a - b).abs()).sum()
}

/// Smallest L1 cost over nondecreasing group levels drawn from the data values.
fn brute_l1(u: &[f64], groups: &[std::ops::Range<usize>]) -> f64 {
    let mut levels: Vec<f64> = u.to_vec();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    fn go(u: &[f64], groups: &[std::ops::Range<usize>], levels: &[f64], g: usize, floor: usize) -> f64 {
        if g == groups.len() {
            return 0.0;
        }
        (floor..levels.len())
            .map(|k| {
                let here: f64 = u[groups[g].clone()].iter().map(|v| (v - levels[k]).abs()).sum();
                here + go(u, groups, levels, g + 1, k)
            })
            .fold(f64::INFINITY, f64::min)
    }
    go(u, groups, &levels, 0, 0)
}

#[test]
fn median_projection_minimises_l1_cost() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..300 {
        let n = rng.random_range(1..=6);
        let u: Vec<f64> = (0..n).map(|_| f64::from(rng.random_range(-4..5))).collect();
        let mut z: Vec<f64> = (0..n).map(|_| f64::from(rng.random_range(0..4))).collect();
        z.sort_by(f64::total_cmp);
        let mut groups = Vec::new();
        let mut start = 0;
        for i in 1..=n {
            if i == n || z[i] != z[start] {
                groups.push(start..i);
                start = i;
            }
        }
        let p = isotonic_l1_projection(&u, &z).unwrap();
        assert!(p.windows(2).all(|w| w[0] <= w[1]), "{p:?}");
        for g in &groups {
            assert!(p[g.clone()].iter().all(|&v| v == p[g.start]), "tied z must share a level");
        }
        assert!((l1_cost(&u, &p) - brute_l1(&u, &groups)).abs() < 1e-9, "u={u:?} z={z:?} p={p:?}");
    }
}

#[test]
fn median_matching_pairs_high_with_low() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..200 {
        let n = rng.random_range(2..=40);
        let u: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
        let z: Vec<f64> = (0..n).map(|i| (i / 3) as f64).collect();
        let m = isotonic_median_matching(&u, &z).unwrap();
        assert!(validate_matching_on(&z, &m).unwrap());
        for &(i, j) in m.pairs() {
            assert!(u[i] > u[j]);
        }
    }
}

fn models() -> Vec<ModelKind> {
    vec![
        ModelKind::NullAdditive {
            mu: MuShape::GaussCdf,
            gamma: 2.0,
        },
        ModelKind::PartialLinear {
            beta: "n^-1/3".parse().unwrap(),
            gamma: 0.5,
            rho: 0.3,
        },
        ModelKind::BoundedPartialLinear {
            beta: Rate::from(0.4),
            sigma: 1.0,
        },
    ]
}

#[test]
fn every_strategy_runs_on_every_model() {
    let cfg = TestConfig {
        draws: 999,
        seed: 3,
        ..TestConfig::default()
    };
    for kind in models() {
        let spec = ModelSpec::new(kind, 300).unwrap();
        let data = generate(&spec, 1);
        let train = generate(&spec, 2);
        let strategies = [
            Strategy::Neighbour,
            Strategy::CrossBin(BinCount::Power(2.0 / 3.0)),
            Strategy::CrossBin(BinCount::Fixed(10)),
            Strategy::Plugin(fit_plugin_moments(&train, &Kernel::Linear).unwrap()),
        ];
        for strategy in &strategies {
            let (m, w) = strategy.build(&data).unwrap();
            assert!(validate_matching(&data, &m).unwrap(), "{kind:?} {strategy:?}");
            assert_eq!(m.len(), w.len());
            let r = run_test(&data, &cfg, strategy).unwrap();
            assert_eq!(r.method, Method::MonteCarlo);
            assert!(r.p_value > 0.0 && r.p_value <= 1.0);
            assert_eq!(r, run_test(&data, &cfg, strategy).unwrap());
        }
    }
}

#[test]
fn plugin_matching_on_held_out_fit_controls_size() {
    let spec = ModelSpec::new(
        ModelKind::NullAdditive {
            mu: MuShape::Identity,
            gamma: 1.0,
        },
        150,
    )
    .unwrap();
    let trials = 300;
    let mut rejections = 0;
    for t in 0..trials {
        let train = generate(&spec, 2 * t);
        let data = generate(&spec, 2 * t + 1);
        let strategy = Strategy::Plugin(fit_plugin_moments(&train, &Kernel::Linear).unwrap());
        let cfg = TestConfig {
            draws: 199,
            seed: t,
            ..TestConfig::default()
        };
        rejections += usize::from(run_test(&data, &cfg, &strategy).unwrap().p_value <= 0.1);
    }
    let rate = rejections as f64 / trials as f64;
    assert!(rate <= 0.1 + 3.0 * (0.09 / trials as f64).sqrt(), "rate {rate}");
}

#[test]
fn plugin_matching_has_power_against_a_strong_alternative() {
    let spec = ModelSpec::new(
        ModelKind::PartialLinear {
            beta: Rate::from(0.5),
            gamma: 0.5,
            rho: 0.0,
        },
        200,
    )
    .unwrap();
    let train = generate(&spec, 100);
    let data = generate(&spec, 101);
    let fit = fit_plugin_moments(&train, &Kernel::Linear).unwrap();
    assert!((fit.slope() - 0.5).abs() < 0.25, "slope {}", fit.slope());
    let r = run_test(&data, &TestConfig::default(), &Strategy::Plugin(fit)).unwrap();
    assert!(r.p_value < 0.01, "p {}", r.p_value);
}
