//! Model-free matchings: neighbour and cross-bin, both weighted by the
//! positive part of the covariate difference.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Dataset, Matching, WeightVector};

/// Pairs consecutive points in `z` order, keeping a pair only when the
/// covariate decreases along it. Weights are `y_i - y_j > 0`.
pub fn neighbour_matching(d: &Dataset) -> Result<(Matching, WeightVector)> {
    let n = d.len();
    if n < 2 {
        return Err(Error::TooFewObservations {
            required: 2,
            actual: n,
        });
    }
    let y = d.y();
    let (pairs, weights): (Vec<_>, Vec<_>) = d
        .z_order()
        .chunks_exact(2)
        .filter(|c| y[c[0]] > y[c[1]])
        .map(|c| ((c[0], c[1]), y[c[0]] - y[c[1]]))
        .unzip();
    Ok((Matching::new(pairs)?, WeightVector::new(weights)?))
}

/// How many bins cross-bin matching uses.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinCount {
    Fixed(usize),
    /// `floor(n^p)`
    Power(f64),
}

impl BinCount {
    pub fn resolve(self, n: usize) -> usize {
        match self {
            Self::Fixed(k) => k,
            // the relative nudge keeps exact powers such as 1000^(2/3) = 100
            // from flooring to 99
            Self::Power(p) => ((n as f64).powf(p) * (1.0 + 1e-12)).floor() as usize,
        }
    }
}

impl fmt::Display for BinCount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Fixed(k) => write!(f, "{k}"),
            Self::Power(p) => write!(f, "n^{p}"),
        }
    }
}

impl FromStr for BinCount {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidParameter(format!("invalid bin count `{s}`"));
        match s.trim().strip_prefix("n^") {
            Some(p) => {
                let p = parse_exponent(p).ok_or_else(bad)?;
                if p > 0.0 && p < 1.0 {
                    Ok(Self::Power(p))
                } else {
                    Err(bad())
                }
            }
            None => s.trim().parse().map(Self::Fixed).map_err(|_| bad()),
        }
    }
}

/// Accepts decimals and simple fractions such as `2/3`.
fn parse_exponent(s: &str) -> Option<f64> {
    match s.split_once('/') {
        Some((a, b)) => {
            let (a, b): (f64, f64) = (a.trim().parse().ok()?, b.trim().parse().ok()?);
            (b != 0.0).then(|| a / b)
        }
        None => s.trim().parse().ok(),
    }
}

/// Resolved cross-bin layout: `bins` bins of `bin_size = floor(n / bins)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CrossBinConfig {
    bins: usize,
    bin_size: usize,
}

impl CrossBinConfig {
    pub fn new(bins: usize, n: usize) -> Result<Self> {
        if bins < 2 || bins > n {
            return Err(Error::InvalidBinCount { bins, n });
        }
        Ok(Self {
            bins,
            bin_size: n / bins,
        })
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn bin_size(&self) -> usize {
        self.bin_size
    }
}

/// Cross-bin matching: split the `z`-sorted points into bins, then pair the
/// largest covariates of each bin with the smallest of the next bin.
///
/// Points past `bins * bin_size` in sorted order are left unmatched.
pub fn cross_bin_matching(d: &Dataset, cfg: CrossBinConfig) -> Result<(Matching, WeightVector)> {
    let n = d.len();
    if cfg.bins > n || cfg.bins * cfg.bin_size > n {
        return Err(Error::InvalidBinCount { bins: cfg.bins, n });
    }
    let y = d.y();
    let m = cfg.bin_size;
    let order = d.z_order();
    let bins: Vec<Vec<usize>> = order[..cfg.bins * m]
        .chunks_exact(m)
        .map(|bin| {
            let mut bin = bin.to_vec();
            bin.sort_by(|&a, &b| y[a].total_cmp(&y[b]).then(a.cmp(&b)));
            bin
        })
        .collect();

    let mut pairs = Vec::new();
    let mut weights = Vec::new();
    for window in bins.windows(2) {
        let (lower, upper) = (&window[0], &window[1]);
        for s in 0..m / 2 {
            let (i, j) = (lower[m - 1 - s], upper[s]);
            if y[i] > y[j] {
                pairs.push((i, j));
                weights.push(y[i] - y[j]);
            }
        }
    }
    Ok((Matching::new(pairs)?, WeightVector::new(weights)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate_matching;
    use proptest::prelude::*;

    fn dataset(y: Vec<f64>, z: Vec<f64>) -> Dataset {
        let n = y.len();
        Dataset::new(vec![0.0; n], y, z).unwrap()
    }

    #[test]
    fn neighbour_hand_trace() {
        let d = dataset(
            vec![3.0, 1.0, 2.0, 5.0, 4.0, 0.0],
            vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0],
        );
        let (m, w) = neighbour_matching(&d).unwrap();
        assert_eq!(m.to_one_based(), vec![(1, 2), (5, 6)]);
        assert_eq!(w.as_slice(), &[2.0, 4.0]);
    }

    #[test]
    fn neighbour_edge_cases() {
        let d = dataset(vec![1.0, 2.0, 3.0, 4.0], vec![1.0, 2.0, 3.0, 4.0]);
        assert!(neighbour_matching(&d).unwrap().0.is_empty());

        let d = dataset(vec![1.0, 0.0], vec![0.0, 1.0]);
        let (m, w) = neighbour_matching(&d).unwrap();
        assert_eq!(m.to_one_based(), vec![(1, 2)]);
        assert_eq!(w.as_slice(), &[1.0]);

        let d = dataset(vec![1.0], vec![0.0]);
        assert!(matches!(
            neighbour_matching(&d),
            Err(Error::TooFewObservations { .. })
        ));
    }

    #[test]
    fn neighbour_sorts_by_z_with_index_ties() {
        // z order: 2, 0, 1 (0 and 1 tie, kept in index order)
        let d = dataset(vec![0.0, 5.0, 9.0], vec![1.0, 1.0, 0.0]);
        let (m, _) = neighbour_matching(&d).unwrap();
        assert_eq!(m.pairs(), &[(2, 0)]);
    }

    #[test]
    fn cross_bin_hand_trace() {
        let d = dataset(
            vec![0.9, 0.1, 0.5, 0.2, 0.8, 0.4],
            vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0],
        );
        let cfg = CrossBinConfig::new(2, 6).unwrap();
        let (m, w) = cross_bin_matching(&d, cfg).unwrap();
        assert_eq!(m.to_one_based(), vec![(1, 4)]);
        assert!((w.as_slice()[0] - 0.7).abs() < 1e-12);
    }

    #[test]
    fn cross_bin_edge_cases() {
        let d = dataset(vec![1.0; 8], (0..8).map(f64::from).collect());
        let cfg = CrossBinConfig::new(2, 8).unwrap();
        assert!(cross_bin_matching(&d, cfg).unwrap().0.is_empty());

        let d = dataset(vec![1.0, 0.0, 0.5], vec![0.0, 1.0, 2.0]);
        let cfg = CrossBinConfig::new(2, 3).unwrap();
        assert_eq!(cfg.bin_size(), 1);
        assert!(cross_bin_matching(&d, cfg).unwrap().0.is_empty());

        assert!(CrossBinConfig::new(4, 3).is_err());
        assert!(CrossBinConfig::new(1, 3).is_err());
    }

    #[test]
    fn bin_count_parsing_and_resolution() {
        assert_eq!("50".parse::<BinCount>().unwrap(), BinCount::Fixed(50));
        let p: BinCount = "n^2/3".parse().unwrap();
        assert_eq!(p.resolve(1000), 100);
        assert_eq!(p.resolve(500), 62);
        assert_eq!(BinCount::Power(0.8).resolve(5000), 910);
        assert!("n^1.5".parse::<BinCount>().is_err());
        assert!("many".parse::<BinCount>().is_err());
    }

    fn arb_dataset() -> impl Strategy<Value = Dataset> {
        (2usize..60).prop_flat_map(|n| {
            (
                proptest::collection::vec(-3i32..3, n),
                proptest::collection::vec(-5.0f64..5.0, n),
            )
                .prop_map(|(z, y)| {
                    let n = y.len();
                    Dataset::new(vec![0.0; n], y, z.into_iter().map(f64::from).collect()).unwrap()
                })
        })
    }

    proptest! {
        #[test]
        fn constructions_are_valid_and_bounded(d in arb_dataset(), k in 2usize..10) {
            let n = d.len();
            let (m, w) = neighbour_matching(&d).unwrap();
            prop_assert!(validate_matching(&d, &m).unwrap());
            prop_assert!(m.len() <= n / 2);
            prop_assert_eq!(m.len(), w.len());
            prop_assert!(w.as_slice().iter().all(|&v| v > 0.0));

            if k <= n {
                let cfg = CrossBinConfig::new(k, n).unwrap();
                let (m, w) = cross_bin_matching(&d, cfg).unwrap();
                prop_assert!(validate_matching(&d, &m).unwrap());
                prop_assert!(m.len() <= (k - 1) * (cfg.bin_size() / 2));
                prop_assert!(w.as_slice().iter().all(|&v| v > 0.0));
            }
        }
    }
}
