//! Shared data model: datasets, matchings, weights, swaps and test results.
//!
//! Indices are zero-based in this API. File formats and printed output use
//! one-based indices; see [`Matching::from_one_based`] and
//! [`Matching::to_one_based`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Aligned observations `(x_i, y_i, z_i)`, all finite.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Dataset {
    x: Vec<f64>,
    y: Vec<f64>,
    z: Vec<f64>,
}

fn check_finite(column: &'static str, values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(row) => Err(Error::NonFinite { column, row }),
        None => Ok(()),
    }
}

impl Dataset {
    pub fn new(x: Vec<f64>, y: Vec<f64>, z: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() || x.len() != z.len() {
            return Err(Error::LengthMismatch {
                x: x.len(),
                y: y.len(),
                z: z.len(),
            });
        }
        if x.is_empty() {
            return Err(Error::EmptyDataset);
        }
        check_finite("x", &x)?;
        check_finite("y", &y)?;
        check_finite("z", &z)?;
        Ok(Self { x, y, z })
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn z(&self) -> &[f64] {
        &self.z
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Same `y` and `z`, new response column.
    pub fn with_x(&self, x: Vec<f64>) -> Result<Self> {
        Self::new(x, self.y.clone(), self.z.clone())
    }

    /// Rows at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let n = self.len();
        if let Some(&bad) = indices.iter().find(|&&i| i >= n) {
            return Err(Error::IndexOutOfBounds { index: bad, n });
        }
        let pick = |col: &[f64]| indices.iter().map(|&i| col[i]).collect::<Vec<_>>();
        Self::new(pick(&self.x), pick(&self.y), pick(&self.z))
    }

    /// Permutation sorting `z` ascending; ties keep their original order.
    pub fn z_order(&self) -> Vec<usize> {
        sort_permutation(&self.z)
    }
}

/// Stable ascending sort permutation of `values` (which must be finite).
pub(crate) fn sort_permutation(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    order
}

/// Disjoint ordered pairs `(i, j)`; the first index is the one expected to
/// have the smaller control value.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Matching {
    pairs: Vec<(usize, usize)>,
}

impl Matching {
    /// Builds a matching from zero-based pairs. Rejects repeated indices.
    pub fn new(pairs: Vec<(usize, usize)>) -> Result<Self> {
        let mut seen = std::collections::HashSet::with_capacity(2 * pairs.len());
        for &(i, j) in &pairs {
            if i == j {
                return Err(Error::SelfPair(i));
            }
            for idx in [i, j] {
                if !seen.insert(idx) {
                    return Err(Error::DuplicateIndex(idx));
                }
            }
        }
        Ok(Self { pairs })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn from_one_based(pairs: &[(usize, usize)]) -> Result<Self> {
        let mut zero = Vec::with_capacity(pairs.len());
        for &(i, j) in pairs {
            if i == 0 || j == 0 {
                return Err(Error::InvalidParameter(
                    "one-based indices start at 1".into(),
                ));
            }
            zero.push((i - 1, j - 1));
        }
        Self::new(zero)
    }

    pub fn to_one_based(&self) -> Vec<(usize, usize)> {
        self.pairs.iter().map(|&(i, j)| (i + 1, j + 1)).collect()
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    fn check_bounds(&self, n: usize) -> Result<()> {
        for &(i, j) in &self.pairs {
            for idx in [i, j] {
                if idx >= n {
                    return Err(Error::IndexOutOfBounds { index: idx, n });
                }
            }
        }
        Ok(())
    }

    fn indices_distinct(&self) -> bool {
        let mut seen = std::collections::HashSet::with_capacity(2 * self.pairs.len());
        self.pairs
            .iter()
            .all(|&(i, j)| i != j && seen.insert(i) && seen.insert(j))
    }
}

/// Checks that every pair of `m` respects the order of the control column.
///
/// Returns an error for indices outside the dataset, and `false` when any
/// pair has `z_i > z_j` (ties are allowed).
pub fn validate_matching(d: &Dataset, m: &Matching) -> Result<bool> {
    validate_matching_on(d.z(), m)
}

/// [`validate_matching`] against a bare control column.
pub fn validate_matching_on(z: &[f64], m: &Matching) -> Result<bool> {
    m.check_bounds(z.len())?;
    Ok(m.indices_distinct() && m.pairs.iter().all(|&(i, j)| z[i] <= z[j]))
}

/// Validity under the coordinate-wise partial order for vector controls:
/// every pair needs `z_i[k] <= z_j[k]` in every coordinate `k`.
pub fn validate_matching_multivariate(z: &[Vec<f64>], m: &Matching) -> Result<bool> {
    m.check_bounds(z.len())?;
    if let Some(dim) = z.first().map(Vec::len) {
        if let Some(row) = z.iter().find(|row| row.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: row.len(),
            });
        }
    }
    Ok(m.indices_distinct()
        && m
            .pairs
            .iter()
            .all(|&(i, j)| z[i].iter().zip(&z[j]).all(|(a, b)| a <= b)))
}

/// Non-negative finite pair weights.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if let Some((index, &value)) = w
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v >= 0.0))
        {
            return Err(Error::InvalidWeight { index, value });
        }
        Ok(Self(w))
    }

    pub fn ones(len: usize) -> Self {
        Self(vec![1.0; len])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Multiplies every weight by `factor > 0`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(self.0.iter().map(|w| w * factor).collect())
    }
}

/// One sign per pair: `+1` keeps the pair, `-1` exchanges its two values.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SwapVector {
    swapped: Vec<bool>,
}

impl SwapVector {
    pub fn from_signs(signs: &[i64]) -> Result<Self> {
        let swapped = signs
            .iter()
            .map(|&s| match s {
                1 => Ok(false),
                -1 => Ok(true),
                other => Err(Error::InvalidSign(other)),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { swapped })
    }

    pub fn identity(len: usize) -> Self {
        Self {
            swapped: vec![false; len],
        }
    }

    /// Bit `l` of `mask` set means pair `l` is swapped.
    pub fn from_mask(mask: u64, len: usize) -> Self {
        Self {
            swapped: (0..len).map(|l| (mask >> l) & 1 == 1).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.swapped.len()
    }

    pub fn is_empty(&self) -> bool {
        self.swapped.is_empty()
    }

    pub fn is_swapped(&self, l: usize) -> bool {
        self.swapped[l]
    }

    pub fn signs(&self) -> Vec<i64> {
        self.swapped.iter().map(|&s| if s { -1 } else { 1 }).collect()
    }
}

/// Copy of `xs` with the pairs flagged in `s` exchanged.
pub fn apply_swap(xs: &[f64], m: &Matching, s: &SwapVector) -> Result<Vec<f64>> {
    if s.len() != m.len() {
        return Err(Error::DimensionMismatch {
            expected: m.len(),
            actual: s.len(),
        });
    }
    m.check_bounds(xs.len())?;
    let mut out = xs.to_vec();
    for (l, &(i, j)) in m.pairs.iter().enumerate() {
        if s.is_swapped(l) {
            out.swap(i, j);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Exact,
    MonteCarlo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
    pub method: Method,
    pub num_pairs: usize,
    pub num_draws: Option<u64>,
    pub seed: Option<u64>,
}
