//! Isotonic median matching: pairs points above and below the level of
//! their block in the median projection.

use crate::error::{Error, Result};
use crate::isotonic::{is_sorted, isotonic_l1_projection};
use crate::model::Matching;

/// Breaks ties in `u` by adding `index * eps`, with `eps` small enough that
/// the total perturbation stays below half of the smallest gap.
fn break_ties(u: &[f64]) -> Vec<f64> {
    let mut sorted = u.to_vec();
    sorted.sort_by(f64::total_cmp);
    if sorted.windows(2).all(|w| w[0] < w[1]) {
        return u.to_vec();
    }
    let min_gap = sorted
        .windows(2)
        .map(|w| w[1] - w[0])
        .filter(|&g| g > 0.0)
        .fold(f64::INFINITY, f64::min);
    let spread = if min_gap.is_finite() {
        min_gap
    } else {
        sorted[0].abs().max(1.0)
    };
    let eps = spread / (2.0 * (u.len() as f64 + 1.0));
    u.iter()
        .enumerate()
        .map(|(i, &v)| v + i as f64 * eps)
        .collect()
}

/// Builds the isotonic median matching of `u` against sorted controls `z`.
///
/// Within each constant block of the median projection, the indices above
/// the block level and those below it are each sorted, then paired by rank
/// as `(above, below)`.
pub fn isotonic_median_matching(u: &[f64], z: &[f64]) -> Result<Matching> {
    if u.len() != z.len() {
        return Err(Error::DimensionMismatch {
            expected: z.len(),
            actual: u.len(),
        });
    }
    if !is_sorted(z) {
        return Err(Error::UnsortedControl);
    }
    if let Some(row) = u.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { column: "u", row });
    }
    let u = break_ties(u);
    let projected = isotonic_l1_projection(&u, z)?;

    let mut pairs = Vec::new();
    let mut start = 0;
    while start < u.len() {
        let level = projected[start];
        let end = start + projected[start..].iter().take_while(|&&p| p == level).count();
        let above: Vec<usize> = (start..end).filter(|&i| u[i] > level).collect();
        let below: Vec<usize> = (start..end).filter(|&i| u[i] < level).collect();
        pairs.extend(above.into_iter().zip(below));
        start = end;
    }
    Matching::new(pairs)
}
