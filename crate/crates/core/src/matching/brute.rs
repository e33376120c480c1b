//! Exhaustive search over all valid matchings. Exponential; used as a
//! reference for the polynomial-time constructions.

use crate::error::{Error, Result};
use crate::model::Matching;

/// Largest problem the exhaustive search accepts.
pub const BRUTE_FORCE_MAX_N: usize = 12;

/// Maximises `sum score(i, j)` over matchings of `0..n`. `score(i, j)` is
/// `None` when the ordered pair `(i, j)` is not allowed; both orientations
/// of each pair are tried.
pub fn brute_force_max_matching<F>(n: usize, score: F) -> Result<(Matching, f64)>
where
    F: Fn(usize, usize) -> Option<f64>,
{
    if n > BRUTE_FORCE_MAX_N {
        return Err(Error::BruteForceTooLarge {
            n,
            cap: BRUTE_FORCE_MAX_N,
        });
    }
    // best ordered pair for each unordered pair, or None
    let mut table = vec![vec![None; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let fwd = score(i, j).map(|s| (s, (i, j)));
            let rev = score(j, i).map(|s| (s, (j, i)));
            table[i][j] = match (fwd, rev) {
                (Some(a), Some(b)) => Some(if b.0 > a.0 { b } else { a }),
                (a, b) => a.or(b),
            };
        }
    }
    let mut search = Search {
        table: &table,
        used: vec![false; n],
        current: Vec::new(),
        best: Vec::new(),
        best_value: 0.0,
    };
    search.visit(0, 0.0);
    let best_value = search.best_value;
    Ok((Matching::new(search.best)?, best_value))
}

struct Search<'a> {
    table: &'a [Vec<Option<(f64, (usize, usize))>>],
    used: Vec<bool>,
    current: Vec<(usize, usize)>,
    best: Vec<(usize, usize)>,
    best_value: f64,
}

impl Search<'_> {
    fn visit(&mut self, from: usize, value: f64) {
        let n = self.used.len();
        let Some(i) = (from..n).find(|&i| !self.used[i]) else {
            if value > self.best_value {
                self.best_value = value;
                self.best = self.current.clone();
            }
            return;
        };
        self.used[i] = true;
        // leave i unmatched
        self.visit(i + 1, value);
        for j in (i + 1)..n {
            if self.used[j] {
                continue;
            }
            if let Some((s, pair)) = self.table[i][j] {
                self.used[j] = true;
                self.current.push(pair);
                self.visit(i + 1, value + s);
                self.current.pop();
                self.used[j] = false;
            }
        }
        self.used[i] = false;
    }
}

/// Best matching for a mean vector: maximises the sum over pairs of
/// `max(mu_i - mu_j, 0)^2` among pairs with `z_i <= z_j`.
pub fn brute_force_best_matching(mu: &[f64], z: &[f64]) -> Result<(Matching, f64)> {
    if mu.len() != z.len() {
        return Err(Error::DimensionMismatch {
            expected: z.len(),
            actual: mu.len(),
        });
    }
    brute_force_max_matching(mu.len(), |i, j| {
        (z[i] <= z[j]).then(|| (mu[i] - mu[j]).max(0.0).powi(2))
    })
}
