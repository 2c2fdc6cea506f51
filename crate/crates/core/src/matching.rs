//! Minimum-weight maximum matching between two category sets.
//!
//! [`hungarian_min_weight`] runs the shortest-augmenting-path Hungarian method
//! on a zero-padded square matrix, then picks the lexicographically smallest
//! optimal pairing from the tight edges of the final dual solution.
//! [`brute_force_min_weight`] enumerates every injection and serves as the
//! oracle for it.

use serde::{Deserialize, Serialize};

use crate::error::{Result, TadError};

/// Largest `min(rows, cols)` accepted by the brute-force oracle.
pub const BRUTE_FORCE_MAX_SIDE: usize = 8;
/// Largest number of injections the brute-force oracle will enumerate.
pub const BRUTE_FORCE_MAX_INJECTIONS: u128 = 50_000_000;

/// Dense non-negative cost matrix, row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<f64>,
}

impl CostMatrix {
    pub fn new(rows: usize, cols: usize, entries: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(TadError::validation("cost matrix is empty"));
        }
        if entries.len() != rows * cols {
            return Err(TadError::validation(format!(
                "{} entries for a {rows}x{cols} matrix",
                entries.len()
            )));
        }
        if let Some(e) = entries.iter().find(|e| !e.is_finite() || **e < 0.0) {
            return Err(TadError::validation(format!("entry {e} is negative or not finite")));
        }
        Ok(Self { rows, cols, entries })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(TadError::validation("ragged cost matrix"));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.entries[r * self.cols + c]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    fn max_entry(&self) -> f64 {
        self.entries.iter().cloned().fold(0.0, f64::max)
    }

    /// Total weight of `pairs`, summed in list order.
    pub fn weight_of(&self, pairs: &[(usize, usize)]) -> f64 {
        pairs.iter().map(|&(r, c)| self.get(r, c)).sum()
    }
}

/// A set of (row, col) pairs, sorted by row, with no repeated row or column.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Matching {
    pub pairs: Vec<(usize, usize)>,
    pub total_weight: f64,
}

/// Two optimal weights closer than this are treated as tied.
fn tie_tolerance(cost: &CostMatrix) -> f64 {
    1e-9 * cost.max_entry().max(1.0)
}

/// Minimum-weight maximum matching; ties go to the lexicographically smallest pair list.
pub fn hungarian_min_weight(cost: &CostMatrix) -> Result<Matching> {
    let n = cost.rows.max(cost.cols);
    let padded = |r: usize, c: usize| -> f64 {
        if r < cost.rows && c < cost.cols {
            cost.get(r, c)
        } else {
            0.0
        }
    };
    let (u, v) = hungarian_duals(n, &padded);
    let tol = tie_tolerance(cost);
    let tight = |r: usize, c: usize| padded(r, c) - u[r + 1] - v[c + 1] <= tol;
    let assignment = lexicographic_perfect_matching(n, &tight);
    let pairs: Vec<(usize, usize)> = assignment
        .into_iter()
        .enumerate()
        .filter(|&(r, c)| r < cost.rows && c < cost.cols)
        .collect();
    let total_weight = cost.weight_of(&pairs);
    Ok(Matching { pairs, total_weight })
}

/// Shortest-augmenting-path Hungarian method on an `n x n` matrix, O(n^3).
/// Returns the dual potentials (1-based, index 0 unused).
fn hungarian_duals(n: usize, cost: &impl Fn(usize, usize) -> f64) -> (Vec<f64>, Vec<f64>) {
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut minv = vec![0.0; n + 1];
    let mut used = vec![false; n + 1];

    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0usize;
        minv.iter_mut().for_each(|m| *m = f64::INFINITY);
        used.iter_mut().for_each(|b| *b = false);
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    (u, v)
}

/// Lexicographically smallest perfect matching in the tight-edge graph:
/// rows are fixed in ascending order, each to its smallest feasible column.
fn lexicographic_perfect_matching(n: usize, tight: &impl Fn(usize, usize) -> bool) -> Vec<usize> {
    const FREE: usize = usize::MAX;
    let mut row_to = vec![FREE; n];
    let mut col_to = vec![FREE; n];
    let mut fixed_col = vec![false; n];
    let mut seen = vec![false; n];

    fn augment(
        r: usize,
        n: usize,
        tight: &impl Fn(usize, usize) -> bool,
        row_to: &mut [usize],
        col_to: &mut [usize],
        fixed_col: &[bool],
        seen: &mut [bool],
    ) -> bool {
        for c in 0..n {
            if seen[c] || fixed_col[c] || !tight(r, c) {
                continue;
            }
            seen[c] = true;
            let owner = col_to[c];
            if owner == usize::MAX || augment(owner, n, tight, row_to, col_to, fixed_col, seen) {
                row_to[r] = c;
                col_to[c] = r;
                return true;
            }
        }
        false
    }

    // The dual solution guarantees a perfect matching among tight edges.
    for r in 0..n {
        seen.iter_mut().for_each(|s| *s = false);
        let ok = augment(r, n, tight, &mut row_to, &mut col_to, &fixed_col, &mut seen);
        debug_assert!(ok, "tight graph has no perfect matching");
    }

    for r in 0..n {
        for c in 0..n {
            if fixed_col[c] || !tight(r, c) {
                continue;
            }
            if row_to[r] == c {
                break;
            }
            // Move r onto c, then re-home c's previous owner using the column r vacated.
            let prev_col = row_to[r];
            let displaced = col_to[c];
            col_to[prev_col] = FREE;
            row_to[displaced] = FREE;
            row_to[r] = c;
            col_to[c] = r;
            fixed_col[c] = true;
            seen.iter_mut().for_each(|s| *s = false);
            if augment(displaced, n, tight, &mut row_to, &mut col_to, &fixed_col, &mut seen) {
                fixed_col[c] = false;
                break;
            }
            // Revert: the alternate assignment leaves some row unmatched.
            fixed_col[c] = false;
            row_to[r] = prev_col;
            col_to[prev_col] = r;
            col_to[c] = displaced;
            row_to[displaced] = c;
        }
        fixed_col[row_to[r]] = true;
    }
    row_to
}

/// Exhaustive minimum-weight maximum matching with the same tie rule.
pub fn brute_force_min_weight(cost: &CostMatrix) -> Result<Matching> {
    let (rows, cols) = (cost.rows, cost.cols);
    let side = rows.min(cols);
    let long = rows.max(cols);
    let injections = (0..side).fold(1u128, |acc, i| acc * (long - i) as u128);
    if side > BRUTE_FORCE_MAX_SIDE || injections > BRUTE_FORCE_MAX_INJECTIONS {
        return Err(TadError::infeasible(format!(
            "brute force over a {rows}x{cols} matrix enumerates {injections} injections"
        )));
    }

    let mut candidates: Vec<Vec<(usize, usize)>> = Vec::new();
    let mut pick = Vec::with_capacity(side);
    let mut used = vec![false; long];
    enumerate_injections(side, long, &mut pick, &mut used, &mut |p: &[usize]| {
        // p maps each index of the short side to an index of the long side.
        let mut pairs: Vec<(usize, usize)> = if rows <= cols {
            p.iter().enumerate().map(|(r, &c)| (r, c)).collect()
        } else {
            p.iter().enumerate().map(|(c, &r)| (r, c)).collect()
        };
        pairs.sort_unstable();
        candidates.push(pairs);
    });

    let weights: Vec<f64> = candidates.iter().map(|p| cost.weight_of(p)).collect();
    let best = weights.iter().cloned().fold(f64::INFINITY, f64::min);
    let tol = tie_tolerance(cost);
    let pairs = candidates
        .into_iter()
        .zip(&weights)
        .filter(|(_, &w)| w <= best + tol)
        .map(|(p, _)| p)
        .min()
        .expect("at least one injection");
    let total_weight = cost.weight_of(&pairs);
    Ok(Matching { pairs, total_weight })
}

fn enumerate_injections(
    side: usize,
    long: usize,
    pick: &mut Vec<usize>,
    used: &mut [bool],
    visit: &mut impl FnMut(&[usize]),
) {
    if pick.len() == side {
        visit(pick);
        return;
    }
    for j in 0..long {
        if !used[j] {
            used[j] = true;
            pick.push(j);
            enumerate_injections(side, long, pick, used, visit);
            pick.pop();
            used[j] = false;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn m(rows: &[&[f64]]) -> CostMatrix {
        CostMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn zero_diagonal() {
        let got = hungarian_min_weight(&m(&[&[0.0, 1.0], &[1.0, 0.0]])).unwrap();
        assert_eq!(got.pairs, vec![(0, 0), (1, 1)]);
        assert_eq!(got.total_weight, 0.0);
    }

    #[test]
    fn three_by_three() {
        // All 6 permutations: 4+0+2=6, 4+5+2=11, 1+2+2=5, 1+5+3=9, 3+2+2=7, 3+0+3=6.
        let c = m(&[&[4.0, 1.0, 3.0], &[2.0, 0.0, 5.0], &[3.0, 2.0, 2.0]]);
        let got = hungarian_min_weight(&c).unwrap();
        assert_eq!(got.pairs, vec![(0, 1), (1, 0), (2, 2)]);
        assert_eq!(got.total_weight, 5.0);
        assert_eq!(brute_force_min_weight(&c).unwrap(), got);
    }

    #[test]
    fn all_equal_gives_identity() {
        let c = CostMatrix::new(4, 4, vec![0.3; 16]).unwrap();
        let got = hungarian_min_weight(&c).unwrap();
        assert_eq!(got.pairs, vec![(0, 0), (1, 1), (2, 2), (3, 3)]);
        assert_eq!(got.total_weight, 0.3 + 0.3 + 0.3 + 0.3);
    }

    #[test]
    fn rectangular() {
        // Injections of the 2 rows into 3 cols: (0,1)+(1,0) = 0 is the unique optimum.
        let c = m(&[&[1.0, 0.0, 2.0], &[0.0, 3.0, 1.0]]);
        let want = vec![(0, 1), (1, 0)];
        assert_eq!(brute_force_min_weight(&c).unwrap().pairs, want);
        assert_eq!(hungarian_min_weight(&c).unwrap().pairs, want);
        // Tall: ties between rows resolve to the smallest row indices.
        let tall = m(&[&[1.0], &[1.0], &[1.0]]);
        assert_eq!(hungarian_min_weight(&tall).unwrap().pairs, vec![(0, 0)]);
        assert_eq!(brute_force_min_weight(&tall).unwrap().pairs, vec![(0, 0)]);
    }

    #[test]
    fn single_entry_and_errors() {
        let c = m(&[&[0.0]]);
        assert_eq!(brute_force_min_weight(&c).unwrap().total_weight, 0.0);
        assert_eq!(hungarian_min_weight(&c).unwrap().pairs, vec![(0, 0)]);
        assert!(CostMatrix::new(0, 0, vec![]).is_err());
        assert!(CostMatrix::new(1, 1, vec![-1.0]).is_err());
        assert!(CostMatrix::new(1, 1, vec![f64::NAN]).is_err());
        let big = CostMatrix::new(9, 9, vec![0.0; 81]).unwrap();
        assert!(matches!(brute_force_min_weight(&big), Err(TadError::Infeasible(_))));
    }

    fn small_int_matrix() -> impl Strategy<Value = CostMatrix> {
        (1usize..6, 1usize..6).prop_flat_map(|(r, c)| {
            prop::collection::vec(0u8..4, r * c)
                .prop_map(move |e| CostMatrix::new(r, c, e.into_iter().map(f64::from).collect()).unwrap())
        })
    }

    proptest! {
        #[test]
        fn agrees_with_brute_force_under_ties(c in small_int_matrix()) {
            let h = hungarian_min_weight(&c).unwrap();
            let b = brute_force_min_weight(&c).unwrap();
            prop_assert_eq!(h, b);
        }

        #[test]
        fn constant_shift(c in small_int_matrix(), shift in 0u8..5) {
            let shift = f64::from(shift);
            let shifted = CostMatrix::new(c.rows(), c.cols(), c.entries().iter().map(|e| e + shift).collect()).unwrap();
            let a = hungarian_min_weight(&c).unwrap();
            let b = hungarian_min_weight(&shifted).unwrap();
            prop_assert_eq!(&a.pairs, &b.pairs);
            let k = c.rows().min(c.cols()) as f64;
            prop_assert!((b.total_weight - a.total_weight - k * shift).abs() < 1e-12);
        }

        #[test]
        fn row_permutation(entries in prop::collection::vec(0.0f64..1.0, 25), perm in Just((0..5).collect::<Vec<usize>>()).prop_shuffle()) {
            let c = CostMatrix::new(5, 5, entries.clone()).unwrap();
            let permuted: Vec<f64> = perm.iter().flat_map(|&r| entries[r * 5..r * 5 + 5].to_vec()).collect();
            let p = CostMatrix::new(5, 5, permuted).unwrap();
            let a = hungarian_min_weight(&c).unwrap();
            let b = hungarian_min_weight(&p).unwrap();
            prop_assert!((a.total_weight - b.total_weight).abs() < 1e-12);
            // Row i of the permuted matrix is row perm[i] of the original.
            for &(i, col) in &b.pairs {
                prop_assert!(a.pairs.contains(&(perm[i], col)));
            }
        }
    }
}
