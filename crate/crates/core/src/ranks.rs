//! Row-wise ranks of a dependence template.
//!
//! The rank of entry `n` in a row is the count of entries less than or equal
//! to it. Without ties every row is a permutation of `1..=N`; ties are
//! resolved by the recorded policy so the permutation property always holds.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};

/// How equal values within a row are ordered.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TiePolicy {
    /// Tied entries get the tied ranks in random order (seeded by the caller).
    /// Default; avoids rank-histogram artifacts from systematic ordering.
    Random,
    /// Tied entries keep their original column order.
    FirstOccurrence,
}

/// Row-wise ranks of a `T x N` template, entries in `1..=N`, together with the
/// tie policy they were computed under.
#[derive(Debug, Clone)]
pub struct RankMatrix {
    ranks: Array2<usize>,
    tie_policy: TiePolicy,
}

impl RankMatrix {
    pub fn ranks(&self) -> &Array2<usize> {
        &self.ranks
    }

    pub fn tie_policy(&self) -> TiePolicy {
        self.tie_policy
    }

    pub fn n_rows(&self) -> usize {
        self.ranks.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.ranks.ncols()
    }

    /// Rank of column `col` in row `row`, in `1..=N`.
    pub fn rank(&self, row: usize, col: usize) -> usize {
        self.ranks[(row, col)]
    }
}

/// Compute row-wise ranks of `template` under `tie_policy`.
///
/// `rng` is only consulted when ties occur under [`TiePolicy::Random`].
pub fn compute_ranks(
    template: &Array2<f64>,
    tie_policy: TiePolicy,
    rng: &mut impl Rng,
) -> Result<RankMatrix> {
    for ((r, c), &v) in template.indexed_iter() {
        if !v.is_finite() {
            return Err(Error::NonFinite {
                what: "rank template",
                row: r,
                col: c,
            });
        }
    }

    let (t, n) = template.dim();
    let mut ranks = Array2::<usize>::zeros((t, n));
    let mut order: Vec<usize> = Vec::with_capacity(n);
    for (r, row) in template.rows().into_iter().enumerate() {
        order.clear();
        order.extend(0..n);
        // Stable sort keeps tied entries in column order, which is exactly
        // the first-occurrence policy.
        order.sort_by(|&a, &b| row[a].partial_cmp(&row[b]).unwrap());
        if tie_policy == TiePolicy::Random {
            let mut start = 0;
            while start < n {
                let mut end = start + 1;
                while end < n && row[order[end]] == row[order[start]] {
                    end += 1;
                }
                if end - start > 1 {
                    order[start..end].shuffle(rng);
                }
                start = end;
            }
        }
        for (pos, &col) in order.iter().enumerate() {
            ranks[(r, col)] = pos + 1;
        }
    }

    Ok(RankMatrix { ranks, tie_policy })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(7)
    }

    #[test]
    fn ranks_by_leq_count() {
        let m = array![[5.0, 2.0, 3.0]];
        let r = compute_ranks(&m, TiePolicy::FirstOccurrence, &mut rng()).unwrap();
        assert_eq!(r.ranks().row(0).to_vec(), vec![3, 1, 2]);
    }

    #[test]
    fn sorted_row_is_identity() {
        let m = array![[1.0, 2.0, 3.0]];
        let r = compute_ranks(&m, TiePolicy::FirstOccurrence, &mut rng()).unwrap();
        assert_eq!(r.ranks().row(0).to_vec(), vec![1, 2, 3]);
    }

    #[test]
    fn first_occurrence_breaks_ties_by_column() {
        let m = array![[7.0, 7.0]];
        let r = compute_ranks(&m, TiePolicy::FirstOccurrence, &mut rng()).unwrap();
        assert_eq!(r.ranks().row(0).to_vec(), vec![1, 2]);
    }

    #[test]
    fn random_ties_yield_some_permutation() {
        let m = array![[7.0, 7.0]];
        let r = compute_ranks(&m, TiePolicy::Random, &mut rng()).unwrap();
        let mut row = r.ranks().row(0).to_vec();
        row.sort_unstable();
        assert_eq!(row, vec![1, 2]);
    }

    #[test]
    fn every_row_is_a_permutation_even_with_ties() {
        let m = array![[1.0, 1.0, 1.0, 0.5], [2.0, 2.0, 0.0, 2.0]];
        let r = compute_ranks(&m, TiePolicy::Random, &mut rng()).unwrap();
        for row in r.ranks().rows() {
            let mut v = row.to_vec();
            v.sort_unstable();
            assert_eq!(v, vec![1, 2, 3, 4]);
        }
    }

    #[test]
    fn non_finite_is_rejected_with_location() {
        let m = array![[1.0, f64::INFINITY], [0.0, 1.0]];
        let err = compute_ranks(&m, TiePolicy::Random, &mut rng()).unwrap_err();
        match err {
            Error::NonFinite { row, col, .. } => {
                assert_eq!((row, col), (0, 1));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }
}
