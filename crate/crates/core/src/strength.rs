//! Classic strength of connection.
//!
//! Row `i` is strongly connected to `j != i` when `-s_i a_ij` exceeds
//! `alpha` times the largest positive `-s_i a_ik` in the row, with
//! `s_i = sign(a_ii)`. Rows without any positive `-s_i a_ik` have no strong
//! connections.

use log::warn;
use rayon::prelude::*;

use crate::error::{AmgError, Result};
use crate::sparse::CsrMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct StrengthGraph {
    /// Strong-connection pattern. Stored values hold `|a_ij|` of the
    /// underlying matrix entry, used only for tie-breaking.
    pub c: CsrMatrix,
    pub alpha: f64,
}

impl StrengthGraph {
    pub fn n(&self) -> usize {
        self.c.n_rows()
    }

    /// Number of strong connections leaving `i`.
    pub fn out_degree(&self, i: usize) -> usize {
        self.c.row_nnz(i)
    }

    /// Build directly from a pattern; used for synthetic graphs.
    pub fn from_pattern(c: CsrMatrix) -> Result<Self> {
        if !c.is_square() {
            return Err(AmgError::dim("strength pattern", c.n_rows(), c.n_cols()));
        }
        if (0..c.n_rows()).any(|i| c.get(i, i).is_some()) {
            return Err(AmgError::InvalidStructure(
                "strength graph must not contain self-loops".into(),
            ));
        }
        Ok(StrengthGraph { c, alpha: f64::NAN })
    }
}

pub fn classic_strength(a: &CsrMatrix, alpha: f64) -> Result<StrengthGraph> {
    classic_strength_with(a, alpha, false)
}

/// With `permissive`, a zero diagonal is treated as positive (with a warning)
/// instead of being rejected.
pub fn classic_strength_with(a: &CsrMatrix, alpha: f64, permissive: bool) -> Result<StrengthGraph> {
    if !a.is_square() {
        return Err(AmgError::dim("classic_strength", a.n_rows(), a.n_cols()));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(AmgError::InvalidConfig(format!(
            "strength threshold must lie in (0, 1), got {alpha}"
        )));
    }
    let n = a.n_rows();

    let rows: Vec<Result<Vec<(usize, f64)>>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let d = a.get(i, i).unwrap_or(0.0);
            let sign = if d > 0.0 {
                1.0
            } else if d < 0.0 {
                -1.0
            } else if permissive {
                warn!("row {i} has a zero diagonal; treating its sign as positive");
                1.0
            } else {
                return Err(AmgError::ZeroDiagonal { row: i });
            };
            let max = a
                .row(i)
                .filter(|&(j, _)| j != i)
                .map(|(_, v)| -sign * v)
                .filter(|&m| m > 0.0)
                .fold(0.0f64, f64::max);
            if max == 0.0 {
                return Ok(Vec::new());
            }
            let threshold = alpha * max;
            Ok(a
                .row(i)
                .filter(|&(j, v)| j != i && -sign * v > threshold)
                .map(|(j, v)| (j, v.abs()))
                .collect())
        })
        .collect();

    let mut row_offsets = Vec::with_capacity(n + 1);
    row_offsets.push(0);
    let mut col_indices = Vec::new();
    let mut values = Vec::new();
    for row in rows {
        for (j, v) in row? {
            col_indices.push(j);
            values.push(v);
        }
        row_offsets.push(col_indices.len());
    }
    Ok(StrengthGraph {
        c: CsrMatrix::from_parts_unchecked(n, n, row_offsets, col_indices, values),
        alpha,
    })
}

/// In-degree of every node: the number of nodes it strongly influences.
pub fn influence_counts(c: &StrengthGraph) -> Vec<usize> {
    let mut counts = vec![0usize; c.n()];
    for &j in c.c.col_indices() {
        counts[j] += 1;
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pattern(g: &StrengthGraph) -> Vec<(usize, usize)> {
        (0..g.n())
            .flat_map(|i| g.c.row(i).map(move |(j, _)| (i, j)))
            .collect()
    }

    #[test]
    fn two_by_two() {
        let a = CsrMatrix::from_dense(2, 2, &[2.0, -1.0, -1.0, 2.0]);
        let g = classic_strength(&a, 0.25).unwrap();
        assert_eq!(pattern(&g), vec![(0, 1), (1, 0)]);
    }

    #[test]
    fn diagonal_is_empty() {
        let a = CsrMatrix::from_diagonal(&[1.0, 2.0, 3.0]);
        assert_eq!(classic_strength(&a, 0.25).unwrap().c.nnz(), 0);
    }

    #[test]
    fn anisotropic_row_keeps_x_neighbors() {
        let eps = 0.01;
        // row 2 is the interior row: y-neighbours 0 and 4, x-neighbours 1 and 3
        let mut d = vec![0.0; 25];
        d[2 * 5 + 2] = 2.0 * (1.0 + eps);
        d[2 * 5 + 1] = -1.0;
        d[2 * 5 + 3] = -1.0;
        d[2 * 5] = -eps;
        d[2 * 5 + 4] = -eps;
        for i in [0, 1, 3, 4] {
            d[i * 5 + i] = 1.0;
        }
        let g = classic_strength(&CsrMatrix::from_dense(5, 5, &d), 0.25).unwrap();
        assert_eq!(pattern(&g), vec![(2, 1), (2, 3)]);
    }

    #[test]
    fn positive_offdiagonals_are_weak() {
        let a = CsrMatrix::from_dense(2, 2, &[2.0, 1.0, 1.0, 2.0]);
        assert_eq!(classic_strength(&a, 0.25).unwrap().c.nnz(), 0);
        // negative diagonal flips the sign convention
        let a = CsrMatrix::from_dense(2, 2, &[-2.0, 1.0, 1.0, -2.0]);
        assert_eq!(classic_strength(&a, 0.25).unwrap().c.nnz(), 2);
    }

    #[test]
    fn threshold_ties_are_weak() {
        let a = CsrMatrix::from_dense(3, 3, &[4.0, -1.0, -0.5, -1.0, 4.0, 0.0, -0.5, 0.0, 4.0]);
        let g = classic_strength(&a, 0.5).unwrap();
        assert_eq!(g.c.get(0, 2), None);
        assert!(g.c.get(0, 1).is_some());
    }

    #[test]
    fn zero_diagonal() {
        let a = CsrMatrix::from_dense(2, 2, &[0.0, -1.0, -1.0, 2.0]);
        assert!(matches!(
            classic_strength(&a, 0.25),
            Err(AmgError::ZeroDiagonal { row: 0 })
        ));
        let g = classic_strength_with(&a, 0.25, true).unwrap();
        assert_eq!(g.c.nnz(), 2);
        assert!(classic_strength(&a, 1.0).is_err());
    }

    #[test]
    fn influence_counts_cases() {
        let empty = StrengthGraph::from_pattern(CsrMatrix::zeros(3, 3)).unwrap();
        assert_eq!(influence_counts(&empty), vec![0, 0, 0]);
        let c = CsrMatrix::from_dense(3, 3, &[0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let g = StrengthGraph::from_pattern(c).unwrap();
        assert_eq!(influence_counts(&g), vec![0, 2, 0]);
    }

    #[test]
    fn influence_counts_match_transpose_row_counts() {
        let mut s = 17u64;
        let mut d = vec![0.0; 40 * 40];
        for i in 0..40 {
            for j in 0..40 {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                if i != j && (s >> 40) % 7 == 0 {
                    d[i * 40 + j] = 1.0;
                }
            }
        }
        let g = StrengthGraph::from_pattern(CsrMatrix::from_dense(40, 40, &d)).unwrap();
        let t = g.c.transpose();
        let want: Vec<usize> = (0..40).map(|i| t.row_nnz(i)).collect();
        assert_eq!(influence_counts(&g), want);
    }
}
