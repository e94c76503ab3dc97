//! Coarse operators `A_c = R A P`.
//!
//! Two routes are provided. [`galerkin_direct`] forms two sparse products.
//! The cached route maps every stored `a_ij` to its coarse pair
//! `(agg[i], agg[j])`, sorts the pairs once, and afterwards only needs a
//! gather plus a segmented sum to refresh the coarse values when the fine
//! values change but the pattern does not.

use std::sync::Arc;

use rayon::prelude::*;

use crate::aggregation::Aggregation;
use crate::error::{AmgError, Result};
use crate::sparse::CsrMatrix;

pub fn galerkin_direct(r: &CsrMatrix, a: &CsrMatrix, p: &CsrMatrix) -> Result<CsrMatrix> {
    if r.n_cols() != a.n_rows() {
        return Err(AmgError::dim("galerkin (R A)", r.n_cols(), a.n_rows()));
    }
    let ap = a.spmm(p)?;
    r.spmm(&ap)
}

/// Sorting and segmented-reduction indices for one level.
#[derive(Debug, Clone, PartialEq)]
pub struct GalerkinCache {
    fine_nnz: usize,
    n_coarse: usize,
    /// Coarse pair of every fine nonzero; `None` when the fine row or column
    /// has no interpolation weight.
    pub fine_to_pair: Vec<Option<(usize, usize)>>,
    /// Fine nonzero positions in (I, J, position) order. Contributing entries
    /// come first, non-contributing ones trail after `segment_offsets.last()`.
    pub perm: Vec<usize>,
    /// Run boundaries of equal pairs within `perm`.
    pub segment_offsets: Vec<usize>,
    sorted_rows: Vec<usize>,
    sorted_cols: Vec<usize>,
    coarse_row_offsets: Arc<[usize]>,
    coarse_cols: Arc<[usize]>,
}

impl GalerkinCache {
    /// `p` supplies which fine nodes carry an interpolation weight.
    pub fn build(agg: &Aggregation, a: &CsrMatrix, p: &CsrMatrix) -> Result<Self> {
        let n = a.n_rows();
        if agg.n_fine() != n || !a.is_square() {
            return Err(AmgError::dim("galerkin cache", agg.n_fine(), n));
        }
        if p.n_rows() != n {
            return Err(AmgError::dim("galerkin cache (P)", n, p.n_rows()));
        }
        let interpolated: Vec<bool> = (0..n).map(|i| p.row_nnz(i) > 0).collect();

        let mut fine_rows = vec![0usize; a.nnz()];
        for i in 0..n {
            for q in a.row_range(i) {
                fine_rows[q] = i;
            }
        }
        let cols = a.col_indices();
        let fine_to_pair: Vec<Option<(usize, usize)>> = (0..a.nnz())
            .into_par_iter()
            .map(|q| {
                let (i, j) = (fine_rows[q], cols[q]);
                (interpolated[i] && interpolated[j]).then(|| (agg.agg[i], agg.agg[j]))
            })
            .collect();

        let mut perm: Vec<usize> = (0..a.nnz()).collect();
        perm.par_sort_unstable_by_key(|&q| (fine_to_pair[q].unwrap_or((usize::MAX, usize::MAX)), q));
        let active = perm.partition_point(|&q| fine_to_pair[q].is_some());

        let mut segment_offsets = vec![0];
        let mut coarse_row_offsets = vec![0usize; agg.n_coarse() + 1];
        let mut coarse_cols = Vec::new();
        for k in 0..active {
            let pair = fine_to_pair[perm[k]].unwrap();
            if k > 0 && fine_to_pair[perm[k - 1]].unwrap() == pair {
                continue;
            }
            if k > 0 {
                segment_offsets.push(k);
            }
            coarse_row_offsets[pair.0 + 1] += 1;
            coarse_cols.push(pair.1);
        }
        if active > 0 {
            segment_offsets.push(active);
        }
        for c in 0..agg.n_coarse() {
            coarse_row_offsets[c + 1] += coarse_row_offsets[c];
        }

        let sorted_rows = perm[..active].iter().map(|&q| fine_rows[q]).collect();
        let sorted_cols = perm[..active].iter().map(|&q| cols[q]).collect();
        Ok(GalerkinCache {
            fine_nnz: a.nnz(),
            n_coarse: agg.n_coarse(),
            fine_to_pair,
            perm,
            segment_offsets,
            sorted_rows,
            sorted_cols,
            coarse_row_offsets: coarse_row_offsets.into(),
            coarse_cols: coarse_cols.into(),
        })
    }

    pub fn n_segments(&self) -> usize {
        self.segment_offsets.len() - 1
    }

    pub fn fine_nnz(&self) -> usize {
        self.fine_nnz
    }

    /// Coarse values from new fine values on the cached pattern. Each
    /// contribution is `(P[i,I] a_ij) P[j,J]`, summed in ascending fine
    /// position within its segment.
    pub fn apply(&self, a_values: &[f64], p: &CsrMatrix) -> Result<CsrMatrix> {
        if a_values.len() != self.fine_nnz {
            return Err(AmgError::PatternChanged {
                expected: self.fine_nnz,
                found: a_values.len(),
            });
        }
        if p.n_cols() != self.n_coarse {
            return Err(AmgError::dim("galerkin apply (P)", self.n_coarse, p.n_cols()));
        }
        // one weight per interpolated fine row
        let weight = |i: usize| p.values()[p.row_offsets()[i]];
        let mut values = vec![0.0; self.n_segments()];
        const SEG_BLOCK: usize = 1024;
        values
            .par_chunks_mut(SEG_BLOCK)
            .enumerate()
            .for_each(|(b, out)| {
                for (k, v) in out.iter_mut().enumerate() {
                    let s = b * SEG_BLOCK + k;
                    let mut acc = 0.0;
                    for t in self.segment_offsets[s]..self.segment_offsets[s + 1] {
                        acc += weight(self.sorted_rows[t]) * a_values[self.perm[t]]
                            * weight(self.sorted_cols[t]);
                    }
                    *v = acc;
                }
            });
        Ok(CsrMatrix::from_shared_pattern(
            self.n_coarse,
            self.n_coarse,
            Arc::clone(&self.coarse_row_offsets),
            Arc::clone(&self.coarse_cols),
            values,
        ))
    }
}

pub fn galerkin_build_cache(agg: &Aggregation, a: &CsrMatrix, p: &CsrMatrix) -> Result<GalerkinCache> {
    GalerkinCache::build(agg, a, p)
}

pub fn galerkin_apply_cache(cache: &GalerkinCache, a_values: &[f64], p: &CsrMatrix) -> Result<CsrMatrix> {
    cache.apply(a_values, p)
}
