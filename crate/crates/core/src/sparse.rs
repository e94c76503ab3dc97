//! Compressed sparse row storage and the kernels built on it.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{AmgError, Result};

/// Rows handed to one rayon task in the row-parallel kernels.
const ROW_BLOCK: usize = 512;

/// Canonical CSR matrix: strictly increasing columns within each row, no
/// duplicates. Explicitly stored zeros are kept as structural entries.
/// The index arrays are shared between matrices with the same pattern, so
/// value-only updates do not copy them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsrMatrix {
    n_rows: usize,
    n_cols: usize,
    row_offsets: Arc<[usize]>,
    col_indices: Arc<[usize]>,
    values: Vec<f64>,
}

/// Coordinate staging list. Duplicates are allowed and summed on conversion.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TripletList {
    n_rows: usize,
    n_cols: usize,
    rows: Vec<usize>,
    cols: Vec<usize>,
    values: Vec<f64>,
}

impl TripletList {
    pub fn new(n_rows: usize, n_cols: usize) -> Self {
        TripletList {
            n_rows,
            n_cols,
            ..Default::default()
        }
    }

    pub fn with_capacity(n_rows: usize, n_cols: usize, cap: usize) -> Self {
        TripletList {
            n_rows,
            n_cols,
            rows: Vec::with_capacity(cap),
            cols: Vec::with_capacity(cap),
            values: Vec::with_capacity(cap),
        }
    }

    pub fn push(&mut self, row: usize, col: usize, value: f64) -> Result<()> {
        if row >= self.n_rows || col >= self.n_cols {
            return Err(AmgError::IndexOutOfBounds {
                row,
                col,
                n_rows: self.n_rows,
                n_cols: self.n_cols,
            });
        }
        self.rows.push(row);
        self.cols.push(col);
        self.values.push(value);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n_rows, self.n_cols)
    }

    /// Sum duplicates into a canonical CSR matrix. Duplicates are folded in
    /// ascending order of their position in the list.
    pub fn to_csr(&self) -> CsrMatrix {
        let mut order: Vec<usize> = (0..self.len()).collect();
        // stable: equal (row, col) keep insertion order
        order.par_sort_by_key(|&k| (self.rows[k], self.cols[k]));

        let mut row_offsets = vec![0usize; self.n_rows + 1];
        let mut col_indices = Vec::with_capacity(order.len());
        let mut values: Vec<f64> = Vec::with_capacity(order.len());
        let mut last: Option<(usize, usize)> = None;
        for &k in &order {
            let key = (self.rows[k], self.cols[k]);
            if last == Some(key) {
                *values.last_mut().unwrap() += self.values[k];
            } else {
                row_offsets[key.0 + 1] += 1;
                col_indices.push(key.1);
                values.push(self.values[k]);
                last = Some(key);
            }
        }
        for i in 0..self.n_rows {
            row_offsets[i + 1] += row_offsets[i];
        }
        CsrMatrix {
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            row_offsets: row_offsets.into(),
            col_indices: col_indices.into(),
            values,
        }
    }
}

impl CsrMatrix {
    /// Build from raw arrays, validating canonical form.
    pub fn try_new(
        n_rows: usize,
        n_cols: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Result<Self> {
        if row_offsets.len() != n_rows + 1 {
            return Err(AmgError::InvalidStructure(format!(
                "row_offsets has length {}, expected {}",
                row_offsets.len(),
                n_rows + 1
            )));
        }
        if row_offsets[0] != 0 {
            return Err(AmgError::InvalidStructure("row_offsets[0] != 0".into()));
        }
        if col_indices.len() != values.len() || row_offsets[n_rows] != col_indices.len() {
            return Err(AmgError::InvalidStructure(format!(
                "nnz mismatch: row_offsets end {}, {} columns, {} values",
                row_offsets[n_rows],
                col_indices.len(),
                values.len()
            )));
        }
        for i in 0..n_rows {
            let (lo, hi) = (row_offsets[i], row_offsets[i + 1]);
            if lo > hi {
                return Err(AmgError::InvalidStructure(format!(
                    "row_offsets decreases at row {i}"
                )));
            }
            let cols = &col_indices[lo..hi];
            if let Some(&c) = cols.iter().find(|&&c| c >= n_cols) {
                return Err(AmgError::IndexOutOfBounds {
                    row: i,
                    col: c,
                    n_rows,
                    n_cols,
                });
            }
            if cols.windows(2).any(|w| w[0] >= w[1]) {
                return Err(AmgError::InvalidStructure(format!(
                    "row {i} columns not strictly increasing"
                )));
            }
        }
        Ok(CsrMatrix {
            n_rows,
            n_cols,
            row_offsets: row_offsets.into(),
            col_indices: col_indices.into(),
            values,
        })
    }

    pub(crate) fn from_parts_unchecked(
        n_rows: usize,
        n_cols: usize,
        row_offsets: Vec<usize>,
        col_indices: Vec<usize>,
        values: Vec<f64>,
    ) -> Self {
        debug_assert_eq!(row_offsets.len(), n_rows + 1);
        debug_assert_eq!(col_indices.len(), values.len());
        CsrMatrix {
            n_rows,
            n_cols,
            row_offsets: row_offsets.into(),
            col_indices: col_indices.into(),
            values,
        }
    }

    /// Matrix on an existing shared pattern.
    pub(crate) fn from_shared_pattern(
        n_rows: usize,
        n_cols: usize,
        row_offsets: Arc<[usize]>,
        col_indices: Arc<[usize]>,
        values: Vec<f64>,
    ) -> Self {
        debug_assert_eq!(row_offsets.len(), n_rows + 1);
        debug_assert_eq!(col_indices.len(), values.len());
        CsrMatrix {
            n_rows,
            n_cols,
            row_offsets,
            col_indices,
            values,
        }
    }

    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        CsrMatrix {
            n_rows,
            n_cols,
            row_offsets: vec![0; n_rows + 1].into(),
            col_indices: Arc::new([]),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        CsrMatrix {
            n_rows: n,
            n_cols: n,
            row_offsets: (0..=n).collect(),
            col_indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = CsrMatrix::identity(diag.len());
        m.values.copy_from_slice(diag);
        m
    }

    /// Convert a row-major dense array, storing every nonzero.
    pub fn from_dense(n_rows: usize, n_cols: usize, dense: &[f64]) -> Self {
        assert_eq!(dense.len(), n_rows * n_cols);
        let mut row_offsets = Vec::with_capacity(n_rows + 1);
        let mut col_indices = Vec::new();
        let mut values = Vec::new();
        row_offsets.push(0);
        for i in 0..n_rows {
            for j in 0..n_cols {
                let v = dense[i * n_cols + j];
                if v != 0.0 {
                    col_indices.push(j);
                    values.push(v);
                }
            }
            row_offsets.push(col_indices.len());
        }
        CsrMatrix {
            n_rows,
            n_cols,
            row_offsets: row_offsets.into(),
            col_indices: col_indices.into(),
            values,
        }
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n_rows * self.n_cols];
        for i in 0..self.n_rows {
            for (j, v) in self.row(i) {
                d[i * self.n_cols + j] = v;
            }
        }
        d
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n_rows, self.n_cols)
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn is_square(&self) -> bool {
        self.n_rows == self.n_cols
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn row_range(&self, i: usize) -> std::ops::Range<usize> {
        self.row_offsets[i]..self.row_offsets[i + 1]
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_range(i);
        self.col_indices[r.clone()]
            .iter()
            .copied()
            .zip(self.values[r].iter().copied())
    }

    pub fn row_nnz(&self, i: usize) -> usize {
        self.row_offsets[i + 1] - self.row_offsets[i]
    }

    /// Stored value at (i, j), or `None` when the entry is not structural.
    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        let r = self.row_range(i);
        self.col_indices[r.clone()]
            .binary_search(&j)
            .ok()
            .map(|k| self.values[r.start + k])
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n_rows.min(self.n_cols))
            .map(|i| self.get(i, i).unwrap_or(0.0))
            .collect()
    }

    /// Same pattern, new values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        if values.len() != self.nnz() {
            return Err(AmgError::PatternChanged {
                expected: self.nnz(),
                found: values.len(),
            });
        }
        Ok(CsrMatrix {
            n_rows: self.n_rows,
            n_cols: self.n_cols,
            row_offsets: Arc::clone(&self.row_offsets),
            col_indices: Arc::clone(&self.col_indices),
            values,
        })
    }

    pub fn same_pattern(&self, other: &CsrMatrix) -> bool {
        self.shape() == other.shape()
            && self.row_offsets == other.row_offsets
            && self.col_indices == other.col_indices
    }

    /// y = A x
    pub fn spmv(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut y = vec![0.0; self.n_rows];
        self.spmv_into(x, &mut y)?;
        Ok(y)
    }

    pub fn spmv_into(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        if x.len() != self.n_cols {
            return Err(AmgError::dim("spmv (x)", self.n_cols, x.len()));
        }
        if y.len() != self.n_rows {
            return Err(AmgError::dim("spmv (y)", self.n_rows, y.len()));
        }
        y.par_chunks_mut(ROW_BLOCK)
            .enumerate()
            .for_each(|(blk, ys)| {
                let base = blk * ROW_BLOCK;
                for (k, yi) in ys.iter_mut().enumerate() {
                    let r = self.row_range(base + k);
                    let mut acc = 0.0;
                    for p in r {
                        acc += self.values[p] * x[self.col_indices[p]];
                    }
                    *yi = acc;
                }
            });
        Ok(())
    }

    /// r = b - A x
    pub fn residual_into(&self, b: &[f64], x: &[f64], r: &mut [f64]) -> Result<()> {
        if b.len() != self.n_rows {
            return Err(AmgError::dim("residual (b)", self.n_rows, b.len()));
        }
        if x.len() != self.n_cols {
            return Err(AmgError::dim("residual (x)", self.n_cols, x.len()));
        }
        if r.len() != self.n_rows {
            return Err(AmgError::dim("residual (r)", self.n_rows, r.len()));
        }
        r.par_chunks_mut(ROW_BLOCK)
            .enumerate()
            .for_each(|(blk, rs)| {
                let base = blk * ROW_BLOCK;
                for (k, ri) in rs.iter_mut().enumerate() {
                    let i = base + k;
                    let mut acc = 0.0;
                    for p in self.row_range(i) {
                        acc += self.values[p] * x[self.col_indices[p]];
                    }
                    *ri = b[i] - acc;
                }
            });
        Ok(())
    }

    /// Canonical transpose (counting sort over columns).
    pub fn transpose(&self) -> CsrMatrix {
        let mut row_offsets = vec![0usize; self.n_cols + 1];
        for &c in self.col_indices.iter() {
            row_offsets[c + 1] += 1;
        }
        for j in 0..self.n_cols {
            row_offsets[j + 1] += row_offsets[j];
        }
        let mut next = row_offsets.clone();
        let mut col_indices = vec![0usize; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for i in 0..self.n_rows {
            for p in self.row_range(i) {
                let c = self.col_indices[p];
                let q = next[c];
                col_indices[q] = i;
                values[q] = self.values[p];
                next[c] += 1;
            }
        }
        CsrMatrix {
            n_rows: self.n_cols,
            n_cols: self.n_rows,
            row_offsets: row_offsets.into(),
            col_indices: col_indices.into(),
            values,
        }
    }

    /// C = A B. The pattern is structural: every (i, j) reachable through a
    /// stored A[i,k] and stored B[k,j] is kept, even when the sum is zero.
    /// Each output value is summed in (A in-row position, B in-row position)
    /// order.
    pub fn spmm(&self, b: &CsrMatrix) -> Result<CsrMatrix> {
        if self.n_cols != b.n_rows {
            return Err(AmgError::dim("spmm", self.n_cols, b.n_rows));
        }
        let n_blocks = self.n_rows.div_ceil(ROW_BLOCK);
        let blocks: Vec<(Vec<usize>, Vec<usize>, Vec<f64>)> = (0..n_blocks)
            .into_par_iter()
            .map(|blk| {
                let lo = blk * ROW_BLOCK;
                let hi = (lo + ROW_BLOCK).min(self.n_rows);
                let mut counts = Vec::with_capacity(hi - lo);
                let mut cols = Vec::new();
                let mut vals = Vec::new();
                let mut scratch: Vec<(usize, f64)> = Vec::new();
                for i in lo..hi {
                    scratch.clear();
                    for (k, a) in self.row(i) {
                        for (j, bv) in b.row(k) {
                            scratch.push((j, a * bv));
                        }
                    }
                    scratch.sort_by_key(|e| e.0);
                    let before = cols.len();
                    let mut last = usize::MAX;
                    for &(j, v) in &scratch {
                        if j == last {
                            *vals.last_mut().unwrap() += v;
                        } else {
                            cols.push(j);
                            vals.push(v);
                            last = j;
                        }
                    }
                    counts.push(cols.len() - before);
                }
                (counts, cols, vals)
            })
            .collect();

        let nnz: usize = blocks.iter().map(|b| b.1.len()).sum();
        let mut row_offsets = Vec::with_capacity(self.n_rows + 1);
        let mut col_indices = Vec::with_capacity(nnz);
        let mut values = Vec::with_capacity(nnz);
        row_offsets.push(0);
        for (counts, cols, vals) in blocks {
            for c in counts {
                row_offsets.push(row_offsets.last().unwrap() + c);
            }
            col_indices.extend(cols);
            values.extend(vals);
        }
        Ok(CsrMatrix {
            n_rows: self.n_rows,
            n_cols: b.n_cols,
            row_offsets: row_offsets.into(),
            col_indices: col_indices.into(),
            values,
        })
    }

    pub fn scaled(&self, a: f64) -> CsrMatrix {
        let values = self.values.iter().map(|v| v * a).collect();
        self.with_values(values).expect("same length")
    }

    /// Max |A - A^T| over the union pattern, zero for exactly symmetric input.
    pub fn asymmetry(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let t = self.transpose();
        let mut worst: f64 = 0.0;
        for i in 0..self.n_rows {
            for (j, v) in self.row(i) {
                worst = worst.max((v - t.get(i, j).unwrap_or(0.0)).abs());
            }
            for (j, v) in t.row(i) {
                worst = worst.max((v - self.get(i, j).unwrap_or(0.0)).abs());
            }
        }
        worst
    }
}

/// Convenience wrapper matching the free-function style used elsewhere.
pub fn triplets_to_csr(t: &TripletList) -> CsrMatrix {
    t.to_csr()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_mv(n_rows: usize, n_cols: usize, a: &[f64], x: &[f64]) -> Vec<f64> {
        (0..n_rows)
            .map(|i| (0..n_cols).map(|j| a[i * n_cols + j] * x[j]).sum())
            .collect()
    }

    /// Deterministic pseudo-random dense matrix with roughly `density` fill.
    fn lcg_dense(n_rows: usize, n_cols: usize, density: f64, seed: u64) -> Vec<f64> {
        let mut s = seed;
        let mut next = || {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (s >> 11) as f64 / (1u64 << 53) as f64
        };
        (0..n_rows * n_cols)
            .map(|_| {
                if next() < density {
                    next() * 2.0 - 1.0
                } else {
                    0.0
                }
            })
            .collect()
    }

    #[test]
    fn spmv_identity_and_empty_row() {
        let i3 = CsrMatrix::identity(3);
        assert_eq!(i3.spmv(&[1.0, 2.0, 3.0]).unwrap(), vec![1.0, 2.0, 3.0]);
        let m = CsrMatrix::from_dense(2, 2, &[0.0, 0.0, 1.0, 2.0]);
        assert_eq!(m.spmv(&[5.0, 7.0]).unwrap(), vec![0.0, 19.0]);
    }

    #[test]
    fn spmv_dimension_error_reports_both_sizes() {
        let err = CsrMatrix::identity(3).spmv(&[1.0]).unwrap_err();
        match err {
            AmgError::DimensionMismatch {
                expected, found, ..
            } => assert_eq!((expected, found), (3, 1)),
            e => panic!("unexpected error {e}"),
        }
    }

    #[test]
    fn spmv_matches_dense_oracle() {
        let d = lcg_dense(10, 10, 0.4, 7);
        let a = CsrMatrix::from_dense(10, 10, &d);
        let x: Vec<f64> = (0..10).map(|i| (i as f64 * 0.37).sin()).collect();
        let y = a.spmv(&x).unwrap();
        let yd = dense_mv(10, 10, &d, &x);
        for (u, v) in y.iter().zip(&yd) {
            assert!((u - v).abs() <= 1e-14 * v.abs().max(1.0));
        }
    }

    #[test]
    fn spmm_identity_and_annihilation() {
        let d = lcg_dense(5, 4, 0.5, 3);
        let a = CsrMatrix::from_dense(5, 4, &d);
        assert_eq!(a.spmm(&CsrMatrix::identity(4)).unwrap(), a);

        // A only touches column 0, B only has entries in row 1
        let a = CsrMatrix::from_dense(2, 2, &[1.0, 0.0, 2.0, 0.0]);
        let b = CsrMatrix::from_dense(2, 3, &[0.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let c = a.spmm(&b).unwrap();
        assert_eq!(c.shape(), (2, 3));
        assert_eq!(c.nnz(), 0);
    }

    #[test]
    fn spmm_matches_dense_oracle() {
        let da = lcg_dense(8, 6, 0.5, 11);
        let db = lcg_dense(6, 7, 0.5, 12);
        let c = CsrMatrix::from_dense(8, 6, &da)
            .spmm(&CsrMatrix::from_dense(6, 7, &db))
            .unwrap();
        let cd = c.to_dense();
        for i in 0..8 {
            for j in 0..7 {
                let want: f64 = (0..6).map(|k| da[i * 6 + k] * db[k * 7 + j]).sum();
                assert!((cd[i * 7 + j] - want).abs() <= 1e-14 * want.abs().max(1.0));
            }
        }
        assert!(CsrMatrix::from_dense(8, 6, &da)
            .spmm(&CsrMatrix::from_dense(8, 6, &da))
            .is_err());
    }

    #[test]
    fn transpose_cases() {
        let d = CsrMatrix::from_diagonal(&[1.0, 2.0, 3.0]);
        assert_eq!(d.transpose(), d);

        let mut t = TripletList::new(3, 3);
        t.push(0, 2, 5.0).unwrap();
        let tt = t.to_csr().transpose();
        assert_eq!(tt.nnz(), 1);
        assert_eq!(tt.get(2, 0), Some(5.0));

        let dense = lcg_dense(12, 9, 0.3, 5);
        let a = CsrMatrix::from_dense(12, 9, &dense);
        let at = a.transpose();
        assert_eq!(at.shape(), (9, 12));
        let atd = at.to_dense();
        for i in 0..12 {
            for j in 0..9 {
                assert_eq!(atd[j * 12 + i], dense[i * 9 + j]);
            }
        }
        assert_eq!(at.transpose(), a);
    }

    #[test]
    fn triplets_fold_duplicates() {
        let mut t = TripletList::new(1, 1);
        t.push(0, 0, 1.0).unwrap();
        t.push(0, 0, 2.0).unwrap();
        let m = t.to_csr();
        assert_eq!(m.nnz(), 1);
        assert_eq!(m.values(), &[3.0]);

        let e = TripletList::new(4, 3).to_csr();
        assert_eq!(e.shape(), (4, 3));
        assert_eq!(e.nnz(), 0);

        assert!(matches!(
            TripletList::new(2, 2).push(2, 0, 1.0),
            Err(AmgError::IndexOutOfBounds { .. })
        ));
    }

    #[test]
    fn triplets_match_dense_accumulation() {
        let mut s = 99u64;
        let mut next = |m: u64| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1);
            (s >> 33) % m
        };
        let mut t = TripletList::new(6, 5);
        let mut dense = vec![0.0; 30];
        for _ in 0..50 {
            let (i, j) = (next(6) as usize, next(5) as usize);
            let v = next(1000) as f64 / 7.0 - 50.0;
            t.push(i, j, v).unwrap();
            dense[i * 5 + j] += v;
        }
        let m = t.to_csr();
        let md = m.to_dense();
        for k in 0..30 {
            assert!((md[k] - dense[k]).abs() <= 1e-12 * dense[k].abs().max(1.0));
        }
        assert!(CsrMatrix::try_new(
            6,
            5,
            m.row_offsets().to_vec(),
            m.col_indices().to_vec(),
            m.values().to_vec()
        )
        .is_ok());
    }

    #[test]
    fn try_new_rejects_noncanonical() {
        assert!(CsrMatrix::try_new(1, 3, vec![0, 2], vec![2, 1], vec![1.0, 1.0]).is_err());
        assert!(CsrMatrix::try_new(1, 3, vec![0, 2], vec![1, 1], vec![1.0, 1.0]).is_err());
        assert!(CsrMatrix::try_new(1, 3, vec![0, 1], vec![3], vec![1.0]).is_err());
        assert!(CsrMatrix::try_new(2, 3, vec![0, 1], vec![0], vec![1.0]).is_err());
    }
}
