//! Piecewise-constant interpolation carrying one near-null-space vector.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aggregation::Aggregation;
use crate::error::{AmgError, Result};
use crate::sparse::CsrMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullSpace(pub Vec<f64>);

impl NullSpace {
    pub fn ones(n: usize) -> Self {
        NullSpace(vec![1.0; n])
    }

    pub fn new(b: Vec<f64>) -> Result<Self> {
        if b.iter().any(|v| !v.is_finite()) {
            return Err(AmgError::InvalidConfig(
                "near-null-space vector has non-finite entries".into(),
            ));
        }
        if b.iter().all(|&v| v == 0.0) {
            return Err(AmgError::InvalidConfig(
                "near-null-space vector must be nonzero".into(),
            ));
        }
        Ok(NullSpace(b))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transfer {
    /// Interpolation, n_fine x n_coarse, at most one entry per row.
    pub p: CsrMatrix,
    /// Restriction, the transpose of `p`.
    pub r: CsrMatrix,
    pub b_coarse: NullSpace,
    /// Fine nodes whose near-null-space entry is zero (empty rows of `p`).
    pub empty_rows: usize,
}

/// `P[i, agg[i]] = B[i] / ‖B restricted to agg[i]‖`, so that `PᵀP = I` and
/// `P B_coarse = B`.
pub fn build_transfer(agg: &Aggregation, b: &NullSpace) -> Result<Transfer> {
    let n = agg.n_fine();
    if b.len() != n {
        return Err(AmgError::dim("build_transfer", n, b.len()));
    }
    let b = b.as_slice();
    let members = agg.members();
    let b_coarse: Vec<f64> = members
        .par_iter()
        .map(|m| m.iter().map(|&i| b[i] * b[i]).sum::<f64>().sqrt())
        .collect();
    if let Some(a) = b_coarse.iter().position(|&v| v == 0.0) {
        return Err(AmgError::ZeroAggregate { aggregate: a });
    }

    let mut row_offsets = Vec::with_capacity(n + 1);
    row_offsets.push(0);
    let mut cols = Vec::with_capacity(n);
    let mut vals = Vec::with_capacity(n);
    for i in 0..n {
        if b[i] != 0.0 {
            let a = agg.agg[i];
            cols.push(a);
            vals.push(b[i] / b_coarse[a]);
        }
        row_offsets.push(cols.len());
    }
    let empty_rows = n - cols.len();
    let p = CsrMatrix::from_parts_unchecked(n, agg.n_coarse(), row_offsets, cols, vals);
    let r = p.transpose();
    Ok(Transfer {
        p,
        r,
        b_coarse: NullSpace(b_coarse),
        empty_rows,
    })
}

/// Unnormalized piecewise-constant interpolation with unit entries.
pub fn unit_interpolation(agg: &Aggregation) -> CsrMatrix {
    let n = agg.n_fine();
    CsrMatrix::from_parts_unchecked(
        n,
        agg.n_coarse(),
        (0..=n).collect(),
        agg.agg.clone(),
        vec![1.0; n],
    )
}
