//! Dense LU with partial pivoting for the coarsest level.

use rayon::prelude::*;

use crate::error::{AmgError, Result};
use crate::sparse::CsrMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct DenseLu {
    n: usize,
    /// Row-major L (unit, strictly lower) and U packed together.
    lu: Vec<f64>,
    /// Row of the original matrix placed at each position.
    perm: Vec<usize>,
}

impl DenseLu {
    pub fn factor_csr(a: &CsrMatrix) -> Result<Self> {
        if !a.is_square() {
            return Err(AmgError::dim("dense LU", a.n_rows(), a.n_cols()));
        }
        DenseLu::factor(a.n_rows(), a.to_dense())
    }

    /// Factor a row-major n x n matrix.
    pub fn factor(n: usize, mut lu: Vec<f64>) -> Result<Self> {
        assert_eq!(lu.len(), n * n);
        let scale = lu.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let tiny = scale * f64::EPSILON * n as f64;
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (piv, piv_abs) = (k..n)
                .map(|i| (i, lu[i * n + k].abs()))
                .fold((k, -1.0), |best, c| if c.1 > best.1 { c } else { best });
            if piv_abs <= tiny || piv_abs == 0.0 {
                return Err(AmgError::SingularMatrix { pivot: k });
            }
            if piv != k {
                for j in 0..n {
                    lu.swap(k * n + j, piv * n + j);
                }
                perm.swap(k, piv);
            }
            let (head, tail) = lu.split_at_mut((k + 1) * n);
            let pivot_row = &head[k * n..(k + 1) * n];
            let d = pivot_row[k];
            tail.par_chunks_mut(n).for_each(|row| {
                let l = row[k] / d;
                row[k] = l;
                if l != 0.0 {
                    for j in k + 1..n {
                        row[j] -= l * pivot_row[j];
                    }
                }
            });
        }
        Ok(DenseLu { n, lu, perm })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.n;
        if b.len() != n {
            return Err(AmgError::dim("dense LU solve", n, b.len()));
        }
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let row = &self.lu[i * n..i * n + i];
            let s: f64 = row.iter().zip(&x[..i]).map(|(l, y)| l * y).sum();
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let row = &self.lu[i * n..(i + 1) * n];
            let s: f64 = row[i + 1..].iter().zip(&x[i + 1..]).map(|(u, y)| u * y).sum();
            x[i] = (x[i] - s) / row[i];
        }
        Ok(x)
    }
}
