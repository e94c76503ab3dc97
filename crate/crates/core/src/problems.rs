//! Finite-difference Poisson generators with Dirichlet boundaries eliminated.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{AmgError, Result};
use crate::sparse::CsrMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemKind {
    Poisson2d,
    Poisson3d,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RhsKind {
    Ones,
    Random { seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub kind: ProblemKind,
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    /// Coupling along the weak axis relative to the others.
    pub epsilon: f64,
    /// Axis carrying the weak (`epsilon`) coupling.
    pub weak_axis: Axis,
    pub rhs: RhsKind,
}

impl ProblemSpec {
    pub fn poisson2d(nx: usize, ny: usize, epsilon: f64) -> Self {
        ProblemSpec {
            kind: ProblemKind::Poisson2d,
            nx,
            ny,
            nz: 1,
            epsilon,
            weak_axis: Axis::Y,
            rhs: RhsKind::Ones,
        }
    }

    pub fn poisson3d(nx: usize, ny: usize, nz: usize, epsilon: f64) -> Self {
        ProblemSpec {
            kind: ProblemKind::Poisson3d,
            nx,
            ny,
            nz,
            epsilon,
            weak_axis: Axis::Z,
            rhs: RhsKind::Ones,
        }
    }

    /// Strength threshold matching the problem dimension.
    pub fn default_alpha(&self) -> f64 {
        match self.kind {
            ProblemKind::Poisson2d => 0.25,
            ProblemKind::Poisson3d => 0.5,
        }
    }

    pub fn unknowns(&self) -> Result<usize> {
        let nz = match self.kind {
            ProblemKind::Poisson2d => 1,
            ProblemKind::Poisson3d => self.nz,
        };
        self.nx
            .checked_mul(self.ny)
            .and_then(|v| v.checked_mul(nz))
            .ok_or_else(|| AmgError::InvalidConfig("grid size overflows the index space".into()))
    }

    fn validate(&self) -> Result<()> {
        if self.nx == 0 || self.ny == 0 || (self.kind == ProblemKind::Poisson3d && self.nz == 0) {
            return Err(AmgError::InvalidConfig("grid counts must be >= 1".into()));
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(AmgError::InvalidConfig(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if self.kind == ProblemKind::Poisson2d && self.weak_axis == Axis::Z {
            return Err(AmgError::InvalidConfig("2D problems have no z axis".into()));
        }
        Ok(())
    }
}

/// Assemble the stencil matrix and right-hand side.
///
/// Unknowns are numbered x-fastest. Off-diagonal couplings are -1 except on
/// the weak axis where they are -epsilon; the diagonal is twice the sum of
/// the axis couplings.
pub fn generate_poisson(spec: &ProblemSpec) -> Result<(CsrMatrix, Vec<f64>)> {
    spec.validate()?;
    let n = spec.unknowns()?;
    let three_d = spec.kind == ProblemKind::Poisson3d;
    let nz = if three_d { spec.nz } else { 1 };
    let (nx, ny) = (spec.nx, spec.ny);
    // 7 entries per row bounds nnz; make sure that fits
    n.checked_mul(7)
        .ok_or_else(|| AmgError::InvalidConfig("nnz overflows the index space".into()))?;

    let coupling = |axis: Axis| if axis == spec.weak_axis { spec.epsilon } else { 1.0 };
    let (cx, cy) = (coupling(Axis::X), coupling(Axis::Y));
    let cz = if three_d { coupling(Axis::Z) } else { 0.0 };
    let diag = 2.0 * (cx + cy + cz);

    // entries of one row, already in increasing column order
    let row_entries = |idx: usize, out: &mut Vec<(usize, f64)>| {
        let i = idx % nx;
        let j = (idx / nx) % ny;
        let k = idx / (nx * ny);
        let plane = nx * ny;
        if three_d && k > 0 {
            out.push((idx - plane, -cz));
        }
        if j > 0 {
            out.push((idx - nx, -cy));
        }
        if i > 0 {
            out.push((idx - 1, -cx));
        }
        out.push((idx, diag));
        if i + 1 < nx {
            out.push((idx + 1, -cx));
        }
        if j + 1 < ny {
            out.push((idx + nx, -cy));
        }
        if three_d && k + 1 < nz {
            out.push((idx + plane, -cz));
        }
    };

    const BLOCK: usize = 4096;
    let blocks: Vec<(Vec<usize>, Vec<usize>, Vec<f64>)> = (0..n.div_ceil(BLOCK))
        .into_par_iter()
        .map(|b| {
            let lo = b * BLOCK;
            let hi = (lo + BLOCK).min(n);
            let mut counts = Vec::with_capacity(hi - lo);
            let mut cols = Vec::with_capacity((hi - lo) * 7);
            let mut vals = Vec::with_capacity((hi - lo) * 7);
            let mut row = Vec::with_capacity(7);
            for idx in lo..hi {
                row.clear();
                row_entries(idx, &mut row);
                counts.push(row.len());
                for &(c, v) in &row {
                    cols.push(c);
                    vals.push(v);
                }
            }
            (counts, cols, vals)
        })
        .collect();

    let mut row_offsets = Vec::with_capacity(n + 1);
    row_offsets.push(0);
    let mut col_indices = Vec::new();
    let mut values = Vec::new();
    for (counts, cols, vals) in blocks {
        for c in counts {
            row_offsets.push(row_offsets.last().unwrap() + c);
        }
        col_indices.extend(cols);
        values.extend(vals);
    }
    let a = CsrMatrix::from_parts_unchecked(n, n, row_offsets, col_indices, values);

    let rhs = match spec.rhs {
        RhsKind::Ones => vec![1.0; n],
        RhsKind::Random { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
        }
    };
    Ok((a, rhs))
}

/// Expected nnz of the 2D five-point matrix.
pub fn poisson2d_nnz(nx: usize, ny: usize) -> usize {
    5 * nx * ny - 2 * nx - 2 * ny
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_by_one() {
        let (a, b) = generate_poisson(&ProblemSpec::poisson2d(1, 1, 0.3)).unwrap();
        assert_eq!(a.to_dense(), vec![2.0 * 1.3]);
        assert_eq!(b, vec![1.0]);
    }

    #[test]
    fn three_by_three_matches_hand_assembly() {
        let (a, _) = generate_poisson(&ProblemSpec::poisson2d(3, 3, 1.0)).unwrap();
        let mut want = vec![0.0; 81];
        for j in 0..3i64 {
            for i in 0..3i64 {
                let p = (i + 3 * j) as usize;
                want[p * 9 + p] = 4.0;
                for (di, dj) in [(-1, 0), (1, 0), (0, -1), (0, 1)] {
                    let (ii, jj) = (i + di, j + dj);
                    if (0..3).contains(&ii) && (0..3).contains(&jj) {
                        want[p * 9 + (ii + 3 * jj) as usize] = -1.0;
                    }
                }
            }
        }
        assert_eq!(a.to_dense(), want);
    }

    #[test]
    fn anisotropic_row_values() {
        let (a, _) = generate_poisson(&ProblemSpec::poisson2d(5, 5, 0.01)).unwrap();
        let row: Vec<(usize, f64)> = a.row(12).collect();
        assert_eq!(
            row,
            vec![(7, -0.01), (11, -1.0), (12, 2.02), (13, -1.0), (17, -0.01)]
        );
        let mut spec = ProblemSpec::poisson2d(5, 5, 0.01);
        spec.weak_axis = Axis::X;
        let (a, _) = generate_poisson(&spec).unwrap();
        assert_eq!(a.get(12, 11), Some(-0.01));
        assert_eq!(a.get(12, 7), Some(-1.0));
    }

    #[test]
    fn nnz_formula_and_symmetry() {
        for (nx, ny) in [(1, 1), (1, 7), (6, 1), (4, 9), (17, 13)] {
            let (a, _) = generate_poisson(&ProblemSpec::poisson2d(nx, ny, 0.5)).unwrap();
            assert_eq!(a.nnz(), poisson2d_nnz(nx, ny));
            assert_eq!(a.transpose(), a);
        }
        let (a, _) = generate_poisson(&ProblemSpec::poisson3d(4, 3, 5, 0.1)).unwrap();
        assert_eq!(a.n_rows(), 60);
        assert_eq!(a.nnz(), 7 * 60 - 2 * (3 * 5 + 4 * 5 + 4 * 3));
        assert_eq!(a.transpose(), a);
        for i in 0..a.n_rows() {
            let off: f64 = a.row(i).filter(|&(j, _)| j != i).map(|(_, v)| v.abs()).sum();
            assert!(a.get(i, i).unwrap() >= off);
        }
    }

    #[test]
    fn invalid_specs() {
        assert!(generate_poisson(&ProblemSpec::poisson2d(0, 3, 1.0)).is_err());
        assert!(generate_poisson(&ProblemSpec::poisson2d(3, 3, 0.0)).is_err());
        assert!(generate_poisson(&ProblemSpec::poisson2d(usize::MAX, 3, 1.0)).is_err());
    }

    #[test]
    fn random_rhs_is_seeded() {
        let mut spec = ProblemSpec::poisson2d(4, 4, 1.0);
        spec.rhs = RhsKind::Random { seed: 5 };
        let (_, b1) = generate_poisson(&spec).unwrap();
        let (_, b2) = generate_poisson(&spec).unwrap();
        assert_eq!(b1, b2);
        assert!(b1.iter().any(|&v| v != 1.0));
    }
}
