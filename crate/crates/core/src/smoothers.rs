//! Jacobi, damped Jacobi and symmetric Gauss-Seidel smoothing.
//!
//! Damped Jacobi uses `omega = (4/3) / rho(D⁻¹A)`, where the spectral radius
//! is the largest-magnitude Ritz value of a short Arnoldi run on `D⁻¹A`.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aggregation::node_randoms;
use crate::error::{AmgError, Result};
use crate::sparse::CsrMatrix;
use crate::vector::{dot, norm2};

pub const DEFAULT_ARNOLDI_STEPS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SmootherKind {
    Jacobi,
    #[default]
    DampedJacobi,
    /// Forward then backward Gauss-Seidel; always sequential.
    Sgs,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmootherState {
    pub kind: SmootherKind,
    pub inv_diag: Vec<f64>,
    pub omega: f64,
    /// Estimate of rho(D⁻¹A); only computed for damped Jacobi.
    pub rho_est: Option<f64>,
    pub arnoldi_m: usize,
}

pub fn setup_smoother(
    a: &CsrMatrix,
    kind: SmootherKind,
    arnoldi_m: usize,
    seed: u64,
) -> Result<SmootherState> {
    if !a.is_square() {
        return Err(AmgError::dim("smoother setup", a.n_rows(), a.n_cols()));
    }
    let diag = a.diagonal();
    if let Some(row) = diag.iter().position(|&d| d == 0.0) {
        return Err(AmgError::ZeroDiagonal { row });
    }
    let inv_diag: Vec<f64> = diag.iter().map(|d| 1.0 / d).collect();
    let (omega, rho_est) = match kind {
        SmootherKind::Jacobi | SmootherKind::Sgs => (1.0, None),
        SmootherKind::DampedJacobi => {
            let rho = estimate_spectral_radius(a, &diag, arnoldi_m, seed)?;
            (4.0 / 3.0 / rho, Some(rho))
        }
    };
    Ok(SmootherState {
        kind,
        inv_diag,
        omega,
        rho_est,
        arnoldi_m,
    })
}

/// Largest |Ritz value| of `m` Arnoldi steps on `D⁻¹A` from a seeded
/// random start vector.
pub fn estimate_spectral_radius(a: &CsrMatrix, diag: &[f64], m: usize, seed: u64) -> Result<f64> {
    let n = a.n_rows();
    if m == 0 {
        return Err(AmgError::InvalidConfig("Arnoldi needs at least one step".into()));
    }
    // D⁻¹A is exactly the identity
    if (0..n).all(|i| a.row_nnz(i) <= 1) {
        return Ok(1.0);
    }
    let m = m.min(n);
    let mut v: Vec<f64> = node_randoms(seed, n).iter().map(|r| 2.0 * r - 1.0).collect();
    let nv = norm2(&v);
    v.iter_mut().for_each(|x| *x /= nv);

    let mut basis = vec![v];
    let mut h = DMatrix::<f64>::zeros(m + 1, m);
    let mut size = m;
    for j in 0..m {
        let mut w = a.spmv(&basis[j])?;
        w.par_iter_mut().zip(diag).for_each(|(x, d)| *x /= d);
        for (i, q) in basis.iter().enumerate() {
            let hij = dot(&w, q);
            h[(i, j)] = hij;
            w.par_iter_mut().zip(q).for_each(|(x, qv)| *x -= hij * qv);
        }
        let hn = norm2(&w);
        h[(j + 1, j)] = hn;
        if hn <= 1e-12 * h[(j, j)].abs().max(1.0) {
            // invariant subspace: keep what we have
            size = j + 1;
            break;
        }
        if j + 1 < m {
            w.iter_mut().for_each(|x| *x /= hn);
            basis.push(w);
        }
    }
    let hk = h.view((0, 0), (size, size)).into_owned();
    let rho = hk
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0f64, f64::max);
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(AmgError::InvalidConfig(format!(
            "spectral radius estimate is not positive ({rho})"
        )));
    }
    Ok(rho)
}

/// One smoothing sweep, updating `x` in place.
pub fn smooth(state: &SmootherState, a: &CsrMatrix, b: &[f64], x: &mut [f64]) -> Result<()> {
    let n = a.n_rows();
    if b.len() != n {
        return Err(AmgError::dim("smooth (b)", n, b.len()));
    }
    if x.len() != n {
        return Err(AmgError::dim("smooth (x)", n, x.len()));
    }
    match state.kind {
        SmootherKind::Jacobi | SmootherKind::DampedJacobi => {
            let mut r = vec![0.0; n];
            a.residual_into(b, x, &mut r)?;
            let omega = state.omega;
            x.par_iter_mut()
                .zip(r.par_iter().zip(&state.inv_diag))
                .for_each(|(xi, (ri, di))| *xi += omega * (di * ri));
        }
        SmootherKind::Sgs => {
            let diag = a.diagonal();
            let mut relax = |i: usize| {
                let mut s = b[i];
                for (j, v) in a.row(i) {
                    if j != i {
                        s -= v * x[j];
                    }
                }
                x[i] = s / diag[i];
            };
            (0..n).for_each(&mut relax);
            (0..n).rev().for_each(&mut relax);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tridiag(n: usize) -> CsrMatrix {
        let mut d = vec![0.0; n * n];
        for i in 0..n {
            d[i * n + i] = 2.0;
            if i > 0 {
                d[i * n + i - 1] = -1.0;
            }
            if i + 1 < n {
                d[i * n + i + 1] = -1.0;
            }
        }
        CsrMatrix::from_dense(n, n, &d)
    }

    #[test]
    fn diagonal_matrix_gives_four_thirds() {
        let a = CsrMatrix::from_diagonal(&[3.0, 49.0, 0.7]);
        let s = setup_smoother(&a, SmootherKind::DampedJacobi, 5, 1).unwrap();
        assert_eq!(s.rho_est, Some(1.0));
        assert_eq!(s.omega, 4.0 / 3.0);
    }

    #[test]
    fn damped_jacobi_by_hand() {
        let a = CsrMatrix::from_diagonal(&[2.0, 2.0]);
        let s = setup_smoother(&a, SmootherKind::DampedJacobi, 5, 1).unwrap();
        let mut x = vec![0.0, 0.0];
        smooth(&s, &a, &[2.0, 2.0], &mut x).unwrap();
        assert_eq!(x, vec![4.0 / 3.0, 4.0 / 3.0]);
    }

    #[test]
    fn laplacian_1d_omega() {
        let a = tridiag(100);
        let s = setup_smoother(&a, SmootherKind::DampedJacobi, 5, 42).unwrap();
        let rho = 1.0 - (100.0 * std::f64::consts::PI / 101.0).cos();
        let omega = 4.0 / 3.0 / rho;
        assert!((s.omega - omega).abs() / omega < 0.05, "{} vs {}", s.omega, omega);
    }

    #[test]
    fn exact_solution_is_a_fixed_point() {
        let a = tridiag(7);
        let x_true: Vec<f64> = (0..7).map(|i| i as f64 - 3.0).collect();
        let b = a.spmv(&x_true).unwrap();
        for kind in [SmootherKind::Jacobi, SmootherKind::DampedJacobi, SmootherKind::Sgs] {
            let s = setup_smoother(&a, kind, 5, 0).unwrap();
            let mut x = x_true.clone();
            smooth(&s, &a, &b, &mut x).unwrap();
            assert_eq!(x, x_true, "{kind:?}");
        }
    }

    #[test]
    fn zero_diagonal_rejected() {
        let a = CsrMatrix::from_dense(2, 2, &[1.0, 1.0, 1.0, 0.0]);
        assert!(matches!(
            setup_smoother(&a, SmootherKind::Jacobi, 5, 0),
            Err(AmgError::ZeroDiagonal { row: 1 })
        ));
    }

    #[test]
    fn breakdown_uses_partial_hessenberg() {
        // two decoupled 2x2 blocks with identical spectrum {1/2, 3/2}
        let a = CsrMatrix::from_dense(
            4,
            4,
            &[2.0, 1.0, 0.0, 0.0, 1.0, 2.0, 0.0, 0.0, 0.0, 0.0, 2.0, 1.0, 0.0, 0.0, 1.0, 2.0],
        );
        let s = setup_smoother(&a, SmootherKind::DampedJacobi, 5, 3).unwrap();
        assert!((s.rho_est.unwrap() - 1.5).abs() < 1e-8);
    }
}
