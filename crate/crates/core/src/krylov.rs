//! Outer Krylov solvers: restarted flexible GMRES (right preconditioned) and
//! flexible preconditioned CG.

use std::time::Instant;

use log::{debug, warn};
use serde::{Deserialize, Serialize};

use crate::cycles::{apply_preconditioner, CycleConfig};
use crate::error::{AmgError, Result};
use crate::hierarchy::Hierarchy;
use crate::sparse::CsrMatrix;
use crate::vector::{axpy, dot, norm2};

pub trait Preconditioner {
    fn apply(&self, r: &[f64]) -> Result<Vec<f64>>;
}

pub struct IdentityPreconditioner;

impl Preconditioner for IdentityPreconditioner {
    fn apply(&self, r: &[f64]) -> Result<Vec<f64>> {
        Ok(r.to_vec())
    }
}

pub struct JacobiPreconditioner {
    inv_diag: Vec<f64>,
}

impl JacobiPreconditioner {
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        let d = a.diagonal();
        if let Some(row) = d.iter().position(|&v| v == 0.0) {
            return Err(AmgError::ZeroDiagonal { row });
        }
        Ok(JacobiPreconditioner {
            inv_diag: d.iter().map(|v| 1.0 / v).collect(),
        })
    }
}

impl Preconditioner for JacobiPreconditioner {
    fn apply(&self, r: &[f64]) -> Result<Vec<f64>> {
        Ok(r.iter().zip(&self.inv_diag).map(|(a, b)| a * b).collect())
    }
}

/// A multigrid cycle used as preconditioner.
pub struct AmgPreconditioner<'a> {
    pub hierarchy: &'a Hierarchy,
    pub cycle: CycleConfig,
}

impl Preconditioner for AmgPreconditioner<'_> {
    fn apply(&self, r: &[f64]) -> Result<Vec<f64>> {
        apply_preconditioner(self.hierarchy, &self.cycle, r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Fgmres,
    Pcg,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub method: Method,
    /// Target for ‖b − Ax‖ / ‖b‖.
    pub tol: f64,
    pub max_iters: usize,
    pub restart: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            method: Method::Fgmres,
            tol: 1e-6,
            max_iters: 500,
            restart: 30,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(AmgError::InvalidConfig("tol must be positive".into()));
        }
        if self.restart < 1 {
            return Err(AmgError::InvalidConfig("restart must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub converged: bool,
    pub iterations: usize,
    /// Residual 2-norms, starting with the initial residual. For fgmres the
    /// entries at restart boundaries are recomputed true residuals.
    pub residual_history: Vec<f64>,
    pub rhs_norm: f64,
    /// True ‖b − Ax‖ / ‖b‖ at exit.
    pub relative_residual: f64,
    pub stagnated: bool,
    pub setup_seconds: f64,
    pub solve_seconds: f64,
}

fn check(a: &CsrMatrix, b: &[f64], x0: &[f64]) -> Result<()> {
    if !a.is_square() {
        return Err(AmgError::dim("solve", a.n_rows(), a.n_cols()));
    }
    if b.len() != a.n_rows() {
        return Err(AmgError::dim("solve (b)", a.n_rows(), b.len()));
    }
    if x0.len() != a.n_rows() {
        return Err(AmgError::dim("solve (x0)", a.n_rows(), x0.len()));
    }
    Ok(())
}

fn true_residual_norm(a: &CsrMatrix, b: &[f64], x: &[f64]) -> Result<f64> {
    let mut r = vec![0.0; b.len()];
    a.residual_into(b, x, &mut r)?;
    Ok(norm2(&r))
}

fn trivial_report(n: usize, bnorm: f64, start: Instant) -> (Vec<f64>, SolveReport) {
    (
        vec![0.0; n],
        SolveReport {
            converged: true,
            iterations: 0,
            residual_history: vec![0.0],
            rhs_norm: bnorm,
            relative_residual: 0.0,
            stagnated: false,
            setup_seconds: 0.0,
            solve_seconds: start.elapsed().as_secs_f64(),
        },
    )
}

fn givens(a: f64, b: f64) -> (f64, f64) {
    if b == 0.0 {
        (1.0, 0.0)
    } else {
        let h = a.hypot(b);
        (a / h, b / h)
    }
}

pub fn fgmres(
    a: &CsrMatrix,
    b: &[f64],
    x0: &[f64],
    precond: &dyn Preconditioner,
    cfg: &SolverConfig,
) -> Result<(Vec<f64>, SolveReport)> {
    let start = Instant::now();
    cfg.validate()?;
    check(a, b, x0)?;
    let n = b.len();
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        return Ok(trivial_report(n, bnorm, start));
    }
    let target = cfg.tol * bnorm;
    let m = cfg.restart;

    let mut x = x0.to_vec();
    let mut r = vec![0.0; n];
    a.residual_into(b, &x, &mut r)?;
    let mut beta = norm2(&r);
    let mut history = vec![beta];
    let mut iters = 0;
    let mut converged = beta <= target;
    let mut stagnated = false;

    while !converged && iters < cfg.max_iters {
        let cycle_start = beta;
        let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
        let mut dirs: Vec<Vec<f64>> = Vec::with_capacity(m);
        basis.push(r.iter().map(|v| v / beta).collect());
        // column-major Hessenberg, already rotated to upper triangular
        let mut h = vec![vec![0.0; m + 1]; m];
        let (mut cs, mut sn) = (vec![0.0; m], vec![0.0; m]);
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut j = 0;
        while j < m && iters < cfg.max_iters {
            let z = precond.apply(&basis[j])?;
            let mut w = a.spmv(&z)?;
            for (i, v) in basis.iter().enumerate() {
                let hij = dot(&w, v);
                h[j][i] = hij;
                axpy(-hij, v, &mut w);
            }
            let hnext = norm2(&w);
            h[j][j + 1] = hnext;
            for i in 0..j {
                let (hi, hi1) = (h[j][i], h[j][i + 1]);
                h[j][i] = cs[i] * hi + sn[i] * hi1;
                h[j][i + 1] = -sn[i] * hi + cs[i] * hi1;
            }
            (cs[j], sn[j]) = givens(h[j][j], h[j][j + 1]);
            h[j][j] = cs[j] * h[j][j] + sn[j] * h[j][j + 1];
            h[j][j + 1] = 0.0;
            g[j + 1] = -sn[j] * g[j];
            g[j] *= cs[j];
            dirs.push(z);
            iters += 1;
            j += 1;
            let res = g[j].abs();
            history.push(res);
            if res <= target || hnext == 0.0 {
                break;
            }
            w.iter_mut().for_each(|v| *v /= hnext);
            basis.push(w);
        }

        // back substitution on the rotated Hessenberg
        let mut y = vec![0.0; j];
        for i in (0..j).rev() {
            let mut s = g[i];
            for k in i + 1..j {
                s -= h[k][i] * y[k];
            }
            y[i] = s / h[i][i];
        }
        for (yi, z) in y.iter().zip(&dirs) {
            axpy(*yi, z, &mut x);
        }
        a.residual_into(b, &x, &mut r)?;
        beta = norm2(&r);
        *history.last_mut().unwrap() = beta;
        converged = beta <= target;
        debug!("fgmres restart after {iters} iterations: residual {beta:e}");
        if !converged && iters < cfg.max_iters && beta >= cycle_start {
            warn!("fgmres stagnated: no residual decrease over a restart cycle");
            stagnated = true;
            break;
        }
    }

    Ok((
        x,
        SolveReport {
            converged,
            iterations: iters,
            residual_history: history,
            rhs_norm: bnorm,
            relative_residual: beta / bnorm,
            stagnated,
            setup_seconds: 0.0,
            solve_seconds: start.elapsed().as_secs_f64(),
        },
    ))
}

/// CG with the Polak–Ribière direction update, which tolerates a
/// preconditioner that varies slightly between applications.
pub fn pcg(
    a: &CsrMatrix,
    b: &[f64],
    x0: &[f64],
    precond: &dyn Preconditioner,
    cfg: &SolverConfig,
) -> Result<(Vec<f64>, SolveReport)> {
    let start = Instant::now();
    cfg.validate()?;
    check(a, b, x0)?;
    let n = b.len();
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        return Ok(trivial_report(n, bnorm, start));
    }
    let target = cfg.tol * bnorm;

    let mut x = x0.to_vec();
    let mut r = vec![0.0; n];
    a.residual_into(b, &x, &mut r)?;
    let mut history = vec![norm2(&r)];
    let mut converged = history[0] <= target;
    let mut z = precond.apply(&r)?;
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut iters = 0;

    while !converged && iters < cfg.max_iters {
        let q = a.spmv(&p)?;
        let pq = dot(&p, &q);
        if !(pq > 0.0) {
            return Err(AmgError::Indefinite {
                iteration: iters,
                curvature: pq,
            });
        }
        let alpha = rz / pq;
        axpy(alpha, &p, &mut x);
        let r_old = r.clone();
        axpy(-alpha, &q, &mut r);
        iters += 1;
        let res = norm2(&r);
        history.push(res);
        if res <= target {
            converged = true;
            break;
        }
        z = precond.apply(&r)?;
        let rz_new = dot(&r, &z);
        let beta = (rz_new - dot(&r_old, &z)) / rz;
        rz = rz_new;
        p.iter_mut().zip(&z).for_each(|(pi, zi)| *pi = zi + beta * *pi);
    }

    let true_res = true_residual_norm(a, b, &x)?;
    Ok((
        x,
        SolveReport {
            converged,
            iterations: iters,
            residual_history: history,
            rhs_norm: bnorm,
            relative_residual: true_res / bnorm,
            stagnated: false,
            setup_seconds: 0.0,
            solve_seconds: start.elapsed().as_secs_f64(),
        },
    ))
}

pub fn solve(
    a: &CsrMatrix,
    b: &[f64],
    x0: &[f64],
    precond: &dyn Preconditioner,
    cfg: &SolverConfig,
) -> Result<(Vec<f64>, SolveReport)> {
    match cfg.method {
        Method::Fgmres => fgmres(a, b, x0, precond, cfg),
        Method::Pcg => pcg(a, b, x0, precond, cfg),
    }
}
