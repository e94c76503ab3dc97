//! V-cycles, K-cycles and the hybrid policy that runs K-cycles only on the
//! top levels.
//!
//! A K-cycle replaces the plain coarse correction by one or two steps of an
//! inner Krylov iteration (CG- or GMRES-flavoured) preconditioned by the
//! next-coarser cycle. The second step is taken only when the first one
//! leaves more than `t` of the coarse residual. Inner cycles always start
//! from a zero guess. Post-smoothing uses the level right-hand side.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{AmgError, Result};
use crate::hierarchy::Hierarchy;
use crate::smoothers::smooth;
use crate::vector::{axpy, dot, norm2};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CycleKind {
    V,
    K,
    Hybrid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InnerKind {
    Cg,
    Gmres,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CycleConfig {
    pub kind: CycleKind,
    /// Number of top levels using K-cycles under the hybrid policy.
    pub k_levels: usize,
    /// Inner residual threshold for accepting a single Krylov step.
    pub t: f64,
    pub inner: InnerKind,
    pub pre_sweeps: usize,
    pub post_sweeps: usize,
}

impl Default for CycleConfig {
    fn default() -> Self {
        CycleConfig {
            kind: CycleKind::Hybrid,
            k_levels: 2,
            t: 0.25,
            inner: InnerKind::Gmres,
            pre_sweeps: 1,
            post_sweeps: 1,
        }
    }
}

impl CycleConfig {
    pub fn v() -> Self {
        CycleConfig {
            kind: CycleKind::V,
            ..Default::default()
        }
    }

    pub fn k() -> Self {
        CycleConfig {
            kind: CycleKind::K,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.t) {
            return Err(AmgError::InvalidConfig(format!(
                "inner threshold t must lie in [0, 1], got {}",
                self.t
            )));
        }
        Ok(())
    }

    /// Whether the coarse correction at `level` is Krylov-accelerated.
    pub fn uses_k(&self, level: usize) -> bool {
        match self.kind {
            CycleKind::V => false,
            CycleKind::K => true,
            CycleKind::Hybrid => level < self.k_levels,
        }
    }
}

/// Scalars of the inner Krylov steps, kept for inspection.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct KCycleScalars {
    pub rho1: f64,
    pub alpha1: f64,
    pub gamma: f64,
    pub beta: f64,
    pub alpha2: f64,
    pub rho2: f64,
    pub second_step: bool,
}

/// Number of cycle invocations per level during one application.
pub type CycleCounts = Vec<usize>;

struct Ctx<'a> {
    h: &'a Hierarchy,
    cfg: &'a CycleConfig,
    counts: CycleCounts,
    last_scalars: Option<KCycleScalars>,
}

fn check_len(op: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(AmgError::dim(op, expected, found));
    }
    Ok(())
}

impl Ctx<'_> {
    fn dispatch(&mut self, k: usize, b: &[f64], x: &mut [f64]) -> Result<()> {
        if k == self.h.coarsest() {
            self.counts[k] += 1;
            let sol = self.h.coarse.solve(b)?;
            x.copy_from_slice(&sol);
            return Ok(());
        }
        if self.cfg.uses_k(k) {
            self.kcycle(k, b, x)
        } else {
            self.vcycle(k, b, x)
        }
    }

    fn smooth_n(&self, k: usize, sweeps: usize, b: &[f64], x: &mut [f64]) -> Result<()> {
        let level = &self.h.levels[k];
        let s = level.smoother.as_ref().expect("non-coarsest level has a smoother");
        for _ in 0..sweeps {
            smooth(s, &level.a, b, x)?;
        }
        Ok(())
    }

    /// Pre-smooth and restrict the residual.
    fn descend(&self, k: usize, b: &[f64], x: &mut [f64]) -> Result<Vec<f64>> {
        let level = &self.h.levels[k];
        self.smooth_n(k, self.cfg.pre_sweeps, b, x)?;
        let mut r = vec![0.0; level.n()];
        level.a.residual_into(b, x, &mut r)?;
        level.r().expect("non-coarsest level has R").spmv(&r)
    }

    /// Prolongate the coarse correction and post-smooth.
    fn ascend(&self, k: usize, b: &[f64], x: &mut [f64], xc: &[f64]) -> Result<()> {
        let e = self.h.levels[k].p().expect("non-coarsest level has P").spmv(xc)?;
        axpy(1.0, &e, x);
        self.smooth_n(k, self.cfg.post_sweeps, b, x)
    }

    fn coarse_solve_or(&mut self, k: usize, rc: &[f64]) -> Result<Option<Vec<f64>>> {
        if k + 1 == self.h.coarsest() {
            self.counts[k + 1] += 1;
            return Ok(Some(self.h.coarse.solve(rc)?));
        }
        Ok(None)
    }

    fn vcycle(&mut self, k: usize, b: &[f64], x: &mut [f64]) -> Result<()> {
        self.counts[k] += 1;
        let rc = self.descend(k, b, x)?;
        let xc = match self.coarse_solve_or(k, &rc)? {
            Some(xc) => xc,
            None => {
                let mut xc = vec![0.0; rc.len()];
                self.vcycle(k + 1, &rc, &mut xc)?;
                xc
            }
        };
        self.ascend(k, b, x, &xc)
    }

    fn kcycle(&mut self, k: usize, b: &[f64], x: &mut [f64]) -> Result<()> {
        self.counts[k] += 1;
        let rc = self.descend(k, b, x)?;
        let xc = match self.coarse_solve_or(k, &rc)? {
            Some(xc) => xc,
            None => self.inner_krylov(k + 1, &rc)?,
        };
        self.ascend(k, b, x, &xc)
    }

    fn inner_krylov(&mut self, kc: usize, rc: &[f64]) -> Result<Vec<f64>> {
        let a = &self.h.levels[kc].a;
        let gmres = self.cfg.inner == InnerKind::Gmres;
        let mut s = KCycleScalars::default();

        let mut c = vec![0.0; rc.len()];
        self.dispatch(kc, rc, &mut c)?;
        let v = a.spmv(&c)?;
        (s.rho1, s.alpha1) = if gmres {
            (dot(&v, &v), dot(&v, rc))
        } else {
            (dot(&c, &v), dot(&c, rc))
        };
        if s.rho1 == 0.0 || !s.rho1.is_finite() {
            if norm2(rc) > 0.0 {
                warn!("K-cycle breakdown at level {kc} (rho1 = {}); using unscaled correction", s.rho1);
            }
            self.last_scalars = Some(s);
            return Ok(c);
        }
        let step1 = s.alpha1 / s.rho1;
        let mut rt = rc.to_vec();
        axpy(-step1, &v, &mut rt);
        if norm2(&rt) <= self.cfg.t * norm2(rc) {
            c.iter_mut().for_each(|ci| *ci *= step1);
            self.last_scalars = Some(s);
            return Ok(c);
        }

        s.second_step = true;
        let mut d = vec![0.0; rc.len()];
        self.dispatch(kc, &rt, &mut d)?;
        let w = a.spmv(&d)?;
        (s.gamma, s.beta, s.alpha2) = if gmres {
            (dot(&w, &v), dot(&w, &w), dot(&w, &rt))
        } else {
            (dot(&d, &v), dot(&d, &w), dot(&d, &rt))
        };
        s.rho2 = s.beta - s.gamma * s.gamma / s.rho1;
        self.last_scalars = Some(s);
        if s.rho2.abs() <= 1e-14 * s.beta.abs() || !s.rho2.is_finite() {
            warn!("K-cycle breakdown at level {kc} (rho2 = {}); keeping first step", s.rho2);
            c.iter_mut().for_each(|ci| *ci *= step1);
            return Ok(c);
        }
        let cc = step1 - s.gamma * s.alpha2 / (s.rho1 * s.rho2);
        let cd = s.alpha2 / s.rho2;
        Ok(c.iter().zip(&d).map(|(ci, di)| cc * ci + cd * di).collect())
    }
}

fn run(
    h: &Hierarchy,
    cfg: &CycleConfig,
    k: usize,
    b: &[f64],
    x: &mut [f64],
    f: impl FnOnce(&mut Ctx, usize, &[f64], &mut [f64]) -> Result<()>,
) -> Result<(CycleCounts, Option<KCycleScalars>)> {
    if k >= h.n_levels() {
        return Err(AmgError::InvalidConfig(format!(
            "level {k} outside hierarchy of {} levels",
            h.n_levels()
        )));
    }
    cfg.validate()?;
    check_len("cycle (b)", h.levels[k].n(), b.len())?;
    check_len("cycle (x)", h.levels[k].n(), x.len())?;
    let mut ctx = Ctx {
        h,
        cfg,
        counts: vec![0; h.n_levels()],
        last_scalars: None,
    };
    if k == h.coarsest() {
        ctx.dispatch(k, b, x)?;
    } else {
        f(&mut ctx, k, b, x)?;
    }
    Ok((ctx.counts, ctx.last_scalars))
}

/// One V-cycle at level `k`, updating `x`.
pub fn vcycle(h: &Hierarchy, k: usize, b: &[f64], x: &mut [f64]) -> Result<()> {
    let cfg = CycleConfig::v();
    run(h, &cfg, k, b, x, |c, k, b, x| c.vcycle(k, b, x)).map(|_| ())
}

/// One V-cycle with explicit smoothing counts.
pub fn vcycle_with(h: &Hierarchy, cfg: &CycleConfig, k: usize, b: &[f64], x: &mut [f64]) -> Result<()> {
    let cfg = CycleConfig {
        kind: CycleKind::V,
        ..*cfg
    };
    run(h, &cfg, k, b, x, |c, k, b, x| c.vcycle(k, b, x)).map(|_| ())
}

/// One K-cycle at level `k`; inner cycles follow `cfg`'s level policy.
pub fn kcycle(h: &Hierarchy, k: usize, b: &[f64], x: &mut [f64], cfg: &CycleConfig) -> Result<()> {
    kcycle_traced(h, k, b, x, cfg).map(|_| ())
}

/// K-cycle returning the scalars of the last inner Krylov step evaluated.
pub fn kcycle_traced(
    h: &Hierarchy,
    k: usize,
    b: &[f64],
    x: &mut [f64],
    cfg: &CycleConfig,
) -> Result<Option<KCycleScalars>> {
    run(h, cfg, k, b, x, |c, k, b, x| c.kcycle(k, b, x)).map(|r| r.1)
}

/// `z = cycle(0, r, 0)` with the level policy of `cfg`.
pub fn apply_preconditioner(h: &Hierarchy, cfg: &CycleConfig, r: &[f64]) -> Result<Vec<f64>> {
    apply_preconditioner_counted(h, cfg, r).map(|r| r.0)
}

pub fn apply_preconditioner_counted(
    h: &Hierarchy,
    cfg: &CycleConfig,
    r: &[f64],
) -> Result<(Vec<f64>, CycleCounts)> {
    let mut z = vec![0.0; r.len()];
    let (counts, _) = run(h, cfg, 0, r, &mut z, |c, k, b, x| c.dispatch(k, b, x))?;
    Ok((z, counts))
}
