//! Multilevel setup: strength, MIS(2) aggregation, interpolation and
//! Galerkin coarse operators, repeated until the coarsest operator is small
//! enough for a dense factorization.

use std::fmt::Write as _;
use std::sync::Arc;
use std::time::Instant;

use log::{debug, warn};
use serde::{Deserialize, Serialize};

use crate::aggregation::{coarsen, Aggregation};
use crate::dense::DenseLu;
use crate::error::{AmgError, Result};
use crate::galerkin::{galerkin_direct, GalerkinCache};
use crate::smoothers::{setup_smoother, SmootherKind, SmootherState, DEFAULT_ARNOLDI_STEPS};
use crate::sparse::CsrMatrix;
use crate::strength::classic_strength_with;
use crate::transfer::{build_transfer, NullSpace};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SetupConfig {
    pub alpha: f64,
    pub coarse_size_max: usize,
    pub max_levels: usize,
    pub smoother: SmootherKind,
    pub arnoldi_m: usize,
    pub seed: u64,
    pub reuse_caches: bool,
    /// Accept zero diagonals in the strength measure (sign taken as +).
    pub permissive_diagonal: bool,
    /// Stop coarsening when `n_coarse > stall_ratio * n_fine`.
    pub stall_ratio: f64,
}

impl Default for SetupConfig {
    fn default() -> Self {
        SetupConfig {
            alpha: 0.25,
            coarse_size_max: 600,
            max_levels: 25,
            smoother: SmootherKind::DampedJacobi,
            arnoldi_m: DEFAULT_ARNOLDI_STEPS,
            seed: 0,
            reuse_caches: false,
            permissive_diagonal: false,
            stall_ratio: 0.95,
        }
    }
}

impl SetupConfig {
    pub fn validate(&self) -> Result<()> {
        if self.coarse_size_max < 1 {
            return Err(AmgError::InvalidConfig("coarse_size_max must be >= 1".into()));
        }
        if self.max_levels < 1 {
            return Err(AmgError::InvalidConfig("max_levels must be >= 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(AmgError::InvalidConfig(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        if !(self.stall_ratio > 0.0 && self.stall_ratio <= 1.0) {
            return Err(AmgError::InvalidConfig("stall_ratio must lie in (0, 1]".into()));
        }
        Ok(())
    }
}

/// Grid transfer between level k and k+1, frozen across value refreshes.
#[derive(Debug, Clone)]
pub struct LevelTransfer {
    pub aggregation: Aggregation,
    pub p: CsrMatrix,
    pub r: CsrMatrix,
    pub cache: Option<GalerkinCache>,
    pub mis_sweeps: usize,
    pub empty_interp_rows: usize,
}

#[derive(Debug, Clone)]
pub struct Level {
    pub a: CsrMatrix,
    pub b: NullSpace,
    /// Absent on the coarsest level, which is solved directly.
    pub smoother: Option<SmootherState>,
    /// Absent on the coarsest level.
    pub transfer: Option<Arc<LevelTransfer>>,
}

impl Level {
    pub fn n(&self) -> usize {
        self.a.n_rows()
    }

    pub fn p(&self) -> Option<&CsrMatrix> {
        self.transfer.as_ref().map(|t| &t.p)
    }

    pub fn r(&self) -> Option<&CsrMatrix> {
        self.transfer.as_ref().map(|t| &t.r)
    }
}

#[derive(Debug, Clone)]
pub struct Hierarchy {
    pub levels: Vec<Level>,
    pub coarse: DenseLu,
    pub config: SetupConfig,
    pub setup_seconds: f64,
}

fn mis_seed(seed: u64, level: usize) -> u64 {
    seed.wrapping_add((level as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn smoother_seed(seed: u64, level: usize) -> u64 {
    mis_seed(seed, level) ^ 0xD1B5_4A32_D192_ED03
}

pub fn setup(a0: &CsrMatrix, b0: &NullSpace, config: &SetupConfig) -> Result<Hierarchy> {
    let start = Instant::now();
    config.validate()?;
    if !a0.is_square() {
        return Err(AmgError::dim("setup", a0.n_rows(), a0.n_cols()));
    }
    if b0.len() != a0.n_rows() {
        return Err(AmgError::dim("setup (near null space)", a0.n_rows(), b0.len()));
    }
    let b0 = NullSpace::new(b0.0.clone())?;

    let mut levels = Vec::new();
    let mut a = a0.clone();
    let mut b = b0;
    loop {
        let k = levels.len();
        let n = a.n_rows();
        if n <= config.coarse_size_max || k + 1 >= config.max_levels {
            break;
        }
        let strength = classic_strength_with(&a, config.alpha, config.permissive_diagonal)?;
        let (mis, aggregation) = coarsen(&strength, mis_seed(config.seed, k));
        let n_coarse = aggregation.n_coarse();
        if n_coarse as f64 > config.stall_ratio * n as f64 {
            warn!("coarsening stalled at level {k} ({n} -> {n_coarse}); stopping");
            break;
        }
        debug!("level {k}: {n} -> {n_coarse} in {} MIS sweeps", mis.sweeps);
        let t = build_transfer(&aggregation, &b)?;
        if t.empty_rows > 0 {
            warn!("level {k}: {} fine nodes receive no interpolation", t.empty_rows);
        }
        let (a_next, cache) = if config.reuse_caches {
            let cache = GalerkinCache::build(&aggregation, &a, &t.p)?;
            (cache.apply(a.values(), &t.p)?, Some(cache))
        } else {
            (galerkin_direct(&t.r, &a, &t.p)?, None)
        };
        let smoother = setup_smoother(
            &a,
            config.smoother,
            config.arnoldi_m,
            smoother_seed(config.seed, k),
        )?;
        let transfer = LevelTransfer {
            aggregation,
            p: t.p,
            r: t.r,
            cache,
            mis_sweeps: mis.sweeps,
            empty_interp_rows: t.empty_rows,
        };
        levels.push(Level {
            a: std::mem::replace(&mut a, a_next),
            b: std::mem::replace(&mut b, t.b_coarse),
            smoother: Some(smoother),
            transfer: Some(Arc::new(transfer)),
        });
    }
    let coarse = DenseLu::factor_csr(&a)?;
    levels.push(Level {
        a,
        b,
        smoother: None,
        transfer: None,
    });
    Ok(Hierarchy {
        levels,
        coarse,
        config: config.clone(),
        setup_seconds: start.elapsed().as_secs_f64(),
    })
}

impl Hierarchy {
    pub fn n_levels(&self) -> usize {
        self.levels.len()
    }

    /// Index of the coarsest level.
    pub fn coarsest(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn has_caches(&self) -> bool {
        self.levels[..self.coarsest()]
            .iter()
            .all(|l| l.transfer.as_ref().is_some_and(|t| t.cache.is_some()))
    }

    /// New hierarchy for new level-0 values on the same pattern, reusing the
    /// aggregations, transfers and cached Galerkin indices.
    pub fn refresh_values(&self, a0_values: &[f64]) -> Result<Hierarchy> {
        if !self.has_caches() {
            return Err(AmgError::NoCache);
        }
        self.rebuild(a0_values, |t, a| {
            t.cache.as_ref().expect("checked above").apply(a.values(), &t.p)
        })
    }

    /// Same as [`refresh_values`](Self::refresh_values) but forming every
    /// coarse operator with two sparse products.
    pub fn rebuild_direct(&self, a0_values: &[f64]) -> Result<Hierarchy> {
        self.rebuild(a0_values, |t, a| galerkin_direct(&t.r, a, &t.p))
    }

    fn rebuild<F>(&self, a0_values: &[f64], galerkin: F) -> Result<Hierarchy>
    where
        F: Fn(&LevelTransfer, &CsrMatrix) -> Result<CsrMatrix>,
    {
        let start = Instant::now();
        let mut a = self.levels[0].a.with_values(a0_values.to_vec())?;
        let mut levels = Vec::with_capacity(self.levels.len());
        for (k, old) in self.levels.iter().enumerate() {
            let Some(t) = &old.transfer else {
                break;
            };
            let a_next = galerkin(t, &a)?;
            let smoother = setup_smoother(
                &a,
                self.config.smoother,
                self.config.arnoldi_m,
                smoother_seed(self.config.seed, k),
            )?;
            levels.push(Level {
                a: std::mem::replace(&mut a, a_next),
                b: old.b.clone(),
                smoother: Some(smoother),
                transfer: Some(Arc::clone(t)),
            });
        }
        let coarse = DenseLu::factor_csr(&a)?;
        levels.push(Level {
            a,
            b: self.levels[self.coarsest()].b.clone(),
            smoother: None,
            transfer: None,
        });
        Ok(Hierarchy {
            levels,
            coarse,
            config: self.config.clone(),
            setup_seconds: start.elapsed().as_secs_f64(),
        })
    }

    pub fn report(&self) -> HierarchyReport {
        hierarchy_report(self)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelStats {
    pub level: usize,
    pub unknowns: usize,
    pub nnz: usize,
    pub nnz_per_row: f64,
    pub rho_est: Option<f64>,
    pub omega: Option<f64>,
    pub mis_sweeps: Option<usize>,
    pub empty_interp_rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HierarchyReport {
    pub levels: Vec<LevelStats>,
    /// Σ n_k / n_0
    pub grid_complexity: f64,
    /// Σ nnz_k / nnz_0
    pub operator_complexity: f64,
}

pub fn hierarchy_report(h: &Hierarchy) -> HierarchyReport {
    let levels: Vec<LevelStats> = h
        .levels
        .iter()
        .enumerate()
        .map(|(k, l)| LevelStats {
            level: k,
            unknowns: l.n(),
            nnz: l.a.nnz(),
            nnz_per_row: l.a.nnz() as f64 / l.n().max(1) as f64,
            rho_est: l.smoother.as_ref().and_then(|s| s.rho_est),
            omega: l.smoother.as_ref().map(|s| s.omega),
            mis_sweeps: l.transfer.as_ref().map(|t| t.mis_sweeps),
            empty_interp_rows: l.transfer.as_ref().map_or(0, |t| t.empty_interp_rows),
        })
        .collect();
    let n0 = levels[0].unknowns.max(1) as f64;
    let nnz0 = levels[0].nnz.max(1) as f64;
    HierarchyReport {
        grid_complexity: levels.iter().map(|l| l.unknowns as f64).sum::<f64>() / n0,
        operator_complexity: levels.iter().map(|l| l.nnz as f64).sum::<f64>() / nnz0,
        levels,
    }
}

impl HierarchyReport {
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:>5} {:>12} {:>12} {:>8}", "level", "unknowns", "nnz", "nnz/row");
        for l in &self.levels {
            let _ = writeln!(
                s,
                "{:>5} {:>12} {:>12} {:>8.2}",
                l.level, l.unknowns, l.nnz, l.nnz_per_row
            );
        }
        let _ = writeln!(s, "grid complexity     {:.3}", self.grid_complexity);
        let _ = writeln!(s, "operator complexity {:.3}", self.operator_complexity);
        s
    }
}
