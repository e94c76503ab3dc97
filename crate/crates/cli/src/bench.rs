//! Parameter sweeps and the cached-refresh micro-benchmark.

use std::collections::BTreeMap;
use std::time::Instant;

use aggamg::galerkin::galerkin_direct;
use aggamg::{
    generate_poisson, setup, CsrMatrix, CycleKind, Method, NullSpace, ProblemSpec, SetupConfig,
    SmootherKind,
};
use anyhow::Result;
use serde::Serialize;

use crate::manifest::{Inputs, RunManifest};
use crate::run::{load, run};

#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub epsilon: f64,
    pub cycle: CycleKind,
    pub smoother: SmootherKind,
    pub solver: Method,
    pub unknowns: Option<usize>,
    pub levels: Option<usize>,
    pub operator_complexity: Option<f64>,
    pub setup_seconds: Option<f64>,
    pub solve_seconds: Option<f64>,
    pub iterations: Option<usize>,
    pub converged: Option<bool>,
    pub relative_residual: Option<f64>,
    pub error: Option<String>,
}

/// Iteration spread over grid sizes for one configuration.
#[derive(Debug, Clone, Serialize)]
pub struct GridIndependence {
    pub epsilon: f64,
    pub cycle: CycleKind,
    pub smoother: SmootherKind,
    pub solver: Method,
    pub iterations: Vec<usize>,
    pub max_over_min: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RefreshBench {
    pub n: usize,
    pub levels: usize,
    /// `refresh_values` with cached Galerkin indices.
    pub refresh_seconds: f64,
    /// Sparse products on the frozen aggregates.
    pub frozen_direct_seconds: f64,
    /// Setup from scratch without caches.
    pub full_setup_seconds: f64,
    /// Coarse operators alone, cached route.
    pub galerkin_cached_seconds: f64,
    /// Coarse operators alone, two sparse products per level.
    pub galerkin_direct_seconds: f64,
}

impl RefreshBench {
    pub fn speedup_vs_setup(&self) -> f64 {
        self.full_setup_seconds / self.refresh_seconds
    }

    pub fn galerkin_speedup(&self) -> f64 {
        self.galerkin_direct_seconds / self.galerkin_cached_seconds
    }
}

/// One row per problem and configuration in `manifests`. Failures are kept
/// in the row and the sweep moves on.
pub fn sweep(manifests: &[RunManifest]) -> Vec<BenchRow> {
    manifests
        .iter()
        .map(|m| {
            let Inputs::Generated { problem } = &m.inputs else {
                unreachable!("bench only generates problems");
            };
            let mut row = BenchRow {
                nx: problem.nx,
                ny: problem.ny,
                nz: problem.nz,
                epsilon: problem.epsilon,
                cycle: m.cycle.kind,
                smoother: m.setup.smoother,
                solver: m.solver.method,
                unknowns: None,
                levels: None,
                operator_complexity: None,
                setup_seconds: None,
                solve_seconds: None,
                iterations: None,
                converged: None,
                relative_residual: None,
                error: None,
            };
            match load(&m.inputs).and_then(|sys| run(m, &sys)) {
                Ok(r) => {
                    row.unknowns = Some(r.hierarchy.levels[0].unknowns);
                    row.levels = Some(r.hierarchy.levels.len());
                    row.operator_complexity = Some(r.hierarchy.operator_complexity);
                    row.setup_seconds = Some(r.solve.setup_seconds);
                    row.solve_seconds = Some(r.solve.solve_seconds);
                    row.iterations = Some(r.solve.iterations);
                    row.converged = Some(r.solve.converged);
                    row.relative_residual = Some(r.solve.relative_residual);
                }
                Err(e) => {
                    log::warn!("bench row {}x{} failed: {e:#}", problem.nx, problem.ny);
                    row.error = Some(format!("{e:#}"));
                }
            }
            row
        })
        .collect()
}

pub fn grid_independence(rows: &[BenchRow]) -> Vec<GridIndependence> {
    let mut groups: BTreeMap<String, (GridIndependence, bool)> = BTreeMap::new();
    for r in rows {
        let key = format!("{:e}/{:?}/{:?}/{:?}", r.epsilon, r.cycle, r.smoother, r.solver);
        let entry = groups.entry(key).or_insert_with(|| {
            (
                GridIndependence {
                    epsilon: r.epsilon,
                    cycle: r.cycle,
                    smoother: r.smoother,
                    solver: r.solver,
                    iterations: Vec::new(),
                    max_over_min: f64::NAN,
                },
                true,
            )
        });
        match (r.iterations, r.converged) {
            (Some(it), Some(true)) => entry.0.iterations.push(it),
            _ => entry.1 = false,
        }
    }
    groups
        .into_values()
        .map(|(mut g, complete)| {
            if complete && !g.iterations.is_empty() {
                let max = *g.iterations.iter().max().unwrap() as f64;
                let min = *g.iterations.iter().min().unwrap() as f64;
                g.max_over_min = max / min.max(1.0);
            }
            g
        })
        .collect()
}

fn median_seconds(repeats: usize, mut f: impl FnMut() -> Result<()>) -> Result<f64> {
    let mut t = Vec::with_capacity(repeats);
    for _ in 0..repeats {
        let start = Instant::now();
        f()?;
        t.push(start.elapsed().as_secs_f64());
    }
    t.sort_by(f64::total_cmp);
    Ok(t[t.len() / 2])
}

/// Times a value refresh on an `n`×`n` isotropic Poisson hierarchy against
/// the uncached alternatives.
pub fn refresh_bench(n: usize, base: &SetupConfig, repeats: usize) -> Result<RefreshBench> {
    let (a, _) = generate_poisson(&ProblemSpec::poisson2d(n, n, 1.0))?;
    let b0 = NullSpace::ones(a.n_rows());
    let cached_cfg = SetupConfig {
        reuse_caches: true,
        ..base.clone()
    };
    let h = setup(&a, &b0, &cached_cfg)?;
    // same pattern, new values
    let values: Vec<f64> = a
        .values()
        .iter()
        .enumerate()
        .map(|(k, v)| v * (1.0 + 0.05 * ((k % 7) as f64 / 7.0)))
        .collect();
    let a2 = a.with_values(values.clone())?;
    let plain_cfg = SetupConfig {
        reuse_caches: false,
        ..base.clone()
    };

    let refresh_seconds = median_seconds(repeats, || h.refresh_values(&values).map(drop).map_err(Into::into))?;
    let frozen_direct_seconds =
        median_seconds(repeats, || h.rebuild_direct(&values).map(drop).map_err(Into::into))?;
    let full_setup_seconds =
        median_seconds(repeats, || setup(&a2, &b0, &plain_cfg).map(drop).map_err(Into::into))?;

    let transfers: Vec<_> = h.levels[..h.coarsest()]
        .iter()
        .map(|l| l.transfer.clone().expect("non-coarsest level"))
        .collect();
    let mut ops: Vec<CsrMatrix> = vec![a2];
    for t in &transfers {
        let next = galerkin_direct(&t.r, ops.last().unwrap(), &t.p)?;
        ops.push(next);
    }
    let galerkin_cached_seconds = median_seconds(repeats, || {
        for (t, a) in transfers.iter().zip(&ops) {
            t.cache.as_ref().expect("cached setup").apply(a.values(), &t.p)?;
        }
        Ok(())
    })?;
    let galerkin_direct_seconds = median_seconds(repeats, || {
        for (t, a) in transfers.iter().zip(&ops) {
            galerkin_direct(&t.r, a, &t.p)?;
        }
        Ok(())
    })?;
    Ok(RefreshBench {
        n,
        levels: h.n_levels(),
        refresh_seconds,
        frozen_direct_seconds,
        full_setup_seconds,
        galerkin_cached_seconds,
        galerkin_direct_seconds,
    })
}
