//! Setup and solve shared by `solve`, `replay` and `bench`.

use aggamg::io::{read_matrix_market, read_vector};
use aggamg::{
    generate_poisson, hierarchy_report, setup, solve, AmgPreconditioner, CsrMatrix,
    HierarchyReport, NullSpace, SolveReport,
};
use anyhow::{Context, Result};
use serde::Serialize;

use crate::manifest::{Inputs, RunManifest};

pub struct System {
    pub a: CsrMatrix,
    pub b: Vec<f64>,
    pub b0: NullSpace,
}

pub fn load(inputs: &Inputs) -> Result<System> {
    match inputs {
        Inputs::Generated { problem } => {
            let (a, b) = generate_poisson(problem)?;
            let b0 = NullSpace::ones(a.n_rows());
            Ok(System { a, b, b0 })
        }
        Inputs::Files { matrix, rhs, b0 } => {
            let a = read_matrix_market(&matrix.path)?;
            let b = match rhs {
                Some(f) => read_vector(&f.path)?,
                None => vec![1.0; a.n_rows()],
            };
            let b0 = match b0 {
                Some(f) => NullSpace::new(read_vector(&f.path)?)?,
                None => NullSpace::ones(a.n_rows()),
            };
            Ok(System { a, b, b0 })
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunResult {
    pub hierarchy: HierarchyReport,
    pub solve: SolveReport,
    #[serde(skip)]
    pub x: Vec<f64>,
}

pub fn run(m: &RunManifest, sys: &System) -> Result<RunResult> {
    let h = setup(&sys.a, &sys.b0, &m.setup).context("hierarchy setup")?;
    let pc = AmgPreconditioner {
        hierarchy: &h,
        cycle: m.cycle,
    };
    let x0 = vec![0.0; sys.b.len()];
    let (x, mut report) = solve(&sys.a, &sys.b, &x0, &pc, &m.solver).context("solve")?;
    report.setup_seconds = h.setup_seconds;
    Ok(RunResult {
        hierarchy: hierarchy_report(&h),
        solve: report,
        x,
    })
}

/// Runs `f` on a pool of `threads` workers, or on the global pool.
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .context("building the thread pool")?;
            Ok(pool.install(f))
        }
    }
}
