//! Command-line front end: generate Poisson problems, solve systems with the
//! AMG-preconditioned Krylov solvers, replay recorded runs, and sweep
//! benchmark configurations.
//!
//! Exit codes: 0 success, 1 solver or setup failure, 2 no convergence
//! (the report is still written), 3 input error.

mod bench;
mod manifest;
mod run;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use aggamg::io::{write_matrix_market, write_vector};
use aggamg::problems::{Axis, RhsKind};
use aggamg::{
    generate_poisson, AmgError, CycleConfig, CycleKind, InnerKind, Method, ProblemKind,
    ProblemSpec, SetupConfig, SmootherKind, SolverConfig,
};
use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::bench::{BenchRow, GridIndependence, RefreshBench};
use crate::manifest::{HashedFile, InputError, Inputs, RunManifest};
use crate::run::{load, with_threads, RunResult};

const EXIT_FAILURE: u8 = 1;
const EXIT_NOT_CONVERGED: u8 = 2;
const EXIT_INPUT: u8 = 3;

#[derive(Parser)]
#[command(name = "aggamg", version, about = "Aggregation-based algebraic multigrid solver")]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a finite-difference Poisson matrix and right-hand side.
    Generate(GenerateArgs),
    /// Build a hierarchy and solve one system.
    Solve(SolveArgs),
    /// Repeat a run recorded in a manifest.
    Replay(ReplayArgs),
    /// Sweep grid sizes and configurations.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Poisson2d,
    Poisson3d,
}

#[derive(Clone, Copy, ValueEnum)]
enum AxisArg {
    X,
    Y,
    Z,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SolverArg {
    Fgmres,
    Pcg,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CycleArg {
    V,
    K,
    Hybrid,
}

#[derive(Clone, Copy, ValueEnum)]
enum InnerArg {
    Cg,
    Gmres,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SmootherArg {
    Jacobi,
    Djacobi,
    Sgs,
}

impl From<SolverArg> for Method {
    fn from(s: SolverArg) -> Self {
        match s {
            SolverArg::Fgmres => Method::Fgmres,
            SolverArg::Pcg => Method::Pcg,
        }
    }
}

impl From<CycleArg> for CycleKind {
    fn from(c: CycleArg) -> Self {
        match c {
            CycleArg::V => CycleKind::V,
            CycleArg::K => CycleKind::K,
            CycleArg::Hybrid => CycleKind::Hybrid,
        }
    }
}

impl From<InnerArg> for InnerKind {
    fn from(i: InnerArg) -> Self {
        match i {
            InnerArg::Cg => InnerKind::Cg,
            InnerArg::Gmres => InnerKind::Gmres,
        }
    }
}

impl From<SmootherArg> for SmootherKind {
    fn from(s: SmootherArg) -> Self {
        match s {
            SmootherArg::Jacobi => SmootherKind::Jacobi,
            SmootherArg::Djacobi => SmootherKind::DampedJacobi,
            SmootherArg::Sgs => SmootherKind::Sgs,
        }
    }
}

/// Grid flags. Unset values take the defaults in [`ProblemArgs::spec`].
#[derive(Args, Clone, Default)]
struct ProblemArgs {
    /// Problem family [default: poisson2d].
    #[arg(long, value_enum)]
    kind: Option<KindArg>,
    /// Grid points along x [default: 64].
    #[arg(long)]
    nx: Option<usize>,
    /// Grid points along y [default: nx].
    #[arg(long)]
    ny: Option<usize>,
    /// Grid points along z, 3D only [default: nx].
    #[arg(long)]
    nz: Option<usize>,
    /// Coupling strength along the weak axis [default: 0.01].
    #[arg(long)]
    epsilon: Option<f64>,
    /// Axis carrying the weak coupling [default: y in 2D, z in 3D].
    #[arg(long, value_enum)]
    weak_axis: Option<AxisArg>,
    /// Seed for a uniform random right-hand side instead of ones.
    #[arg(long)]
    rhs_seed: Option<u64>,
}

impl ProblemArgs {
    fn any_set(&self) -> bool {
        self.kind.is_some()
            || self.nx.is_some()
            || self.ny.is_some()
            || self.nz.is_some()
            || self.epsilon.is_some()
            || self.weak_axis.is_some()
            || self.rhs_seed.is_some()
    }

    fn spec_with(&self, nx: usize) -> ProblemSpec {
        let ny = self.ny.unwrap_or(nx);
        let eps = self.epsilon.unwrap_or(0.01);
        let mut spec = match self.kind.unwrap_or(KindArg::Poisson2d) {
            KindArg::Poisson2d => ProblemSpec::poisson2d(nx, ny, eps),
            KindArg::Poisson3d => ProblemSpec::poisson3d(nx, ny, self.nz.unwrap_or(nx), eps),
        };
        if let Some(axis) = self.weak_axis {
            spec.weak_axis = match axis {
                AxisArg::X => Axis::X,
                AxisArg::Y => Axis::Y,
                AxisArg::Z => Axis::Z,
            };
        }
        if let Some(seed) = self.rhs_seed {
            spec.rhs = RhsKind::Random { seed };
        }
        spec
    }

    fn spec(&self) -> ProblemSpec {
        self.spec_with(self.nx.unwrap_or(64))
    }
}

#[derive(Args)]
struct GenerateArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    /// Matrix output (Matrix Market).
    #[arg(long, default_value = "matrix.mtx")]
    matrix: PathBuf,
    /// Right-hand side output (Matrix Market array).
    #[arg(long, default_value = "rhs.mtx")]
    rhs: PathBuf,
    /// Also write the problem description as JSON.
    #[arg(long)]
    problem_json: Option<PathBuf>,
}

/// Hierarchy, cycle and Krylov settings shared by `solve` and `bench`.
#[derive(Args, Clone)]
struct ConfigArgs {
    /// Relative residual target.
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long, default_value_t = 500)]
    max_iters: usize,
    /// FGMRES restart length.
    #[arg(long, default_value_t = 30)]
    restart: usize,
    /// Number of top levels using K-cycles under the hybrid policy.
    #[arg(long, default_value_t = 2)]
    klevels: usize,
    /// Inner Krylov step used by K-cycles.
    #[arg(long, value_enum, default_value = "gmres")]
    inner: InnerArg,
    /// Residual threshold for skipping the second inner step.
    #[arg(long, default_value_t = 0.25)]
    t: f64,
    /// Strength threshold [default: 0.5 for generated 3D problems, else 0.25].
    #[arg(long)]
    alpha: Option<f64>,
    /// Seed for the MIS(2) randoms and the Arnoldi start vectors.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Largest operator solved directly.
    #[arg(long, default_value_t = 600)]
    coarse_size: usize,
    #[arg(long, default_value_t = 25)]
    max_levels: usize,
    /// Keep Galerkin sort/reduce indices for value refreshes.
    #[arg(long)]
    reuse_cache: bool,
    /// Worker threads [default: all cores]. Results do not depend on it.
    #[arg(long)]
    threads: Option<usize>,
}

impl ConfigArgs {
    fn manifest(
        &self,
        inputs: Inputs,
        solver: SolverArg,
        cycle: CycleArg,
        smoother: SmootherArg,
        default_alpha: f64,
    ) -> RunManifest {
        let setup = SetupConfig {
            alpha: self.alpha.unwrap_or(default_alpha),
            coarse_size_max: self.coarse_size,
            max_levels: self.max_levels,
            smoother: smoother.into(),
            seed: self.seed,
            reuse_caches: self.reuse_cache,
            ..Default::default()
        };
        RunManifest {
            version: aggamg::VERSION.to_string(),
            seed: self.seed,
            inputs,
            setup,
            cycle: CycleConfig {
                kind: cycle.into(),
                k_levels: self.klevels,
                t: self.t,
                inner: self.inner.into(),
                ..Default::default()
            },
            solver: SolverConfig {
                method: solver.into(),
                tol: self.tol,
                max_iters: self.max_iters,
                restart: self.restart,
            },
            threads: self.threads,
        }
    }
}

#[derive(Args)]
struct SolveArgs {
    /// System matrix (Matrix Market). Without it a problem is generated
    /// from the grid flags.
    #[arg(long)]
    matrix: Option<PathBuf>,
    /// Right-hand side [default: ones].
    #[arg(long, requires = "matrix")]
    rhs: Option<PathBuf>,
    /// Near-null-space vector [default: ones].
    #[arg(long, requires = "matrix")]
    b0: Option<PathBuf>,
    #[command(flatten)]
    problem: ProblemArgs,
    #[arg(long, value_enum, default_value = "fgmres")]
    solver: SolverArg,
    #[arg(long, value_enum, default_value = "hybrid")]
    cycle: CycleArg,
    #[arg(long, value_enum, default_value = "djacobi")]
    smoother: SmootherArg,
    #[command(flatten)]
    config: ConfigArgs,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct OutputArgs {
    /// Write the structured report (JSON).
    #[arg(long)]
    report: Option<PathBuf>,
    /// Write the run manifest (JSON).
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Write the solution vector (Matrix Market array).
    #[arg(long)]
    solution: Option<PathBuf>,
}

#[derive(Args)]
struct ReplayArgs {
    /// Manifest written by an earlier `solve`.
    manifest_file: PathBuf,
    /// Override the recorded thread count.
    #[arg(long)]
    threads: Option<usize>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, value_enum, default_value = "poisson2d")]
    kind: KindArg,
    /// Grid points per axis.
    #[arg(long, value_delimiter = ',', default_value = "64,128,256")]
    sizes: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "0.01")]
    epsilons: Vec<f64>,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "hybrid,v")]
    cycles: Vec<CycleArg>,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "djacobi")]
    smoothers: Vec<SmootherArg>,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "fgmres")]
    solvers: Vec<SolverArg>,
    #[command(flatten)]
    config: ConfigArgs,
    /// Also time a cached value refresh on an N×N Poisson hierarchy.
    #[arg(long, value_name = "N")]
    refresh: Option<usize>,
    /// Timing repetitions for the refresh benchmark (median reported).
    #[arg(long, default_value_t = 3)]
    repeats: usize,
    /// Write the results (JSON).
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Serialize)]
struct SolveOutput<'a> {
    manifest: &'a RunManifest,
    #[serde(flatten)]
    result: &'a RunResult,
    exit_code: u8,
}

#[derive(Serialize)]
struct BenchOutput {
    version: &'static str,
    rows: Vec<BenchRow>,
    grid_independence: Vec<GridIndependence>,
    refresh: Option<RefreshBench>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .parse_default_env()
        .init();

    let outcome = match cli.command {
        Command::Generate(args) => cmd_generate(&args).map(|()| 0),
        Command::Solve(args) => cmd_solve(&args),
        Command::Replay(args) => cmd_replay(&args),
        Command::Bench(args) => cmd_bench(&args),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if cause.is::<InputError>() || cause.is::<std::io::Error>() || cause.is::<serde_json::Error>() {
            return EXIT_INPUT;
        }
        if let Some(err) = cause.downcast_ref::<AmgError>() {
            return match err {
                AmgError::Parse { .. }
                | AmgError::Io { .. }
                | AmgError::EmptyVector
                | AmgError::InvalidConfig(_)
                | AmgError::InvalidStructure(_)
                | AmgError::IndexOutOfBounds { .. }
                | AmgError::DimensionMismatch { .. }
                | AmgError::ZeroDiagonal { .. } => EXIT_INPUT,
                _ => EXIT_FAILURE,
            };
        }
    }
    EXIT_FAILURE
}

fn cmd_generate(args: &GenerateArgs) -> Result<()> {
    let spec = args.problem.spec();
    let (a, b) = generate_poisson(&spec)?;
    write_matrix_market(&a, &args.matrix)?;
    write_vector(&b, &args.rhs)?;
    if let Some(path) = &args.problem_json {
        fs::write(path, serde_json::to_string_pretty(&spec)? + "\n")
            .with_context(|| format!("writing {}", path.display()))?;
    }
    let grid = match spec.kind {
        ProblemKind::Poisson2d => format!("{}x{}", spec.nx, spec.ny),
        ProblemKind::Poisson3d => format!("{}x{}x{}", spec.nx, spec.ny, spec.nz),
    };
    println!(
        "{:?} {grid}, epsilon {}: {} unknowns, {} nnz; suggested --alpha {}",
        spec.kind,
        spec.epsilon,
        a.n_rows(),
        a.nnz(),
        spec.default_alpha()
    );
    println!("wrote {} and {}", args.matrix.display(), args.rhs.display());
    Ok(())
}

fn cmd_solve(args: &SolveArgs) -> Result<u8> {
    let (inputs, default_alpha) = match &args.matrix {
        Some(matrix) => {
            if args.problem.any_set() {
                return Err(InputError("grid flags cannot be combined with --matrix".into()).into());
            }
            let hashed = |p: &Option<PathBuf>| p.as_deref().map(HashedFile::new).transpose();
            let inputs = Inputs::Files {
                matrix: HashedFile::new(matrix)?,
                rhs: hashed(&args.rhs)?,
                b0: hashed(&args.b0)?,
            };
            (inputs, 0.25)
        }
        None => {
            let problem = args.problem.spec();
            (Inputs::Generated { problem }, problem.default_alpha())
        }
    };
    let manifest = args
        .config
        .manifest(inputs, args.solver, args.cycle, args.smoother, default_alpha);
    execute(&manifest, &args.output)
}

fn cmd_replay(args: &ReplayArgs) -> Result<u8> {
    let mut manifest = RunManifest::load(&args.manifest_file)?;
    if args.threads.is_some() {
        manifest.threads = args.threads;
    }
    execute(&manifest, &args.output)
}

fn execute(manifest: &RunManifest, out: &OutputArgs) -> Result<u8> {
    manifest.setup.validate()?;
    manifest.cycle.validate()?;
    manifest.solver.validate()?;
    if let Some(path) = &out.manifest {
        manifest.save(path)?;
    }
    let sys = load(&manifest.inputs)?;
    let result = with_threads(manifest.threads, || run::run(manifest, &sys))??;

    print!("{}", result.hierarchy.to_table());
    let s = &result.solve;
    println!(
        "{:?} with {:?} cycle: {} after {} iterations, relative residual {:.3e}{}",
        manifest.solver.method,
        manifest.cycle.kind,
        if s.converged { "converged" } else { "not converged" },
        s.iterations,
        s.relative_residual,
        if s.stagnated { " (stagnated)" } else { "" }
    );
    println!("setup {:.3} s, solve {:.3} s", s.setup_seconds, s.solve_seconds);
    println!("manifest: {}", serde_json::to_string(manifest)?);

    let code = if s.converged { 0 } else { EXIT_NOT_CONVERGED };
    if let Some(path) = &out.report {
        let report = SolveOutput {
            manifest,
            result: &result,
            exit_code: code,
        };
        write_json(path, &report)?;
    }
    if let Some(path) = &out.solution {
        write_vector(&result.x, path)?;
    }
    Ok(code)
}

fn cmd_bench(args: &BenchArgs) -> Result<u8> {
    let mut manifests = Vec::new();
    for &n in &args.sizes {
        for &epsilon in &args.epsilons {
            let problem = ProblemArgs {
                kind: Some(args.kind),
                epsilon: Some(epsilon),
                ..Default::default()
            }
            .spec_with(n);
            for &solver in &args.solvers {
                for &cycle in &args.cycles {
                    for &smoother in &args.smoothers {
                        manifests.push(args.config.manifest(
                            Inputs::Generated { problem },
                            solver,
                            cycle,
                            smoother,
                            problem.default_alpha(),
                        ));
                    }
                }
            }
        }
    }
    let (rows, refresh) = with_threads(args.config.threads, || -> Result<_> {
        let rows = bench::sweep(&manifests);
        let refresh = match args.refresh {
            Some(n) => {
                let base = manifests.first().map(|m| m.setup.clone()).unwrap_or_default();
                Some(bench::refresh_bench(n, &base, args.repeats.max(1))?)
            }
            None => None,
        };
        Ok((rows, refresh))
    })??;
    let grid = bench::grid_independence(&rows);

    println!(
        "{:>6} {:>8} {:>7} {:>12} {:>7} {:>9} {:>7} {:>6} {:>9} {:>9} {:>6}",
        "grid", "epsilon", "cycle", "smoother", "solver", "unknowns", "levels", "opcx", "setup s", "solve s", "iters"
    );
    for r in &rows {
        match &r.error {
            None => println!(
                "{:>6} {:>8} {:>7} {:>12} {:>7} {:>9} {:>7} {:>6.3} {:>9.3} {:>9.3} {:>6}{}",
                r.nx,
                r.epsilon,
                format!("{:?}", r.cycle),
                format!("{:?}", r.smoother),
                format!("{:?}", r.solver),
                r.unknowns.unwrap_or(0),
                r.levels.unwrap_or(0),
                r.operator_complexity.unwrap_or(f64::NAN),
                r.setup_seconds.unwrap_or(f64::NAN),
                r.solve_seconds.unwrap_or(f64::NAN),
                r.iterations.unwrap_or(0),
                if r.converged == Some(true) { "" } else { " (not converged)" }
            ),
            Some(e) => println!(
                "{:>6} {:>8} {:>7} {:>12} {:>7} failed: {e}",
                r.nx,
                r.epsilon,
                format!("{:?}", r.cycle),
                format!("{:?}", r.smoother),
                format!("{:?}", r.solver)
            ),
        }
    }
    println!("iteration spread over grid sizes:");
    for g in &grid {
        println!(
            "  epsilon {} {:?} {:?} {:?}: {:?}, max/min {:.2}",
            g.epsilon, g.cycle, g.smoother, g.solver, g.iterations, g.max_over_min
        );
    }
    if let Some(r) = &refresh {
        println!(
            "refresh on {}x{} ({} levels): {:.1} ms cached vs {:.1} ms full setup ({:.1}x), \
             {:.1} ms direct products on frozen aggregates; Galerkin only {:.1} vs {:.1} ms ({:.1}x)",
            r.n,
            r.n,
            r.levels,
            1e3 * r.refresh_seconds,
            1e3 * r.full_setup_seconds,
            r.speedup_vs_setup(),
            1e3 * r.frozen_direct_seconds,
            1e3 * r.galerkin_cached_seconds,
            1e3 * r.galerkin_direct_seconds,
            r.galerkin_speedup()
        );
    }

    let failed = rows.iter().any(|r| r.error.is_some());
    if let Some(path) = &args.report {
        let out = BenchOutput {
            version: aggamg::VERSION,
            rows,
            grid_independence: grid,
            refresh,
        };
        write_json(path, &out)?;
    }
    Ok(if failed { EXIT_FAILURE } else { 0 })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}
