//! Aggregation-based algebraic multigrid.
//!
//! The setup phase builds a hierarchy of coarse operators from the matrix
//! alone: a classic strength-of-connection graph, MIS(2) root nodes chosen
//! by a parallel tuple-max propagation, aggregates grouped around the roots,
//! and a piecewise-constant interpolation that carries one near-null-space
//! vector with orthonormal columns. Coarse operators are Galerkin products,
//! formed either by two sparse products or through cached sort/reduce
//! indices that make refreshing the values of a fixed pattern cheap.
//!
//! The solve phase uses V-cycles, K-cycles or the hybrid policy (K-cycles on
//! the top levels, V-cycles below) as a preconditioner for flexible GMRES or
//! CG.
//!
//! All kernels are row- or chunk-parallel with reductions in a fixed order,
//! so results are bit-identical for any rayon pool size.

/// Library version recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub mod aggregation;
pub mod cycles;
pub mod dense;
pub mod error;
pub mod galerkin;
pub mod hierarchy;
pub mod io;
pub mod krylov;
pub mod problems;
pub mod smoothers;
pub mod sparse;
pub mod strength;
pub mod transfer;
pub mod vector;

pub use aggregation::{aggregate, coarsen, mis2, Aggregation, MisState};
pub use cycles::{apply_preconditioner, kcycle, vcycle, CycleConfig, CycleKind, InnerKind};
pub use error::{AmgError, Result};
pub use galerkin::{galerkin_direct, GalerkinCache};
pub use hierarchy::{hierarchy_report, setup, Hierarchy, HierarchyReport, SetupConfig};
pub use krylov::{
    fgmres, pcg, solve, AmgPreconditioner, Method, Preconditioner, SolveReport, SolverConfig,
};
pub use problems::{generate_poisson, ProblemKind, ProblemSpec};
pub use smoothers::SmootherKind;
pub use sparse::{CsrMatrix, TripletList};
pub use strength::{classic_strength, StrengthGraph};
pub use transfer::{build_transfer, NullSpace};
