//! Convex QP machinery for the prox-linear subproblem.

mod assemble;
mod banded;
mod csc;
mod solver;

pub use assemble::{assemble_subproblem, SubproblemAssembler, SubproblemLayout};
pub use banded::{BandCholesky, SymmetricBand};
pub use csc::CscMatrix;
pub use solver::{solve_qp, solve_qp_warm, QpInstance, QpSettings, QpSolution, QpStatus};
