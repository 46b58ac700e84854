//! Linear programs and the solvers behind them.
//!
//! [`LinearProgram`] is a plain minimization model over bounded columns and
//! sparse rows. [`solve_lp`] runs the bundled revised simplex; anything
//! implementing [`LpBackend`] can stand in for it (see [`MicrolpBackend`]).

mod backend;
mod lu;
pub mod mps;
mod problem;
mod simplex;

pub use backend::{BackendKind, BundledSimplex, LpBackend, MicrolpBackend};
pub use problem::{Constraint, LinearProgram, Relation, VarId, Variable};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("variable {variable} has invalid bounds [{lower}, {upper}]")]
    InvalidBounds { variable: usize, lower: f64, upper: f64 },
    #[error("constraint {row} references unknown variable {variable}")]
    UnknownVariable { row: usize, variable: usize },
    #[error("constraint {row} has a non-finite coefficient or right-hand side")]
    NonFinite { row: usize },
    #[error("objective has a non-finite coefficient")]
    NonFiniteObjective,
    #[error("backend {backend} failed: {message}")]
    Backend { backend: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

/// Status of one column (structural columns first, then one logical per row).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BasisStatus {
    Basic,
    AtLower,
    AtUpper,
    Free,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Basis {
    /// `num_variables + num_constraints` entries.
    pub status: Vec<BasisStatus>,
}

/// Optional starting information. Backends are free to ignore any part of it.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WarmStart {
    pub values: Option<Vec<f64>>,
    pub basis: Option<Basis>,
}

impl WarmStart {
    pub fn from_result(result: &LpResult) -> Self {
        WarmStart {
            values: Some(result.values.clone()),
            basis: result.basis.clone(),
        }
    }

    pub fn from_basis(basis: Basis) -> Self {
        WarmStart {
            values: None,
            basis: Some(basis),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Primal feasibility tolerance on bounds and rows.
    pub feasibility: f64,
    /// Smallest pivot magnitude accepted in the ratio test.
    pub pivot: f64,
    /// Reduced-cost tolerance for optimality.
    pub optimality: f64,
    /// `None` means `50 * (rows + cols)`.
    pub iteration_limit: Option<usize>,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            feasibility: 1e-7,
            pivot: 1e-9,
            optimality: 1e-9,
            iteration_limit: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpResult {
    pub status: LpStatus,
    /// One value per structural variable.
    pub values: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
    pub basis: Option<Basis>,
    /// Row duals `y` such that reduced costs are `c - A^T y` (optimal solves only).
    pub duals: Option<Vec<f64>>,
}

impl LpResult {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

/// Solves `lp` with the bundled revised simplex.
///
/// Malformed programs are rejected before any pivoting happens.
pub fn solve_lp(lp: &LinearProgram, warm: Option<&WarmStart>, tol: &Tolerances) -> Result<LpResult, LpError> {
    lp.validate()?;
    Ok(simplex::solve(lp, warm, tol))
}
