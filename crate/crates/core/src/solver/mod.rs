//! Dense LP and strictly convex QP solvers.
//!
//! Multipliers follow the sensitivity convention: the multiplier of a row is
//! the derivative of the optimal value with respect to that row's right-hand
//! side. For a minimisation with rows `a x <= b` this makes every multiplier
//! non-positive, and the stationarity condition reads `A^T y = c` (LP) or
//! `Q x + c = A^T y` (QP) up to bound multipliers.

mod lp;
mod qp;

pub use lp::{solve_lp, solve_lp_with, LinearProgram, LpSolution, LpStatus};
pub use qp::{solve_qp, solve_qp_with, QpSolution, QpStatus, QuadraticProgram};

/// Numerical tolerances shared by the solvers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Absolute primal feasibility tolerance.
    pub feasibility_tol: f64,
    /// Reduced-cost threshold below which a column may enter the basis.
    pub optimality_tol: f64,
    /// Smallest pivot element accepted in a ratio test.
    pub pivot_tol: f64,
    /// Consecutive degenerate pivots tolerated before switching to Bland's rule.
    pub bland_after: usize,
    /// Basis refactorisation period.
    pub refactor_every: usize,
    pub max_iterations: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            feasibility_tol: 1e-9,
            optimality_tol: 1e-9,
            pivot_tol: 1e-9,
            bland_after: 30,
            refactor_every: 40,
            max_iterations: 50_000,
        }
    }
}
