//! Error type shared by all solver modules.

use thiserror::Error;

/// Failure modes of the solver library.
///
/// Every variant carries enough context to state *which* precondition or
/// numerical contract was violated; callers translate these into process
/// exit codes or log lines.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// A precondition on user-supplied input failed; the message names it.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Two objects built on different grids were combined.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// A field that must vanish on r ∈ {R0, R1} does not.
    #[error("nonzero Dirichlet boundary values (max |u| on boundary = {max_abs})")]
    NonzeroBoundary { max_abs: f64 },

    /// Conjugate gradients (or MINRES) stalled before reaching tolerance.
    #[error("{solver} did not reach tolerance {tol:e} within {iters} iterations (last residual {residual:e})")]
    IterativeNoConvergence {
        solver: &'static str,
        iters: usize,
        residual: f64,
        tol: f64,
    },

    /// Newton iteration on the radial profile failed for every restart.
    #[error("radial Newton failed after {restarts} restarts (best residual {best_residual:e})")]
    RadialNewtonFailure { restarts: usize, best_residual: f64 },

    /// Inverse iteration for the lowest eigenvalue stagnated.
    #[error("eigenvalue iteration stagnated: {0}")]
    EigenStagnation(String),

    /// A descent-flow iterate left the cone beyond the admitted tolerance.
    #[error("flow iterate left the cone at step {step} (defect {defect:e} > tau {tau:e})")]
    ConeExit { step: usize, defect: f64, tau: f64 },

    /// A non-finite value appeared mid-computation.
    #[error("non-finite value encountered in {0}")]
    NonFinite(String),

    /// Separatrix bisection could not bracket two distinct basins.
    #[error("separatrix bracketing failed: {0}")]
    SeparatrixDegenerate(String),
}

impl Error {
    /// Convenience constructor for precondition violations.
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
