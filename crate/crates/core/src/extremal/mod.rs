//! Integration of the canonical system `x' = ∂H/∂ψ`, `ψ' = -∂H/∂x` with the control
//! eliminated, and single shooting for two-point boundary data.

mod integrate;
mod shoot;
mod trajectory;

use thiserror::Error;

use crate::problem::ProblemError;

pub use integrate::{integrate, CanonicalSystem, NodeState};
pub use shoot::{shoot, ShootOptions, ShootingResult};
pub use trajectory::{hermite, Trajectory};
pub(crate) use trajectory::integrate_samples;

#[derive(Debug, Error)]
pub enum ExtremalError {
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error("at least {min} steps required, got {got}")]
    Steps { min: usize, got: usize },
    #[error("expected {expected} values for {what}, got {got}")]
    Dimension { what: String, expected: usize, got: usize },
    #[error("non-finite state at t = {t} (blow-up)")]
    BlowUp { t: f64 },
    #[error("boundary incomplete: shooting needs every state fixed at both ends (missing {0})")]
    BoundaryIncomplete(String),
    #[error("singular shooting Jacobian at iteration {iteration}")]
    SingularJacobian { iteration: usize },
    #[error("nontriviality violated: psi0 = 0 and max |psi| = {max_psi:e} < {tol:e}")]
    Trivial { max_psi: f64, tol: f64 },
    #[error("trajectory file: {0}")]
    Csv(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}
