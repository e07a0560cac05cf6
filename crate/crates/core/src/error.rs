use crate::grid::Field;

/// Errors produced by the solvers and the run harness.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("no positive steady state: delta = {delta} is below the threshold delta0 = {delta0}")]
    BelowThreshold { delta: f64, delta0: f64 },

    #[error("shooting failed: {0}")]
    Shooting(String),

    #[error("cone test function under-resolved: {cells_per_radius:.2} cells per radius, need at least 8")]
    Resolution { cells_per_radius: f64 },

    #[error("Newton iteration stagnated after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        last: Option<Box<Field>>,
    },

    #[error("epsilon too large: rho(delta) - m has no sign change on [{lo}, {hi}]")]
    EpsilonTooLarge { lo: f64, hi: f64 },

    #[error("epsilon too large for platform estimate: only {far_fraction:.3} of cells lie in the far field")]
    FarFieldTooSmall { far_fraction: f64 },

    #[error("time step underflow (dt = {dt:.3e}) at t = {t}")]
    Stiffness { t: f64, dt: f64 },

    #[error("non-finite value in {what} at t = {t}")]
    NonFinite { what: &'static str, t: f64 },

    #[error("linear solver failed: {0}")]
    LinearSolver(String),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("invalid configuration: {0}")]
    Validation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidParameter(_)
            | Error::Parse { .. }
            | Error::Validation(_)
            | Error::Resolution { .. }
            | Error::BelowThreshold { .. } => 2,
            Error::Shooting(_)
            | Error::NonConvergence { .. }
            | Error::EpsilonTooLarge { .. }
            | Error::FarFieldTooSmall { .. }
            | Error::Stiffness { .. }
            | Error::NonFinite { .. }
            | Error::LinearSolver(_) => 3,
            Error::Io(_) => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
