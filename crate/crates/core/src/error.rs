use thiserror::Error;

/// Errors raised by mesh construction, the linear and nonlinear solvers and the optimizer.
#[derive(Debug, Error)]
pub enum Error {
    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("mesh mismatch: {0}")]
    MeshMismatch(String),

    #[error("unknown boundary selector `{0}`")]
    UnknownSelector(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("linear solver failed: {reason} (residual {residual:.3e})")]
    LinearSolver { reason: String, residual: f64 },

    #[error("positivity lost: {0}")]
    Positivity(String),

    #[error("{solver} did not converge after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence {
        solver: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("line search failed after {backtracks} backtracks (last alpha {alpha:.3e}, last cost {cost:.6e}, target {target:.6e})")]
    LineSearch {
        backtracks: usize,
        alpha: f64,
        cost: f64,
        target: f64,
    },

    #[error("optimizer iteration {iteration}: {source}")]
    Optimizer {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("I/O error at {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// True for failures of the forward or adjoint solvers (as opposed to config or I/O problems).
    pub fn is_solver_failure(&self) -> bool {
        match self {
            Error::LinearSolver { .. } | Error::Positivity(_) | Error::NonConvergence { .. } => true,
            Error::Optimizer { source, .. } => source.is_solver_failure(),
            _ => false,
        }
    }

    pub fn is_line_search_failure(&self) -> bool {
        match self {
            Error::LineSearch { .. } => true,
            Error::Optimizer { source, .. } => source.is_line_search_failure(),
            _ => false,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
