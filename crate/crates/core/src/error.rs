use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Coarse classification used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Config,
    Validation,
    Solver,
    Simulation,
    Usage,
}

impl ErrorCategory {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCategory::Config => "config",
            ErrorCategory::Validation => "validation",
            ErrorCategory::Solver => "solver",
            ErrorCategory::Simulation => "simulation",
            ErrorCategory::Usage => "usage",
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("config: {0}")]
    Config(String),

    #[error("dimension mismatch in {name}: expected {expected}, got {got}")]
    Dimension {
        name: &'static str,
        expected: String,
        got: String,
    },

    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),

    #[error("{name} is not symmetric: max |M - M^T| = {asymmetry:.3e} exceeds 1e-12")]
    Asymmetric { name: &'static str, asymmetry: f64 },

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("{equation} escapes to infinity near t = {time}")]
    HorizonEscape { equation: &'static str, time: f64 },

    #[error("range condition fails for {weight} at t = {time}: {detail}")]
    RangeCondition {
        weight: &'static str,
        time: f64,
        detail: String,
    },

    #[error("{weight} is not positive semidefinite at t = {time} (min eigenvalue {min_eig:.3e})")]
    IndefiniteWeight {
        weight: &'static str,
        time: f64,
        min_eig: f64,
    },

    #[error("{what} did not converge: {detail}")]
    NonConvergence { what: &'static str, detail: String },

    #[error("closed loop is not mean-square stable: {0}")]
    NotStabilizing(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("no (n,n) c-splitting: {stable} stable, {unstable} unstable, {boundary} on the imaginary axis")]
    NoSplitting {
        stable: usize,
        unstable: usize,
        boundary: usize,
    },

    #[error("stable invariant subspace is degenerate (condition number {0:.3e})")]
    SubspaceDegenerate(f64),

    #[error("residual of {equation} is {residual:.3e}")]
    Inconsistent {
        equation: &'static str,
        residual: f64,
    },

    #[error("singular matrix: {0}")]
    Singular(&'static str),

    #[error("state blew up at step {step} of replication {replication}")]
    BlowUp { step: usize, replication: u64 },

    #[error("agent index {index} out of range for {len} agents")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("need at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        use Error::*;
        match self {
            Config(_) => ErrorCategory::Config,
            Dimension { .. } | NonFinite(_) | Asymmetric { .. } | InvalidParameter { .. } => {
                ErrorCategory::Validation
            }
            HorizonEscape { .. }
            | RangeCondition { .. }
            | IndefiniteWeight { .. }
            | NonConvergence { .. }
            | NotStabilizing(_)
            | Precondition(_)
            | NoSplitting { .. }
            | SubspaceDegenerate(_)
            | Inconsistent { .. }
            | Singular(_)
            | Numerical(_) => ErrorCategory::Solver,
            BlowUp { .. } => ErrorCategory::Simulation,
            IndexOutOfRange { .. } | GridMismatch(_) | TooFewPoints { .. } => ErrorCategory::Usage,
            Io(_) | Csv(_) | Json(_) => ErrorCategory::Usage,
        }
    }
}
