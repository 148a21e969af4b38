use thiserror::Error;

/// Errors raised across the library.
///
/// The variants are grouped the way the CLI maps them onto exit codes:
/// validation problems, numerical-quality problems and optimizer failures.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("parameter out of range: {0}")]
    ParameterRange(String),

    #[error("invalid state specification: {0}")]
    InvalidSpec(String),

    #[error("tensor of {entries} entries exceeds the budget of {budget}")]
    Capacity { entries: usize, budget: usize },

    #[error("truncation leak {leak:.3e} exceeds tolerance {tol:.3e}")]
    Truncation { leak: f64, tol: f64 },

    #[error("quadrature did not converge: value moved by {shift:.3e} on refinement")]
    Precision { shift: f64 },

    #[error("optimizer found no feasible evaluation for n = {n}")]
    Infeasible { n: usize },

    #[error("malformed state file: {0}")]
    Format(String),
}

impl Error {
    /// Category used for process exit codes.
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Dimension(_)
            | Error::ParameterRange(_)
            | Error::InvalidSpec(_)
            | Error::Capacity { .. }
            | Error::Format(_) => ErrorKind::Validation,
            Error::Truncation { .. } | Error::Precision { .. } => ErrorKind::Numerical,
            Error::Infeasible { .. } => ErrorKind::Infeasible,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Validation,
    Numerical,
    Infeasible,
}

pub type Result<T> = std::result::Result<T, Error>;
