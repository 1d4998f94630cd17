use thiserror::Error;

/// Errors produced by solvers, configuration handling and field I/O.
#[derive(Debug, Error)]
pub enum Error {
    /// The implicit linear solve did not reach the required relative residual.
    #[error("linear solver failed at step {step}: relative residual {residual:.3e} exceeds {tolerance:.1e}")]
    SolverFailure {
        step: usize,
        residual: f64,
        tolerance: f64,
    },

    /// A field picked up non-finite values during time integration.
    #[error("non-finite values detected in {field} at step {step}")]
    NonFinite { step: usize, field: &'static str },

    /// The step matrix could not be factored (e.g. beta = 0 leaves the
    /// constant-pressure mode unconstrained).
    #[error("step matrix is singular at column {column}")]
    SingularMatrix { column: usize },

    /// Configuration document failed validation; every violation is listed.
    #[error("invalid configuration:\n{}", .0.join("\n"))]
    ConfigInvalid(Vec<String>),

    /// Configuration document is not well-formed JSON.
    #[error("configuration syntax error at line {line}, column {column}: {message}")]
    ConfigSyntax {
        line: usize,
        column: usize,
        message: String,
    },

    /// A field file could not be parsed.
    #[error("malformed field file {path}: {message}")]
    FieldFormat { path: String, message: String },

    /// Mismatch between a file's grid metadata and the expected grid.
    #[error("field file grid {found} does not match expected {expected}")]
    GridMismatch { found: String, expected: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
