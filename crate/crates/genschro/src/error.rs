//! Error type shared by all modules.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid grid, profile or scenario parameters.
    #[error("configuration error: {0}")]
    Config(String),

    /// Configuration file problem tied to a specific line.
    #[error("configuration error at line {line}: {msg}")]
    ConfigLine { line: usize, msg: String },

    /// Unknown key in a scenario file.
    #[error("unknown configuration key `{0}`")]
    UnknownKey(String),

    /// A required key is absent.
    #[error("missing required configuration key `{0}`")]
    MissingKey(String),

    /// A profile kind was selected without its parameter.
    #[error("profile kind `{kind}` requires parameter `{param}`")]
    MissingParameter { kind: String, param: String },

    /// 1 + mu vanished at a grid node, so the kinetic coefficients degenerate.
    #[error("singular coefficient: 1 + mu = {value} at node {node} (x = {x})")]
    SingularCoefficient { node: usize, x: f64, value: String },

    /// Tabulated profile queried outside its range.
    #[error("table query x = {x} outside tabulated range [{min}, {max}]")]
    TableRange { x: f64, min: f64, max: f64 },

    /// Malformed table file.
    #[error("table file `{path}` line {line}: {msg}")]
    TableFormat {
        path: String,
        line: usize,
        msg: String,
    },

    /// Banded factorization or solve failed.
    #[error("linear solver failure: {msg} (condition estimate {condition:.3e})")]
    Solver { msg: String, condition: f64 },

    /// Eigensolver did not reach the residual bound.
    #[error("eigensolver did not converge: best residual {best_residual:.3e}")]
    NonConvergence { best_residual: f64 },

    /// Total probability at t = 0 is zero, drift is undefined.
    #[error("degenerate normalization: total probability at t = 0 is {0:.3e}")]
    DegenerateNormalization(f64),

    /// Non-finite field values appeared during propagation.
    #[error("non-finite field values detected at step {step}")]
    NanDetected { step: usize },

    /// Operands live on incompatible grids or times.
    #[error("usage error: {0}")]
    Usage(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn usage(msg: impl Into<String>) -> Self {
        Error::Usage(msg.into())
    }
}
