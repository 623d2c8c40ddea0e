use std::path::PathBuf;

/// Errors produced by simulation components.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A malformed CSV row; `line` is 1-based and counts the header.
    #[error("{path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    /// Input value outside the mathematical domain of a transform.
    #[error("domain error: {0}")]
    Domain(String),

    /// Regression design has no usable variation.
    #[error("singular design: {0}")]
    SingularDesign(String),

    /// The requested network cannot be constructed.
    #[error("network construction infeasible: {0}")]
    Infeasible(String),

    /// Bad argument to a constructor or operation.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Simulation configuration or data coverage problem, detected before
    /// any trading happens.
    #[error("configuration error: {0}")]
    Config(String),

    /// A PRCC column with no variation, named so callers can report it.
    #[error("PRCC undefined: column '{0}' is constant")]
    ConstantColumn(String),

    /// A worker task failed during a sweep.
    #[error("simulation run failed: {0}")]
    RunFailed(String),
}
