use thiserror::Error;

/// Errors raised by the theory maps, the regime solvers and the simulator.
#[derive(Error, Debug)]
pub enum Error {
    /// An input lies outside the mathematical domain of an operation.
    #[error("domain error in {op}: {message}")]
    Domain { op: &'static str, message: String },

    /// A stated precondition was violated by the caller.
    #[error("precondition violated in {op}: {message}")]
    Precondition { op: &'static str, message: String },

    /// A token row with zero norm cannot be layer-normalised.
    #[error("zero-norm token row at index {row}")]
    ZeroRow { row: usize },

    /// Quadrature produced a non-finite value.
    #[error("quadrature failure in {op}: non-finite node sum")]
    Quadrature { op: &'static str },

    /// The rank-collapse/trainable boundary is not a single flip on the probed bracket.
    #[error("non-monotone regime boundary: probe labels {labels:?} over alpha in [{lo}, {hi}]")]
    NonMonotoneBoundary {
        labels: Vec<String>,
        lo: f64,
        hi: f64,
    },

    /// Doubling the residual strength never produced a trainable configuration.
    #[error("no trainable region found up to alpha = {max_alpha}")]
    NoTrainableRegion { max_alpha: f64 },

    /// Theory and empirical trajectories of different lengths cannot be compared.
    #[error("trajectory length mismatch: theory has {theory} states, empirical has {empirical}")]
    LengthMismatch { theory: usize, empirical: usize },

    /// Configuration file could not be parsed.
    #[error("config parse error: {0}")]
    ConfigParse(String),

    /// Configuration value failed validation.
    #[error("config validation error: key `{key}`: {message}")]
    ConfigInvalid { key: &'static str, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn domain(op: &'static str, message: impl Into<String>) -> Self {
        Error::Domain {
            op,
            message: message.into(),
        }
    }

    pub(crate) fn precondition(op: &'static str, message: impl Into<String>) -> Self {
        Error::Precondition {
            op,
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
