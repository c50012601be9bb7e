use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// Invalid input parameters. `key` names the offending field.
    #[error("invalid configuration `{key}`: {message}")]
    Config { key: String, message: String },

    /// A stationary solve could not be carried out.
    #[error("degenerate chain at claim mean {mean:e} (p0 = {p0:e}): {message}")]
    Degenerate { mean: f64, p0: f64, message: String },

    /// Non-finite or otherwise unusable intermediate value.
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// A quadrature grid fails its own moment checks.
    #[error("quadrature grid with {nodes} nodes is inaccurate: {message}")]
    Accuracy { nodes: usize, message: String },

    /// Two computations that must agree exactly did not.
    #[error("internal consistency failure: {0}")]
    Inconsistency(String),
}

impl Error {
    pub(crate) fn config(key: &str, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }
}
