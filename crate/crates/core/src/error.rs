use thiserror::Error;

/// Crate-wide error type.
///
/// Variants map onto the process exit codes used by the command-line tool:
/// configuration problems exit 2, resource-cap violations exit 3, fit
/// failures exit 4.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid user input: lattice sizes, angles, probabilities, config files.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// A hard resource cap would be exceeded (qubit count, term count).
    #[error("resource cap exceeded: {0}")]
    Resource(String),

    /// A fit did not converge or had no usable data.
    #[error("fit failure: {0}")]
    FitFailure(String),

    /// Malformed serialized artifact (circuit text, shot archive, model file).
    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
    pub fn resource(msg: impl Into<String>) -> Self {
        Error::Resource(msg.into())
    }
    pub fn fit(msg: impl Into<String>) -> Self {
        Error::FitFailure(msg.into())
    }
    pub fn parse(msg: impl Into<String>) -> Self {
        Error::Parse(msg.into())
    }
}
