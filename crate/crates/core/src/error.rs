use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed or inconsistent input data (histories, snapshots, labels, parameters).
    #[error("invalid input: {0}")]
    Input(String),

    /// A closed-form estimator has no data to work with.
    #[error("estimation failed: {0}")]
    Estimation(String),

    /// A root solve inside the variational step could not be carried out.
    #[error("solver failed at event {event}: {message}")]
    Solver { event: usize, message: String },

    /// Model selection could not be evaluated.
    #[error("selection failed: {0}")]
    Selection(String),

    /// Publication records could not be turned into a history.
    #[error("ingest failed: {0}")]
    Ingest(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
