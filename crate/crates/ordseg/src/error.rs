use std::path::PathBuf;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A caller-supplied argument or configuration violates a precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A numeric quantity left its mathematical domain (non-positive
    /// variance, non-finite likelihood term, singular system after
    /// regularisation, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// A mixture class received zero total weight, so its regression
    /// cannot be updated. Callers running restarts treat this as a signal
    /// to redraw the initialisation.
    #[error("class {class} has zero total weight")]
    EmptyClass { class: usize },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed CSV content; `line` is 1-based and names the first bad line.
    #[error("{}:{line}: {msg}", path.display())]
    Csv {
        path: PathBuf,
        line: usize,
        msg: String,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
