use thiserror::Error;

/// Errors produced anywhere in the library.
///
/// The variants are grouped by what the caller can do about them: bad
/// arguments (`Domain`), bad data or configuration (`Data`, `Design`,
/// `Identifiability`, `Config`, `Io`), and numerical breakdowns (`Structure`,
/// `Numeric`). The CLI maps these groups onto its exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    /// A correlation structure could not be built or factorised.
    #[error("structure error: {0}")]
    Structure(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    /// Rank deficiency, separation, or an unresolvable design column.
    #[error("design error: {0}")]
    Design(String),

    #[error("{0}")]
    Identifiability(String),

    #[error("line {line}: {message}")]
    Data { line: usize, message: String },

    #[error("{0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    pub(crate) fn structure(msg: impl Into<String>) -> Self {
        Error::Structure(msg.into())
    }

    pub(crate) fn data(line: usize, msg: impl Into<String>) -> Self {
        Error::Data {
            line,
            message: msg.into(),
        }
    }
}
