use thiserror::Error;

/// Everything that can go wrong in the library.
///
/// The variants are grouped so that the command-line front end can map them
/// onto exit codes: [`Error::is_numeric`] separates numerical and capacity
/// failures from bad input.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid data: {0}")]
    Data(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(
        "state block of size {size} exceeds the enumeration cap of {cap}; \
         raise `max_block_states` or use a sparser Q"
    )]
    Capacity { size: usize, cap: usize },

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("identifiability: {0}")]
    Identifiability(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::Capacity { .. } | Error::Numeric(_))
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
