use std::path::PathBuf;

/// Errors produced by the library.
///
/// The coarse split matters to callers: `Param` means the caller handed us
/// something invalid, `Io`/`Format` are file problems, and the remaining
/// variants signal numerical trouble detected while an algorithm was running.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Param(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("format error in {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("numerical conditioning failure: {0}")]
    Conditioning(String),

    #[error("divergence: {0}")]
    Divergence(String),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Param(msg.into())
    }

    /// True for the variants that indicate a numerical failure at run time
    /// rather than bad input or a file problem.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Conditioning(_) | Error::Divergence(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
