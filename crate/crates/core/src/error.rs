use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("{what} of size {got} exceeds the enumeration cap of {max}")]
    TooLarge {
        what: &'static str,
        got: usize,
        max: usize,
    },

    #[error("invalid law specification `{spec}`: {reason}")]
    LawSpec { spec: String, reason: String },

    #[error("incomplete decomposition: {0}")]
    Decomposition(String),

    #[error(
        "ladder sampling hit the epoch cap of {cap} steps on {truncated} of {requested} samples"
    )]
    LadderCap {
        cap: u64,
        truncated: usize,
        requested: usize,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization: {0}")]
    Serialization(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

/// Rejects non-positive or non-finite couplings.
pub(crate) fn check_coupling(j: f64) -> Result<()> {
    if j.is_finite() && j > 0.0 {
        Ok(())
    } else {
        Err(invalid("J", format!("coupling must be finite and > 0, got {j}")))
    }
}
