use std::path::PathBuf;

use crate::objectives::ObjectiveId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("objective `{id}` does not support {what}")]
    UnsupportedObjective { id: ObjectiveId, what: &'static str },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid value for `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("algorithm `{algorithm}` cannot run on objective `{objective}`")]
    Pairing {
        algorithm: String,
        objective: ObjectiveId,
    },

    #[error("no in-domain proposal after {0} redraws")]
    ProposalExhausted(u64),

    #[error("integration produced a non-finite state at t = {t}")]
    IntegrationBlowup { t: f64 },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// Name of the offending configuration field, when there is one.
    pub fn field(&self) -> Option<&str> {
        match self {
            Error::Config { field, .. } => Some(field),
            Error::Pairing { .. } => Some("objective"),
            _ => None,
        }
    }
}
