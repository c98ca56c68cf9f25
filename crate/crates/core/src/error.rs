use std::path::PathBuf;

/// Errors raised while building, generating or analysing a specification.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid specification: {0}")]
    Spec(String),

    #[error("group {group}: {reason}")]
    Infeasible { group: usize, reason: String },

    #[error("infeasible target: {0}")]
    InfeasibleTarget(String),

    #[error("variable `{name}` is {kind}, operation requires {required}")]
    Kind {
        name: String,
        kind: &'static str,
        required: &'static str,
    },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("{0} is outside the parameter domain")]
    Domain(f64),

    #[error("enumeration of {0} joint outcomes exceeds the limit of {1}")]
    TooLarge(u128, u128),

    #[error("empty contingency table")]
    EmptyTable,

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn stage(stage: &'static str, source: Error) -> Self {
        Error::Stage {
            stage,
            source: Box::new(source),
        }
    }

    /// Innermost error, skipping any stage wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }

    /// True when the failure is an unreachable calibration target.
    pub fn is_infeasible(&self) -> bool {
        matches!(
            self.root(),
            Error::Infeasible { .. } | Error::InfeasibleTarget(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
