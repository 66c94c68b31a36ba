use std::path::PathBuf;

use thiserror::Error;

use crate::ingest::IngestError;

#[derive(Debug, Error)]
pub enum AuditError {
    #[error("{0}")]
    Config(String),
    #[error("could not read {path}: {source}")]
    ReadConfig {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed JSON in {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Core(#[from] harbias_core::Error),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("no successful result records to report on")]
    EmptyReport,
    #[error("{results} holds records of manifest {found}, expected {expected}")]
    ForeignResults {
        results: PathBuf,
        found: String,
        expected: String,
    },
    #[error("setting {setting_id}: test window from training subject {subject}")]
    Leakage { setting_id: String, subject: String },
}

pub type Result<T, E = AuditError> = std::result::Result<T, E>;

impl AuditError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        AuditError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        use harbias_core::Error as C;
        match self {
            AuditError::Config(_)
            | AuditError::ReadConfig { .. }
            | AuditError::Json { .. }
            | AuditError::ForeignResults { .. } => 2,
            AuditError::Core(
                C::Config(_) | C::HmMismatch { .. } | C::UnknownSubject { .. } | C::InfeasibleHm(_) | C::Argument(_),
            ) => 2,
            _ => 3,
        }
    }
}

/// Reads and parses a JSON file; failures are configuration errors.
pub fn read_json<T: serde::de::DeserializeOwned>(path: &std::path::Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|source| AuditError::ReadConfig {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| AuditError::Json {
        path: path.to_path_buf(),
        source,
    })
}
