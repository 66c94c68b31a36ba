use alloc::string::String;

use crate::curation::HmLabel;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Every failure the core can report.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("attribute `{0}` is not available on every profile")]
    MissingAttribute(&'static str),
    #[error("need at least {needed} subjects, got {found}")]
    TooFewSubjects { needed: usize, found: usize },
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error("contingency table has a zero margin")]
    DegenerateTable,
    #[error("no four-subject training set has heterogeneity {0}")]
    InfeasibleHm(HmLabel),
    #[error("setting `{setting_id}` declares {declared} but its subjects give {actual}")]
    HmMismatch {
        setting_id: String,
        declared: HmLabel,
        actual: HmLabel,
    },
    #[error("setting `{setting_id}` references unknown subject `{subject}`")]
    UnknownSubject { setting_id: String, subject: String },
    #[error("invalid model configuration: {0}")]
    Config(String),
    #[error("training labels contain fewer than two classes")]
    DegenerateLabels,
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("metric undefined without samples")]
    NoSamples,
}

impl Error {
    pub(crate) fn argument(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }
}
