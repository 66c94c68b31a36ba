//! Readers for source dataset layouts and the canonical interchange format.

use std::path::{Path, PathBuf};

use harbias_core::model::{Gender, LabeledDataset, Recording};
use harbias_core::resample::downsample;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub mod canonical;
pub mod lara;
pub mod motionsense;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("missing metadata: {0}")]
    MissingMeta(PathBuf),
    #[error("{file}: expected {expected} channels, found {found}")]
    ChannelMismatch {
        file: PathBuf,
        expected: usize,
        found: usize,
    },
    #[error("{file}: unknown activity label `{label}`")]
    UnknownLabel { file: PathBuf, label: String },
    #[error("no recordings found under {0}")]
    EmptyDataset(PathBuf),
    #[error("{file}: {message}")]
    Malformed { file: PathBuf, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error(transparent)]
    Dataset(#[from] harbias_core::Error),
}

impl IngestError {
    pub(crate) fn malformed(file: &Path, message: impl Into<String>) -> Self {
        IngestError::Malformed {
            file: file.to_path_buf(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        IngestError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub(crate) fn csv(path: &Path, source: csv::Error) -> Self {
        IngestError::Csv {
            path: path.to_path_buf(),
            source,
        }
    }
}

pub type Result<T, E = IngestError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    LaraOmocap,
    Motionsense,
    #[default]
    Canonical,
}

impl std::str::FromStr for DatasetKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "lara_omocap" | "lara" => Ok(DatasetKind::LaraOmocap),
            "motionsense" => Ok(DatasetKind::Motionsense),
            "canonical" => Ok(DatasetKind::Canonical),
            other => Err(format!("unknown dataset kind `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestConfig {
    #[serde(default)]
    pub dataset_kind: DatasetKind,
    pub root_path: PathBuf,
    #[serde(default = "one")]
    pub downsample_factor: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channel_selection: Option<Vec<String>>,
    /// Field delimiter of source CSV files.
    #[serde(default = "comma")]
    pub delimiter: u8,
}

fn one() -> usize {
    1
}

fn comma() -> u8 {
    b','
}

impl IngestConfig {
    pub fn new(dataset_kind: DatasetKind, root_path: impl Into<PathBuf>) -> Self {
        IngestConfig {
            dataset_kind,
            root_path: root_path.into(),
            downsample_factor: 1,
            channel_selection: None,
            delimiter: b',',
        }
    }
}

/// Loads a dataset, then applies channel selection and decimation.
pub fn load_dataset(config: &IngestConfig) -> Result<LabeledDataset> {
    if config.downsample_factor == 0 {
        return Err(harbias_core::Error::Argument("downsample factor must be at least 1".into()).into());
    }
    if !config.root_path.exists() {
        return Err(IngestError::io(
            &config.root_path,
            std::io::Error::new(std::io::ErrorKind::NotFound, "dataset root does not exist"),
        ));
    }
    let dataset = match config.dataset_kind {
        DatasetKind::Canonical => canonical::read(&config.root_path)?,
        DatasetKind::LaraOmocap => lara::read(&config.root_path, config.delimiter)?,
        DatasetKind::Motionsense => {
            let selection = config
                .channel_selection
                .clone()
                .unwrap_or_else(motionsense::default_channels);
            return finish(motionsense::read(&config.root_path, config.delimiter)?, Some(&selection), config.downsample_factor);
        }
    };
    finish(dataset, config.channel_selection.as_deref(), config.downsample_factor)
}

/// Subject metadata only, without reading any recording.
pub fn load_subjects(kind: DatasetKind, root: &Path) -> Result<Vec<harbias_core::model::SubjectProfile>> {
    match kind {
        DatasetKind::Canonical => Ok(canonical::read_meta(root)?.profiles()?),
        DatasetKind::LaraOmocap => lara::read_subjects(&root.join(lara::SUBJECTS_FILE), b','),
        DatasetKind::Motionsense => motionsense::read_subjects(&root.join(motionsense::SUBJECTS_FILE), b','),
    }
}

fn finish(dataset: LabeledDataset, selection: Option<&[String]>, factor: usize) -> Result<LabeledDataset> {
    if selection.is_none() && factor == 1 {
        return Ok(dataset);
    }
    let (name, class_names, subjects, recordings) = dataset.into_parts();
    let recordings = recordings
        .into_iter()
        .map(|r| {
            let r = match selection {
                Some(names) => r.select_channels(names)?,
                None => r,
            };
            if factor == 1 {
                Ok(r)
            } else {
                downsample(&r, factor)
            }
        })
        .collect::<harbias_core::Result<Vec<Recording>>>()?;
    Ok(LabeledDataset::new(name, class_names, subjects, recordings)?)
}

/// Accepts `f`/`female`/`w` and `m`/`male`, case-insensitively.
pub(crate) fn parse_gender(value: &str) -> Option<Gender> {
    match value.trim().to_ascii_lowercase().as_str() {
        "f" | "female" | "w" => Some(Gender::Female),
        "m" | "male" => Some(Gender::Male),
        _ => None,
    }
}

/// All regular files below `dir` with extension `csv`, sorted by path.
pub(crate) fn csv_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).map_err(|e| IngestError::io(&d, e))? {
            let path = entry.map_err(|e| IngestError::io(&d, e))?.path();
            if path.is_dir() {
                stack.push(path);
            } else if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
                out.push(path);
            }
        }
    }
    out.sort();
    Ok(out)
}

pub(crate) fn reader(path: &Path, delimiter: u8) -> Result<csv::Reader<std::fs::File>> {
    csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| IngestError::csv(path, e))
}

pub(crate) fn parse_f64(path: &Path, row: usize, field: &str) -> Result<f64> {
    field
        .parse::<f64>()
        .map_err(|_| IngestError::malformed(path, format!("row {row}: `{field}` is not a number")))
}
