//! `<root>/meta.json` plus `<root>/recordings/<subject_id>_<k>.csv`.
//!
//! Recording files have a header of channel names followed by `label`; each
//! row is one frame.

use std::path::{Path, PathBuf};

use harbias_core::model::{Gender, Handedness, LabeledDataset, Recording, SubjectProfile};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{parse_f64, reader, IngestError, Result};

pub const META_FILE: &str = "meta.json";
pub const RECORDINGS_DIR: &str = "recordings";
pub const LABEL_COLUMN: &str = "label";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectMeta {
    pub id: String,
    pub age: u32,
    pub gender: Gender,
    pub height_cm: f64,
    pub weight_kg: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub handedness: Option<Handedness>,
}

impl SubjectMeta {
    pub fn to_profile(&self) -> harbias_core::Result<SubjectProfile> {
        let p = SubjectProfile::new(self.id.clone(), self.age, self.gender, self.height_cm, self.weight_kg)?;
        Ok(match self.handedness {
            Some(h) => p.with_handedness(h),
            None => p,
        })
    }
}

impl From<&SubjectProfile> for SubjectMeta {
    fn from(p: &SubjectProfile) -> Self {
        SubjectMeta {
            id: p.subject_id.clone(),
            age: p.age,
            gender: p.gender,
            height_cm: p.height_cm,
            weight_kg: p.weight_kg,
            handedness: p.handedness,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    pub name: String,
    pub sampling_rate_hz: f64,
    pub channels: Vec<String>,
    pub class_names: Vec<String>,
    pub subjects: Vec<SubjectMeta>,
}

impl Meta {
    pub fn profiles(&self) -> harbias_core::Result<Vec<SubjectProfile>> {
        self.subjects.iter().map(SubjectMeta::to_profile).collect()
    }
}

pub fn read_meta(root: &Path) -> Result<Meta> {
    let path = root.join(META_FILE);
    if !path.is_file() {
        return Err(IngestError::MissingMeta(path));
    }
    let text = std::fs::read_to_string(&path).map_err(|e| IngestError::io(&path, e))?;
    serde_json::from_str(&text).map_err(|source| IngestError::Json { path, source })
}

/// Splits `<subject_id>_<k>` at the last underscore.
fn parse_stem(path: &Path) -> Option<(String, usize)> {
    let stem = path.file_stem()?.to_str()?;
    let (subject, k) = stem.rsplit_once('_')?;
    Some((subject.to_string(), k.parse().ok()?))
}

pub fn read(root: &Path) -> Result<LabeledDataset> {
    let meta = read_meta(root)?;
    let dir = root.join(RECORDINGS_DIR);
    let mut files: Vec<(String, usize, PathBuf)> = Vec::new();
    if dir.is_dir() {
        for path in super::csv_files(&dir)? {
            let (subject, k) =
                parse_stem(&path).ok_or_else(|| IngestError::malformed(&path, "file name is not <subject_id>_<k>.csv"))?;
            files.push((subject, k, path));
        }
    }
    if files.is_empty() {
        return Err(IngestError::EmptyDataset(dir));
    }
    files.sort();
    let recordings = files
        .par_iter()
        .map(|(subject, _, path)| read_recording(path, subject, &meta))
        .collect::<Result<Vec<_>>>()?;
    let subjects = meta.profiles()?;
    Ok(LabeledDataset::new(meta.name, meta.class_names, subjects, recordings)?)
}

fn read_recording(path: &Path, subject: &str, meta: &Meta) -> Result<Recording> {
    let mut rdr = reader(path, b',')?;
    let header = rdr.headers().map_err(|e| IngestError::csv(path, e))?.clone();
    let n = header.len().saturating_sub(1);
    if header.iter().next_back() != Some(LABEL_COLUMN) {
        return Err(IngestError::malformed(path, "last column must be `label`"));
    }
    if n != meta.channels.len() {
        return Err(IngestError::ChannelMismatch {
            file: path.to_path_buf(),
            expected: meta.channels.len(),
            found: n,
        });
    }
    if header.iter().take(n).ne(meta.channels.iter().map(String::as_str)) {
        return Err(IngestError::malformed(path, "channel names differ from meta.json"));
    }
    let mut samples = Vec::new();
    let mut labels = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| IngestError::csv(path, e))?;
        for field in record.iter().take(n) {
            samples.push(parse_f64(path, row, field)?);
        }
        let raw = &record[n];
        let label = raw
            .parse::<usize>()
            .ok()
            .filter(|&l| l < meta.class_names.len())
            .or_else(|| meta.class_names.iter().position(|c| c == raw))
            .ok_or_else(|| IngestError::UnknownLabel {
                file: path.to_path_buf(),
                label: raw.to_string(),
            })?;
        labels.push(label);
    }
    Ok(Recording::new(subject, meta.sampling_rate_hz, meta.channels.clone(), samples, labels)?)
}

/// Writes `dataset` in canonical layout under `root`, numbering each
/// subject's recordings from 0.
pub fn write(root: &Path, dataset: &LabeledDataset) -> Result<()> {
    let dir = root.join(RECORDINGS_DIR);
    std::fs::create_dir_all(&dir).map_err(|e| IngestError::io(&dir, e))?;
    let meta = Meta {
        name: dataset.name().to_string(),
        sampling_rate_hz: dataset.sampling_rate_hz().unwrap_or(0.0),
        channels: dataset.channels().to_vec(),
        class_names: dataset.class_names().to_vec(),
        subjects: dataset.subjects().iter().map(SubjectMeta::from).collect(),
    };
    let meta_path = root.join(META_FILE);
    let json = serde_json::to_string_pretty(&meta).map_err(|source| IngestError::Json {
        path: meta_path.clone(),
        source,
    })?;
    std::fs::write(&meta_path, json + "\n").map_err(|e| IngestError::io(&meta_path, e))?;

    let mut counters = std::collections::BTreeMap::<&str, usize>::new();
    for rec in dataset.recordings() {
        let k = counters.entry(rec.subject_id()).or_default();
        let path = dir.join(format!("{}_{}.csv", rec.subject_id(), k));
        *k += 1;
        let mut w = csv::Writer::from_path(&path).map_err(|e| IngestError::csv(&path, e))?;
        let mut header: Vec<&str> = rec.channels().iter().map(String::as_str).collect();
        header.push(LABEL_COLUMN);
        w.write_record(&header).map_err(|e| IngestError::csv(&path, e))?;
        let mut row = Vec::with_capacity(header.len());
        for (i, label) in rec.frame_labels().iter().enumerate() {
            row.clear();
            row.extend(rec.frame(i).iter().map(|v| v.to_string()));
            row.push(label.to_string());
            w.write_record(&row).map_err(|e| IngestError::csv(&path, e))?;
        }
        w.flush().map_err(|e| IngestError::io(&path, e))?;
    }
    Ok(())
}
