//! Optical motion capture exports in the LARa layout.
//!
//! ```text
//! <root>/subjects.csv                  subject,gender,age,weight_kg,height_cm[,handedness]
//! <root>/**/<..._Sxx_...>.csv          one column per channel, frames at 200 Hz
//! <root>/**/<..._Sxx_...>_labels.csv   `Class` column, one row per frame
//! ```
//!
//! The subject of a recording is the first `_`-separated token of its file
//! name of the form `S<digits>`. Columns named `time`, `sample`, `frame` or
//! `timestamp` are dropped; every other column is a channel.

use std::path::{Path, PathBuf};

use harbias_core::model::{Handedness, LabeledDataset, Recording, SubjectProfile};
use rayon::prelude::*;

use super::{parse_f64, parse_gender, reader, IngestError, Result};

pub const SOURCE_RATE_HZ: f64 = 200.0;
pub const SUBJECTS_FILE: &str = "subjects.csv";
const LABEL_SUFFIX: &str = "_labels";
const INDEX_COLUMNS: [&str; 4] = ["time", "sample", "frame", "timestamp"];

pub const CLASS_NAMES: [&str; 8] = [
    "Standing",
    "Walking",
    "Cart",
    "Handling (upwards)",
    "Handling (centred)",
    "Handling (downwards)",
    "Synchronization",
    "None",
];

fn squash(s: &str) -> String {
    s.chars().filter(char::is_ascii_alphanumeric).collect::<String>().to_ascii_lowercase()
}

/// Class index of an integer code or a class name.
pub fn class_index(raw: &str) -> Option<usize> {
    if let Ok(i) = raw.parse::<usize>() {
        return (i < CLASS_NAMES.len()).then_some(i);
    }
    let key = squash(raw).replace("centered", "centred");
    CLASS_NAMES.iter().position(|c| squash(c) == key)
}

pub fn subject_token(path: &Path) -> Option<String> {
    let stem = path.file_stem()?.to_str()?;
    stem.split('_')
        .find(|t| t.len() > 1 && t.starts_with('S') && t[1..].bytes().all(|b| b.is_ascii_digit()))
        .map(str::to_string)
}

pub fn read_subjects(path: &Path, delimiter: u8) -> Result<Vec<SubjectProfile>> {
    if !path.is_file() {
        return Err(IngestError::MissingMeta(path.to_path_buf()));
    }
    let mut rdr = reader(path, delimiter)?;
    let header = rdr.headers().map_err(|e| IngestError::csv(path, e))?.clone();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .ok_or_else(|| IngestError::malformed(path, format!("missing column `{name}`")))
    };
    let (id, gender, age, weight, height) = (col("subject")?, col("gender")?, col("age")?, col("weight_kg")?, col("height_cm")?);
    let hand = header.iter().position(|h| h.eq_ignore_ascii_case("handedness"));
    let mut out = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| IngestError::csv(path, e))?;
        let g = parse_gender(&rec[gender])
            .ok_or_else(|| IngestError::malformed(path, format!("row {row}: unknown gender `{}`", &rec[gender])))?;
        let a = parse_f64(path, row, &rec[age])?;
        let mut p = SubjectProfile::new(
            rec[id].to_string(),
            a.round() as u32,
            g,
            parse_f64(path, row, &rec[height])?,
            parse_f64(path, row, &rec[weight])?,
        )?;
        if let Some(h) = hand.and_then(|i| rec.get(i)) {
            match h.to_ascii_lowercase().as_str() {
                "l" | "left" => p = p.with_handedness(Handedness::Left),
                "r" | "right" => p = p.with_handedness(Handedness::Right),
                _ => {}
            }
        }
        out.push(p);
    }
    Ok(out)
}

pub fn read(root: &Path, delimiter: u8) -> Result<LabeledDataset> {
    let subjects = read_subjects(&root.join(SUBJECTS_FILE), delimiter)?;
    let data_files: Vec<PathBuf> = super::csv_files(root)?
        .into_iter()
        .filter(|p| {
            let stem = p.file_stem().and_then(|s| s.to_str()).unwrap_or("");
            !stem.ends_with(LABEL_SUFFIX) && p.file_name().and_then(|s| s.to_str()) != Some(SUBJECTS_FILE)
        })
        .collect();
    if data_files.is_empty() {
        return Err(IngestError::EmptyDataset(root.to_path_buf()));
    }
    let mut recordings = data_files
        .par_iter()
        .map(|p| read_recording(p, delimiter))
        .collect::<Result<Vec<_>>>()?;
    let first = recordings[0].channels().to_vec();
    for (rec, path) in recordings.iter().zip(&data_files) {
        if rec.n_channels() != first.len() {
            return Err(IngestError::ChannelMismatch {
                file: path.clone(),
                expected: first.len(),
                found: rec.n_channels(),
            });
        }
        if rec.channels() != first.as_slice() {
            return Err(IngestError::malformed(path, "channel names differ from the first recording"));
        }
    }
    recordings.sort_by(|a, b| a.subject_id().cmp(b.subject_id()));
    let class_names = CLASS_NAMES.iter().map(|s| s.to_string()).collect();
    Ok(LabeledDataset::new("lara_omocap", class_names, subjects, recordings)?)
}

fn read_recording(path: &Path, delimiter: u8) -> Result<Recording> {
    let subject = subject_token(path).ok_or_else(|| IngestError::malformed(path, "no S<digits> subject token in file name"))?;
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
    let label_path = path.with_file_name(format!("{stem}{LABEL_SUFFIX}.csv"));
    if !label_path.is_file() {
        return Err(IngestError::MissingMeta(label_path));
    }

    let mut rdr = reader(path, delimiter)?;
    let header = rdr.headers().map_err(|e| IngestError::csv(path, e))?.clone();
    let keep: Vec<usize> = (0..header.len())
        .filter(|&i| !INDEX_COLUMNS.contains(&header[i].to_ascii_lowercase().as_str()))
        .collect();
    let channels: Vec<String> = keep.iter().map(|&i| header[i].to_string()).collect();
    let mut samples = Vec::new();
    let mut frames = 0;
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| IngestError::csv(path, e))?;
        if rec.len() != header.len() {
            return Err(IngestError::ChannelMismatch {
                file: path.to_path_buf(),
                expected: header.len(),
                found: rec.len(),
            });
        }
        for &i in &keep {
            samples.push(parse_f64(path, row, &rec[i])?);
        }
        frames += 1;
    }

    let mut lrdr = reader(&label_path, delimiter)?;
    let lheader = lrdr.headers().map_err(|e| IngestError::csv(&label_path, e))?.clone();
    let class_col = lheader.iter().position(|h| h.eq_ignore_ascii_case("class")).unwrap_or(0);
    let mut labels = Vec::with_capacity(frames);
    for rec in lrdr.records() {
        let rec = rec.map_err(|e| IngestError::csv(&label_path, e))?;
        let raw = rec.get(class_col).unwrap_or("");
        labels.push(class_index(raw).ok_or_else(|| IngestError::UnknownLabel {
            file: label_path.clone(),
            label: raw.to_string(),
        })?);
    }
    if labels.len() != frames {
        return Err(IngestError::malformed(
            &label_path,
            format!("{} label rows for {frames} frames", labels.len()),
        ));
    }
    Ok(Recording::new(subject, SOURCE_RATE_HZ, channels, samples, labels)?)
}
