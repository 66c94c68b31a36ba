//! Smartphone device-motion exports in the MotionSense layout.
//!
//! ```text
//! <root>/data_subjects_info.csv                     code,weight,height,age,gender (0 female, 1 male)
//! <root>/A_DeviceMotion_data/<act>_<trial>/sub_<n>.csv
//! ```
//!
//! The activity is the directory prefix before `_`. An unnamed leading index
//! column is dropped.

use std::path::{Path, PathBuf};

use harbias_core::model::{Gender, LabeledDataset, Recording, SubjectProfile};
use rayon::prelude::*;

use super::{parse_f64, reader, IngestError, Result};

pub const SOURCE_RATE_HZ: f64 = 50.0;
pub const SUBJECTS_FILE: &str = "data_subjects_info.csv";
pub const DATA_DIR: &str = "A_DeviceMotion_data";

/// Directory prefixes and the class names they map to.
pub const ACTIVITIES: [(&str, &str); 6] = [
    ("dws", "downstairs"),
    ("ups", "upstairs"),
    ("wlk", "walking"),
    ("jog", "jogging"),
    ("sit", "sitting"),
    ("std", "standing"),
];

/// Attitude, rotation rate and user acceleration; gravity is left out.
pub fn default_channels() -> Vec<String> {
    ["attitude", "rotationRate", "userAcceleration"]
        .iter()
        .flat_map(|g| {
            let axes: [&str; 3] = if *g == "attitude" { ["roll", "pitch", "yaw"] } else { ["x", "y", "z"] };
            axes.map(|a| format!("{g}.{a}"))
        })
        .collect()
}

pub fn subject_id(code: u32) -> String {
    format!("sub_{code}")
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
    let (code, weight, height, age, gender) = (col("code")?, col("weight")?, col("height")?, col("age")?, col("gender")?);
    let mut out = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| IngestError::csv(path, e))?;
        let g = match rec[gender].trim() {
            "0" => Gender::Female,
            "1" => Gender::Male,
            other => {
                return Err(IngestError::malformed(path, format!("row {row}: gender `{other}` is neither 0 nor 1")));
            }
        };
        let c = parse_f64(path, row, &rec[code])? as u32;
        out.push(SubjectProfile::new(
            subject_id(c),
            parse_f64(path, row, &rec[age])?.round() as u32,
            g,
            parse_f64(path, row, &rec[height])?,
            parse_f64(path, row, &rec[weight])?,
        )?);
    }
    Ok(out)
}

pub fn read(root: &Path, delimiter: u8) -> Result<LabeledDataset> {
    let subjects = read_subjects(&root.join(SUBJECTS_FILE), delimiter)?;
    let data = root.join(DATA_DIR);
    let files: Vec<PathBuf> = if data.is_dir() { super::csv_files(&data)? } else { Vec::new() };
    if files.is_empty() {
        return Err(IngestError::EmptyDataset(data));
    }
    let recordings = files
        .par_iter()
        .map(|p| read_recording(p, delimiter))
        .collect::<Result<Vec<_>>>()?;
    let first = recordings[0].channels();
    for (rec, path) in recordings.iter().zip(&files) {
        if rec.n_channels() != first.len() {
            return Err(IngestError::ChannelMismatch {
                file: path.clone(),
                expected: first.len(),
                found: rec.n_channels(),
            });
        }
    }
    let class_names = ACTIVITIES.iter().map(|(_, n)| n.to_string()).collect();
    Ok(LabeledDataset::new("motionsense", class_names, subjects, recordings)?)
}

fn read_recording(path: &Path, delimiter: u8) -> Result<Recording> {
    let dir = path
        .parent()
        .and_then(|p| p.file_name())
        .and_then(|s| s.to_str())
        .unwrap_or_default();
    let prefix = dir.split('_').next().unwrap_or_default();
    let label = ACTIVITIES
        .iter()
        .position(|(p, _)| *p == prefix)
        .ok_or_else(|| IngestError::UnknownLabel {
            file: path.to_path_buf(),
            label: prefix.to_string(),
        })?;
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
    let code: u32 = stem
        .strip_prefix("sub_")
        .and_then(|n| n.parse().ok())
        .ok_or_else(|| IngestError::malformed(path, "file name is not sub_<n>.csv"))?;

    let mut rdr = reader(path, delimiter)?;
    let header = rdr.headers().map_err(|e| IngestError::csv(path, e))?.clone();
    let keep: Vec<usize> = (0..header.len())
        .filter(|&i| !(header[i].is_empty() || header[i].starts_with("Unnamed")))
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
    Ok(Recording::new(subject_id(code), SOURCE_RATE_HZ, channels, samples, vec![label; frames])?)
}
