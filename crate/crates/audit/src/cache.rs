//! Per-subject window sets, optionally persisted under `AUDIT_CACHE_DIR`.

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use harbias_core::model::LabeledDataset;
use harbias_core::segmentation::{segment_subjects, WindowConfig, WindowSet, WindowSource};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::blob;
use crate::error::{AuditError, Result};
use crate::manifest::hex;

pub const CACHE_ENV: &str = "AUDIT_CACHE_DIR";
const MAGIC: &[u8; 8] = b"HBWIN001";

#[derive(Serialize, Deserialize)]
struct Header {
    window_size: usize,
    channels: usize,
    labels: Vec<usize>,
    sources: Vec<WindowSource>,
}

/// Content hash of a dataset: metadata plus every sample and label.
pub fn fingerprint(dataset: &LabeledDataset) -> String {
    let mut h = Sha256::new();
    h.update(dataset.name().as_bytes());
    for c in dataset.channels() {
        h.update(c.as_bytes());
        h.update([0]);
    }
    for r in dataset.recordings() {
        h.update(r.subject_id().as_bytes());
        h.update(r.sampling_rate_hz().to_le_bytes());
        for v in r.samples() {
            h.update(v.to_le_bytes());
        }
        for l in r.frame_labels() {
            h.update((*l as u64).to_le_bytes());
        }
    }
    hex(&h.finalize())
}

#[derive(Debug, Clone, Default)]
pub struct WindowCache {
    dir: Option<PathBuf>,
}

impl WindowCache {
    pub fn new(dir: Option<PathBuf>) -> Self {
        WindowCache { dir }
    }

    pub fn from_env() -> Self {
        WindowCache::new(std::env::var_os(CACHE_ENV).map(PathBuf::from))
    }

    fn path(&self, dataset_hash: &str, subject: &str, window: &WindowConfig) -> Option<PathBuf> {
        let dir = self.dir.as_ref()?;
        let mut h = Sha256::new();
        h.update(dataset_hash.as_bytes());
        h.update(subject.as_bytes());
        h.update(serde_json::to_vec(window).expect("window config serializes"));
        Some(dir.join(format!("{}.win", &hex(&h.finalize())[..32])))
    }

    /// Raw (unnormalized) windows of every subject in `subjects`.
    pub fn subject_windows(
        &self,
        dataset: &LabeledDataset,
        subjects: &BTreeSet<String>,
        window: &WindowConfig,
    ) -> Result<BTreeMap<String, WindowSet>> {
        let dataset_hash = if self.dir.is_some() { fingerprint(dataset) } else { String::new() };
        if let Some(dir) = &self.dir {
            std::fs::create_dir_all(dir).map_err(|e| AuditError::io(dir, e))?;
        }
        let ids: Vec<&String> = subjects.iter().collect();
        let sets = ids
            .par_iter()
            .map(|id| self.one(dataset, &dataset_hash, id, window).map(|w| ((*id).clone(), w)))
            .collect::<Result<Vec<_>>>()?;
        Ok(sets.into_iter().collect())
    }

    fn one(&self, dataset: &LabeledDataset, dataset_hash: &str, id: &str, window: &WindowConfig) -> Result<WindowSet> {
        let path = self.path(dataset_hash, id, window);
        if let Some(p) = path.as_ref().filter(|p| p.is_file()) {
            match blob::read::<Header>(p, MAGIC) {
                Ok((h, data)) => return Ok(WindowSet::from_parts(h.window_size, h.channels, data, h.labels, h.sources)?),
                Err(e) => log::warn!("ignoring unreadable cache entry: {e}"),
            }
        }
        let only: BTreeSet<String> = [id.to_string()].into();
        let set = segment_subjects(dataset, &only, window)?;
        if let Some(p) = path {
            let header = Header {
                window_size: set.window_size(),
                channels: set.channels(),
                labels: set.labels().to_vec(),
                sources: set.sources().to_vec(),
            };
            blob::write(&p, MAGIC, &header, set.data())?;
        }
        Ok(set)
    }
}

/// Union of the given subjects' windows in canonical order.
pub fn assemble(per_subject: &BTreeMap<String, WindowSet>, subjects: &BTreeSet<String>) -> Result<WindowSet> {
    let mut iter = subjects.iter().filter_map(|s| per_subject.get(s));
    let Some(first) = iter.next() else {
        return Err(harbias_core::Error::NoSamples.into());
    };
    let mut out = first.clone();
    for set in iter {
        out.extend(set)?;
    }
    Ok(out.sorted())
}
