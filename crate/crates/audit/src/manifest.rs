//! Experiment manifests and split-setting files.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use harbias_core::curation::{HmLabel, SplitSetting};
use harbias_core::model::BinarizedProfile;
use harbias_core::nn::TrainConfig;
use harbias_core::segmentation::WindowConfig;
use harbias_core::trial::ModelSpec;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{read_json, AuditError, Result};
use crate::ingest::{DatasetKind, IngestConfig};

/// One training split as written in a manifest: four training subjects and
/// the label they are declared to have.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SettingEntry {
    pub setting_id: String,
    pub train_subjects: Vec<String>,
    pub hm: HmLabel,
    #[serde(default)]
    pub seed: u64,
}

impl From<&SplitSetting> for SettingEntry {
    fn from(s: &SplitSetting) -> Self {
        SettingEntry {
            setting_id: s.setting_id.clone(),
            train_subjects: s.train_subjects.iter().cloned().collect(),
            hm: s.hm,
            seed: s.seed,
        }
    }
}

/// A list of settings, as written by `audit enumerate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SettingsFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset: Option<String>,
    pub settings: Vec<SettingEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentManifest {
    /// Relative paths are resolved against the manifest's directory.
    pub dataset_root: PathBuf,
    #[serde(default)]
    pub dataset_kind: DatasetKind,
    #[serde(default = "one")]
    pub downsample_factor: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channel_selection: Option<Vec<String>>,
    pub window: WindowConfig,
    #[serde(default)]
    pub model: ModelSpec,
    pub train: TrainConfig,
    pub settings: Vec<SettingEntry>,
    #[serde(default = "five")]
    pub trials_per_setting: usize,
    pub global_seed: u64,
    /// Derive the network initialization seed per trial too, instead of
    /// using `global_seed` for every trial.
    #[serde(default)]
    pub vary_init_seed: bool,
}

fn one() -> usize {
    1
}

fn five() -> usize {
    5
}

impl ExperimentManifest {
    pub fn validate(&self) -> Result<()> {
        let config = |m: &str| Err(AuditError::Config(m.to_string()));
        if self.trials_per_setting == 0 {
            return config("trials_per_setting must be at least 1");
        }
        if self.settings.is_empty() {
            return config("manifest lists no settings");
        }
        if self.downsample_factor == 0 {
            return config("downsample_factor must be at least 1");
        }
        let mut seen = BTreeSet::new();
        for s in &self.settings {
            if !seen.insert(s.setting_id.as_str()) {
                return Err(AuditError::Config(format!("duplicate setting id `{}`", s.setting_id)));
            }
        }
        self.window.validate()?;
        self.train.validate()?;
        Ok(())
    }

    pub fn ingest_config(&self) -> IngestConfig {
        IngestConfig {
            dataset_kind: self.dataset_kind,
            root_path: self.dataset_root.clone(),
            downsample_factor: self.downsample_factor,
            channel_selection: self.channel_selection.clone(),
            delimiter: b',',
        }
    }

    /// SHA-256 of the manifest's JSON serialization, hex encoded.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("manifest serializes");
        hex(&Sha256::digest(&bytes))
    }

    /// Seed for the network weights of one trial.
    pub fn init_seed(&self, setting_id: &str, trial_index: usize) -> u64 {
        if self.vary_init_seed {
            trial_seed(self.global_seed ^ 0x1417, setting_id, trial_index)
        } else {
            self.global_seed
        }
    }
}

pub fn load_manifest(path: &Path) -> Result<ExperimentManifest> {
    let mut m: ExperimentManifest = read_json(path)?;
    if m.dataset_root.is_relative() {
        if let Some(dir) = path.parent() {
            m.dataset_root = dir.join(&m.dataset_root);
        }
    }
    m.validate()?;
    Ok(m)
}

pub fn load_settings(path: &Path) -> Result<SettingsFile> {
    read_json(path)
}

/// Stable seed of one trial: the first eight bytes (little endian) of
/// SHA-256 over the global seed (8 bytes LE), the setting id (UTF-8), a zero
/// byte and the trial index (8 bytes LE).
pub fn trial_seed(global_seed: u64, setting_id: &str, trial_index: usize) -> u64 {
    let mut h = Sha256::new();
    h.update(global_seed.to_le_bytes());
    h.update(setting_id.as_bytes());
    h.update([0u8]);
    h.update((trial_index as u64).to_le_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Re-derives every entry's label; the first failure aborts.
pub fn resolve_settings(entries: &[SettingEntry], profiles: &[BinarizedProfile]) -> Result<Vec<SplitSetting>> {
    verify_each(entries, profiles)
        .into_iter()
        .map(|(_, r)| r.map_err(AuditError::from))
        .collect()
}

/// Re-derives every entry's label and reports each outcome.
pub fn verify_each(
    entries: &[SettingEntry],
    profiles: &[BinarizedProfile],
) -> Vec<(String, harbias_core::Result<SplitSetting>)> {
    entries
        .iter()
        .map(|e| {
            (
                e.setting_id.clone(),
                SplitSetting::verified(e.setting_id.clone(), e.hm, &e.train_subjects, profiles, e.seed),
            )
        })
        .collect()
}
