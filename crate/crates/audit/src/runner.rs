//! Runs every (setting, trial) of a manifest and appends one JSON line per
//! trial to a results file.
//!
//! Trials run on a worker pool. A single writer emits records in job order,
//! so the results file is a prefix of the complete run at any point and an
//! interrupted run resumes to the same file.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::OpenOptions;
use std::io::Write;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::sync::mpsc;
use std::time::Instant;

use harbias_core::curation::{binarize_profiles, HmLabel, SplitSetting};
use harbias_core::metrics::{ConfusionMatrix, TrialResult};
use harbias_core::model::LabeledDataset;
use harbias_core::nn::{ModelConfig, TrainConfig};
use harbias_core::segmentation::{Normalizer, WindowSet};
use harbias_core::trial::run_on_windows;
use serde::{Deserialize, Serialize};

use crate::cache::{assemble, WindowCache};
use crate::checkpoint;
use crate::error::{AuditError, Result};
use crate::manifest::{resolve_settings, trial_seed, ExperimentManifest};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub manifest_hash: String,
    pub setting_id: String,
    pub hm: HmLabel,
    pub trial_index: usize,
    pub trial_seed: u64,
    pub init_seed: u64,
    #[serde(default)]
    pub accuracy: Option<f64>,
    #[serde(default)]
    pub wf1: Option<f64>,
    #[serde(default)]
    pub n_train_windows: usize,
    #[serde(default)]
    pub n_test_windows: usize,
    #[serde(default)]
    pub stopped_epoch: usize,
    #[serde(default)]
    pub best_epoch: usize,
    pub wall_time_s: f64,
    /// Row-major `[truth][prediction]` counts.
    #[serde(default)]
    pub confusion: Option<Vec<u64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl ResultRecord {
    pub fn is_ok(&self) -> bool {
        self.error.is_none() && self.accuracy.is_some() && self.wf1.is_some()
    }

    /// The record as a [`TrialResult`]; `None` for failed trials.
    pub fn trial_result(&self) -> Option<TrialResult> {
        if !self.is_ok() {
            return None;
        }
        let flat = self.confusion.as_ref()?;
        let k = (flat.len() as f64).sqrt() as usize;
        if k * k != flat.len() {
            return None;
        }
        let counts = flat.chunks(k).map(<[u64]>::to_vec).collect();
        let names = (0..k).map(|c| c.to_string()).collect();
        let cm = ConfusionMatrix::from_counts(counts, names).ok()?;
        Some(TrialResult {
            setting_id: self.setting_id.clone(),
            trial_index: self.trial_index,
            accuracy: self.accuracy?,
            wf1: self.wf1?,
            confusion: cm,
            n_train_windows: self.n_train_windows,
        })
    }

    /// Equal apart from wall-clock time.
    pub fn same_outcome(&self, other: &ResultRecord) -> bool {
        let mut a = self.clone();
        a.wall_time_s = other.wall_time_s;
        a == *other
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Worker threads; 0 uses all cores.
    pub workers: usize,
    pub checkpoint_dir: Option<PathBuf>,
    pub cache: WindowCache,
    /// Stop after this many new records.
    pub limit: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunSummary {
    pub total: usize,
    pub skipped: usize,
    pub written: usize,
    pub failed: usize,
}

/// Parses a results file. A torn final line (no trailing newline) is
/// ignored.
pub fn read_results(path: &Path) -> Result<Vec<ResultRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| AuditError::io(path, e))?;
    let complete = match text.rfind('\n') {
        Some(i) => &text[..=i],
        None => "",
    };
    complete
        .lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| AuditError::Config(format!("{}: line {}: {e}", path.display(), i + 1)))
        })
        .collect()
}

/// Drops a torn final line left by an interrupted writer.
fn truncate_torn_tail(path: &Path) -> Result<()> {
    let bytes = std::fs::read(path).map_err(|e| AuditError::io(path, e))?;
    let keep = bytes.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
    if keep != bytes.len() {
        let f = OpenOptions::new().write(true).open(path).map_err(|e| AuditError::io(path, e))?;
        f.set_len(keep as u64).map_err(|e| AuditError::io(path, e))?;
    }
    Ok(())
}

struct Job<'a> {
    setting: &'a SplitSetting,
    trial: usize,
}

struct Shared<'a> {
    manifest: &'a ExperimentManifest,
    hash: String,
    model: ModelConfig,
    class_names: Vec<String>,
    windows: BTreeMap<String, WindowSet>,
    checkpoint_dir: Option<&'a Path>,
}

pub fn run_experiment(
    manifest: &ExperimentManifest,
    dataset: &LabeledDataset,
    out: &Path,
    options: &RunOptions,
) -> Result<RunSummary> {
    manifest.validate()?;
    let hash = manifest.hash();
    let profiles = binarize_profiles(dataset.subjects())?;
    let settings = resolve_settings(&manifest.settings, &profiles)?;
    let model = manifest.model.for_dataset(dataset, manifest.window.window_size)?;

    let mut done = BTreeSet::new();
    if out.is_file() {
        truncate_torn_tail(out)?;
        for r in read_results(out)? {
            if r.manifest_hash != hash {
                return Err(AuditError::ForeignResults {
                    results: out.to_path_buf(),
                    found: r.manifest_hash,
                    expected: hash,
                });
            }
            done.insert((r.setting_id, r.trial_index));
        }
    }
    let total = settings.len() * manifest.trials_per_setting;
    let mut jobs: Vec<Job> = settings
        .iter()
        .flat_map(|s| (0..manifest.trials_per_setting).map(move |t| Job { setting: s, trial: t }))
        .filter(|j| !done.contains(&(j.setting.setting_id.clone(), j.trial)))
        .collect();
    let skipped = total - jobs.len();
    if let Some(limit) = options.limit {
        jobs.truncate(limit);
    }
    let mut summary = RunSummary {
        total,
        skipped,
        written: 0,
        failed: 0,
    };
    if jobs.is_empty() {
        return Ok(summary);
    }

    let needed: BTreeSet<String> = jobs
        .iter()
        .flat_map(|j| j.setting.train_subjects.iter().chain(&j.setting.test_subjects).cloned())
        .collect();
    if let Some(dir) = &options.checkpoint_dir {
        std::fs::create_dir_all(dir).map_err(|e| AuditError::io(dir, e))?;
    }
    let shared = Shared {
        manifest,
        hash,
        model,
        class_names: dataset.class_names().to_vec(),
        windows: options.cache.subject_windows(dataset, &needed, &manifest.window)?,
        checkpoint_dir: options.checkpoint_dir.as_deref(),
    };

    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| AuditError::io(parent, e))?;
    }
    let mut file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(out)
        .map_err(|e| AuditError::io(out, e))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.workers)
        .build()
        .map_err(|e| AuditError::Config(format!("worker pool: {e}")))?;

    let (tx, rx) = mpsc::channel::<(usize, ResultRecord)>();
    let shared = &shared;
    let jobs = &jobs;
    std::thread::scope(|ts| -> Result<()> {
        ts.spawn(move || {
            pool.scope(|s| {
                for (seq, job) in jobs.iter().enumerate() {
                    let tx = tx.clone();
                    s.spawn(move |_| {
                        let _ = tx.send((seq, run_job(shared, job)));
                    });
                }
            });
        });
        let mut pending = BTreeMap::new();
        let mut next = 0;
        for (seq, record) in rx {
            pending.insert(seq, record);
            while let Some(record) = pending.remove(&next) {
                if !record.is_ok() {
                    summary.failed += 1;
                    log::warn!(
                        "{} trial {} failed: {}",
                        record.setting_id,
                        record.trial_index,
                        record.error.as_deref().unwrap_or("")
                    );
                }
                let mut line = serde_json::to_string(&record).expect("record serializes");
                line.push('\n');
                file.write_all(line.as_bytes()).map_err(|e| AuditError::io(out, e))?;
                file.flush().map_err(|e| AuditError::io(out, e))?;
                summary.written += 1;
                next += 1;
            }
        }
        Ok(())
    })?;
    Ok(summary)
}

fn run_job(shared: &Shared, job: &Job) -> ResultRecord {
    let start = Instant::now();
    let id = &job.setting.setting_id;
    let manifest = shared.manifest;
    let seed = trial_seed(manifest.global_seed, id, job.trial);
    let init_seed = manifest.init_seed(id, job.trial);
    let mut record = ResultRecord {
        manifest_hash: shared.hash.clone(),
        setting_id: id.clone(),
        hm: job.setting.hm,
        trial_index: job.trial,
        trial_seed: seed,
        init_seed,
        accuracy: None,
        wf1: None,
        n_train_windows: 0,
        n_test_windows: 0,
        stopped_epoch: 0,
        best_epoch: 0,
        wall_time_s: 0.0,
        confusion: None,
        error: None,
    };
    let outcome = catch_unwind(AssertUnwindSafe(|| train_and_evaluate(shared, job.setting, job.trial, seed, init_seed, &mut record)));
    match outcome {
        Ok(Ok(())) => {}
        Ok(Err(e)) => record.error = Some(e.to_string()),
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "trial panicked".into());
            record.error = Some(msg);
        }
    }
    if record.error.is_some() {
        record.accuracy = None;
        record.wf1 = None;
        record.confusion = None;
    }
    record.wall_time_s = start.elapsed().as_secs_f64();
    record
}

fn train_and_evaluate(
    shared: &Shared,
    setting: &SplitSetting,
    trial: usize,
    seed: u64,
    init_seed: u64,
    record: &mut ResultRecord,
) -> Result<()> {
    let train = assemble(&shared.windows, &setting.train_subjects)?;
    let test = assemble(&shared.windows, &setting.test_subjects)?;
    if let Some(src) = test.sources().iter().find(|s| setting.train_subjects.contains(&s.subject_id)) {
        return Err(AuditError::Leakage {
            setting_id: setting.setting_id.clone(),
            subject: src.subject_id.clone(),
        });
    }
    let (train, test, normalizer) = if shared.manifest.window.normalize {
        let n = Normalizer::fit(&train)?;
        (n.apply(&train)?, n.apply(&test)?, Some(n))
    } else {
        (train, test, None)
    };
    let training = TrainConfig {
        seed,
        ..shared.manifest.train.clone()
    };
    let (cm, model) = run_on_windows(&train, &test, &shared.model, &training, init_seed, shared.class_names.clone())?;
    let result = TrialResult::from_confusion(setting.setting_id.clone(), trial, cm, train.len())?;
    if let Some(dir) = shared.checkpoint_dir {
        let path = dir.join(format!("{}_t{}.ckpt", setting.setting_id, trial));
        let from = checkpoint::Provenance {
            setting_id: &setting.setting_id,
            trial_index: trial,
            init_seed,
            train_seed: seed,
        };
        checkpoint::save(&path, from, &model, normalizer.as_ref())?;
    }
    record.accuracy = Some(result.accuracy);
    record.wf1 = Some(result.wf1);
    record.n_train_windows = train.len();
    record.n_test_windows = test.len();
    record.stopped_epoch = model.stopped_epoch;
    record.best_epoch = model.best_epoch;
    record.confusion = Some(result.confusion.flattened());
    Ok(())
}
