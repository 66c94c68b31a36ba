//! Sliding-window segmentation, per-channel normalization and additive
//! Gaussian noise.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{LabeledDataset, Recording};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelRule {
    /// Most frequent frame label; ties go to the tied label seen last.
    #[default]
    Majority,
    LastFrame,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowConfig {
    pub window_size: usize,
    pub step: usize,
    #[serde(default)]
    pub label_rule: LabelRule,
    #[serde(default = "default_true")]
    pub normalize: bool,
}

fn default_true() -> bool {
    true
}

impl WindowConfig {
    pub fn new(window_size: usize, step: usize) -> Self {
        WindowConfig {
            window_size,
            step,
            label_rule: LabelRule::Majority,
            normalize: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.step == 0 || self.step > self.window_size {
            return Err(Error::argument("window config needs 1 <= step <= window_size"));
        }
        Ok(())
    }

    /// Number of windows over `frames` frames.
    pub fn count(&self, frames: usize) -> usize {
        if frames < self.window_size {
            0
        } else {
            (frames - self.window_size) / self.step + 1
        }
    }
}

/// Where a window came from.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct WindowSource {
    pub subject_id: String,
    pub recording_index: usize,
    pub start_frame: usize,
}

/// Fixed-size windows stored contiguously as `[n][window_size][channels]`.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowSet {
    window_size: usize,
    channels: usize,
    data: Vec<f64>,
    labels: Vec<usize>,
    sources: Vec<WindowSource>,
}

impl WindowSet {
    pub fn empty(window_size: usize, channels: usize) -> Self {
        WindowSet {
            window_size,
            channels,
            data: Vec::new(),
            labels: Vec::new(),
            sources: Vec::new(),
        }
    }

    pub fn from_parts(
        window_size: usize,
        channels: usize,
        data: Vec<f64>,
        labels: Vec<usize>,
        sources: Vec<WindowSource>,
    ) -> Result<Self> {
        if data.len() != labels.len() * window_size * channels || sources.len() != labels.len() {
            return Err(Error::Shape("window data does not match labels and sources".into()));
        }
        Ok(WindowSet {
            window_size,
            channels,
            data,
            labels,
            sources,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn window_size(&self) -> usize {
        self.window_size
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn window_len(&self) -> usize {
        self.window_size * self.channels
    }

    pub fn window(&self, i: usize) -> &[f64] {
        let n = self.window_len();
        &self.data[i * n..(i + 1) * n]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn sources(&self) -> &[WindowSource] {
        &self.sources
    }

    pub fn subjects(&self) -> BTreeSet<&str> {
        self.sources.iter().map(|s| s.subject_id.as_str()).collect()
    }

    pub fn push(&mut self, window: &[f64], label: usize, source: WindowSource) {
        debug_assert_eq!(window.len(), self.window_len());
        self.data.extend_from_slice(window);
        self.labels.push(label);
        self.sources.push(source);
    }

    pub fn extend(&mut self, other: &WindowSet) -> Result<()> {
        if other.window_size != self.window_size || other.channels != self.channels {
            return Err(Error::Shape("cannot merge window sets of different shape".into()));
        }
        self.data.extend_from_slice(&other.data);
        self.labels.extend_from_slice(&other.labels);
        self.sources.extend_from_slice(&other.sources);
        Ok(())
    }

    pub fn select(&self, indices: &[usize]) -> WindowSet {
        let mut out = WindowSet::empty(self.window_size, self.channels);
        for &i in indices {
            out.push(self.window(i), self.labels[i], self.sources[i].clone());
        }
        out
    }

    /// Orders windows by (subject, recording, start frame).
    pub fn sorted(&self) -> WindowSet {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.sort_by(|&a, &b| self.sources[a].cmp(&self.sources[b]));
        self.select(&idx)
    }
}

fn window_label(labels: &[usize], rule: LabelRule) -> usize {
    let last = labels[labels.len() - 1];
    match rule {
        LabelRule::LastFrame => last,
        LabelRule::Majority => {
            let k = labels.iter().max().map_or(0, |m| m + 1);
            let mut counts = vec![0usize; k];
            let mut last_seen = vec![0usize; k];
            for (i, &l) in labels.iter().enumerate() {
                counts[l] += 1;
                last_seen[l] = i;
            }
            (0..k)
                .max_by_key(|&l| (counts[l], last_seen[l]))
                .unwrap_or(last)
        }
    }
}

/// Cuts one recording into windows starting at frames `0, step, 2*step, ...`.
///
/// A recording shorter than the window yields an empty set.
pub fn segment(recording: &Recording, recording_index: usize, config: &WindowConfig) -> Result<WindowSet> {
    config.validate()?;
    let w = config.window_size;
    let c = recording.n_channels();
    let mut out = WindowSet::empty(w, c);
    let n = config.count(recording.n_frames());
    out.data.reserve(n * w * c);
    for k in 0..n {
        let start = k * config.step;
        let frames = &recording.samples()[start * c..(start + w) * c];
        let label = window_label(&recording.frame_labels()[start..start + w], config.label_rule);
        out.push(
            frames,
            label,
            WindowSource {
                subject_id: recording.subject_id().into(),
                recording_index,
                start_frame: start,
            },
        );
    }
    Ok(out)
}

/// Windows of every recording of the given subjects, ordered by
/// (subject, recording index, start frame).
pub fn segment_subjects(
    dataset: &LabeledDataset,
    subjects: &BTreeSet<String>,
    config: &WindowConfig,
) -> Result<WindowSet> {
    config.validate()?;
    let mut out = WindowSet::empty(config.window_size, dataset.channels().len());
    for id in subjects {
        for (k, rec) in dataset.recordings_of(id) {
            out.extend(&segment(rec, k, config)?)?;
        }
    }
    Ok(out.sorted())
}

/// Adds independent `N(0, sigma^2)` noise to every sample.
pub fn add_gaussian_noise(windows: &WindowSet, sigma: f64, seed: u64) -> Result<WindowSet> {
    if !(sigma >= 0.0) {
        return Err(Error::argument("noise sigma must be non-negative"));
    }
    let mut out = windows.clone();
    if sigma == 0.0 {
        return Ok(out);
    }
    let mut rng = rng::rng(seed);
    for v in &mut out.data {
        *v += sigma * rng::standard_normal(&mut rng);
    }
    Ok(out)
}

/// Variance floor for constant channels.
pub const VARIANCE_FLOOR: f64 = 1e-8;

/// Per-channel affine map to zero mean and unit SD on the data it was fitted
/// on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
    /// Channels whose variance was below [`VARIANCE_FLOOR`].
    #[serde(default)]
    pub clamped: Vec<usize>,
}

impl Normalizer {
    pub fn fit(train: &WindowSet) -> Result<Normalizer> {
        if train.is_empty() {
            return Err(Error::argument("cannot fit a normalizer on no windows"));
        }
        let c = train.channels;
        let n = (train.data.len() / c) as f64;
        let mut mean = vec![0.0; c];
        for row in train.data.chunks_exact(c) {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; c];
        for row in train.data.chunks_exact(c) {
            for ((s, v), m) in var.iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let mut clamped = Vec::new();
        let sd = var
            .into_iter()
            .enumerate()
            .map(|(ch, s)| {
                let v = s / n;
                if v < VARIANCE_FLOOR {
                    clamped.push(ch);
                    libm::sqrt(VARIANCE_FLOOR)
                } else {
                    libm::sqrt(v)
                }
            })
            .collect();
        Ok(Normalizer { mean, sd, clamped })
    }

    pub fn apply(&self, windows: &WindowSet) -> Result<WindowSet> {
        if windows.channels != self.mean.len() {
            return Err(Error::Shape("normalizer channel count differs".into()));
        }
        let mut out = windows.clone();
        for row in out.data.chunks_exact_mut(self.mean.len()) {
            for ((v, m), s) in row.iter_mut().zip(&self.mean).zip(&self.sd) {
                *v = (*v - m) / s;
            }
        }
        Ok(out)
    }
}
