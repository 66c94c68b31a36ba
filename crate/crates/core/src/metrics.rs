//! Classification metrics and their aggregation over trials, settings and
//! HM groups.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::curation::HmGroup;
use crate::error::{Error, Result};
use crate::stats;

/// Square count matrix, rows are true classes and columns predictions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    counts: Vec<Vec<u64>>,
    class_names: Vec<String>,
}

impl ConfusionMatrix {
    pub fn from_counts(counts: Vec<Vec<u64>>, class_names: Vec<String>) -> Result<Self> {
        let k = counts.len();
        if counts.iter().any(|row| row.len() != k) {
            return Err(Error::Shape("confusion matrix must be square".into()));
        }
        if !class_names.is_empty() && class_names.len() != k {
            return Err(Error::Shape("class names do not match matrix size".into()));
        }
        Ok(ConfusionMatrix { counts, class_names })
    }

    pub fn n_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn with_class_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.n_classes() {
            return Err(Error::Shape("class names do not match matrix size".into()));
        }
        self.class_names = names;
        Ok(self)
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn flattened(&self) -> Vec<u64> {
        self.counts.iter().flatten().copied().collect()
    }

    /// Reorders classes so that new class `i` is old class `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let k = self.n_classes();
        let mut seen = vec![false; k];
        if perm.len() != k || perm.iter().any(|&p| p >= k || core::mem::replace(&mut seen[p], true)) {
            return Err(Error::argument("not a permutation"));
        }
        let counts = perm
            .iter()
            .map(|&r| perm.iter().map(|&c| self.counts[r][c]).collect())
            .collect();
        let class_names = if self.class_names.is_empty() {
            Vec::new()
        } else {
            perm.iter().map(|&p| self.class_names[p].clone()).collect()
        };
        Ok(ConfusionMatrix { counts, class_names })
    }
}

/// Tallies `(truth, prediction)` pairs into a `k`-class matrix.
pub fn confusion(pred: &[usize], truth: &[usize], k: usize) -> Result<ConfusionMatrix> {
    if pred.len() != truth.len() {
        return Err(Error::argument("prediction and truth lengths differ"));
    }
    let mut counts = vec![vec![0u64; k]; k];
    for (&p, &t) in pred.iter().zip(truth) {
        if p >= k || t >= k {
            return Err(Error::argument("label outside [0, k)"));
        }
        counts[t][p] += 1;
    }
    Ok(ConfusionMatrix {
        counts,
        class_names: Vec::new(),
    })
}

pub fn accuracy(cm: &ConfusionMatrix) -> Result<f64> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::NoSamples);
    }
    let trace: u64 = (0..cm.n_classes()).map(|i| cm.counts[i][i]).sum();
    Ok(trace as f64 / total as f64)
}

/// Per-class F1 scores. Undefined precision or recall counts as 0.
pub fn per_class_f1(cm: &ConfusionMatrix) -> Vec<f64> {
    let k = cm.n_classes();
    (0..k)
        .map(|c| {
            let tp = cm.counts[c][c] as f64;
            let support: u64 = cm.counts[c].iter().sum();
            let predicted: u64 = (0..k).map(|r| cm.counts[r][c]).sum();
            let precision = if predicted == 0 { 0.0 } else { tp / predicted as f64 };
            let recall = if support == 0 { 0.0 } else { tp / support as f64 };
            if precision + recall == 0.0 {
                0.0
            } else {
                2.0 * precision * recall / (precision + recall)
            }
        })
        .collect()
}

/// Support-weighted mean of per-class F1 scores.
pub fn weighted_f1(cm: &ConfusionMatrix) -> Result<f64> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::NoSamples);
    }
    Ok(per_class_f1(cm)
        .iter()
        .zip(&cm.counts)
        .map(|(f1, row)| row.iter().sum::<u64>() as f64 / total as f64 * f1)
        .sum())
}

/// Unweighted mean of per-class F1 scores.
pub fn macro_f1(cm: &ConfusionMatrix) -> Result<f64> {
    if cm.total() == 0 {
        return Err(Error::NoSamples);
    }
    let f1 = per_class_f1(cm);
    Ok(f1.iter().sum::<f64>() / f1.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSd {
    pub mean: f64,
    pub sd: f64,
}

/// Mean and population SD.
pub fn trial_stats(values: &[f64]) -> Result<MeanSd> {
    match (stats::mean(values), stats::population_sd(values)) {
        (Some(mean), Some(sd)) => Ok(MeanSd { mean, sd }),
        _ => Err(Error::argument("statistics of an empty list")),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub setting_id: String,
    pub trial_index: usize,
    pub accuracy: f64,
    pub wf1: f64,
    pub confusion: ConfusionMatrix,
    pub n_train_windows: usize,
}

impl TrialResult {
    pub fn from_confusion(
        setting_id: impl Into<String>,
        trial_index: usize,
        confusion: ConfusionMatrix,
        n_train_windows: usize,
    ) -> Result<Self> {
        Ok(TrialResult {
            setting_id: setting_id.into(),
            trial_index,
            accuracy: accuracy(&confusion)?,
            wf1: weighted_f1(&confusion)?,
            confusion,
            n_train_windows,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxplotStats {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

impl BoxplotStats {
    pub fn of(values: &[f64]) -> Option<Self> {
        let [min, q1, median, q3, max] = stats::five_numbers(values)?;
        Some(BoxplotStats { min, q1, median, q3, max })
    }
}

/// Which points enter a group's distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AggregationLevel {
    /// One point per setting, the mean over its trials.
    #[default]
    Settings,
    /// One point per trial.
    Trials,
}

/// Trials of one setting reduced to means and SDs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SettingSummary {
    pub setting_id: String,
    pub group: HmGroup,
    pub trials: usize,
    pub mean_acc: f64,
    pub sd_acc: f64,
    pub mean_wf1: f64,
    pub sd_wf1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub hm: HmGroup,
    pub n_settings: usize,
    pub n_trials: usize,
    pub mean_acc: f64,
    pub sd_acc: f64,
    pub mean_wf1: f64,
    pub sd_wf1: f64,
    pub boxplot_acc: BoxplotStats,
    pub boxplot_wf1: BoxplotStats,
    /// Mean over settings of each setting's SD across its trials.
    pub mean_trial_sd_acc: f64,
    pub mean_trial_sd_wf1: f64,
    /// Distribution of per-setting SDs over trials.
    pub boxplot_sd_acc: BoxplotStats,
    pub boxplot_sd_wf1: BoxplotStats,
}

/// Reduces each setting's trials to mean and SD.
pub fn summarize_settings(results: &[(HmGroup, TrialResult)]) -> Vec<SettingSummary> {
    let mut by_setting: BTreeMap<&str, (HmGroup, Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for (group, r) in results {
        let entry = by_setting
            .entry(r.setting_id.as_str())
            .or_insert_with(|| (*group, Vec::new(), Vec::new()));
        entry.1.push(r.accuracy);
        entry.2.push(r.wf1);
    }
    by_setting
        .into_iter()
        .filter_map(|(id, (group, acc, wf1))| {
            let a = trial_stats(&acc).ok()?;
            let w = trial_stats(&wf1).ok()?;
            Some(SettingSummary {
                setting_id: id.into(),
                group,
                trials: acc.len(),
                mean_acc: a.mean,
                sd_acc: a.sd,
                mean_wf1: w.mean,
                sd_wf1: w.sd,
            })
        })
        .collect()
}

/// Per-group statistics over `results`, each tagged with its group.
///
/// Group means and SDs, and the accuracy/wF1 boxplots, are taken over the
/// points selected by `level`. Groups without results do not appear.
pub fn group_summary(results: &[(HmGroup, TrialResult)], level: AggregationLevel) -> Vec<GroupSummary> {
    let settings = summarize_settings(results);
    let mut groups: BTreeMap<HmGroup, Vec<&SettingSummary>> = BTreeMap::new();
    for s in &settings {
        groups.entry(s.group).or_default().push(s);
    }
    groups
        .into_iter()
        .filter_map(|(hm, members)| {
            let (acc, wf1): (Vec<f64>, Vec<f64>) = match level {
                AggregationLevel::Settings => members.iter().map(|s| (s.mean_acc, s.mean_wf1)).unzip(),
                AggregationLevel::Trials => results
                    .iter()
                    .filter(|(g, _)| *g == hm)
                    .map(|(_, r)| (r.accuracy, r.wf1))
                    .unzip(),
            };
            let sd_acc: Vec<f64> = members.iter().map(|s| s.sd_acc).collect();
            let sd_wf1: Vec<f64> = members.iter().map(|s| s.sd_wf1).collect();
            let a = trial_stats(&acc).ok()?;
            let w = trial_stats(&wf1).ok()?;
            Some(GroupSummary {
                hm,
                n_settings: members.len(),
                n_trials: members.iter().map(|s| s.trials).sum(),
                mean_acc: a.mean,
                sd_acc: a.sd,
                mean_wf1: w.mean,
                sd_wf1: w.sd,
                boxplot_acc: BoxplotStats::of(&acc)?,
                boxplot_wf1: BoxplotStats::of(&wf1)?,
                mean_trial_sd_acc: stats::mean(&sd_acc)?,
                mean_trial_sd_wf1: stats::mean(&sd_wf1)?,
                boxplot_sd_acc: BoxplotStats::of(&sd_acc)?,
                boxplot_sd_wf1: BoxplotStats::of(&sd_wf1)?,
            })
        })
        .collect()
}
