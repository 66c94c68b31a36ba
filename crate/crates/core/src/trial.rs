//! One train/evaluate cycle on a subject split.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::curation::SplitSetting;
use crate::error::{Error, Result};
use crate::metrics::{confusion, ConfusionMatrix};
use crate::model::LabeledDataset;
use crate::nn::{branches_by_prefix, build_model, predict, train, ModelConfig, TrainConfig, TrainedModel};
use crate::segmentation::{segment_subjects, Normalizer, WindowConfig, WindowSet};

/// Architecture hyperparameters that do not depend on the dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    /// Group channels into branches by name prefix; otherwise one branch.
    #[serde(default = "yes")]
    pub branch_by_prefix: bool,
    #[serde(default = "d::conv_layers")]
    pub conv_layers_per_branch: usize,
    #[serde(default = "d::filters")]
    pub filters: usize,
    #[serde(default = "d::kernel")]
    pub kernel_frames: usize,
    #[serde(default = "d::pool")]
    pub pool_size: usize,
    #[serde(default = "d::fc")]
    pub branch_fc_units: usize,
    #[serde(default = "d::fc")]
    pub fusion_fc_units: usize,
    #[serde(default = "d::dropout")]
    pub dropout_p: f64,
}

fn yes() -> bool {
    true
}

mod d {
    pub fn conv_layers() -> usize {
        4
    }
    pub fn filters() -> usize {
        64
    }
    pub fn kernel() -> usize {
        5
    }
    pub fn pool() -> usize {
        2
    }
    pub fn fc() -> usize {
        256
    }
    pub fn dropout() -> f64 {
        0.5
    }
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec {
            branch_by_prefix: true,
            conv_layers_per_branch: d::conv_layers(),
            filters: d::filters(),
            kernel_frames: d::kernel(),
            pool_size: d::pool(),
            branch_fc_units: d::fc(),
            fusion_fc_units: d::fc(),
            dropout_p: d::dropout(),
        }
    }
}

impl ModelSpec {
    /// Full geometry for `dataset` and windows of `window_size` frames.
    pub fn for_dataset(&self, dataset: &LabeledDataset, window_size: usize) -> Result<ModelConfig> {
        let channels = dataset.channels();
        let branches = if self.branch_by_prefix {
            branches_by_prefix(channels)
        } else {
            alloc::vec![(0..channels.len()).collect()]
        };
        let config = ModelConfig {
            branches,
            window_size,
            conv_layers_per_branch: self.conv_layers_per_branch,
            filters: self.filters,
            kernel_frames: self.kernel_frames,
            pool_size: self.pool_size,
            branch_fc_units: self.branch_fc_units,
            fusion_fc_units: self.fusion_fc_units,
            n_classes: dataset.n_classes(),
            dropout_p: self.dropout_p,
        };
        config.validate()?;
        Ok(config)
    }
}

#[derive(Debug, Clone)]
pub struct TrialOutcome {
    pub confusion: ConfusionMatrix,
    pub n_train_windows: usize,
    pub n_test_windows: usize,
    pub model: TrainedModel,
    pub normalizer: Option<Normalizer>,
}

/// Train and test windows of a setting, normalized with statistics of the
/// training windows only.
pub fn prepare_windows(
    dataset: &LabeledDataset,
    setting: &SplitSetting,
    window: &WindowConfig,
) -> Result<(WindowSet, WindowSet, Option<Normalizer>)> {
    check_disjoint(&setting.train_subjects, &setting.test_subjects, &setting.setting_id)?;
    let train_set = segment_subjects(dataset, &setting.train_subjects, window)?;
    let test_set = segment_subjects(dataset, &setting.test_subjects, window)?;
    if train_set.is_empty() || test_set.is_empty() {
        return Err(Error::NoSamples);
    }
    if window.normalize {
        let norm = Normalizer::fit(&train_set)?;
        Ok((norm.apply(&train_set)?, norm.apply(&test_set)?, Some(norm)))
    } else {
        Ok((train_set, test_set, None))
    }
}

fn check_disjoint(train: &BTreeSet<String>, test: &BTreeSet<String>, id: &str) -> Result<()> {
    if let Some(s) = train.intersection(test).next() {
        return Err(Error::Argument(format!("setting {id}: subject {s} is in both train and test")));
    }
    Ok(())
}

/// Trains a fresh model from `init_seed` on the setting's training subjects
/// and evaluates it on its test subjects.
pub fn run_trial(
    dataset: &LabeledDataset,
    setting: &SplitSetting,
    window: &WindowConfig,
    model: &ModelConfig,
    training: &TrainConfig,
    init_seed: u64,
) -> Result<TrialOutcome> {
    let (train_set, test_set, normalizer) = prepare_windows(dataset, setting, window)?;
    run_on_windows(&train_set, &test_set, model, training, init_seed, dataset.class_names().to_vec())
        .map(|(confusion, model)| TrialOutcome {
            confusion,
            n_train_windows: train_set.len(),
            n_test_windows: test_set.len(),
            model,
            normalizer,
        })
}

/// Train on `train_set`, confusion matrix on `test_set`.
pub fn run_on_windows(
    train_set: &WindowSet,
    test_set: &WindowSet,
    model: &ModelConfig,
    training: &TrainConfig,
    init_seed: u64,
    class_names: Vec<String>,
) -> Result<(ConfusionMatrix, TrainedModel)> {
    let trained = train(build_model(model.clone(), init_seed)?, train_set, training)?;
    let pred = predict(&trained, test_set)?;
    let cm = confusion(&pred, test_set.labels(), model.n_classes)?.with_class_names(class_names)?;
    Ok((cm, trained))
}
