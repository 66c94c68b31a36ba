//! Trained weights on disk.

use std::path::Path;

use harbias_core::nn::{EpochRecord, ModelConfig, Network, TrainedModel};
use harbias_core::segmentation::Normalizer;
use serde::{Deserialize, Serialize};

use crate::blob;
use crate::error::Result;

const MAGIC: &[u8; 8] = b"HBCKPT01";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub setting_id: String,
    pub trial_index: usize,
    pub model: ModelConfig,
    pub normalizer: Option<Normalizer>,
    /// Seeds of weight initialization and of batch order, noise and dropout.
    pub init_seed: u64,
    pub train_seed: u64,
    pub stopped_epoch: usize,
    pub best_epoch: usize,
    pub history: Vec<EpochRecord>,
}

/// Where a checkpoint came from.
#[derive(Debug, Clone, Copy)]
pub struct Provenance<'a> {
    pub setting_id: &'a str,
    pub trial_index: usize,
    pub init_seed: u64,
    pub train_seed: u64,
}

pub fn save(path: &Path, from: Provenance<'_>, model: &TrainedModel, normalizer: Option<&Normalizer>) -> Result<()> {
    let header = CheckpointHeader {
        setting_id: from.setting_id.to_string(),
        trial_index: from.trial_index,
        model: model.config().clone(),
        normalizer: normalizer.cloned(),
        init_seed: from.init_seed,
        train_seed: from.train_seed,
        stopped_epoch: model.stopped_epoch,
        best_epoch: model.best_epoch,
        history: model.history.clone(),
    };
    blob::write(path, MAGIC, &header, model.network.params())
}

pub fn load(path: &Path) -> Result<(CheckpointHeader, Network)> {
    let (header, params): (CheckpointHeader, Vec<f64>) = blob::read(path, MAGIC)?;
    let network = Network::from_parts(header.model.clone(), params)?;
    Ok((header, network))
}

#[cfg(test)]
mod tests {
    use super::*;
    use harbias_core::nn::build_model;

    #[test]
    fn weights_survive_a_round_trip() {
        let mut cfg = ModelConfig::new(3, 16, 4);
        cfg.filters = 4;
        cfg.conv_layers_per_branch = 1;
        cfg.branch_fc_units = 8;
        cfg.fusion_fc_units = 8;
        let model = build_model(cfg, 5).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        let from = Provenance {
            setting_id: "HM1-01",
            trial_index: 2,
            init_seed: 5,
            train_seed: 9,
        };
        save(&path, from, &model, None).unwrap();
        let (h, net) = load(&path).unwrap();
        assert_eq!((h.trial_index, h.init_seed, h.train_seed), (2, 5, 9));
        assert_eq!(net.params(), model.network.params());
        std::fs::write(&path, b"garbage!garbage!").unwrap();
        assert!(load(&path).is_err());
    }
}
