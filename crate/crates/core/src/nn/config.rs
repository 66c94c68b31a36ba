use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Network geometry. Every size is a field, nothing is hard-coded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Channel indices per branch; must partition `0..n_channels`.
    pub branches: Vec<Vec<usize>>,
    pub window_size: usize,
    #[serde(default = "defaults::conv_layers")]
    pub conv_layers_per_branch: usize,
    #[serde(default = "defaults::filters")]
    pub filters: usize,
    #[serde(default = "defaults::kernel")]
    pub kernel_frames: usize,
    #[serde(default = "defaults::pool")]
    pub pool_size: usize,
    #[serde(default = "defaults::fc")]
    pub branch_fc_units: usize,
    #[serde(default = "defaults::fc")]
    pub fusion_fc_units: usize,
    pub n_classes: usize,
    #[serde(default = "defaults::dropout")]
    pub dropout_p: f64,
}

mod defaults {
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

impl ModelConfig {
    /// Default geometry with a single branch over all channels.
    pub fn new(n_channels: usize, window_size: usize, n_classes: usize) -> Self {
        ModelConfig {
            branches: vec![(0..n_channels).collect()],
            window_size,
            conv_layers_per_branch: defaults::conv_layers(),
            filters: defaults::filters(),
            kernel_frames: defaults::kernel(),
            pool_size: defaults::pool(),
            branch_fc_units: defaults::fc(),
            fusion_fc_units: defaults::fc(),
            n_classes,
            dropout_p: defaults::dropout(),
        }
    }

    pub fn n_channels(&self) -> usize {
        self.branches.iter().map(Vec::len).sum()
    }

    /// Frames left after the valid convolutions.
    pub fn conv_output_frames(&self) -> usize {
        let shrink = self.conv_layers_per_branch * (self.kernel_frames.saturating_sub(1));
        self.window_size.saturating_sub(shrink)
    }

    pub fn pooled_frames(&self) -> usize {
        self.conv_output_frames() / self.pool_size.max(1)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.branches.is_empty() || self.branches.iter().any(Vec::is_empty) {
            return bad("every branch needs at least one channel".into());
        }
        let n = self.n_channels();
        let mut seen = vec![false; n];
        for &c in self.branches.iter().flatten() {
            if c >= n || core::mem::replace(&mut seen[c], true) {
                return bad(format!("branches do not partition channels 0..{n}"));
            }
        }
        if self.kernel_frames == 0 || self.kernel_frames > self.window_size {
            return bad(format!(
                "kernel of {} frames does not fit a {}-frame window",
                self.kernel_frames, self.window_size
            ));
        }
        if self.conv_layers_per_branch == 0 || self.filters == 0 || self.pool_size == 0 {
            return bad("conv layers, filters and pool size must be positive".into());
        }
        if self.pooled_frames() == 0 {
            return bad(format!(
                "{} conv layers of kernel {} plus pooling leave no frames of a {}-frame window",
                self.conv_layers_per_branch, self.kernel_frames, self.window_size
            ));
        }
        if self.branch_fc_units == 0 || self.fusion_fc_units == 0 {
            return bad("dense layers need at least one unit".into());
        }
        if self.n_classes < 2 {
            return bad("need at least two classes".into());
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return bad("dropout probability must lie in [0, 1)".into());
        }
        Ok(())
    }
}

/// Groups channels by the name part before the last `_` or `.`, in order of
/// first appearance. Names without a separator share one branch.
pub fn branches_by_prefix(channel_names: &[String]) -> Vec<Vec<usize>> {
    let mut order: Vec<&str> = Vec::new();
    let mut groups: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, name) in channel_names.iter().enumerate() {
        let prefix = name.rfind(['_', '.']).map_or("", |p| &name[..p]);
        if !groups.contains_key(prefix) {
            order.push(prefix);
        }
        groups.entry(prefix).or_default().push(i);
    }
    order.into_iter().filter_map(|p| groups.remove(p)).collect()
}

/// Optimization settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    #[serde(default = "train_defaults::momentum")]
    pub momentum: f64,
    #[serde(default = "train_defaults::weight_decay")]
    pub weight_decay: f64,
    /// Decay of the running mean of squared gradients.
    #[serde(default = "train_defaults::rms_alpha")]
    pub rms_alpha: f64,
    #[serde(default = "train_defaults::rms_eps")]
    pub rms_eps: f64,
    #[serde(default = "train_defaults::noise_sigma")]
    pub noise_sigma: f64,
    #[serde(default = "train_defaults::patience")]
    pub early_stop_patience: usize,
    #[serde(default = "train_defaults::val_fraction")]
    pub val_fraction: f64,
    #[serde(default)]
    pub seed: u64,
}

mod train_defaults {
    pub fn momentum() -> f64 {
        0.9
    }
    pub fn weight_decay() -> f64 {
        5e-4
    }
    pub fn rms_alpha() -> f64 {
        0.95
    }
    pub fn rms_eps() -> f64 {
        1e-8
    }
    pub fn noise_sigma() -> f64 {
        0.01
    }
    pub fn patience() -> usize {
        5
    }
    pub fn val_fraction() -> f64 {
        0.1
    }
}

impl TrainConfig {
    pub fn new(learning_rate: f64, batch_size: usize, max_epochs: usize, seed: u64) -> Self {
        TrainConfig {
            learning_rate,
            batch_size,
            max_epochs,
            momentum: train_defaults::momentum(),
            weight_decay: train_defaults::weight_decay(),
            rms_alpha: train_defaults::rms_alpha(),
            rms_eps: train_defaults::rms_eps(),
            noise_sigma: train_defaults::noise_sigma(),
            early_stop_patience: train_defaults::patience(),
            val_fraction: train_defaults::val_fraction(),
            seed,
        }
    }

    /// Optical motion capture recordings at 100 Hz.
    pub fn lara(seed: u64) -> Self {
        TrainConfig::new(1e-4, 100, 32, seed)
    }

    /// Smartphone device-motion recordings.
    pub fn motionsense(seed: u64) -> Self {
        TrainConfig::new(1e-3, 65, 20, seed)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(self.learning_rate) || self.batch_size == 0 || self.max_epochs == 0 {
            return Err(Error::Config("learning rate, batch size and epochs must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) || !(0.0..1.0).contains(&self.rms_alpha) {
            return Err(Error::Config("momentum and rms_alpha must lie in [0, 1)".into()));
        }
        if !(self.weight_decay >= 0.0) || !(self.noise_sigma >= 0.0) || !positive(self.rms_eps) {
            return Err(Error::Config("weight decay and noise must be non-negative".into()));
        }
        if self.early_stop_patience == 0 {
            return Err(Error::Config("early-stop patience must be positive".into()));
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 0.5) {
            return Err(Error::Config("validation fraction must lie in (0, 0.5)".into()));
        }
        Ok(())
    }
}
