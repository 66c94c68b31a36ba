//! Late-fusion convolutional classifier for multi-channel windows.
//!
//! Each branch sees a disjoint group of channels (one sensor or body
//! segment) and runs a stack of temporal convolutions, one max-pool and a
//! dense layer. Branch features are concatenated and classified by a small
//! MLP with dropout.

mod config;
mod init;
mod network;
mod train;

pub use config::{branches_by_prefix, ModelConfig, TrainConfig};
pub use init::orthogonal;
pub use network::{softmax, Network};
pub use train::{build_model, predict, predict_proba, train, EpochRecord, TrainedModel};
