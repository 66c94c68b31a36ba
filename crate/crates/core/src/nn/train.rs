use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::config::{ModelConfig, TrainConfig};
use super::network::{Network, Workspace};
use crate::error::{Error, Result};
use crate::rng;
use crate::segmentation::WindowSet;

const STREAM_VALIDATION: u64 = 1;
const STREAM_ORDER: u64 = 2;
const STREAM_NOISE: u64 = 3;
const STREAM_DROPOUT: u64 = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
    pub val_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub network: Network,
    pub history: Vec<EpochRecord>,
    /// Epochs actually run.
    pub stopped_epoch: usize,
    /// Epoch (1-based) whose weights were kept; 0 when untrained.
    pub best_epoch: usize,
}

impl TrainedModel {
    pub fn config(&self) -> &ModelConfig {
        self.network.config()
    }
}

/// Untrained model with seeded orthogonal weights.
pub fn build_model(config: ModelConfig, seed: u64) -> Result<TrainedModel> {
    Ok(TrainedModel {
        network: Network::new(config, seed)?,
        history: Vec::new(),
        stopped_epoch: 0,
        best_epoch: 0,
    })
}

fn check_shape(network: &Network, windows: &WindowSet) -> Result<()> {
    let cfg = network.config();
    if windows.window_size() != cfg.window_size || windows.channels() != cfg.n_channels() {
        return Err(Error::Shape(alloc::format!(
            "windows are {}x{}, model expects {}x{}",
            windows.window_size(),
            windows.channels(),
            cfg.window_size,
            cfg.n_channels()
        )));
    }
    Ok(())
}

/// Holds out `fraction` of each (subject, class) group, chosen at random.
fn validation_split(windows: &WindowSet, fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut groups: BTreeMap<(&str, usize), Vec<usize>> = BTreeMap::new();
    for (i, (src, &label)) in windows.sources().iter().zip(windows.labels()).enumerate() {
        groups.entry((src.subject_id.as_str(), label)).or_default().push(i);
    }
    let mut rng = rng::rng(rng::derive(seed, &[STREAM_VALIDATION]));
    let mut val = Vec::new();
    for members in groups.values_mut() {
        members.shuffle(&mut rng);
        let take = libm::round(members.len() as f64 * fraction) as usize;
        val.extend_from_slice(&members[..take.min(members.len())]);
    }
    if val.is_empty() && windows.len() >= 10 {
        // Every group rounded down; hold out one window of the largest group.
        if let Some(largest) = groups.values().max_by_key(|m| m.len()) {
            val.push(largest[0]);
        }
    }
    val.sort_unstable();
    let mut is_val = vec![false; windows.len()];
    val.iter().for_each(|&i| is_val[i] = true);
    let train = (0..windows.len()).filter(|&i| !is_val[i]).collect();
    (train, val)
}

fn evaluate(network: &Network, windows: &WindowSet, indices: &[usize], ws: &mut Workspace) -> (f64, f64) {
    let mut loss = 0.0;
    let mut correct = 0usize;
    for &i in indices {
        network.forward(windows.window(i), None, ws);
        let y = windows.labels()[i];
        loss += Network::loss_of(ws, y);
        if argmax(&ws.probs) == y {
            correct += 1;
        }
    }
    let n = indices.len().max(1) as f64;
    (loss / n, correct as f64 / n)
}

fn argmax(v: &[f64]) -> usize {
    v.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, &x)| if x > best.1 { (i, x) } else { best })
        .0
}

struct RmsProp {
    square_avg: Vec<f64>,
    momentum_buf: Vec<f64>,
}

impl RmsProp {
    fn new(n: usize) -> Self {
        RmsProp {
            square_avg: vec![0.0; n],
            momentum_buf: vec![0.0; n],
        }
    }

    fn step(&mut self, params: &mut [f64], grads: &[f64], cfg: &TrainConfig) {
        let iter = params
            .iter_mut()
            .zip(grads)
            .zip(self.square_avg.iter_mut().zip(self.momentum_buf.iter_mut()));
        for ((p, &g), (sq, buf)) in iter {
            let g = g + cfg.weight_decay * *p;
            *sq = cfg.rms_alpha * *sq + (1.0 - cfg.rms_alpha) * g * g;
            *buf = cfg.momentum * *buf + g / (libm::sqrt(*sq) + cfg.rms_eps);
            *p -= cfg.learning_rate * *buf;
        }
    }
}

/// Minimizes cross-entropy with RMSProp (momentum and L2 weight decay).
///
/// Windows are first put in (subject, recording, start) order so the result
/// does not depend on the order they were passed in. A stratified share is
/// held out for early stopping on validation loss; the weights of the best
/// validation epoch are restored. Every epoch perturbs training inputs with
/// fresh Gaussian noise keyed by (epoch, window).
pub fn train(model: TrainedModel, windows: &WindowSet, config: &TrainConfig) -> Result<TrainedModel> {
    config.validate()?;
    let mut network = model.network;
    check_shape(&network, windows)?;
    for &y in windows.labels() {
        network.check_label(y)?;
    }
    let distinct = windows.labels().iter().collect::<alloc::collections::BTreeSet<_>>();
    if distinct.len() < 2 {
        return Err(Error::DegenerateLabels);
    }

    let windows = windows.sorted();
    let (train_idx, val_idx) = validation_split(&windows, config.val_fraction, config.seed);
    let mut order = train_idx.clone();
    let mut order_rng = rng::rng(rng::derive(config.seed, &[STREAM_ORDER]));
    let mut optimizer = RmsProp::new(network.n_params());
    let mut grads = vec![0.0; network.n_params()];
    let mut ws = Workspace::default();
    let mut noisy = vec![0.0; windows.window_len()];

    let mut history = Vec::with_capacity(config.max_epochs);
    let mut best: Option<(f64, usize, Vec<f64>)> = None;
    let mut since_best = 0;

    for epoch in 0..config.max_epochs {
        order.shuffle(&mut order_rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let mut batch = chunk.to_vec();
            batch.sort_unstable();
            grads.iter_mut().for_each(|g| *g = 0.0);
            let scale = 1.0 / batch.len() as f64;
            for &i in &batch {
                let key = [epoch as u64, i as u64];
                noisy.copy_from_slice(windows.window(i));
                if config.noise_sigma > 0.0 {
                    let mut nr = rng::rng(rng::derive(config.seed, &[STREAM_NOISE, key[0], key[1]]));
                    noisy
                        .iter_mut()
                        .for_each(|v| *v += config.noise_sigma * rng::standard_normal(&mut nr));
                }
                let mut dr = rng::rng(rng::derive(config.seed, &[STREAM_DROPOUT, key[0], key[1]]));
                let y = windows.labels()[i];
                network.forward(&noisy, Some(&mut dr), &mut ws);
                epoch_loss += Network::loss_of(&ws, y);
                network.backward(y, scale, &mut ws, &mut grads);
            }
            optimizer.step(network.params_mut(), &grads, config);
        }
        let train_loss = epoch_loss / order.len().max(1) as f64;
        let (val_loss, val_accuracy) = if val_idx.is_empty() {
            (None, None)
        } else {
            let (l, a) = evaluate(&network, &windows, &val_idx, &mut ws);
            (Some(l), Some(a))
        };
        history.push(EpochRecord {
            epoch: epoch + 1,
            train_loss,
            val_loss,
            val_accuracy,
        });
        let monitored = val_loss.unwrap_or(train_loss);
        match &best {
            Some((b, _, _)) if !(monitored < *b) => since_best += 1,
            _ => {
                best = Some((monitored, epoch + 1, network.params().to_vec()));
                since_best = 0;
            }
        }
        if val_loss.is_some() && since_best >= config.early_stop_patience {
            break;
        }
    }

    let stopped_epoch = history.len();
    let best_epoch = match best {
        Some((_, epoch, params)) => {
            network.params_mut().copy_from_slice(&params);
            epoch
        }
        None => stopped_epoch,
    };
    Ok(TrainedModel {
        network,
        history,
        stopped_epoch,
        best_epoch,
    })
}

/// Class probabilities per window, evaluation mode.
pub fn predict_proba(model: &TrainedModel, windows: &WindowSet) -> Result<Vec<Vec<f64>>> {
    check_shape(&model.network, windows)?;
    let mut ws = Workspace::default();
    Ok((0..windows.len())
        .map(|i| {
            model.network.forward(windows.window(i), None, &mut ws);
            ws.probs.clone()
        })
        .collect())
}

/// Most probable class per window.
pub fn predict(model: &TrainedModel, windows: &WindowSet) -> Result<Vec<usize>> {
    Ok(predict_proba(model, windows)?.iter().map(|p| argmax(p)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::segmentation::WindowSource;
    use alloc::format;
    use alloc::string::ToString;

    fn small_config(channels: usize, window: usize, classes: usize) -> ModelConfig {
        let mut c = ModelConfig::new(channels, window, classes);
        c.conv_layers_per_branch = 2;
        c.filters = 6;
        c.kernel_frames = 3;
        c.branch_fc_units = 16;
        c.fusion_fc_units = 16;
        c.dropout_p = 0.1;
        c
    }

    /// Two classes whose windows differ by a constant offset on channel 0.
    fn separable(n_per_class: usize, seed: u64) -> WindowSet {
        let (w, c) = (8, 2);
        let mut r = rng::rng(seed);
        let mut set = WindowSet::empty(w, c);
        for i in 0..2 * n_per_class {
            let label = i % 2;
            let offset = if label == 0 { 1.0 } else { -1.0 };
            let window: Vec<f64> = (0..w * c)
                .map(|k| if k % c == 0 { offset } else { 0.0 } + 0.2 * rng::standard_normal(&mut r))
                .collect();
            set.push(
                &window,
                label,
                WindowSource {
                    subject_id: format!("s{}", i % 4),
                    recording_index: 0,
                    start_frame: i,
                },
            );
        }
        set
    }

    /// Perceptron on flattened windows; converging to zero training errors
    /// certifies linear separability.
    fn linearly_separable(set: &WindowSet) -> bool {
        let d = set.window_len();
        let mut w = vec![0.0; d + 1];
        for _ in 0..1000 {
            let mut errors = 0;
            for i in 0..set.len() {
                let x = set.window(i);
                let y = if set.labels()[i] == 0 { 1.0 } else { -1.0 };
                let s = w[d] + x.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>();
                if y * s <= 0.0 {
                    errors += 1;
                    for (wk, xk) in w.iter_mut().zip(x) {
                        *wk += y * xk;
                    }
                    w[d] += y;
                }
            }
            if errors == 0 {
                return true;
            }
        }
        false
    }

    fn accuracy_on(model: &TrainedModel, set: &WindowSet) -> f64 {
        let pred = predict(model, set).unwrap();
        pred.iter().zip(set.labels()).filter(|(p, y)| p == y).count() as f64 / set.len() as f64
    }

    #[test]
    fn separable_data_is_fit_within_ten_epochs() {
        let set = separable(100, 1);
        assert!(linearly_separable(&set));
        let model = build_model(small_config(2, 8, 2), 7).unwrap();
        let mut cfg = TrainConfig::new(1e-3, 20, 10, 3);
        cfg.early_stop_patience = 10;
        let trained = train(model, &set, &cfg).unwrap();
        assert!(trained.stopped_epoch <= 10);
        assert!(accuracy_on(&trained, &set) >= 0.99);
    }

    #[test]
    fn loss_falls_over_first_epochs_for_five_seeds() {
        for seed in 0..5u64 {
            let set = separable(60, 100 + seed);
            let model = build_model(small_config(2, 8, 2), seed).unwrap();
            let mut cfg = TrainConfig::new(5e-4, 20, 3, seed);
            cfg.early_stop_patience = 3;
            let trained = train(model, &set, &cfg).unwrap();
            let l: Vec<f64> = trained.history.iter().map(|h| h.train_loss).collect();
            assert_eq!(l.len(), 3);
            assert!(l[0] > l[1] && l[1] > l[2], "seed {seed}: {l:?}");
        }
    }

    #[test]
    fn training_is_deterministic_and_order_free() {
        let set = separable(40, 2);
        let cfg = TrainConfig::new(1e-3, 16, 4, 9);
        let a = train(build_model(small_config(2, 8, 2), 1).unwrap(), &set, &cfg).unwrap();
        let b = train(build_model(small_config(2, 8, 2), 1).unwrap(), &set, &cfg).unwrap();
        assert_eq!(a, b);
        let reversed: Vec<usize> = (0..set.len()).rev().collect();
        let c = train(build_model(small_config(2, 8, 2), 1).unwrap(), &set.select(&reversed), &cfg).unwrap();
        assert_eq!(a.network.params(), c.network.params());
        assert_eq!(predict(&a, &set).unwrap(), predict(&c, &set).unwrap());
    }

    #[test]
    fn single_class_is_degenerate() {
        let set = separable(10, 3);
        let zeros: Vec<usize> = (0..set.len()).filter(|&i| set.labels()[i] == 0).collect();
        let model = build_model(small_config(2, 8, 2), 1).unwrap();
        let r = train(model, &set.select(&zeros), &TrainConfig::new(1e-3, 8, 2, 0));
        assert_eq!(r.unwrap_err(), Error::DegenerateLabels);
    }

    #[test]
    fn perfectly_fit_training_set_is_reproduced() {
        let set = separable(50, 4);
        let mut cfg = TrainConfig::new(2e-3, 10, 15, 5);
        cfg.early_stop_patience = 15;
        let model = train(build_model(small_config(2, 8, 2), 2).unwrap(), &set, &cfg).unwrap();
        let pred = predict(&model, &set).unwrap();
        if accuracy_on(&model, &set) == 1.0 {
            assert_eq!(pred, set.labels());
        }
        assert_eq!(pred, predict(&model, &set).unwrap());
    }

    #[test]
    fn predictions_stay_in_class_range() {
        let model = build_model(small_config(3, 20, 6), 1).unwrap();
        let mut r = rng::rng(1);
        let mut set = WindowSet::empty(20, 3);
        for i in 0..30 {
            let w: Vec<f64> = (0..60).map(|_| rng::standard_normal(&mut r)).collect();
            set.push(
                &w,
                i % 6,
                WindowSource {
                    subject_id: "a".to_string(),
                    recording_index: 0,
                    start_frame: i,
                },
            );
        }
        assert!(predict(&model, &set).unwrap().iter().all(|&p| p < 6));
        for p in predict_proba(&model, &set).unwrap() {
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn mismatched_windows_are_shape_errors() {
        let model = build_model(small_config(2, 8, 2), 1).unwrap();
        let other = WindowSet::empty(9, 2);
        assert!(matches!(predict(&model, &other), Err(Error::Shape(_))));
        assert!(matches!(
            train(model, &WindowSet::empty(8, 3), &TrainConfig::new(1e-3, 8, 1, 0)),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn validation_split_is_stratified() {
        let set = separable(100, 8);
        let (train_idx, val_idx) = validation_split(&set.sorted(), 0.1, 1);
        assert_eq!(train_idx.len() + val_idx.len(), set.len());
        // Each subject holds one class: 4 groups of 50 windows, 10% each.
        assert_eq!(val_idx.len(), 4 * 5);
    }

    #[test]
    fn early_stopping_keeps_best_epoch() {
        let set = separable(30, 9);
        let mut cfg = TrainConfig::new(5e-2, 8, 30, 1);
        cfg.early_stop_patience = 2;
        let m = train(build_model(small_config(2, 8, 2), 3).unwrap(), &set, &cfg).unwrap();
        assert!(m.stopped_epoch <= 30);
        let best = m
            .history
            .iter()
            .min_by(|a, b| a.val_loss.unwrap().total_cmp(&b.val_loss.unwrap()))
            .unwrap();
        assert_eq!(best.epoch, m.best_epoch);
    }
}
