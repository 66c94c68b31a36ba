use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;

use super::config::ModelConfig;
use super::init::orthogonal;
use crate::error::{Error, Result};
use crate::rng::{self, Rng};

#[derive(Debug, Clone, Copy)]
struct Dense {
    w: usize,
    b: usize,
    rows: usize,
    cols: usize,
}

#[derive(Debug, Clone, Copy)]
struct Conv {
    w: usize,
    b: usize,
    filters: usize,
    kernel: usize,
    in_ch: usize,
    in_frames: usize,
}

impl Conv {
    fn out_frames(&self) -> usize {
        self.in_frames - self.kernel + 1
    }
}

#[derive(Debug, Clone)]
struct BranchLayout {
    channels: Vec<usize>,
    convs: Vec<Conv>,
    pooled_frames: usize,
    fc: Dense,
}

#[derive(Debug, Clone)]
struct Layout {
    branches: Vec<BranchLayout>,
    fusion: Dense,
    output: Dense,
    n_params: usize,
}

impl Layout {
    fn new(cfg: &ModelConfig) -> Layout {
        let mut next = 0;
        let mut alloc = |n: usize| {
            let at = next;
            next += n;
            at
        };
        let mut dense = |rows: usize, cols: usize| Dense {
            w: alloc(rows * cols),
            b: alloc(rows),
            rows,
            cols,
        };
        let mut branches = Vec::with_capacity(cfg.branches.len());
        for channels in &cfg.branches {
            let mut convs = Vec::with_capacity(cfg.conv_layers_per_branch);
            let mut in_ch = channels.len();
            let mut frames = cfg.window_size;
            for _ in 0..cfg.conv_layers_per_branch {
                let d = dense(cfg.filters, cfg.kernel_frames * in_ch);
                convs.push(Conv {
                    w: d.w,
                    b: d.b,
                    filters: cfg.filters,
                    kernel: cfg.kernel_frames,
                    in_ch,
                    in_frames: frames,
                });
                frames = frames - cfg.kernel_frames + 1;
                in_ch = cfg.filters;
            }
            let pooled_frames = frames / cfg.pool_size;
            let fc = dense(cfg.branch_fc_units, pooled_frames * cfg.filters);
            branches.push(BranchLayout {
                channels: channels.clone(),
                convs,
                pooled_frames,
                fc,
            });
        }
        let fusion = dense(cfg.fusion_fc_units, cfg.branches.len() * cfg.branch_fc_units);
        let output = dense(cfg.n_classes, cfg.fusion_fc_units);
        Layout {
            branches,
            fusion,
            output,
            n_params: next,
        }
    }
}

/// Per-sample activations kept for the backward pass.
#[derive(Debug, Clone, Default)]
pub(crate) struct Workspace {
    /// `acts[b][0]` is the branch input, `acts[b][l + 1]` the output of conv `l`.
    acts: Vec<Vec<Vec<f64>>>,
    pooled: Vec<Vec<f64>>,
    argmax: Vec<Vec<usize>>,
    concat: Vec<f64>,
    hidden: Vec<f64>,
    mask: Vec<f64>,
    dropped: Vec<f64>,
    pub(crate) logits: Vec<f64>,
    pub(crate) probs: Vec<f64>,
    // Backward scratch.
    d_hidden: Vec<f64>,
    d_concat: Vec<f64>,
    d_pooled: Vec<f64>,
    d_act: Vec<f64>,
    d_prev: Vec<f64>,
}

/// A late-fusion CNN with its parameters stored in one flat vector.
#[derive(Debug, Clone)]
pub struct Network {
    config: ModelConfig,
    layout: Layout,
    params: Vec<f64>,
}

impl PartialEq for Network {
    fn eq(&self, other: &Self) -> bool {
        self.config == other.config && self.params == other.params
    }
}

fn relu_inplace(v: &mut [f64]) {
    v.iter_mut().for_each(|x| {
        if *x < 0.0 {
            *x = 0.0
        }
    });
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    y.iter_mut().zip(x).for_each(|(y, x)| *y += alpha * x);
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64], out: &mut Vec<f64>) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    out.clear();
    out.extend(logits.iter().map(|&z| libm::exp(z - max)));
    let sum: f64 = out.iter().sum();
    out.iter_mut().for_each(|p| *p /= sum);
}

fn log_sum_exp(logits: &[f64]) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + libm::log(logits.iter().map(|&z| libm::exp(z - max)).sum::<f64>())
}

impl Network {
    /// Builds a network with orthogonally initialized weights and zero
    /// biases.
    ///
    /// Every branch draws from the same seeded stream, so branches of equal
    /// shape start with equal weights.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Network> {
        config.validate()?;
        let layout = Layout::new(&config);
        let mut params = vec![0.0; layout.n_params];
        let mut fill = |d: Dense, stream: u64| {
            let mut r = rng::rng(rng::derive(seed, &[stream]));
            let w = orthogonal(d.rows, d.cols, 1.0, &mut r);
            params[d.w..d.w + w.len()].copy_from_slice(&w);
        };
        for branch in &layout.branches {
            for (l, c) in branch.convs.iter().enumerate() {
                let d = Dense {
                    w: c.w,
                    b: c.b,
                    rows: c.filters,
                    cols: c.kernel * c.in_ch,
                };
                fill(d, 100 + l as u64);
            }
            fill(branch.fc, 200);
        }
        fill(layout.fusion, 300);
        fill(layout.output, 400);
        Ok(Network { config, layout, params })
    }

    /// Restores a network from stored parameters.
    pub fn from_parts(config: ModelConfig, params: Vec<f64>) -> Result<Network> {
        config.validate()?;
        let layout = Layout::new(&config);
        if params.len() != layout.n_params {
            return Err(Error::Shape(alloc::format!(
                "expected {} parameters, got {}",
                layout.n_params,
                params.len()
            )));
        }
        Ok(Network { config, layout, params })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn n_params(&self) -> usize {
        self.layout.n_params
    }

    pub fn window_len(&self) -> usize {
        self.config.window_size * self.config.n_channels()
    }

    /// Weight matrices as `(rows, cols, values)`, conv kernels flattened to
    /// `filters x (kernel * in_channels)`.
    pub fn weight_matrices(&self) -> Vec<(usize, usize, &[f64])> {
        let mut out = Vec::new();
        let mut push = |w: usize, rows: usize, cols: usize| out.push((rows, cols, &self.params[w..w + rows * cols]));
        for b in &self.layout.branches {
            for c in &b.convs {
                push(c.w, c.filters, c.kernel * c.in_ch);
            }
            push(b.fc.w, b.fc.rows, b.fc.cols);
        }
        push(self.layout.fusion.w, self.layout.fusion.rows, self.layout.fusion.cols);
        push(self.layout.output.w, self.layout.output.rows, self.layout.output.cols);
        out
    }

    pub(crate) fn check_window(&self, window: &[f64]) -> Result<()> {
        if window.len() != self.window_len() {
            return Err(Error::Shape(alloc::format!(
                "window has {} values, model expects {} frames x {} channels",
                window.len(),
                self.config.window_size,
                self.config.n_channels()
            )));
        }
        Ok(())
    }

    fn dense_forward(&self, d: Dense, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        let w = &self.params[d.w..d.w + d.rows * d.cols];
        let b = &self.params[d.b..d.b + d.rows];
        out.extend(w.chunks_exact(d.cols).zip(b).map(|(row, bias)| bias + dot(row, x)));
    }

    /// Runs one window forward. With `dropout` set the network is in
    /// training mode.
    pub(crate) fn forward(&self, window: &[f64], dropout: Option<&mut Rng>, ws: &mut Workspace) {
        let n_ch = self.config.n_channels();
        let nb = self.layout.branches.len();
        ws.acts.resize_with(nb, Vec::new);
        ws.pooled.resize_with(nb, Vec::new);
        ws.argmax.resize_with(nb, Vec::new);
        ws.concat.clear();
        let mut fc_out = Vec::new();
        for (bi, branch) in self.layout.branches.iter().enumerate() {
            let acts = &mut ws.acts[bi];
            acts.resize_with(branch.convs.len() + 1, Vec::new);
            let input = &mut acts[0];
            input.clear();
            for frame in window.chunks_exact(n_ch) {
                input.extend(branch.channels.iter().map(|&c| frame[c]));
            }
            for (l, conv) in branch.convs.iter().enumerate() {
                let (done, rest) = acts.split_at_mut(l + 1);
                let x = &done[l];
                let out = &mut rest[0];
                out.clear();
                let span = conv.kernel * conv.in_ch;
                let w = &self.params[conv.w..conv.w + conv.filters * span];
                let b = &self.params[conv.b..conv.b + conv.filters];
                for t in 0..conv.out_frames() {
                    let patch = &x[t * conv.in_ch..t * conv.in_ch + span];
                    out.extend(w.chunks_exact(span).zip(b).map(|(wf, bf)| {
                        let v = bf + dot(wf, patch);
                        if v > 0.0 {
                            v
                        } else {
                            0.0
                        }
                    }));
                }
            }
            // Temporal max-pool.
            let f = self.config.filters;
            let p = self.config.pool_size;
            let last = &acts[branch.convs.len()];
            let pooled = &mut ws.pooled[bi];
            let argmax = &mut ws.argmax[bi];
            pooled.clear();
            argmax.clear();
            for tp in 0..branch.pooled_frames {
                for fi in 0..f {
                    let mut best = tp * p * f + fi;
                    for t in tp * p + 1..tp * p + p {
                        let idx = t * f + fi;
                        if last[idx] > last[best] {
                            best = idx;
                        }
                    }
                    pooled.push(last[best]);
                    argmax.push(best);
                }
            }
            self.dense_forward(branch.fc, pooled, &mut fc_out);
            relu_inplace(&mut fc_out);
            ws.concat.extend_from_slice(&fc_out);
        }
        let mut hidden = core::mem::take(&mut ws.hidden);
        self.dense_forward(self.layout.fusion, &ws.concat, &mut hidden);
        relu_inplace(&mut hidden);
        ws.hidden = hidden;
        ws.mask.clear();
        match dropout {
            Some(r) if self.config.dropout_p > 0.0 => {
                let keep = 1.0 - self.config.dropout_p;
                ws.mask
                    .extend((0..ws.hidden.len()).map(|_| if r.random::<f64>() < keep { 1.0 / keep } else { 0.0 }));
            }
            _ => ws.mask.resize(ws.hidden.len(), 1.0),
        }
        ws.dropped.clear();
        ws.dropped.extend(ws.hidden.iter().zip(&ws.mask).map(|(h, m)| h * m));
        let mut logits = core::mem::take(&mut ws.logits);
        self.dense_forward(self.layout.output, &ws.dropped, &mut logits);
        ws.logits = logits;
        softmax(&ws.logits, &mut ws.probs);
    }

    /// Cross-entropy of the last forward pass.
    pub(crate) fn loss_of(ws: &Workspace, label: usize) -> f64 {
        log_sum_exp(&ws.logits) - ws.logits[label]
    }

    fn dense_backward(&self, d: Dense, x: &[f64], dout: &[f64], grads: &mut [f64], dx: Option<&mut Vec<f64>>) {
        for (r, &g) in dout.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            axpy(g, x, &mut grads[d.w + r * d.cols..d.w + (r + 1) * d.cols]);
            grads[d.b + r] += g;
        }
        if let Some(dx) = dx {
            dx.clear();
            dx.resize(d.cols, 0.0);
            let w = &self.params[d.w..d.w + d.rows * d.cols];
            for (row, &g) in w.chunks_exact(d.cols).zip(dout) {
                if g != 0.0 {
                    axpy(g, row, dx);
                }
            }
        }
    }

    /// Adds `scale * d loss / d params` of the last forward pass to `grads`.
    pub(crate) fn backward(&self, label: usize, scale: f64, ws: &mut Workspace, grads: &mut [f64]) {
        let mut d_logits: Vec<f64> = ws.probs.iter().map(|p| p * scale).collect();
        d_logits[label] -= scale;
        let mut d_hidden = core::mem::take(&mut ws.d_hidden);
        self.dense_backward(self.layout.output, &ws.dropped, &d_logits, grads, Some(&mut d_hidden));
        for ((d, m), h) in d_hidden.iter_mut().zip(&ws.mask).zip(&ws.hidden) {
            *d = if *h > 0.0 { *d * m } else { 0.0 };
        }
        let mut d_concat = core::mem::take(&mut ws.d_concat);
        self.dense_backward(self.layout.fusion, &ws.concat, &d_hidden, grads, Some(&mut d_concat));
        ws.d_hidden = d_hidden;

        let units = self.config.branch_fc_units;
        let mut d_pooled = core::mem::take(&mut ws.d_pooled);
        let mut d_act = core::mem::take(&mut ws.d_act);
        let mut d_prev = core::mem::take(&mut ws.d_prev);
        for (bi, branch) in self.layout.branches.iter().enumerate() {
            let fc_in = &ws.pooled[bi];
            let d_fc: Vec<f64> = d_concat[bi * units..(bi + 1) * units]
                .iter()
                .zip(&ws.concat[bi * units..(bi + 1) * units])
                .map(|(d, a)| if *a > 0.0 { *d } else { 0.0 })
                .collect();
            self.dense_backward(branch.fc, fc_in, &d_fc, grads, Some(&mut d_pooled));
            let acts = &ws.acts[bi];
            let n_convs = branch.convs.len();
            d_act.clear();
            d_act.resize(acts[n_convs].len(), 0.0);
            for (&idx, &d) in ws.argmax[bi].iter().zip(&d_pooled) {
                d_act[idx] += d;
            }
            for l in (0..n_convs).rev() {
                let conv = branch.convs[l];
                let out = &acts[l + 1];
                // ReLU gate: outputs equal to zero pass no gradient.
                for (d, &a) in d_act.iter_mut().zip(out) {
                    if a <= 0.0 {
                        *d = 0.0;
                    }
                }
                let x = &acts[l];
                let span = conv.kernel * conv.in_ch;
                let need_input_grad = l > 0;
                if need_input_grad {
                    d_prev.clear();
                    d_prev.resize(x.len(), 0.0);
                }
                for t in 0..conv.out_frames() {
                    let patch = &x[t * conv.in_ch..t * conv.in_ch + span];
                    for fi in 0..conv.filters {
                        let g = d_act[t * conv.filters + fi];
                        if g == 0.0 {
                            continue;
                        }
                        let wf = conv.w + fi * span;
                        axpy(g, patch, &mut grads[wf..wf + span]);
                        grads[conv.b + fi] += g;
                        if need_input_grad {
                            axpy(
                                g,
                                &self.params[wf..wf + span],
                                &mut d_prev[t * conv.in_ch..t * conv.in_ch + span],
                            );
                        }
                    }
                }
                if need_input_grad {
                    core::mem::swap(&mut d_act, &mut d_prev);
                }
            }
        }
        ws.d_concat = d_concat;
        ws.d_pooled = d_pooled;
        ws.d_act = d_act;
        ws.d_prev = d_prev;
    }

    /// Class probabilities of one window in evaluation mode.
    pub fn probabilities(&self, window: &[f64]) -> Result<Vec<f64>> {
        self.check_window(window)?;
        let mut ws = Workspace::default();
        self.forward(window, None, &mut ws);
        Ok(ws.probs)
    }

    /// Post-activation output of every branch's dense layer.
    pub fn branch_outputs(&self, window: &[f64]) -> Result<Vec<Vec<f64>>> {
        self.check_window(window)?;
        let mut ws = Workspace::default();
        self.forward(window, None, &mut ws);
        let units = self.config.branch_fc_units;
        Ok(ws.concat.chunks_exact(units).map(<[f64]>::to_vec).collect())
    }

    /// Mean cross-entropy over `windows` in evaluation mode.
    pub fn loss(&self, windows: &[&[f64]], labels: &[usize]) -> Result<f64> {
        let mut ws = Workspace::default();
        let mut total = 0.0;
        for (w, &y) in windows.iter().zip(labels) {
            self.check_window(w)?;
            self.check_label(y)?;
            self.forward(w, None, &mut ws);
            total += Self::loss_of(&ws, y);
        }
        Ok(total / windows.len().max(1) as f64)
    }

    /// Mean cross-entropy and its gradient in evaluation mode.
    pub fn loss_and_gradient(&self, windows: &[&[f64]], labels: &[usize]) -> Result<(f64, Vec<f64>)> {
        let mut ws = Workspace::default();
        let mut grads = vec![0.0; self.n_params()];
        let scale = 1.0 / windows.len().max(1) as f64;
        let mut total = 0.0;
        for (w, &y) in windows.iter().zip(labels) {
            self.check_window(w)?;
            self.check_label(y)?;
            self.forward(w, None, &mut ws);
            total += Self::loss_of(&ws, y);
            self.backward(y, scale, &mut ws, &mut grads);
        }
        Ok((total * scale, grads))
    }

    pub(crate) fn check_label(&self, label: usize) -> Result<()> {
        if label >= self.config.n_classes {
            return Err(Error::Shape(alloc::format!(
                "label {label} outside {} classes",
                self.config.n_classes
            )));
        }
        Ok(())
    }
}
