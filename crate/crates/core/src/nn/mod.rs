//! From-scratch convolutional classifier for 2x1024 IQ frames.
//!
//! Architecture: four conv blocks (1x4 kernels, filter counts 16/32/48/64),
//! each with batch normalization and ReLU; max pooling (1x2) after the first
//! three blocks, average pooling (1x32) after the last; dropout on the
//! flattened features; a fully-connected softmax head. Trained with SGD with
//! momentum under a stepped learning-rate schedule.

pub mod layers;

use crate::dataset::{Dataset, MinibatchIter};
use crate::seeds;
use crate::{Error, Result};
use layers::{
    softmax_xent, softmax_xent_backward, Act, AvgPool, BatchNorm, Conv1x4, Dense, Dropout,
    MaxPool1x2, Relu,
};
use std::io::{Read, Write};
use std::path::Path;

/// Filter counts of the four convolution blocks.
pub const CONV_FILTERS: [usize; 4] = [16, 32, 48, 64];
/// Width of the trailing average pool.
pub const AVG_POOL: usize = 32;

/// Network hyperparameters (the architecture itself is fixed).
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub classes: usize,
    pub input_width: usize,
    pub dropout_rate: f32,
    pub bn_epsilon: f32,
    pub bn_momentum: f32,
}

impl ModelConfig {
    pub fn new(classes: usize) -> Self {
        Self {
            classes,
            input_width: crate::dataset::FRAME_LEN,
            dropout_rate: 0.5,
            bn_epsilon: 1e-5,
            bn_momentum: 0.1,
        }
    }

    /// Flattened feature width entering the fully-connected layer.
    pub fn feature_dim(&self) -> usize {
        // three 1x2 max pools then a 1x32 average pool
        let w = self.input_width / 2 / 2 / 2 / AVG_POOL;
        CONV_FILTERS[3] * 2 * w
    }
}

/// Training hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub initial_lr: f32,
    pub lr_drop_factor: f32,
    pub lr_drop_period: usize,
    pub momentum: f32,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Split minibatch work over threads. Results are bit-identical to the
    /// single-threaded path (fixed chunking, fixed reduction order).
    pub parallel: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            initial_lr: 0.02,
            lr_drop_factor: 0.1,
            lr_drop_period: 9,
            momentum: 0.9,
            batch_size: 128,
            epochs: 30,
            seed: 0,
            parallel: false,
        }
    }
}

impl TrainConfig {
    /// Stepped schedule: `initial * factor^(epoch / period)`.
    pub fn learning_rate(&self, epoch: usize) -> f32 {
        self.initial_lr * self.lr_drop_factor.powi((epoch / self.lr_drop_period) as i32)
    }
}

struct ConvBlock {
    conv: Conv1x4,
    bn: BatchNorm,
    relu: Relu,
}

/// The classifier: parameters, layer state and normalization statistics.
pub struct Model {
    pub config: ModelConfig,
    blocks: Vec<ConvBlock>,
    pools: Vec<MaxPool1x2>,
    avg: AvgPool,
    dropout: Dropout,
    fc: Dense,
    dropout_rng: rand_chacha::ChaCha8Rng,
}

impl Model {
    /// He-uniform initialized model, deterministic in `seed`.
    pub fn new(config: ModelConfig, seed: u64) -> Self {
        use rand::Rng;
        let mut rng = seeds::rng(&[seed, 0x30de1]);
        let mut blocks = Vec::new();
        let mut in_c = 1;
        for &out_c in &CONV_FILTERS {
            let mut conv = Conv1x4::new(in_c, out_c);
            let limit = (6.0 / (in_c * layers::KERNEL) as f32).sqrt();
            for v in &mut conv.weight {
                *v = rng.gen_range(-limit..limit);
            }
            let mut bn = BatchNorm::new(out_c);
            bn.eps = config.bn_epsilon;
            bn.momentum = config.bn_momentum;
            blocks.push(ConvBlock { conv, bn, relu: Relu::new() });
            in_c = out_c;
        }
        let feature_dim = config.feature_dim();
        let mut fc = Dense::new(feature_dim, config.classes);
        let limit = (6.0 / feature_dim as f32).sqrt();
        for v in &mut fc.weight {
            *v = rng.gen_range(-limit..limit);
        }
        let dropout_rate = config.dropout_rate;
        Self {
            config,
            blocks,
            pools: (0..3).map(|_| MaxPool1x2::new()).collect(),
            avg: AvgPool::new(AVG_POOL),
            dropout: Dropout::new(dropout_rate),
            fc,
            dropout_rng: seeds::rng(&[seed, 0xd20b]),
        }
    }

    /// Forward pass to logits. `train` enables batch statistics, dropout and
    /// activation caching for a following backward pass.
    pub fn forward(&mut self, batch: &[f32], n: usize, train: bool, parallel: bool) -> Result<Vec<f32>> {
        let width = self.config.input_width;
        debug_assert_eq!(batch.len(), n * 2 * width);
        let mut act = Act::from_batch(batch.to_vec(), n, 2, width);
        for b in 0..self.blocks.len() {
            let block = &mut self.blocks[b];
            let conv_out = block.conv.forward(&act, parallel, train);
            let bn_out = block.bn.forward(&conv_out, train, parallel)?;
            act = block.relu.forward(&bn_out, train);
            if b < 3 {
                act = self.pools[b].forward(&act, train);
            }
        }
        act = self.avg.forward(&act);
        let feats: Vec<f32> = act.data;
        let dropped = if train {
            self.dropout.forward_train(&feats, &mut self.dropout_rng)
        } else {
            self.dropout.forward_infer(&feats)
        };
        let logits = self.fc.forward(&dropped, n, train);
        Ok(logits)
    }

    /// Backward pass from the loss gradient on the logits; accumulates
    /// parameter gradients.
    pub fn backward(&mut self, grad_logits: &[f32], n: usize, parallel: bool) {
        let g = self.fc.backward(grad_logits);
        let g = self.dropout.backward(&g);
        let w_avg = self.config.input_width / 8 / AVG_POOL;
        let mut grad = Act { n, c: CONV_FILTERS[3], rows: 2, w: w_avg, data: g };
        grad = self.avg.backward(&grad);
        for b in (0..self.blocks.len()).rev() {
            if b < 3 {
                grad = self.pools[b].backward(&grad);
            }
            let block = &mut self.blocks[b];
            grad = block.relu.backward(&grad);
            grad = block.bn.backward(&grad, parallel);
            grad = block.conv.backward(&grad, parallel);
        }
    }

    /// Visit every trainable parameter tensor with its gradient.
    pub fn visit_params(&mut self, mut f: impl FnMut(&str, &mut [f32], &mut [f32])) {
        for (i, b) in self.blocks.iter_mut().enumerate() {
            f(&format!("conv{}.weight", i + 1), &mut b.conv.weight, &mut b.conv.grad_weight);
            f(&format!("conv{}.bias", i + 1), &mut b.conv.bias, &mut b.conv.grad_bias);
            f(&format!("bn{}.gamma", i + 1), &mut b.bn.gamma, &mut b.bn.grad_gamma);
            f(&format!("bn{}.beta", i + 1), &mut b.bn.beta, &mut b.bn.grad_beta);
        }
        f("fc.weight", &mut self.fc.weight, &mut self.fc.grad_weight);
        f("fc.bias", &mut self.fc.bias, &mut self.fc.grad_bias);
    }

    fn zero_grads(&mut self) {
        self.visit_params(|_, _, g| g.fill(0.0));
    }

    /// All persisted tensors: parameters plus batchnorm running statistics.
    fn state_tensors(&mut self) -> Vec<(String, Vec<f32>)> {
        let mut out = Vec::new();
        self.visit_params(|name, p, _| out.push((name.to_string(), p.to_vec())));
        for (i, b) in self.blocks.iter().enumerate() {
            out.push((format!("bn{}.running_mean", i + 1), b.bn.running_mean.clone()));
            out.push((format!("bn{}.running_var", i + 1), b.bn.running_var.clone()));
        }
        out
    }

    fn load_state(&mut self, tensors: &[(String, Vec<f32>)]) -> Result<()> {
        let mut used = vec![false; tensors.len()];
        let find = |name: &str, used: &mut [bool]| -> Option<Vec<f32>> {
            tensors.iter().position(|(n, _)| n == name).map(|i| {
                used[i] = true;
                tensors[i].1.clone()
            })
        };
        let mut err: Option<String> = None;
        self.visit_params(|name, p, _| {
            match find(name, &mut used) {
                Some(v) if v.len() == p.len() => p.copy_from_slice(&v),
                Some(v) => err = Some(format!("{name}: length {} vs {}", v.len(), p.len())),
                None => err = Some(format!("missing tensor {name}")),
            }
        });
        for (i, b) in self.blocks.iter_mut().enumerate() {
            for (suffix, dst) in [
                ("running_mean", &mut b.bn.running_mean),
                ("running_var", &mut b.bn.running_var),
            ] {
                match find(&format!("bn{}.{suffix}", i + 1), &mut used) {
                    Some(v) if v.len() == dst.len() => dst.copy_from_slice(&v),
                    Some(_) => err = Some(format!("bn{}.{suffix}: bad length", i + 1)),
                    None => err = Some(format!("missing tensor bn{}.{suffix}", i + 1)),
                }
            }
        }
        match err {
            Some(e) => Err(Error::IncompatibleCheckpoint(e)),
            None => Ok(()),
        }
    }
}

/// SGD with momentum: `v <- mu v + g`, `p <- p - lr v`.
pub struct SgdMomentum {
    pub momentum: f32,
    velocity: Vec<Vec<f32>>,
}

impl SgdMomentum {
    pub fn new(momentum: f32) -> Self {
        Self { momentum, velocity: Vec::new() }
    }

    pub fn step(&mut self, model: &mut Model, lr: f32) {
        let mut idx = 0;
        let mu = self.momentum;
        let velocity = &mut self.velocity;
        model.visit_params(|_, p, g| {
            if velocity.len() == idx {
                velocity.push(vec![0.0; p.len()]);
            }
            let v = &mut velocity[idx];
            assert_eq!(v.len(), p.len(), "optimizer state shape mismatch");
            for ((vi, pi), gi) in v.iter_mut().zip(p.iter_mut()).zip(g.iter()) {
                *vi = mu * *vi + gi;
                *pi -= lr * *vi;
            }
            idx += 1;
        });
    }
}

/// One row of the training metrics log.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub lr: f32,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_acc: f64,
}

/// Serialize metrics as the comma-separated log table.
pub fn metrics_to_csv(metrics: &[EpochMetrics]) -> String {
    let mut out = String::from("epoch,lr,train_loss,train_acc,val_acc\n");
    for m in metrics {
        out.push_str(&format!(
            "{},{},{:.6},{:.6},{:.6}\n",
            m.epoch, m.lr, m.train_loss, m.train_acc, m.val_acc
        ));
    }
    out
}

/// Run the training loop: per-epoch shuffle, minibatch forward/backward,
/// momentum step, and train/validation metrics.
pub fn train(
    model: &mut Model,
    ds: &Dataset,
    train_idx: &[u32],
    val_idx: &[u32],
    cfg: &TrainConfig,
) -> Result<Vec<EpochMetrics>> {
    if train_idx.is_empty() || val_idx.is_empty() {
        return Err(Error::EmptySplit);
    }
    let classes = model.config.classes;
    let mut optimizer = SgdMomentum::new(cfg.momentum);
    let mut metrics = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let lr = cfg.learning_rate(epoch);
        let mut loss_sum = 0.0f64;
        let mut seen = 0usize;
        let mut correct = 0usize;
        let batches =
            MinibatchIter::new(ds, train_idx, cfg.batch_size, Some((cfg.seed, epoch as u64)))?;
        for (tensor, labels) in batches {
            let n = labels.len();
            model.zero_grads();
            let logits = model.forward(&tensor, n, true, cfg.parallel)?;
            let (loss, probs) = softmax_xent(&logits, &labels, classes);
            if !loss.is_finite() {
                return Err(Error::Divergence(format!("loss became {loss} at epoch {epoch}")));
            }
            loss_sum += loss as f64 * n as f64;
            seen += n;
            correct += count_correct(&probs, &labels, classes);
            let grad = softmax_xent_backward(&probs, &labels, classes);
            model.backward(&grad, n, cfg.parallel);
            optimizer.step(model, lr);
        }
        let (val_acc, _) = evaluate(model, ds, val_idx, cfg.parallel)?;
        metrics.push(EpochMetrics {
            epoch,
            lr,
            train_loss: loss_sum / seen.max(1) as f64,
            train_acc: correct as f64 / seen.max(1) as f64,
            val_acc,
        });
    }
    Ok(metrics)
}

fn count_correct(probs: &[f32], labels: &[u8], classes: usize) -> usize {
    labels
        .iter()
        .enumerate()
        .filter(|(i, &l)| {
            let p = &probs[i * classes..(i + 1) * classes];
            let pred = p
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .map(|(k, _)| k)
                .unwrap();
            pred == l as usize
        })
        .count()
}

/// Inference-mode evaluation: accuracy and the confusion matrix
/// (`confusion[true][predicted]`).
pub fn evaluate(
    model: &mut Model,
    ds: &Dataset,
    indices: &[u32],
    parallel: bool,
) -> Result<(f64, Vec<Vec<u64>>)> {
    if indices.is_empty() {
        return Err(Error::EmptySplit);
    }
    let classes = model.config.classes;
    let mut confusion = vec![vec![0u64; classes]; classes];
    let mut correct = 0u64;
    for (tensor, labels) in MinibatchIter::new(ds, indices, 256, None)? {
        let n = labels.len();
        let logits = model.forward(&tensor, n, false, parallel)?;
        for i in 0..n {
            let p = &logits[i * classes..(i + 1) * classes];
            let pred = p
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .map(|(k, _)| k)
                .unwrap();
            confusion[labels[i] as usize][pred] += 1;
            if pred == labels[i] as usize {
                correct += 1;
            }
        }
    }
    Ok((correct as f64 / indices.len() as f64, confusion))
}

/// Confusion matrix as a comma-separated integer table.
pub fn confusion_to_csv(confusion: &[Vec<u64>]) -> String {
    confusion
        .iter()
        .map(|row| row.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(","))
        .collect::<Vec<_>>()
        .join("\n")
        + "\n"
}

const CHECKPOINT_MAGIC: &[u8; 4] = b"OOBM";
const CHECKPOINT_VERSION: u16 = 1;

/// Write a versioned binary checkpoint of all parameters and running stats.
pub fn save_checkpoint(model: &mut Model, path: &Path) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    f.write_all(CHECKPOINT_MAGIC)?;
    f.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    f.write_all(&(model.config.classes as u16).to_le_bytes())?;
    f.write_all(&(model.config.input_width as u32).to_le_bytes())?;
    let tensors = model.state_tensors();
    f.write_all(&(tensors.len() as u32).to_le_bytes())?;
    for (name, data) in &tensors {
        let nb = name.as_bytes();
        f.write_all(&(nb.len() as u16).to_le_bytes())?;
        f.write_all(nb)?;
        f.write_all(&(data.len() as u32).to_le_bytes())?;
        for v in data {
            f.write_all(&v.to_le_bytes())?;
        }
    }
    f.flush()?;
    Ok(())
}

/// Load a checkpoint; the stored class count and input width fix the
/// architecture.
pub fn load_checkpoint(path: &Path) -> Result<Model> {
    let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut magic = [0u8; 4];
    f.read_exact(&mut magic)?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(Error::IncompatibleCheckpoint("bad magic bytes".into()));
    }
    let mut u16b = [0u8; 2];
    let mut u32b = [0u8; 4];
    f.read_exact(&mut u16b)?;
    if u16::from_le_bytes(u16b) != CHECKPOINT_VERSION {
        return Err(Error::IncompatibleCheckpoint("unsupported version".into()));
    }
    f.read_exact(&mut u16b)?;
    let classes = u16::from_le_bytes(u16b) as usize;
    f.read_exact(&mut u32b)?;
    let input_width = u32::from_le_bytes(u32b) as usize;
    f.read_exact(&mut u32b)?;
    let n_tensors = u32::from_le_bytes(u32b) as usize;
    let mut tensors = Vec::with_capacity(n_tensors);
    for _ in 0..n_tensors {
        f.read_exact(&mut u16b)?;
        let name_len = u16::from_le_bytes(u16b) as usize;
        let mut name = vec![0u8; name_len];
        f.read_exact(&mut name)?;
        f.read_exact(&mut u32b)?;
        let len = u32::from_le_bytes(u32b) as usize;
        let mut data = vec![0.0f32; len];
        let mut buf = [0u8; 4];
        for v in &mut data {
            f.read_exact(&mut buf)?;
            *v = f32::from_le_bytes(buf);
        }
        tensors.push((
            String::from_utf8(name)
                .map_err(|_| Error::IncompatibleCheckpoint("bad tensor name".into()))?,
            data,
        ));
    }
    let mut config = ModelConfig::new(classes);
    config.input_width = input_width;
    let mut model = Model::new(config, 0);
    model.load_state(&tensors)?;
    Ok(model)
}
