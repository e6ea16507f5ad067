use std::fmt::Write as _;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{DatasetSplit, Window};
use crate::error::{Error, Result};
use crate::layers::{adam_step, softmax_cross_entropy, AdamConfig, AdamState};
use crate::model::Params;
use crate::tensor::argmax;
use crate::{Model, Tensor};

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    /// Seeds the per-epoch shuffles.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 30,
            batch_size: 64,
            adam: AdamConfig::default(),
            seed: 42,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("epochs and batch_size must be ≥ 1".into()));
        }
        if self.adam.lr.is_nan() || self.adam.lr <= 0.0 {
            return Err(Error::Config(format!("lr must be > 0, got {}", self.adam.lr)));
        }
        Ok(())
    }
}

/// One row of the training log.
#[derive(Clone, Debug, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_loss: f64,
    pub val_acc: f64,
    /// Wall-clock time of the epoch; the only non-deterministic field.
    pub seconds: f64,
}

impl EpochLog {
    /// Equality ignoring wall-clock time.
    pub fn same_trajectory(&self, other: &EpochLog) -> bool {
        (self.epoch, self.train_loss, self.train_acc, self.val_loss, self.val_acc)
            == (other.epoch, other.train_loss, other.train_acc, other.val_loss, other.val_acc)
    }
}

pub fn epoch_log_csv(logs: &[EpochLog]) -> String {
    let mut s = String::from("epoch,train_loss,train_acc,val_loss,val_acc,seconds\n");
    for l in logs {
        writeln!(
            s,
            "{},{:.6},{:.6},{:.6},{:.6},{:.3}",
            l.epoch, l.train_loss, l.train_acc, l.val_loss, l.val_acc, l.seconds
        )
        .unwrap();
    }
    s
}

/// Epoch-at-a-time training state. [`train`] drives it for a fixed number
/// of epochs.
pub struct Trainer<'a> {
    model: Model,
    adam: AdamState<f32>,
    rng: ChaCha8Rng,
    cfg: TrainConfig,
    inputs: Vec<Tensor>,
    labels: Vec<usize>,
    train_idx: &'a [usize],
    val_idx: &'a [usize],
    epoch: usize,
    best: Option<(f64, Params<f32>)>,
    logs: Vec<EpochLog>,
}

impl<'a> Trainer<'a> {
    pub fn new(model: Model, windows: &[Window], split: &'a DatasetSplit, cfg: TrainConfig) -> Result<Self> {
        cfg.validate()?;
        if split.train.is_empty() || split.val.is_empty() {
            return Err(Error::Config(format!(
                "training needs non-empty train and validation partitions (got {} and {})",
                split.train.len(),
                split.val.len()
            )));
        }
        let classes = model.config.num_classes;
        if let Some(w) = windows.iter().find(|w| w.label >= classes) {
            return Err(Error::Label(format!(
                "window at offset {} has label {} but the model has {classes} classes",
                w.offset, w.label
            )));
        }
        if let Some(&i) = split.train.iter().chain(&split.val).find(|&&i| i >= windows.len()) {
            return Err(Error::Config(format!("split index {i} out of range")));
        }
        let adam = AdamState::new(cfg.adam, model.params.tensors())?;
        Ok(Trainer {
            adam,
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            inputs: windows.iter().map(Window::model_input).collect(),
            labels: windows.iter().map(|w| w.label).collect(),
            train_idx: &split.train,
            val_idx: &split.val,
            model,
            cfg,
            epoch: 0,
            best: None,
            logs: Vec::new(),
        })
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn logs(&self) -> &[EpochLog] {
        &self.logs
    }

    /// Mean cross-entropy and accuracy of the current weights over `idx`.
    pub fn measure(&self, idx: &[usize]) -> Result<(f64, f64)> {
        let (mut loss, mut hits) = (0.0f64, 0usize);
        for &i in idx {
            let (logits, _) = self.model.forward_window(&self.inputs[i])?;
            hits += usize::from(argmax(logits.data()) == self.labels[i]);
            let k = logits.len();
            let (l, _) = softmax_cross_entropy(&logits.reshape(vec![1, k])?, &[self.labels[i]])?;
            loss += l as f64;
        }
        Ok((loss / idx.len() as f64, hits as f64 / idx.len() as f64))
    }

    pub fn train_indices(&self) -> &[usize] {
        self.train_idx
    }

    pub fn run_epoch(&mut self) -> Result<&EpochLog> {
        let start = Instant::now();
        let epoch = self.epoch;
        let mut order = self.train_idx.to_vec();
        order.shuffle(&mut self.rng);
        for (b, batch) in order.chunks(self.cfg.batch_size).enumerate() {
            let mut caches = Vec::with_capacity(batch.len());
            let mut logits = Vec::new();
            for &i in batch {
                let (l, cache) = self.model.forward_window(&self.inputs[i])?;
                logits.extend_from_slice(l.data());
                caches.push(cache);
            }
            let k = self.model.config.num_classes;
            let targets: Vec<usize> = batch.iter().map(|&i| self.labels[i]).collect();
            let (loss, grad) =
                softmax_cross_entropy(&Tensor::new(vec![batch.len(), k], logits)?, &targets)?;
            if !loss.is_finite() {
                return Err(Error::Divergence { epoch, batch: b });
            }
            let mut grads = self.model.params.zeros_like();
            for (row, cache) in caches.iter().enumerate() {
                let g = Tensor::from_vec(grad.data()[row * k..(row + 1) * k].to_vec())?;
                grads.accumulate(&self.model.backward_window(cache, &g)?)?;
            }
            adam_step(&mut self.model.params.tensors_mut(), &grads.tensors(), &mut self.adam)?;
        }
        let (train_loss, train_acc) = self.measure(self.train_idx)?;
        let (val_loss, val_acc) = self.measure(self.val_idx)?;
        if !train_loss.is_finite() || !val_loss.is_finite() {
            return Err(Error::Divergence {
                epoch,
                batch: order.len().div_ceil(self.cfg.batch_size),
            });
        }
        if self.best.as_ref().is_none_or(|(acc, _)| val_acc >= *acc) {
            self.best = Some((val_acc, self.model.params.clone()));
        }
        self.logs.push(EpochLog {
            epoch,
            train_loss,
            train_acc,
            val_loss,
            val_acc,
            seconds: start.elapsed().as_secs_f64(),
        });
        self.epoch += 1;
        Ok(self.logs.last().unwrap())
    }

    /// The checkpoint with the best validation accuracy (latest on ties),
    /// or the current weights if no epoch has run.
    pub fn finish(self) -> (Model, Vec<EpochLog>) {
        let mut model = self.model;
        if let Some((_, params)) = self.best {
            model.params = params;
        }
        (model, self.logs)
    }
}

/// Trains for `cfg.epochs` epochs and returns the best checkpoint.
pub fn train(
    model: Model,
    windows: &[Window],
    split: &DatasetSplit,
    cfg: TrainConfig,
) -> Result<(Model, Vec<EpochLog>)> {
    let epochs = cfg.epochs;
    let mut t = Trainer::new(model, windows, split, cfg)?;
    for _ in 0..epochs {
        let log = t.run_epoch()?;
        log::info!(
            "epoch {} train_loss={:.4} train_acc={:.4} val_loss={:.4} val_acc={:.4} ({:.1}s)",
            log.epoch,
            log.train_loss,
            log.train_acc,
            log.val_loss,
            log.val_acc,
            log.seconds
        );
    }
    Ok(t.finish())
}
