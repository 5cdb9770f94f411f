use std::borrow::Borrow;
use std::fmt::Write as _;

use rayon::prelude::*;

use super::net::RegressorParams;
use super::pipeline::PreparedInput;
use crate::error::{Error, Result};
use crate::slc::SlcImage;
use crate::synth::{corrupt, derive_seed, sample_corruption, DatasetManifest, Rng, Split};

const STREAM_INIT: u64 = 10;
const STREAM_SHUFFLE: u64 = 11;
const STREAM_AUGMENT: u64 = 12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
    /// Draw a new corruption for every training image each epoch instead of
    /// reusing the stored corrupted file.
    pub fresh_corruption_per_epoch: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 32,
            learning_rate: 1e-2,
            epochs: 200,
            seed: 0,
            fresh_corruption_per_epoch: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::InvalidParameter("batch size and epochs must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainHistory {
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    /// Epoch (0-based) whose parameters were kept.
    pub selected_epoch: usize,
}

impl TrainHistory {
    pub fn best_val_loss(&self) -> f64 {
        self.val_loss[self.selected_epoch]
    }

    /// `epoch,train_loss,val_loss,selected`, one row per epoch.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("epoch,train_loss,val_loss,selected\n");
        for (e, (t, v)) in self.train_loss.iter().zip(&self.val_loss).enumerate() {
            let _ = writeln!(out, "{e},{t},{v},{}", u8::from(e == self.selected_epoch));
        }
        out
    }
}

/// In-memory training material.
#[derive(Clone, Debug)]
pub struct TrainingData {
    pub train_ground_truth: Vec<SlcImage>,
    pub train_corrupted: Vec<SlcImage>,
    pub val_corrupted: Vec<SlcImage>,
}

impl TrainingData {
    pub fn from_manifest(manifest: &DatasetManifest) -> Result<Self> {
        let load = |split: Split, gt: bool| -> Result<Vec<SlcImage>> {
            manifest
                .split(split)
                .map(|r| {
                    if gt {
                        manifest.load_ground_truth(r)
                    } else {
                        manifest.load_corrupted(r)
                    }
                })
                .collect()
        };
        Ok(Self {
            train_ground_truth: load(Split::Train, true)?,
            train_corrupted: load(Split::Train, false)?,
            val_corrupted: load(Split::Val, false)?,
        })
    }
}

/// Mean pipeline loss over prepared inputs.
pub fn mean_loss(inputs: &[PreparedInput], params: &RegressorParams) -> Result<f64> {
    let losses = inputs
        .par_iter()
        .map(|x| x.loss(params))
        .collect::<Result<Vec<f64>>>()?;
    Ok(losses.iter().sum::<f64>() / losses.len() as f64)
}

pub fn prepare_all(images: &[SlcImage]) -> Result<Vec<PreparedInput>> {
    images.par_iter().map(PreparedInput::new).collect()
}

/// Mean loss and mean gradient over a batch, summed in batch order.
pub fn batch_gradient<B: Borrow<PreparedInput> + Sync>(
    batch: &[B],
    params: &RegressorParams,
) -> Result<(f64, RegressorParams)> {
    let per_example = batch
        .par_iter()
        .map(|x| x.borrow().backward(params))
        .collect::<Result<Vec<_>>>()?;
    let mut grad = RegressorParams::zeros();
    let mut loss = 0.0;
    for (l, g) in &per_example {
        loss += l;
        grad.axpy(1.0, g);
    }
    let n = batch.len() as f64;
    grad.scale(1.0 / n);
    Ok((loss / n, grad))
}

/// Plain mini-batch SGD: `Θ ← Θ − lr · mean batch gradient`.
pub fn sgd_step<B: Borrow<PreparedInput> + Sync>(
    params: &mut RegressorParams,
    batch: &[B],
    lr: f64,
) -> Result<f64> {
    let (loss, grad) = batch_gradient(batch, params)?;
    params.axpy(-lr, &grad);
    Ok(loss)
}

pub fn train(manifest: &DatasetManifest, cfg: &TrainConfig) -> Result<(RegressorParams, TrainHistory)> {
    train_with_progress(&TrainingData::from_manifest(manifest)?, cfg, |_, _, _| {})
}

/// Trains from `RegressorParams::init` and keeps the parameters with the
/// lowest validation loss (earliest on ties). `on_epoch` receives
/// `(epoch, train_loss, val_loss)`.
pub fn train_with_progress(
    data: &TrainingData,
    cfg: &TrainConfig,
    on_epoch: impl FnMut(usize, f64, f64),
) -> Result<(RegressorParams, TrainHistory)> {
    train_from(RegressorParams::init(derive_seed(cfg.seed, 0, STREAM_INIT)), data, cfg, on_epoch)
}

/// As [`train_with_progress`], starting from the given parameters.
pub fn train_from(
    mut params: RegressorParams,
    data: &TrainingData,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(usize, f64, f64),
) -> Result<(RegressorParams, TrainHistory)> {
    cfg.validate()?;
    let n = data.train_ground_truth.len();
    if n == 0 || data.val_corrupted.is_empty() {
        return Err(Error::Manifest("training needs non-empty train and val splits".into()));
    }
    if data.train_corrupted.len() != n {
        return Err(Error::Shape {
            expected: format!("{n} corrupted training images"),
            actual: data.train_corrupted.len().to_string(),
        });
    }

    let mut history = TrainHistory {
        train_loss: Vec::with_capacity(cfg.epochs),
        val_loss: Vec::with_capacity(cfg.epochs),
        selected_epoch: 0,
    };
    let val = prepare_all(&data.val_corrupted)?;
    let fixed_train = if cfg.fresh_corruption_per_epoch {
        Vec::new()
    } else {
        prepare_all(&data.train_corrupted)?
    };
    let mut best = params.clone();
    for epoch in 0..cfg.epochs {
        let fresh: Vec<PreparedInput> = if cfg.fresh_corruption_per_epoch {
            let base = derive_seed(cfg.seed, epoch as u64, STREAM_AUGMENT);
            data.train_ground_truth
                .par_iter()
                .enumerate()
                .map(|(i, g)| {
                    let c = sample_corruption(g.size(), derive_seed(base, i as u64, 0));
                    PreparedInput::new(&corrupt(g, &c.realized)?)
                })
                .collect::<Result<_>>()?
        } else {
            Vec::new()
        };
        let inputs = if cfg.fresh_corruption_per_epoch { &fresh } else { &fixed_train };
        let mut order: Vec<usize> = (0..n).collect();
        Rng::new(derive_seed(cfg.seed, epoch as u64, STREAM_SHUFFLE)).shuffle(&mut order);

        let mut total = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&PreparedInput> = chunk.iter().map(|&i| &inputs[i]).collect();
            let loss = sgd_step(&mut params, &batch, cfg.learning_rate);
            let loss = match loss {
                Ok(l) if l.is_finite() && params.is_finite() => l,
                Ok(_) | Err(Error::NonFinite(_)) => return Err(Error::TrainingDivergence { epoch }),
                Err(e) => return Err(e),
            };
            total += loss * chunk.len() as f64;
        }
        let train_loss = total / n as f64;
        let val_loss = match mean_loss(&val, &params) {
            Ok(v) if v.is_finite() => v,
            Ok(_) | Err(Error::NonFinite(_)) => return Err(Error::TrainingDivergence { epoch }),
            Err(e) => return Err(e),
        };
        if epoch == 0 || val_loss < history.best_val_loss() {
            history.selected_epoch = epoch;
            best = params.clone();
        }
        history.train_loss.push(train_loss);
        history.val_loss.push(val_loss);
        on_epoch(epoch, train_loss, val_loss);
    }
    Ok((best, history))
}
