//! Patch-based supervised training with the step-decay Adam regime, plus
//! adversarial training for the ESRGAN-lite generator and the sweep drivers.
//!
//! Training is fully deterministic in the config seed: parameter
//! initialization, per-epoch patch resampling and batch order all derive
//! from it, and every numeric kernel is sequential.

pub mod adam;
pub mod gan;
pub mod sweep;

use std::time::Instant;

use ndarray::{ArrayD, IxDyn};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::Graph;
use crate::datagen::{derive_seed, extract_patches};
use crate::grid::{GridField, NormStats, PairedDataset};
use crate::models::{Model, ModelSpec, PipelineSpec, PluginRegistry};
use crate::{Error, Result};

use adam::{lr_at_epoch, AdamW};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Loss {
    Mse,
    /// Pure L1 supervision; the controlled reference for the adversarial
    /// regime (train_gan with zero adversarial weight reduces to this).
    L1,
    Gan,
}

fn default_lr() -> f64 {
    1e-4
}
fn default_batch() -> usize {
    32
}
fn default_wd() -> f64 {
    1e-4
}
fn default_lr_step() -> usize {
    60
}
fn default_lr_gamma() -> f64 {
    0.5
}
fn default_epochs() -> usize {
    100
}
fn default_loss() -> Loss {
    Loss::Mse
}
fn default_patches() -> usize {
    8
}
fn default_workers() -> usize {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    #[serde(default = "default_lr")]
    pub lr: f64,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    #[serde(default = "default_wd")]
    pub weight_decay: f64,
    #[serde(default = "default_lr_step")]
    pub lr_step: usize,
    #[serde(default = "default_lr_gamma")]
    pub lr_gamma: f64,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_loss")]
    pub loss: Loss,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub balance_regions: bool,
    /// Patches resampled from every snapshot each epoch.
    #[serde(default = "default_patches")]
    pub patches_per_snapshot: usize,
    /// HR patch size; 0 trains on full snapshots.
    #[serde(default)]
    pub hr_patch: usize,
    /// Recorded worker count. Compute kernels are sequential, so results do
    /// not depend on it; determinism is only guaranteed at 1.
    #[serde(default = "default_workers")]
    pub workers: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults")
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::validation("lr must be positive"));
        }
        if self.batch_size == 0 {
            return Err(Error::validation("batch_size must be >= 1"));
        }
        if self.epochs == 0 {
            return Err(Error::validation("epochs must be >= 1"));
        }
        if !(self.lr_gamma.is_finite() && self.lr_gamma > 0.0) {
            return Err(Error::validation("lr_gamma must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean batch loss per epoch, normalized space.
    pub train_loss: Vec<f64>,
    /// Validation MSE per epoch, physical units after denormalization.
    pub val_mse: Vec<f64>,
    pub best_epoch: usize,
    pub wall_clock_seconds: f64,
    pub param_count: usize,
    pub config: TrainConfig,
}

/// One training item: aligned patch pair plus its source region.
pub(crate) struct PatchItem {
    pub lr: GridField,
    pub hr: GridField,
    pub region_id: u32,
}

/// Normalized (B,C,H,W) tensor from a set of fields.
pub fn normalized_batch(fields: &[&GridField], stats: &NormStats) -> ArrayD<f64> {
    let (c, h, w) = fields[0].shape();
    let mut out = ArrayD::zeros(IxDyn(&[fields.len(), c, h, w]));
    for (b, f) in fields.iter().enumerate() {
        for ch in 0..c {
            let (m, s) = (stats.mean[ch], stats.std[ch]);
            for y in 0..h {
                for x in 0..w {
                    out[[b, ch, y, x]] = (f.data[[ch, y, x]] as f64 - m) / s;
                }
            }
        }
    }
    out
}

/// Resample the epoch's training items.
pub(crate) fn epoch_items(
    ds: &PairedDataset,
    cfg: &TrainConfig,
    epoch: usize,
) -> Result<Vec<PatchItem>> {
    let mut items = Vec::new();
    if cfg.hr_patch == 0 {
        let shape0 = ds.pairs[0].hr.shape();
        for (i, p) in ds.pairs.iter().enumerate() {
            if p.hr.shape() != shape0 {
                return Err(Error::validation(format!(
                    "pair {i} has a different size; set hr_patch for mixed-size datasets"
                )));
            }
            items.push(PatchItem {
                lr: p.lr.clone(),
                hr: p.hr.clone(),
                region_id: p.region_id,
            });
        }
    } else {
        for (i, p) in ds.pairs.iter().enumerate() {
            let seed = derive_seed(cfg.seed, &format!("patch/{epoch}/{i}"));
            for (lr, hr) in
                extract_patches(&p.lr, &p.hr, cfg.patches_per_snapshot, cfg.hr_patch, seed)?
            {
                items.push(PatchItem {
                    lr,
                    hr,
                    region_id: p.region_id,
                });
            }
        }
    }
    Ok(items)
}

/// Batch index order for one epoch. With region balancing, every batch draws
/// equally from each region (regions cycle when exhausted).
pub(crate) fn batch_order(
    items: &[PatchItem],
    cfg: &TrainConfig,
    epoch: usize,
) -> Result<Vec<Vec<usize>>> {
    let mut rng = ChaCha20Rng::seed_from_u64(derive_seed(cfg.seed, &format!("order/{epoch}")));
    let n_batches = items.len() / cfg.batch_size;
    if n_batches == 0 {
        return Err(Error::validation(format!(
            "batch size {} exceeds the {} items available per epoch",
            cfg.batch_size,
            items.len()
        )));
    }
    let mut regions: Vec<u32> = items.iter().map(|i| i.region_id).collect();
    regions.sort_unstable();
    regions.dedup();
    if cfg.balance_regions && regions.len() > 1 {
        if cfg.batch_size % regions.len() != 0 {
            return Err(Error::validation(format!(
                "balance_regions needs batch_size divisible by the {} regions",
                regions.len()
            )));
        }
        let per_region = cfg.batch_size / regions.len();
        let mut streams: Vec<Vec<usize>> = regions
            .iter()
            .map(|r| {
                let mut ids: Vec<usize> = items
                    .iter()
                    .enumerate()
                    .filter(|(_, it)| it.region_id == *r)
                    .map(|(i, _)| i)
                    .collect();
                ids.shuffle(&mut rng);
                ids
            })
            .collect();
        let mut cursors = vec![0usize; streams.len()];
        let mut batches = Vec::with_capacity(n_batches);
        for _ in 0..n_batches {
            let mut batch = Vec::with_capacity(cfg.batch_size);
            for (stream, cursor) in streams.iter_mut().zip(cursors.iter_mut()) {
                for _ in 0..per_region {
                    batch.push(stream[*cursor % stream.len()]);
                    *cursor += 1;
                }
            }
            batches.push(batch);
        }
        Ok(batches)
    } else {
        let mut ids: Vec<usize> = (0..items.len()).collect();
        ids.shuffle(&mut rng);
        Ok(ids
            .chunks_exact(cfg.batch_size)
            .take(n_batches)
            .map(|c| c.to_vec())
            .collect())
    }
}

/// Physical-unit MSE of a model over a dataset at the given factor.
pub fn physical_mse(model: &Model, ds: &PairedDataset, factor: usize) -> Result<f64> {
    let stats = &ds.stats;
    let mut sum = 0.0;
    let mut count = 0.0;
    for pair in &ds.pairs {
        let x = normalized_batch(&[&pair.lr], stats);
        let mut g = Graph::new();
        let xv = g.input(x);
        let y = model.forward_at_factor(&mut g, xv, factor, pair.lr.dx_km)?;
        let pred = g.value(y);
        let (c, h, w) = pair.hr.shape();
        if pred.shape() != [1, c, h, w] {
            return Err(Error::shape(format!(
                "prediction {:?} does not match target (1,{c},{h},{w})",
                pred.shape()
            )));
        }
        for ch in 0..c {
            let (m, s) = (stats.mean[ch], stats.std[ch]);
            for yy in 0..h {
                for xx in 0..w {
                    let phys = pred[[0, ch, yy, xx]] * s + m;
                    let d = phys - pair.hr.data[[ch, yy, xx]] as f64;
                    sum += d * d;
                    count += 1.0;
                }
            }
        }
    }
    Ok(sum / count)
}

/// Supervised training: MSE (or L1) on normalized targets, AdamW with the
/// step schedule, per-epoch patch resampling, best-validation checkpointing.
pub fn train(
    spec: &ModelSpec,
    pipeline: &PipelineSpec,
    train_ds: &PairedDataset,
    val_ds: Option<&PairedDataset>,
    cfg: &TrainConfig,
    registry: Option<&PluginRegistry>,
) -> Result<(Model, TrainReport)> {
    cfg.validate()?;
    pipeline.validate()?;
    if cfg.loss == Loss::Gan {
        return Err(Error::validation(
            "loss=gan is handled by train_gan, not train",
        ));
    }
    if pipeline.train_factor != train_ds.factor {
        return Err(Error::validation(format!(
            "pipeline train_factor {} does not match dataset factor {}",
            pipeline.train_factor, train_ds.factor
        )));
    }
    if spec.train_factor != train_ds.factor {
        return Err(Error::validation(format!(
            "model train_factor {} does not match dataset factor {}",
            spec.train_factor, train_ds.factor
        )));
    }
    let start = Instant::now();
    let mut model = Model::build(spec, cfg.seed, registry)?;
    let mut opt = AdamW::new(&model.params, cfg.weight_decay);
    let stats = train_ds.stats.clone();

    let mut train_loss = Vec::with_capacity(cfg.epochs);
    let mut val_mse = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, usize, crate::autodiff::Params)> = None;

    for epoch in 0..cfg.epochs {
        let lr = lr_at_epoch(cfg.lr, cfg.lr_gamma, cfg.lr_step, epoch);
        let items = epoch_items(train_ds, cfg, epoch)?;
        let batches = batch_order(&items, cfg, epoch)?;
        let mut epoch_loss = 0.0;
        for batch in &batches {
            let lr_fields: Vec<&GridField> = batch.iter().map(|&i| &items[i].lr).collect();
            let hr_fields: Vec<&GridField> = batch.iter().map(|&i| &items[i].hr).collect();
            let x = normalized_batch(&lr_fields, &stats);
            let y = normalized_batch(&hr_fields, &stats);
            let dx_km = lr_fields[0].dx_km;
            let mut g = Graph::new();
            let xv = g.input(x);
            let yv = g.input(y);
            let pred = model.forward_train(&mut g, xv, dx_km)?;
            let loss = match cfg.loss {
                Loss::Mse => g.mse(pred, yv),
                Loss::L1 => g.l1(pred, yv),
                Loss::Gan => unreachable!(),
            };
            let loss_val = g.scalar(loss);
            if !loss_val.is_finite() {
                return Err(Error::Diverged(format!(
                    "non-finite loss {loss_val} at epoch {epoch}"
                )));
            }
            let grads = g.backward(loss, &model.params);
            opt.step(&mut model.params, &grads, lr);
            epoch_loss += loss_val;
        }
        epoch_loss /= batches.len() as f64;
        train_loss.push(epoch_loss);

        let score = match val_ds {
            Some(val) => {
                let v = physical_mse(&model, val, train_ds.factor)?;
                val_mse.push(v);
                v
            }
            None => epoch_loss,
        };
        if !score.is_finite() {
            return Err(Error::Diverged(format!(
                "non-finite validation score at epoch {epoch}"
            )));
        }
        if best.as_ref().map(|(b, _, _)| score < *b).unwrap_or(true) {
            best = Some((score, epoch, model.params.clone()));
        }
    }

    let (_, best_epoch, best_params) = best.expect("at least one epoch");
    model.params = best_params;
    let report = TrainReport {
        train_loss,
        val_mse,
        best_epoch,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        param_count: model.param_count(),
        config: cfg.clone(),
    };
    Ok((model, report))
}
