//! Adversarial training for the ESRGAN-lite generator.
//!
//! Alternating updates: the discriminator minimizes
//! softplus(-D(real)) + softplus(D(fake)), the generator minimizes
//! lambda_pix·L1 + lambda_adv·softplus(-D(fake)) (the non-saturating form).
//! The generator's adversarial gradient is chained across two graphs: the
//! discriminator graph yields dLoss/dFake, which is injected into the
//! generator graph as a linear functional. The checkpoint keeps the
//! generator only; the discriminator never reaches evaluation.

use std::time::Instant;

use ndarray::ArrayD;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::autodiff::{Graph, Params};
use crate::datagen::derive_seed;
use crate::grid::GridField;
use crate::grid::PairedDataset;
use crate::models::baselines::Discriminator;
use crate::models::{Family, Model, ModelSpec};
use crate::{Error, Result};

use super::adam::{lr_at_epoch, AdamW};
use super::{batch_order, epoch_items, normalized_batch, physical_mse, TrainConfig, TrainReport};

pub const LAMBDA_PIX: f64 = 1.0;
pub const DEFAULT_LAMBDA_ADV: f64 = 5e-3;

/// Adversarial training; returns the generator and its report.
pub fn train_gan(
    gen_spec: &ModelSpec,
    train_ds: &PairedDataset,
    val_ds: Option<&PairedDataset>,
    cfg: &TrainConfig,
    lambda_adv: f64,
) -> Result<(Model, TrainReport)> {
    cfg.validate()?;
    if gen_spec.family != Family::EsrganLite {
        return Err(Error::validation(
            "adversarial training requires the esrgan_lite generator family",
        ));
    }
    if gen_spec.train_factor != train_ds.factor {
        return Err(Error::validation(format!(
            "generator train_factor {} does not match dataset factor {}",
            gen_spec.train_factor, train_ds.factor
        )));
    }
    let start = Instant::now();
    // Generator init shares the supervised path's stream so a zero
    // adversarial weight reproduces pure L1 training; the discriminator has
    // its own stream.
    let mut gen = Model::build(gen_spec, cfg.seed, None)?;
    let mut d_params = Params::new();
    let mut d_rng = ChaCha20Rng::seed_from_u64(derive_seed(cfg.seed, "disc_init"));
    let disc = Discriminator::new(&mut d_params, &mut d_rng, gen_spec.in_channels);

    let mut opt_g = AdamW::new(&gen.params, cfg.weight_decay);
    let mut opt_d = AdamW::new(&d_params, cfg.weight_decay);
    let stats = train_ds.stats.clone();

    let mut train_loss = Vec::with_capacity(cfg.epochs);
    let mut val_mse = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, usize, Params)> = None;

    for epoch in 0..cfg.epochs {
        let lr = lr_at_epoch(cfg.lr, cfg.lr_gamma, cfg.lr_step, epoch);
        let items = epoch_items(train_ds, cfg, epoch)?;
        let batches = batch_order(&items, cfg, epoch)?;
        let mut epoch_l1 = 0.0;
        for batch in &batches {
            let lr_fields: Vec<&GridField> = batch.iter().map(|&i| &items[i].lr).collect();
            let hr_fields: Vec<&GridField> = batch.iter().map(|&i| &items[i].hr).collect();
            let x = normalized_batch(&lr_fields, &stats);
            let y = normalized_batch(&hr_fields, &stats);
            let dx_km = lr_fields[0].dx_km;

            // Generator forward once; its output value feeds both updates.
            let mut g_graph = Graph::new();
            let xv = g_graph.input(x);
            let yv = g_graph.input(y.clone());
            let fake = gen.forward_train(&mut g_graph, xv, dx_km)?;
            let fake_value = g_graph.value(fake).clone();

            let mut adv_grad: Option<ArrayD<f64>> = None;
            if lambda_adv != 0.0 {
                // Discriminator step on the detached fake batch.
                let mut d_graph = Graph::new();
                let real_in = d_graph.input(y.clone());
                let fake_in = d_graph.input(fake_value.clone());
                let logits_real = disc.forward(&mut d_graph, &d_params, real_in);
                let logits_fake = disc.forward(&mut d_graph, &d_params, fake_in);
                let neg_real = d_graph.scale(logits_real, -1.0);
                let sp_real = d_graph.softplus(neg_real);
                let sp_fake = d_graph.softplus(logits_fake);
                let lr_term = d_graph.mean_all(sp_real);
                let lf_term = d_graph.mean_all(sp_fake);
                let d_loss = d_graph.add(lr_term, lf_term);
                let d_loss_val = d_graph.scalar(d_loss);
                if !d_loss_val.is_finite() {
                    return Err(Error::Diverged(format!(
                        "non-finite discriminator loss at epoch {epoch}"
                    )));
                }
                let d_grads = d_graph.backward(d_loss, &d_params);
                opt_d.step(&mut d_params, &d_grads, lr);

                // Generator's adversarial gradient through the updated
                // discriminator.
                let mut a_graph = Graph::new();
                let fake_in = a_graph.input(fake_value.clone());
                let logits = disc.forward(&mut a_graph, &d_params, fake_in);
                let neg = a_graph.scale(logits, -1.0);
                let sp = a_graph.softplus(neg);
                let adv = a_graph.mean_all(sp);
                let (_, input_grads) =
                    a_graph.backward_detailed(adv, &d_params, &[fake_in]);
                adv_grad = Some(input_grads[0].clone().ok_or_else(|| {
                    Error::validation("adversarial gradient did not reach the fake batch")
                })?);
            }

            // Generator update: lambda_pix * L1 + lambda_adv * <fake, g_adv>.
            let l1 = g_graph.l1(fake, yv);
            let l1_val = g_graph.scalar(l1);
            if !l1_val.is_finite() {
                return Err(Error::Diverged(format!(
                    "non-finite generator loss at epoch {epoch}"
                )));
            }
            let pix = g_graph.scale(l1, LAMBDA_PIX);
            let g_loss = match adv_grad {
                Some(ga) => {
                    let ga_in = g_graph.input(ga);
                    let prod = g_graph.mul(fake, ga_in);
                    let inj = g_graph.sum_all(prod);
                    let adv_term = g_graph.scale(inj, lambda_adv);
                    g_graph.add(pix, adv_term)
                }
                None => pix,
            };
            let g_grads = g_graph.backward(g_loss, &gen.params);
            opt_g.step(&mut gen.params, &g_grads, lr);
            epoch_l1 += l1_val;
        }
        epoch_l1 /= batches.len() as f64;
        train_loss.push(epoch_l1);

        let score = match val_ds {
            Some(val) => {
                let v = physical_mse(&gen, val, train_ds.factor)?;
                val_mse.push(v);
                v
            }
            None => epoch_l1,
        };
        if best.as_ref().map(|(b, _, _)| score < *b).unwrap_or(true) {
            best = Some((score, epoch, gen.params.clone()));
        }
    }

    let (_, best_epoch, best_params) = best.expect("at least one epoch");
    gen.params = best_params;
    let report = TrainReport {
        train_loss,
        val_mse,
        best_epoch,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        param_count: gen.param_count(),
        config: cfg.clone(),
    };
    Ok((gen, report))
}
