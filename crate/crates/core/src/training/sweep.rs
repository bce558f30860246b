//! Hyperparameter sweep drivers: frequency-cutoff (modes) sweeps and
//! feature-extractor block sweeps. Each entry trains one model under the
//! shared budget and reports train/val/test MSE plus the test-set mean
//! spectrum of its predictions.

use serde::{Deserialize, Serialize};

use crate::evaluation::spectrum::{field_spectrum, mean_spectrum, SpectrumCurve};
use crate::evaluation::predict_field;
use crate::grid::PairedDataset;
use crate::models::{Extractor, ModelSpec, PipelineSpec, Placement, PluginRegistry};
use crate::{Error, Result};

use super::{physical_mse, train, TrainConfig};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepRow {
    /// The varied setting, e.g. "modes=8" or "rrdb x12".
    pub label: String,
    pub train_mse: f64,
    pub val_mse: f64,
    pub test_mse: f64,
    pub param_count: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    /// Per-entry test-set mean prediction spectrum, labelled as in `rows`,
    /// with the shared truth spectrum under the label "truth".
    pub spectra: Vec<(String, SpectrumCurve)>,
}

fn run_one(
    spec: &ModelSpec,
    label: String,
    train_ds: &PairedDataset,
    val_ds: &PairedDataset,
    test_ds: &PairedDataset,
    cfg: &TrainConfig,
    registry: Option<&PluginRegistry>,
) -> Result<(SweepRow, SpectrumCurve)> {
    let pipeline = PipelineSpec {
        placement: Placement::PreOperator,
        train_factor: spec.train_factor,
        eval_factor: spec.train_factor,
    };
    let (model, _report) = train(spec, &pipeline, train_ds, Some(val_ds), cfg, registry)?;
    let train_mse = physical_mse(&model, train_ds, train_ds.factor)?;
    let val_mse = physical_mse(&model, val_ds, val_ds.factor)?;
    let test_mse = physical_mse(&model, test_ds, test_ds.factor)?;
    let mut curves = Vec::with_capacity(test_ds.pairs.len());
    for pair in &test_ds.pairs {
        let pred = predict_field(&model, &pair.lr, &train_ds.stats, &pipeline)?;
        curves.push(field_spectrum(&pred)?);
    }
    let spectrum = mean_spectrum(&curves)?;
    Ok((
        SweepRow {
            label,
            train_mse,
            val_mse,
            test_mse,
            param_count: model.param_count(),
        },
        spectrum,
    ))
}

fn truth_spectrum(test_ds: &PairedDataset) -> Result<SpectrumCurve> {
    let curves: Result<Vec<_>> = test_ds.pairs.iter().map(|p| field_spectrum(&p.hr)).collect();
    mean_spectrum(&curves?)
}

/// Train one model per retained-mode count and tabulate the MSEs.
pub fn sweep_modes(
    base_spec: &ModelSpec,
    modes_list: &[usize],
    train_ds: &PairedDataset,
    val_ds: &PairedDataset,
    test_ds: &PairedDataset,
    cfg: &TrainConfig,
    registry: Option<&PluginRegistry>,
) -> Result<SweepResult> {
    if modes_list.is_empty() {
        return Err(Error::validation("empty modes list"));
    }
    let band = train_ds.pairs[0].hr.height().min(train_ds.pairs[0].hr.width()) / 2;
    for &m in modes_list {
        if m == 0 || m > band {
            return Err(Error::validation(format!(
                "modes {m} outside the training band (max {band})"
            )));
        }
    }
    let mut rows = Vec::new();
    let mut spectra = vec![("truth".to_string(), truth_spectrum(test_ds)?)];
    for &modes in modes_list {
        let mut spec = base_spec.clone();
        spec.modes = modes;
        let label = format!("modes={modes}");
        let (row, spectrum) =
            run_one(&spec, label.clone(), train_ds, val_ds, test_ds, cfg, registry)?;
        rows.push(row);
        spectra.push((label, spectrum));
    }
    Ok(SweepResult { rows, spectra })
}

/// Train one model per extractor-depth entry; `extractors` selects the
/// feature-extractor kinds to compare under the same budget.
pub fn sweep_extractor(
    base_spec: &ModelSpec,
    blocks_list: &[usize],
    extractors: &[Extractor],
    train_ds: &PairedDataset,
    val_ds: &PairedDataset,
    test_ds: &PairedDataset,
    cfg: &TrainConfig,
    registry: Option<&PluginRegistry>,
) -> Result<SweepResult> {
    if blocks_list.is_empty() || extractors.is_empty() {
        return Err(Error::validation("empty extractor sweep"));
    }
    let mut rows = Vec::new();
    let mut spectra = vec![("truth".to_string(), truth_spectrum(test_ds)?)];
    for &extractor in extractors {
        for &blocks in blocks_list {
            let mut spec = base_spec.clone();
            spec.extractor = extractor;
            spec.n_extractor_blocks = blocks;
            let kind = match extractor {
                Extractor::Rrdb => "rrdb",
                Extractor::Rstb => "rstb",
                Extractor::Passthrough => "passthrough",
            };
            let label = format!("{kind} x{blocks}");
            let (row, spectrum) =
                run_one(&spec, label.clone(), train_ds, val_ds, test_ds, cfg, registry)?;
            rows.push(row);
            spectra.push((label, spectrum));
        }
    }
    Ok(SweepResult { rows, spectra })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::Family;
    use crate::training::test_support::tiny_dataset;
    use crate::training::Loss;

    fn sweep_cfg() -> TrainConfig {
        TrainConfig {
            lr: 2e-3,
            batch_size: 2,
            weight_decay: 1e-4,
            lr_step: 60,
            lr_gamma: 0.5,
            epochs: 1,
            loss: Loss::Mse,
            seed: 3,
            balance_regions: false,
            patches_per_snapshot: 1,
            hr_patch: 0,
            workers: 1,
        }
    }

    fn fno_spec() -> ModelSpec {
        let mut spec = ModelSpec::new(Family::Fno);
        spec.width = 6;
        spec.n_blocks = 1;
        spec.in_channels = 1;
        spec.train_factor = 4;
        spec
    }

    #[test]
    fn single_entry_matches_direct_train() {
        let train_ds = tiny_dataset(2, 16, 4, 21, 1);
        let val_ds = tiny_dataset(2, 16, 4, 22, 1);
        let test_ds = tiny_dataset(2, 16, 4, 23, 1);
        let mut spec = fno_spec();
        let cfg = sweep_cfg();
        let result = sweep_modes(&spec, &[4], &train_ds, &val_ds, &test_ds, &cfg, None).unwrap();
        assert_eq!(result.rows.len(), 1);
        // Direct train with the same settings reproduces the same test MSE.
        spec.modes = 4;
        let pipeline = PipelineSpec {
            placement: Placement::PreOperator,
            train_factor: 4,
            eval_factor: 4,
        };
        let (model, _) = train(&spec, &pipeline, &train_ds, Some(&val_ds), &cfg, None).unwrap();
        let direct = physical_mse(&model, &test_ds, 4).unwrap();
        assert!(
            (result.rows[0].test_mse - direct).abs() < 1e-12,
            "sweep row must equal a direct train call"
        );
    }

    #[test]
    fn rejects_modes_outside_band() {
        let train_ds = tiny_dataset(2, 16, 4, 24, 1);
        let err = sweep_modes(
            &fno_spec(),
            &[64],
            &train_ds,
            &train_ds,
            &train_ds,
            &sweep_cfg(),
            None,
        );
        assert!(err.is_err(), "modes beyond the band must be rejected");
    }

    #[test]
    fn extractor_rows_share_budget() {
        let train_ds = tiny_dataset(2, 16, 4, 25, 1);
        let mut spec = ModelSpec::new(Family::Dfno);
        spec.width = 4;
        spec.n_blocks = 1;
        spec.modes = 2;
        spec.in_channels = 1;
        spec.train_factor = 4;
        let result = sweep_extractor(
            &spec,
            &[6],
            &[Extractor::Rrdb, Extractor::Rstb],
            &train_ds,
            &train_ds,
            &train_ds,
            &sweep_cfg(),
            None,
        )
        .unwrap();
        assert_eq!(result.rows.len(), 2, "rrdb and rstb rows both present");
        assert!(result.rows[0].label.contains("rrdb"));
        assert!(result.rows[1].label.contains("rstb"));
        // Truth plus one spectrum per row.
        assert_eq!(result.spectra.len(), 3);
    }
}
