//! Evaluation harness: pixel metrics, kinetic-energy spectra, and the
//! standard/zero-shot pipeline wirings.
//!
//! Wiring is a pure function of (family, placement): operator pipelines
//! re-parameterize their internal interpolation to the evaluation factor;
//! learned-upsampler baselines run at their training factor and the output
//! is bicubically interpolated the rest of the way in physical units;
//! bicubic interpolates directly. Metrics are computed in physical units
//! after denormalization.

pub mod plot;
pub mod report;
pub mod spectrum;

use ndarray::Array3;
use serde::{Deserialize, Serialize};

use crate::autodiff::Graph;
use crate::grid::{GridField, NormStats, PairedDataset};
use crate::models::{Family, Model, PipelineSpec, Placement};
use crate::regrid::{bicubic_resize_array, Scale};
use crate::training::normalized_batch;
use crate::{Error, Result};

use spectrum::{field_spectrum, mean_spectrum, SpectrumCurve};

/// Per-channel pixel metrics of one snapshot or an aggregate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChannelMetrics {
    pub mse: f64,
    pub mae: f64,
    /// L-infinity: maximum absolute pixel error.
    pub linf: f64,
    pub psnr: f64,
}

/// Metrics aggregated over channels and snapshots.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsReport {
    pub per_channel: Vec<ChannelMetrics>,
    pub mse: f64,
    pub mae: f64,
    pub linf: f64,
    pub psnr: f64,
    pub n_snapshots: usize,
    pub eval_factor: usize,
}

pub const PSNR_CAP_DB: f64 = 100.0;

fn psnr(mse: f64, range: f64) -> f64 {
    if mse < range * range * 1e-10 {
        PSNR_CAP_DB
    } else {
        10.0 * (range * range / mse).log10()
    }
}

/// Pixel metrics for one prediction/truth pair with per-channel data ranges.
pub fn pixel_metrics(
    pred: &GridField,
    truth: &GridField,
    data_range: &[f64],
) -> Result<Vec<ChannelMetrics>> {
    let (c, h, w) = truth.shape();
    if pred.shape() != (c, h, w) {
        return Err(Error::shape(format!(
            "prediction {:?} vs truth {:?}",
            pred.shape(),
            truth.shape()
        )));
    }
    if data_range.len() != c {
        return Err(Error::validation("data_range length must match channels"));
    }
    if !data_range.iter().all(|r| *r > 0.0) {
        return Err(Error::validation("data_range must be positive"));
    }
    let mut out = Vec::with_capacity(c);
    for ch in 0..c {
        let mut se = 0.0;
        let mut ae = 0.0;
        let mut linf = 0.0f64;
        for (p, t) in pred.channel(ch).iter().zip(truth.channel(ch).iter()) {
            let d = (*p as f64 - *t as f64).abs();
            se += d * d;
            ae += d;
            linf = linf.max(d);
        }
        let n = (h * w) as f64;
        let mse = se / n;
        out.push(ChannelMetrics {
            mse,
            mae: ae / n,
            linf,
            psnr: psnr(mse, data_range[ch]),
        });
    }
    Ok(out)
}

/// Order-independent accumulation of per-snapshot metrics: summed moments,
/// means taken at the end (IN enters as the mean of per-snapshot maxima).
#[derive(Debug, Clone, Default)]
pub struct MetricsAccumulator {
    sums: Vec<ChannelMetrics>,
    n: usize,
}

impl MetricsAccumulator {
    pub fn push(&mut self, snapshot: &[ChannelMetrics]) {
        if self.sums.is_empty() {
            self.sums = snapshot
                .iter()
                .map(|_| ChannelMetrics {
                    mse: 0.0,
                    mae: 0.0,
                    linf: 0.0,
                    psnr: 0.0,
                })
                .collect();
        }
        for (acc, s) in self.sums.iter_mut().zip(snapshot.iter()) {
            acc.mse += s.mse;
            acc.mae += s.mae;
            acc.linf += s.linf;
            acc.psnr += s.psnr;
        }
        self.n += 1;
    }

    pub fn finish(&self, eval_factor: usize) -> Result<MetricsReport> {
        if self.n == 0 {
            return Err(Error::validation("no snapshots accumulated"));
        }
        let n = self.n as f64;
        let per_channel: Vec<ChannelMetrics> = self
            .sums
            .iter()
            .map(|s| ChannelMetrics {
                mse: s.mse / n,
                mae: s.mae / n,
                linf: s.linf / n,
                psnr: s.psnr / n,
            })
            .collect();
        let c = per_channel.len() as f64;
        Ok(MetricsReport {
            mse: per_channel.iter().map(|m| m.mse).sum::<f64>() / c,
            mae: per_channel.iter().map(|m| m.mae).sum::<f64>() / c,
            linf: per_channel.iter().map(|m| m.linf).sum::<f64>() / c,
            psnr: per_channel.iter().map(|m| m.psnr).sum::<f64>() / c,
            per_channel,
            n_snapshots: self.n,
            eval_factor,
        })
    }
}

/// Per-channel (max - min) over the ground-truth fields of a split.
pub fn data_range(ds: &PairedDataset) -> Vec<f64> {
    let c = ds.n_channels();
    let mut lo = vec![f64::INFINITY; c];
    let mut hi = vec![f64::NEG_INFINITY; c];
    for p in &ds.pairs {
        for ch in 0..c {
            for &v in p.hr.channel(ch).iter() {
                lo[ch] = lo[ch].min(v as f64);
                hi[ch] = hi[ch].max(v as f64);
            }
        }
    }
    lo.iter()
        .zip(hi.iter())
        .map(|(l, h)| (h - l).max(1e-12))
        .collect()
}

/// Concrete evaluation wiring selected from (family, placement).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Wiring {
    /// Parameter-free interpolation straight to the evaluation factor.
    DirectInterp,
    /// Operator pipeline with the internal interpolation re-parameterized
    /// to the evaluation factor.
    OperatorAtEvalFactor,
    /// Learned upsampler at the training factor, then residual bicubic.
    UpsamplerThenResidual,
    /// Operator body at the input grid, bicubic afterwards (the post-model
    /// placement ablation for the vanilla FNO).
    FnoThenInterp,
    /// Operator pipeline at the training factor, then residual bicubic.
    OperatorThenResidual,
}

/// Pipeline selection table; pure in its inputs.
pub fn select_wiring(family: Family, placement: Placement) -> Result<Wiring> {
    use Family::*;
    use Placement::*;
    match (family, placement) {
        (Bicubic, _) => Ok(Wiring::DirectInterp),
        (Fno, PreOperator) => Ok(Wiring::OperatorAtEvalFactor),
        (Fno, PostModel) => Ok(Wiring::FnoThenInterp),
        (Dfno | DunoLite | Plugin, PreOperator) => Ok(Wiring::OperatorAtEvalFactor),
        (Dfno | DunoLite | Plugin, PostModel) => Ok(Wiring::OperatorThenResidual),
        (Srcnn | EdsrLite | EsrganLite | SwinirLite, PostModel) => {
            Ok(Wiring::UpsamplerThenResidual)
        }
        (Srcnn | EdsrLite | EsrganLite | SwinirLite, PreOperator) => Err(Error::contract(format!(
            "family {family} has no operator stage to re-parameterize; use post-model placement"
        ))),
    }
}

fn denorm_to_field(
    pred: &ndarray::ArrayD<f64>,
    stats: &NormStats,
    template: &GridField,
    out_dx: f64,
) -> Result<GridField> {
    let shape = pred.shape();
    let (c, h, w) = (shape[1], shape[2], shape[3]);
    let mut data = Array3::<f32>::zeros((c, h, w));
    for ch in 0..c {
        let (m, s) = (stats.mean[ch], stats.std[ch]);
        for y in 0..h {
            for x in 0..w {
                data[[ch, y, x]] = (pred[[0, ch, y, x]] * s + m) as f32;
            }
        }
    }
    GridField::new(data, out_dx, template.channels.clone())
}

/// Predict one physical-unit HR field from a physical-unit LR field.
pub fn predict_field(
    model: &Model,
    lr: &GridField,
    stats: &NormStats,
    pipeline: &PipelineSpec,
) -> Result<GridField> {
    pipeline.validate()?;
    let wiring = select_wiring(model.spec.family, pipeline.placement)?;
    let eval = pipeline.eval_factor;
    let train = pipeline.train_factor;
    match wiring {
        Wiring::DirectInterp => crate::regrid::bicubic_resize(lr, Scale::from_int(eval as u32)),
        Wiring::OperatorAtEvalFactor => {
            let x = normalized_batch(&[lr], stats);
            let mut g = Graph::new();
            let xv = g.input(x);
            let y = model.forward_at_factor(&mut g, xv, eval, lr.dx_km)?;
            denorm_to_field(g.value(y), stats, lr, lr.dx_km / eval as f64)
        }
        Wiring::UpsamplerThenResidual | Wiring::OperatorThenResidual => {
            let x = normalized_batch(&[lr], stats);
            let mut g = Graph::new();
            let xv = g.input(x);
            let y = model.forward_at_factor(&mut g, xv, train, lr.dx_km)?;
            let at_train = denorm_to_field(g.value(y), stats, lr, lr.dx_km / train as f64)?;
            let residual = eval / train;
            if residual == 1 {
                Ok(at_train)
            } else {
                crate::regrid::bicubic_resize(&at_train, Scale::from_int(residual as u32))
            }
        }
        Wiring::FnoThenInterp => {
            let x = normalized_batch(&[lr], stats);
            let mut g = Graph::new();
            let xv = g.input(x);
            let y = model.forward_fno_lr(&mut g, xv, lr.dx_km)?;
            let at_lr = denorm_to_field(g.value(y), stats, lr, lr.dx_km)?;
            crate::regrid::bicubic_resize(&at_lr, Scale::from_int(eval as u32))
        }
    }
}

/// Evaluation output: metrics plus the test-set mean spectra of prediction
/// and truth, and the high-wavenumber comparison flag.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalOutput {
    pub metrics: MetricsReport,
    pub pred_spectrum: SpectrumCurve,
    pub truth_spectrum: SpectrumCurve,
    /// True when the predicted mean spectrum sits below the truth on every
    /// bin of the top quartile of wavenumbers.
    pub high_k_underestimated: bool,
}

/// Standard or zero-shot evaluation of a model over a test split whose HR
/// grids sit at `pipeline.eval_factor` times the LR grids. Normalization
/// statistics come from training.
pub fn zero_shot_evaluate(
    model: &Model,
    stats: &NormStats,
    pipeline: &PipelineSpec,
    test_ds: &PairedDataset,
) -> Result<EvalOutput> {
    pipeline.validate()?;
    if test_ds.factor != pipeline.eval_factor {
        return Err(Error::validation(format!(
            "test pairs are at factor {}, pipeline expects {}",
            test_ds.factor, pipeline.eval_factor
        )));
    }
    if model.spec.family != Family::Bicubic && model.spec.train_factor != pipeline.train_factor {
        return Err(Error::contract(format!(
            "checkpoint was trained at factor {}, pipeline says {}",
            model.spec.train_factor, pipeline.train_factor
        )));
    }
    let ranges = data_range(test_ds);
    let mut acc = MetricsAccumulator::default();
    let mut pred_curves = Vec::with_capacity(test_ds.pairs.len());
    let mut truth_curves = Vec::with_capacity(test_ds.pairs.len());
    for pair in &test_ds.pairs {
        let pred = predict_field(model, &pair.lr, stats, pipeline)?;
        acc.push(&pixel_metrics(&pred, &pair.hr, &ranges)?);
        pred_curves.push(field_spectrum(&pred)?);
        truth_curves.push(field_spectrum(&pair.hr)?);
    }
    let metrics = acc.finish(pipeline.eval_factor)?;
    let pred_spectrum = mean_spectrum(&pred_curves)?;
    let truth_spectrum = mean_spectrum(&truth_curves)?;
    let k = pred_spectrum.k.len();
    let q3 = (3 * k) / 4;
    let high_k_underestimated =
        (q3..k).all(|i| pred_spectrum.energy[i] < truth_spectrum.energy[i]);
    Ok(EvalOutput {
        metrics,
        pred_spectrum,
        truth_spectrum,
        high_k_underestimated,
    })
}

/// Bicubic reference metrics over a split at its pairing factor.
pub fn bicubic_reference(test_ds: &PairedDataset) -> Result<MetricsReport> {
    let ranges = data_range(test_ds);
    let mut acc = MetricsAccumulator::default();
    for pair in &test_ds.pairs {
        let up = bicubic_resize_array(&pair.lr.data_f64(), pair.hr.height(), pair.hr.width())?;
        let pred = GridField::new(
            up.mapv(|v| v as f32),
            pair.hr.dx_km,
            pair.lr.channels.clone(),
        )?;
        acc.push(&pixel_metrics(&pred, &pair.hr, &ranges)?);
    }
    acc.finish(test_ds.factor)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::ChannelMeta;
    use ndarray::Array3;

    fn field(values: Array3<f32>) -> GridField {
        let c = values.dim().0;
        let meta = (0..c)
            .map(|i| ChannelMeta::new(format!("ch{i}"), "m/s"))
            .collect();
        GridField::new(values, 1.0, meta).unwrap()
    }

    #[test]
    fn identical_fields_cap_psnr() {
        let t = field(Array3::from_shape_fn((1, 8, 8), |(_, y, x)| {
            (y * 8 + x) as f32 * 0.1
        }));
        let m = pixel_metrics(&t, &t, &[10.0]).unwrap();
        assert_eq!(m[0].mse, 0.0);
        assert_eq!(m[0].mae, 0.0);
        assert_eq!(m[0].linf, 0.0);
        assert_eq!(m[0].psnr, PSNR_CAP_DB);
    }

    #[test]
    fn constant_offset_metrics() {
        let t = field(Array3::zeros((1, 8, 8)));
        let p = field(Array3::from_elem((1, 8, 8), 2.0));
        let m = pixel_metrics(&p, &t, &[10.0]).unwrap();
        assert!((m[0].mse - 4.0).abs() < 1e-9);
        assert!((m[0].mae - 2.0).abs() < 1e-9);
        assert!((m[0].linf - 2.0).abs() < 1e-9);
    }

    #[test]
    fn psnr_formula() {
        // range 10, MSE 1 -> 10*log10(100/1) = 20 dB.
        assert!((psnr(1.0, 10.0) - 20.0).abs() < 1e-12);
    }

    #[test]
    fn psnr_monotone_in_mse() {
        let mut prev = f64::INFINITY;
        for mse in [1e-4, 1e-2, 0.5, 1.0, 4.0, 25.0] {
            let p = psnr(mse, 10.0);
            assert!(p < prev, "PSNR must strictly decrease as MSE grows");
            prev = p;
        }
    }

    #[test]
    fn wiring_table_covers_every_family() {
        use crate::models::Placement::*;
        for family in Family::all() {
            for placement in [PreOperator, PostModel] {
                let wiring = select_wiring(family, placement);
                match (family, placement) {
                    (Family::Bicubic, _) => assert_eq!(wiring.unwrap(), Wiring::DirectInterp),
                    (Family::Fno, PreOperator) => {
                        assert_eq!(wiring.unwrap(), Wiring::OperatorAtEvalFactor)
                    }
                    (Family::Fno, PostModel) => {
                        assert_eq!(wiring.unwrap(), Wiring::FnoThenInterp)
                    }
                    (f, PreOperator) if f.is_neural_operator() => {
                        assert_eq!(wiring.unwrap(), Wiring::OperatorAtEvalFactor)
                    }
                    (f, PostModel) if f.is_neural_operator() => {
                        assert_eq!(wiring.unwrap(), Wiring::OperatorThenResidual)
                    }
                    (_, PostModel) => {
                        assert_eq!(wiring.unwrap(), Wiring::UpsamplerThenResidual)
                    }
                    (_, PreOperator) => {
                        assert!(wiring.is_err(), "{family}: no operator to re-parameterize")
                    }
                }
            }
        }
    }

    #[test]
    fn accumulator_means_per_snapshot_maxima() {
        let mut acc = MetricsAccumulator::default();
        acc.push(&[ChannelMetrics {
            mse: 1.0,
            mae: 0.5,
            linf: 3.0,
            psnr: 20.0,
        }]);
        acc.push(&[ChannelMetrics {
            mse: 3.0,
            mae: 1.5,
            linf: 5.0,
            psnr: 10.0,
        }]);
        let r = acc.finish(4).unwrap();
        assert!((r.mse - 2.0).abs() < 1e-12);
        assert!((r.linf - 4.0).abs() < 1e-12, "IN is the mean of maxima");
        assert_eq!(r.n_snapshots, 2);
    }
}
