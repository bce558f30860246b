//! Command-line entry point: dataset generation, training, evaluation,
//! sweeps, spectra, model info and plot emission, driven by JSON configs
//! with flag overrides (flags win). Every command echoes its effective
//! config into the output directory so runs are replayable.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::datagen::{coarsen, gen_cross_sim_lr, gen_grf, CrossSimSpec, GrfSpec};
use crate::evaluation::report::{emit_report, ReportRow};
use crate::evaluation::spectrum::{field_spectrum, mean_spectrum};
use crate::evaluation::{bicubic_reference, zero_shot_evaluate};
use crate::grid::Split;
use crate::io::{
    load_split, read_snapshot, write_manifest, write_snapshot, write_stats, Manifest, ManifestRow,
};
use crate::models::checkpoint::{load_checkpoint, save_checkpoint};
use crate::models::{param_count, Extractor, Family, Model, ModelSpec, PipelineSpec, Placement};
use crate::training::gan::{train_gan, DEFAULT_LAMBDA_ADV};
use crate::training::sweep::{sweep_extractor, sweep_modes, SweepResult};
use crate::training::{train, Loss, TrainConfig};
use crate::{datagen::derive_seed, Error, Result};

/// Synthetic dataset generation settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatagenConfig {
    pub h: usize,
    pub w: usize,
    #[serde(default = "default_c")]
    pub c: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_kmin")]
    pub k_min: usize,
    pub k_max: usize,
    #[serde(default = "default_amp")]
    pub amplitude_std: f64,
    #[serde(default = "default_dx")]
    pub dx_km: f64,
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    /// One manifest is written per factor.
    pub factors: Vec<usize>,
    /// When set, LR fields come from the cross-simulation emulation instead
    /// of coarsening.
    #[serde(default)]
    pub cross_sim: Option<CrossSimSpec>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_regions")]
    pub regions: u32,
}

fn default_c() -> usize {
    2
}
fn default_alpha() -> f64 {
    3.0
}
fn default_kmin() -> usize {
    1
}
fn default_amp() -> f64 {
    1.0
}
fn default_dx() -> f64 {
    25.0
}
fn default_regions() -> u32 {
    1
}

/// Top-level config file; command-specific blocks.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub datagen: Option<DatagenConfig>,
    #[serde(default)]
    pub model: Option<ModelSpec>,
    #[serde(default)]
    pub train: Option<TrainConfig>,
    #[serde(default)]
    pub placement: Option<Placement>,
    #[serde(default)]
    pub lambda_adv: Option<f64>,
    #[serde(default)]
    pub data: Option<String>,
    #[serde(default)]
    pub out: Option<String>,
    #[serde(default)]
    pub modes_list: Option<Vec<usize>>,
    #[serde(default)]
    pub blocks_list: Option<Vec<usize>>,
    #[serde(default)]
    pub extractors: Option<Vec<Extractor>>,
}

impl RunConfig {
    fn load(path: Option<&PathBuf>) -> Result<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = fs::read_to_string(p)
                    .map_err(|e| Error::validation(format!("cannot read config {p:?}: {e}")))?;
                serde_json::from_str(&text)
                    .map_err(|e| Error::parse(format!("config {p:?}: {e}")))
            }
        }
    }
}

#[derive(Parser)]
#[command(
    name = "downscale-bench",
    about = "Zero-shot weather downscaling benchmark: data generation, training, evaluation",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON config file; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Global seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker count (recorded in outputs; kernels are sequential).
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset and its manifests.
    Datagen {
        #[command(flatten)]
        common: Common,
    },
    /// Train one model on a dataset manifest.
    Train {
        #[command(flatten)]
        common: Common,
        /// Model family override (bicubic|srcnn|edsr_lite|esrgan_lite|swinir_lite|fno|dfno|duno_lite|plugin).
        #[arg(long)]
        model: Option<String>,
        /// Dataset manifest path.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Training upsampling factor override.
        #[arg(long)]
        train_factor: Option<usize>,
    },
    /// Evaluate a checkpoint (or the bicubic baseline) at a factor.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Evaluate the parameter-free bicubic baseline instead.
        #[arg(long)]
        model: Option<String>,
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        eval_factor: Option<usize>,
        /// Interpolation placement override (pre_operator|post_model).
        #[arg(long)]
        placement: Option<String>,
    },
    /// Frequency-cutoff sweep: one training run per modes value.
    SweepModes {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',')]
        modes: Option<Vec<usize>>,
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Feature-extractor sweep over block counts and extractor kinds.
    SweepExtractor {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',')]
        blocks: Option<Vec<usize>>,
        /// Comma-separated kinds: rrdb,rstb.
        #[arg(long, value_delimiter = ',')]
        extractors: Option<Vec<String>>,
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Kinetic-energy spectrum of a snapshot file or a manifest split.
    Spectrum {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        snapshot: Option<PathBuf>,
        #[arg(long)]
        data: Option<PathBuf>,
        /// Split to average over when reading a manifest (train|val|test).
        #[arg(long, default_value = "test")]
        split: String,
    },
    /// Print family, spec and parameter count for a model spec.
    Info {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: Option<String>,
    },
    /// Render a spectrum plot from spectrum CSV files.
    Plot {
        #[command(flatten)]
        common: Common,
        /// Comma-separated spectrum CSV paths; labels from file stems.
        #[arg(long, value_delimiter = ',')]
        curves: Vec<PathBuf>,
    },
}

/// Run the CLI on explicit arguments; returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            // clap handles --help/--version as "errors" with success codes.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(summary) => {
            println!("{summary}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Entry point used by the binary.
pub fn run_from_env() -> i32 {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .try_init()
        .ok();
    run(std::env::args())
}

fn dispatch(cmd: Command) -> Result<String> {
    match cmd {
        Command::Datagen { common } => cmd_datagen(common),
        Command::Train {
            common,
            model,
            data,
            train_factor,
        } => cmd_train(common, model, data, train_factor),
        Command::Evaluate {
            common,
            checkpoint,
            model,
            data,
            eval_factor,
            placement,
        } => cmd_evaluate(common, checkpoint, model, data, eval_factor, placement),
        Command::SweepModes {
            common,
            modes,
            data,
        } => cmd_sweep_modes(common, modes, data),
        Command::SweepExtractor {
            common,
            blocks,
            extractors,
            data,
        } => cmd_sweep_extractor(common, blocks, extractors, data),
        Command::Spectrum {
            common,
            snapshot,
            data,
            split,
        } => cmd_spectrum(common, snapshot, data, &split),
        Command::Info { common, model } => cmd_info(common, model),
        Command::Plot { common, curves } => cmd_plot(common, curves),
    }
}

fn out_dir(common: &Common, cfg: &RunConfig) -> Result<PathBuf> {
    let dir = common
        .out
        .clone()
        .or_else(|| cfg.out.as_ref().map(PathBuf::from))
        .ok_or_else(|| Error::validation("an output directory is required (--out)"))?;
    fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn echo_config(dir: &Path, cfg: &RunConfig) -> Result<()> {
    fs::write(dir.join("config.json"), serde_json::to_string_pretty(cfg)?)?;
    Ok(())
}

fn parse_family(name: &str) -> Result<Family> {
    serde_json::from_value(serde_json::Value::String(name.to_string()))
        .map_err(|_| Error::validation(format!("unknown model family {name:?}")))
}

fn parse_placement(name: &str) -> Result<Placement> {
    serde_json::from_value(serde_json::Value::String(name.to_string()))
        .map_err(|_| Error::validation(format!("unknown placement {name:?}")))
}

/// Default interpolation placement per family: operator pipelines keep it
/// inside the model, learned upsamplers get the residual wiring.
pub fn default_placement(family: Family) -> Placement {
    if family.is_neural_operator() || family == Family::Bicubic {
        Placement::PreOperator
    } else {
        Placement::PostModel
    }
}

fn split_from_str(s: &str) -> Result<Split> {
    match s {
        "train" => Ok(Split::Train),
        "val" => Ok(Split::Val),
        "test" => Ok(Split::Test),
        other => Err(Error::validation(format!("unknown split {other:?}"))),
    }
}

fn cmd_datagen(common: Common) -> Result<String> {
    let mut cfg = RunConfig::load(common.config.as_ref())?;
    let dg = cfg
        .datagen
        .clone()
        .ok_or_else(|| Error::validation("datagen requires a datagen config block"))?;
    let mut dg = dg;
    if let Some(seed) = common.seed.or(cfg.seed) {
        dg.seed = seed;
    }
    let dir = out_dir(&common, &cfg)?;
    cfg.datagen = Some(dg.clone());
    echo_config(&dir, &cfg)?;

    if dg.factors.is_empty() {
        return Err(Error::validation("datagen needs at least one factor"));
    }
    let splits = [
        (Split::Train, dg.n_train),
        (Split::Val, dg.n_val),
        (Split::Test, dg.n_test),
    ];
    let mut train_hr = Vec::new();
    let mut rows_per_factor: Vec<Vec<ManifestRow>> = vec![Vec::new(); dg.factors.len()];
    for (split, count) in splits {
        for i in 0..count {
            let spec = GrfSpec {
                h: dg.h,
                w: dg.w,
                c: dg.c,
                alpha: dg.alpha,
                k_min: dg.k_min,
                k_max: dg.k_max,
                seed: derive_seed(dg.seed, &format!("hr/{split}/{i}")),
                amplitude_std: dg.amplitude_std,
            };
            let mut hr = gen_grf(&spec)?;
            hr.dx_km = dg.dx_km;
            let hr_name = format!("hr_{split}_{i:04}.dsb");
            write_snapshot(&hr, dir.join(&hr_name))?;
            if split == Split::Train {
                train_hr.push(hr.clone());
            }
            for (fi, &factor) in dg.factors.iter().enumerate() {
                let lr = match &dg.cross_sim {
                    Some(cs) => {
                        let mut cs = cs.clone();
                        cs.seed = derive_seed(dg.seed, &format!("cross/{split}/{i}/{factor}"));
                        gen_cross_sim_lr(&hr, factor, &cs)?
                    }
                    None => coarsen(&hr, factor)?,
                };
                let lr_name = format!("lr_f{factor}_{split}_{i:04}.dsb");
                write_snapshot(&lr, dir.join(&lr_name))?;
                rows_per_factor[fi].push(ManifestRow {
                    lr_path: lr_name,
                    hr_path: hr_name.clone(),
                    region_id: (i as u32) % dg.regions.max(1),
                    split,
                });
            }
        }
    }
    let stats = crate::io::compute_norm_stats(&train_hr)?;
    write_stats(&stats, dir.join("stats.json"))?;
    for (fi, &factor) in dg.factors.iter().enumerate() {
        let manifest = Manifest::new("stats.json", rows_per_factor[fi].clone());
        write_manifest(&manifest, dir.join(format!("manifest_f{factor}.json")))?;
        if fi == 0 {
            write_manifest(&manifest, dir.join("manifest.json"))?;
        }
    }
    Ok(format!(
        "datagen: {} train / {} val / {} test snapshots at {}x{}, factors {:?} -> {}",
        dg.n_train,
        dg.n_val,
        dg.n_test,
        dg.h,
        dg.w,
        dg.factors,
        dir.display()
    ))
}

fn cmd_train(
    common: Common,
    model: Option<String>,
    data: Option<PathBuf>,
    train_factor: Option<usize>,
) -> Result<String> {
    let mut cfg = RunConfig::load(common.config.as_ref())?;
    let mut spec = cfg
        .model
        .clone()
        .or_else(|| model.as_deref().and_then(|m| parse_family(m).ok()).map(ModelSpec::new))
        .ok_or_else(|| Error::validation("train requires a model spec (config or --model)"))?;
    if let Some(m) = &model {
        spec.family = parse_family(m)?;
    }
    if let Some(f) = train_factor {
        spec.train_factor = f;
    }
    let mut tcfg = cfg.train.clone().unwrap_or_default();
    if let Some(seed) = common.seed.or(cfg.seed) {
        tcfg.seed = seed;
    }
    if let Some(w) = common.workers {
        tcfg.workers = w;
    }
    let manifest = data
        .clone()
        .or_else(|| cfg.data.as_ref().map(PathBuf::from))
        .ok_or_else(|| Error::validation("train requires --data <manifest>"))?;
    let dir = out_dir(&common, &cfg)?;
    cfg.model = Some(spec.clone());
    cfg.train = Some(tcfg.clone());
    cfg.data = Some(manifest.display().to_string());
    echo_config(&dir, &cfg)?;

    let train_ds = load_split(&manifest, Split::Train)?;
    let val_ds = load_split(&manifest, Split::Val).ok();
    spec.in_channels = train_ds.n_channels();
    spec.train_factor = train_ds.factor;
    let pipeline = PipelineSpec {
        placement: cfg.placement.unwrap_or_else(|| default_placement(spec.family)),
        train_factor: train_ds.factor,
        eval_factor: train_ds.factor,
    };
    let (model, report) = if tcfg.loss == Loss::Gan {
        let lambda = cfg.lambda_adv.unwrap_or(DEFAULT_LAMBDA_ADV);
        train_gan(&spec, &train_ds, val_ds.as_ref(), &tcfg, lambda)?
    } else {
        train(&spec, &pipeline, &train_ds, val_ds.as_ref(), &tcfg, None)?
    };
    save_checkpoint(&model, &train_ds.stats, dir.join("checkpoint.ckpt"))?;
    fs::write(
        dir.join("report.json"),
        serde_json::to_string_pretty(&report)?,
    )?;
    let last_val = report.val_mse.last().cloned().unwrap_or(f64::NAN);
    Ok(format!(
        "train: family={} epochs={} best_epoch={} final_val_mse={:.6} params={} -> {}",
        model.spec.family,
        report.train_loss.len(),
        report.best_epoch,
        last_val,
        report.param_count,
        dir.display()
    ))
}

fn cmd_evaluate(
    common: Common,
    checkpoint: Option<PathBuf>,
    model_flag: Option<String>,
    data: Option<PathBuf>,
    eval_factor: Option<usize>,
    placement: Option<String>,
) -> Result<String> {
    let mut cfg = RunConfig::load(common.config.as_ref())?;
    let manifest = data
        .or_else(|| cfg.data.as_ref().map(PathBuf::from))
        .ok_or_else(|| Error::validation("evaluate requires --data <manifest>"))?;
    let test_ds = load_split(&manifest, Split::Test)?;
    let eval_factor = eval_factor.ok_or_else(|| Error::validation("--eval-factor is required"))?;

    let (model, stats) = match (&checkpoint, &model_flag) {
        (Some(path), _) => load_checkpoint(path, None)?,
        (None, Some(name)) if parse_family(name)? == Family::Bicubic => {
            let mut spec = ModelSpec::new(Family::Bicubic);
            spec.in_channels = test_ds.n_channels();
            spec.train_factor = eval_factor.max(2);
            (Model::build(&spec, 0, None)?, test_ds.stats.clone())
        }
        _ => {
            return Err(Error::validation(
                "evaluate needs --checkpoint, or --model bicubic",
            ))
        }
    };
    let placement = match placement {
        Some(p) => parse_placement(&p)?,
        None => cfg
            .placement
            .unwrap_or_else(|| default_placement(model.spec.family)),
    };
    let pipeline = PipelineSpec {
        placement,
        train_factor: if model.spec.family == Family::Bicubic {
            eval_factor
        } else {
            model.spec.train_factor
        },
        eval_factor,
    };
    let dir = out_dir(&common, &cfg)?;
    cfg.placement = Some(placement);
    cfg.data = Some(manifest.display().to_string());
    echo_config(&dir, &cfg)?;

    let output = zero_shot_evaluate(&model, &stats, &pipeline, &test_ds)?;
    let reference = bicubic_reference(&test_ds)?;
    let setting = if pipeline.eval_factor == pipeline.train_factor {
        "standard"
    } else {
        "zero_shot"
    };
    let rows = vec![
        ReportRow {
            family: model.spec.family.to_string(),
            is_neural_operator: model.spec.family.is_neural_operator(),
            setting: setting.to_string(),
            metrics: output.metrics.clone(),
        },
        ReportRow {
            family: "bicubic".to_string(),
            is_neural_operator: false,
            setting: setting.to_string(),
            metrics: reference.clone(),
        },
    ];
    let spectra = vec![
        ("truth".to_string(), output.truth_spectrum.clone()),
        (
            model.spec.family.to_string(),
            output.pred_spectrum.clone(),
        ),
    ];
    emit_report(&rows, &spectra, &dir)?;
    fs::write(
        dir.join("eval.json"),
        serde_json::to_string_pretty(&output)?,
    )?;
    Ok(format!(
        "evaluate: family={} {setting} factor={} mse={:.6} (bicubic {:.6}) high_k_underestimated={} -> {}",
        model.spec.family,
        eval_factor,
        output.metrics.mse,
        reference.mse,
        output.high_k_underestimated,
        dir.display()
    ))
}

fn write_sweep(dir: &Path, result: &SweepResult) -> Result<()> {
    let mut csv = String::from("label,train_mse,val_mse,test_mse,param_count\n");
    for row in &result.rows {
        csv.push_str(&format!(
            "{},{:.6e},{:.6e},{:.6e},{}\n",
            row.label, row.train_mse, row.val_mse, row.test_mse, row.param_count
        ));
    }
    fs::write(dir.join("sweep.csv"), csv)?;
    fs::write(
        dir.join("sweep.json"),
        serde_json::to_string_pretty(result)?,
    )?;
    crate::evaluation::plot::render_spectra(&result.spectra, dir.join("spectra.png"))?;
    for (label, curve) in &result.spectra {
        let name: String = label
            .chars()
            .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
            .collect();
        fs::write(
            dir.join(format!("spectrum_{name}.csv")),
            crate::evaluation::report::spectrum_csv(curve),
        )?;
    }
    Ok(())
}

fn sweep_inputs(
    common: &Common,
    cfg: &mut RunConfig,
    data: Option<PathBuf>,
) -> Result<(ModelSpec, TrainConfig, PathBuf, PathBuf)> {
    let manifest = data
        .or_else(|| cfg.data.as_ref().map(PathBuf::from))
        .ok_or_else(|| Error::validation("sweep requires --data <manifest>"))?;
    let spec = cfg
        .model
        .clone()
        .ok_or_else(|| Error::validation("sweep requires a model block in the config"))?;
    let mut tcfg = cfg.train.clone().unwrap_or_default();
    if let Some(seed) = common.seed.or(cfg.seed) {
        tcfg.seed = seed;
    }
    let dir = out_dir(common, cfg)?;
    cfg.data = Some(manifest.display().to_string());
    Ok((spec, tcfg, manifest, dir))
}

fn cmd_sweep_modes(
    common: Common,
    modes: Option<Vec<usize>>,
    data: Option<PathBuf>,
) -> Result<String> {
    let mut cfg = RunConfig::load(common.config.as_ref())?;
    let (mut spec, tcfg, manifest, dir) = sweep_inputs(&common, &mut cfg, data)?;
    let modes_list = modes
        .or_else(|| cfg.modes_list.clone())
        .ok_or_else(|| Error::validation("sweep-modes requires --modes"))?;
    cfg.modes_list = Some(modes_list.clone());
    echo_config(&dir, &cfg)?;

    let train_ds = load_split(&manifest, Split::Train)?;
    let val_ds = load_split(&manifest, Split::Val)?;
    let test_ds = load_split(&manifest, Split::Test)?;
    spec.in_channels = train_ds.n_channels();
    spec.train_factor = train_ds.factor;
    let result = sweep_modes(&spec, &modes_list, &train_ds, &val_ds, &test_ds, &tcfg, None)?;
    write_sweep(&dir, &result)?;
    let best = result
        .rows
        .iter()
        .min_by(|a, b| a.val_mse.partial_cmp(&b.val_mse).unwrap())
        .expect("nonempty");
    Ok(format!(
        "sweep-modes: {} runs, best {} (val_mse {:.6}) -> {}",
        result.rows.len(),
        best.label,
        best.val_mse,
        dir.display()
    ))
}

fn cmd_sweep_extractor(
    common: Common,
    blocks: Option<Vec<usize>>,
    extractors: Option<Vec<String>>,
    data: Option<PathBuf>,
) -> Result<String> {
    let mut cfg = RunConfig::load(common.config.as_ref())?;
    let (mut spec, tcfg, manifest, dir) = sweep_inputs(&common, &mut cfg, data)?;
    let blocks_list = blocks
        .or_else(|| cfg.blocks_list.clone())
        .unwrap_or_else(|| vec![6, 12, 24]);
    let kinds: Vec<Extractor> = match extractors {
        Some(list) => list
            .iter()
            .map(|s| match s.as_str() {
                "rrdb" => Ok(Extractor::Rrdb),
                "rstb" => Ok(Extractor::Rstb),
                other => Err(Error::validation(format!("unknown extractor {other:?}"))),
            })
            .collect::<Result<_>>()?,
        None => cfg
            .extractors
            .clone()
            .unwrap_or_else(|| vec![Extractor::Rrdb, Extractor::Rstb]),
    };
    cfg.blocks_list = Some(blocks_list.clone());
    cfg.extractors = Some(kinds.clone());
    echo_config(&dir, &cfg)?;

    let train_ds = load_split(&manifest, Split::Train)?;
    let val_ds = load_split(&manifest, Split::Val)?;
    let test_ds = load_split(&manifest, Split::Test)?;
    spec.in_channels = train_ds.n_channels();
    spec.train_factor = train_ds.factor;
    let result = sweep_extractor(
        &spec,
        &blocks_list,
        &kinds,
        &train_ds,
        &val_ds,
        &test_ds,
        &tcfg,
        None,
    )?;
    write_sweep(&dir, &result)?;
    Ok(format!(
        "sweep-extractor: {} runs over blocks {:?} -> {}",
        result.rows.len(),
        blocks_list,
        dir.display()
    ))
}

fn cmd_spectrum(
    common: Common,
    snapshot: Option<PathBuf>,
    data: Option<PathBuf>,
    split: &str,
) -> Result<String> {
    let cfg = RunConfig::load(common.config.as_ref())?;
    let dir = out_dir(&common, &cfg)?;
    let (label, curve) = match (snapshot, data) {
        (Some(snap), _) => {
            let field = read_snapshot(&snap)?;
            ("snapshot".to_string(), field_spectrum(&field)?)
        }
        (None, Some(manifest)) => {
            let ds = load_split(&manifest, split_from_str(split)?)?;
            let curves: Result<Vec<_>> =
                ds.pairs.iter().map(|p| field_spectrum(&p.hr)).collect();
            (format!("{split}_mean"), mean_spectrum(&curves?)?)
        }
        (None, None) => {
            return Err(Error::validation("spectrum needs --snapshot or --data"))
        }
    };
    let csv_path = dir.join(format!("spectrum_{label}.csv"));
    fs::write(&csv_path, crate::evaluation::report::spectrum_csv(&curve))?;
    crate::evaluation::plot::render_spectra(
        &[(label.clone(), curve)],
        dir.join("spectra.png"),
    )?;
    Ok(format!("spectrum: wrote {} -> {}", label, dir.display()))
}

fn cmd_info(common: Common, model: Option<String>) -> Result<String> {
    let cfg = RunConfig::load(common.config.as_ref())?;
    let mut spec = cfg
        .model
        .clone()
        .or_else(|| model.as_deref().and_then(|m| parse_family(m).ok()).map(ModelSpec::new))
        .ok_or_else(|| Error::validation("info requires --model or a model config block"))?;
    if let Some(m) = &model {
        spec.family = parse_family(m)?;
    }
    let count = param_count(&spec, None)?;
    println!("family: {}", spec.family);
    println!("spec: {}", serde_json::to_string(&spec)?);
    println!("param_count: {count}");
    Ok(format!("info: family={} param_count={count}", spec.family))
}

fn cmd_plot(common: Common, curves: Vec<PathBuf>) -> Result<String> {
    let cfg = RunConfig::load(common.config.as_ref())?;
    if curves.is_empty() {
        return Err(Error::validation("plot requires --curves <csv,...>"));
    }
    let dir = out_dir(&common, &cfg)?;
    let mut spectra = Vec::new();
    for path in &curves {
        let text = fs::read_to_string(path)?;
        let curve = crate::evaluation::report::parse_spectrum_csv(&text)?;
        let label = path
            .file_stem()
            .map(|s| s.to_string_lossy().to_string())
            .unwrap_or_else(|| "curve".to_string());
        spectra.push((label.trim_start_matches("spectrum_").to_string(), curve));
    }
    let png = dir.join("spectra.png");
    crate::evaluation::plot::render_spectra(&spectra, &png)?;
    Ok(format!(
        "plot: {} curves -> {}",
        spectra.len(),
        png.display()
    ))
}
