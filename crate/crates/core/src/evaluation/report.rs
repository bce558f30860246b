//! Report emission: metrics tables (CSV and aligned text), spectrum CSVs
//! and the log-log spectrum plot with a zoomed high-wavenumber panel.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::evaluation::spectrum::SpectrumCurve;
use crate::evaluation::MetricsReport;
use crate::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportRow {
    pub family: String,
    pub is_neural_operator: bool,
    /// "standard" or "zero_shot".
    pub setting: String,
    pub metrics: MetricsReport,
}

pub const METRICS_CSV_HEADER: &str = "family,is_no,setting,mse,mae,in,psnr";

/// Metrics table as CSV text.
pub fn metrics_csv(rows: &[ReportRow]) -> String {
    let mut out = String::from(METRICS_CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{:.6e},{:.6e},{:.6e},{:.6e}\n",
            r.family,
            r.is_neural_operator,
            r.setting,
            r.metrics.mse,
            r.metrics.mae,
            r.metrics.linf,
            r.metrics.psnr
        ));
    }
    out
}

/// Metrics table as an aligned text block.
pub fn metrics_text(rows: &[ReportRow]) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<14} {:<6} {:<10} {:>12} {:>12} {:>12} {:>10}\n",
        "family", "is-NO", "setting", "MSE", "MAE", "IN", "PSNR"
    ));
    for r in rows {
        out.push_str(&format!(
            "{:<14} {:<6} {:<10} {:>12.5} {:>12.5} {:>12.5} {:>10.3}\n",
            r.family,
            if r.is_neural_operator { "yes" } else { "no" },
            r.setting,
            r.metrics.mse,
            r.metrics.mae,
            r.metrics.linf,
            r.metrics.psnr
        ));
    }
    out
}

/// One spectrum CSV: `k,energy` rows.
pub fn spectrum_csv(curve: &SpectrumCurve) -> String {
    let mut out = String::from("k,energy\n");
    for (k, e) in curve.k.iter().zip(curve.energy.iter()) {
        out.push_str(&format!("{k},{e:.17e}\n"));
    }
    out
}

pub fn parse_spectrum_csv(text: &str) -> Result<SpectrumCurve> {
    let mut k = Vec::new();
    let mut energy = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 {
            if line.trim() != "k,energy" {
                return Err(Error::parse(format!("bad spectrum header {line:?}")));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let (ks, es) = line
            .split_once(',')
            .ok_or_else(|| Error::parse(format!("bad spectrum row {line:?}")))?;
        k.push(
            ks.trim()
                .parse::<usize>()
                .map_err(|e| Error::parse(format!("bad k {ks:?}: {e}")))?,
        );
        energy.push(
            es.trim()
                .parse::<f64>()
                .map_err(|e| Error::parse(format!("bad energy {es:?}: {e}")))?,
        );
    }
    let raw = energy.clone();
    Ok(SpectrumCurve {
        k,
        degenerate: energy.iter().all(|&e| e == 0.0),
        energy,
        raw_energy: raw,
    })
}

/// Plot metadata written alongside the image.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlotMeta {
    /// How the plotted curves were aggregated; the spectra are test-set
    /// means, not single snapshots.
    pub aggregation: String,
    pub curves: Vec<String>,
}

/// Everything emit_report writes for one evaluation run.
pub struct ReportFiles {
    pub metrics_csv: PathBuf,
    pub metrics_txt: PathBuf,
    pub spectrum_csvs: Vec<PathBuf>,
    pub plot_png: Option<PathBuf>,
    pub plot_meta: PathBuf,
}

/// Write the metrics table (CSV + aligned text), per-curve spectrum CSVs,
/// the rendered log-log plot (main panel plus a zoom on the top-quartile
/// wavenumbers) and its metadata.
pub fn emit_report(
    rows: &[ReportRow],
    spectra: &[(String, SpectrumCurve)],
    out_dir: impl AsRef<Path>,
) -> Result<ReportFiles> {
    let out_dir = out_dir.as_ref();
    fs::create_dir_all(out_dir)?;
    let metrics_csv_path = out_dir.join("metrics.csv");
    fs::write(&metrics_csv_path, metrics_csv(rows))?;
    let metrics_txt_path = out_dir.join("metrics.txt");
    fs::write(&metrics_txt_path, metrics_text(rows))?;

    let mut spectrum_paths = Vec::new();
    for (label, curve) in spectra {
        let path = out_dir.join(format!("spectrum_{}.csv", sanitize(label)));
        fs::write(&path, spectrum_csv(curve))?;
        spectrum_paths.push(path);
    }

    let plot_png = if spectra.is_empty() {
        None
    } else {
        let path = out_dir.join("spectra.png");
        crate::evaluation::plot::render_spectra(spectra, &path)?;
        Some(path)
    };

    let meta = PlotMeta {
        aggregation: "test-set mean spectrum per curve".to_string(),
        curves: spectra.iter().map(|(l, _)| l.clone()).collect(),
    };
    let plot_meta = out_dir.join("spectra_meta.json");
    fs::write(&plot_meta, serde_json::to_string_pretty(&meta)?)?;

    Ok(ReportFiles {
        metrics_csv: metrics_csv_path,
        metrics_txt: metrics_txt_path,
        spectrum_csvs: spectrum_paths,
        plot_png,
        plot_meta,
    })
}

fn sanitize(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c } else { '_' })
        .collect()
}
