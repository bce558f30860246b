//! Published benchmark results bundled as static reference metadata.
//!
//! These are the printed values from the source benchmark study this
//! framework mirrors (ERA5 wind-speed downscaling at 8x standard / 4x-to-8x
//! zero-shot, and ERA5-to-WTK at 5x standard / 15x zero-shot, plus its
//! feature-extractor swap and model-scale tables). They are context for
//! reports, not desk-scale reproduction targets: the originals require the
//! full reanalysis archives and multi-day accelerator training.

use serde::{Deserialize, Serialize};

/// MSE, MAE, IN (L-infinity) and PSNR as printed in the source table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PublishedMetrics {
    pub mse: f64,
    pub mae: f64,
    pub linf: f64,
    pub psnr: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PublishedRow {
    pub family: &'static str,
    pub is_neural_operator: bool,
    pub standard: PublishedMetrics,
    pub zero_shot: PublishedMetrics,
    /// Provenance label carried into reports.
    pub source: &'static str,
}

const fn m(mse: f64, mae: f64, linf: f64, psnr: f64) -> PublishedMetrics {
    PublishedMetrics {
        mse,
        mae,
        linf,
        psnr,
    }
}

pub const ERA5_WIND_SOURCE: &str =
    "published ERA5 wind-speed benchmark: 8x standard, 4x-to-8x zero-shot";

/// ERA5 wind-speed downscaling, units (m/s)^2, m/s, m/s, dB.
pub const ERA5_WIND_8X: &[PublishedRow] = &[
    PublishedRow {
        family: "bicubic",
        is_neural_operator: false,
        standard: m(1.23, 0.73, 14.82, 27.53),
        zero_shot: m(1.23, 0.73, 14.82, 27.53),
        source: ERA5_WIND_SOURCE,
    },
    PublishedRow {
        family: "srcnn",
        is_neural_operator: false,
        standard: m(1.14, 0.7, 14.75, 27.83),
        zero_shot: m(1.06, 0.67, 14.56, 28.18),
        source: ERA5_WIND_SOURCE,
    },
    PublishedRow {
        family: "esrgan",
        is_neural_operator: false,
        standard: m(1.29, 0.75, 15.43, 27.3),
        zero_shot: m(0.85, 0.6, 14.51, 29.1),
        source: ERA5_WIND_SOURCE,
    },
    PublishedRow {
        family: "edsr",
        is_neural_operator: false,
        standard: m(0.51, 0.44, 13.6, 31.33),
        zero_shot: m(0.54, 0.45, 13.66, 31.1),
        source: ERA5_WIND_SOURCE,
    },
    PublishedRow {
        family: "swinir",
        is_neural_operator: false,
        standard: m(0.37, 0.38, 12.12, 32.79),
        zero_shot: m(0.51, 0.44, 13.22, 31.33),
        source: ERA5_WIND_SOURCE,
    },
    PublishedRow {
        family: "fno",
        is_neural_operator: true,
        standard: m(0.91, 0.66, 14.53, 28.84),
        zero_shot: m(0.71, 0.54, 14.04, 29.9),
        source: ERA5_WIND_SOURCE,
    },
    PublishedRow {
        family: "dfno",
        is_neural_operator: true,
        standard: m(0.7, 0.54, 12.8, 29.94),
        zero_shot: m(0.63, 0.5, 13.33, 30.43),
        source: ERA5_WIND_SOURCE,
    },
    PublishedRow {
        family: "duno",
        is_neural_operator: true,
        standard: m(0.69, 0.53, 13.36, 30.04),
        zero_shot: m(0.63, 0.5, 13.56, 30.44),
        source: ERA5_WIND_SOURCE,
    },
    PublishedRow {
        family: "dafno",
        is_neural_operator: true,
        standard: m(0.65, 0.51, 13.77, 30.29),
        zero_shot: m(0.66, 0.52, 14.01, 30.23),
        source: ERA5_WIND_SOURCE,
    },
    PublishedRow {
        family: "dcno",
        is_neural_operator: true,
        standard: m(0.45, 0.43, 12.98, 31.93),
        zero_shot: m(0.92, 0.65, 14.89, 28.76),
        source: ERA5_WIND_SOURCE,
    },
];

pub const ERA5_TO_WTK_SOURCE: &str =
    "published ERA5-to-WTK wind benchmark: 5x standard, 5x-to-15x zero-shot";

/// ERA5-to-WTK wind downscaling, u/v-aggregated metrics.
pub const ERA5_TO_WTK_5X: &[PublishedRow] = &[
    PublishedRow {
        family: "bicubic",
        is_neural_operator: false,
        standard: m(3.56, 1.18, 12.87, 18.4),
        zero_shot: m(4.07, 1.25, 16.59, 19.91),
        source: ERA5_TO_WTK_SOURCE,
    },
    PublishedRow {
        family: "srcnn",
        is_neural_operator: false,
        standard: m(3.16, 1.11, 12.62, 18.83),
        zero_shot: m(3.65, 1.18, 16.39, 20.31),
        source: ERA5_TO_WTK_SOURCE,
    },
    PublishedRow {
        family: "esrgan",
        is_neural_operator: false,
        standard: m(2.75, 1.05, 13.06, 19.27),
        zero_shot: m(3.12, 1.11, 15.96, 20.8),
        source: ERA5_TO_WTK_SOURCE,
    },
    PublishedRow {
        family: "edsr",
        is_neural_operator: false,
        standard: m(2.46, 0.98, 11.89, 19.85),
        zero_shot: m(2.92, 1.05, 15.61, 21.2),
        source: ERA5_TO_WTK_SOURCE,
    },
    PublishedRow {
        family: "swinir",
        is_neural_operator: false,
        standard: m(2.29, 0.94, 11.71, 20.12),
        zero_shot: m(2.73, 1.02, 15.34, 21.43),
        source: ERA5_TO_WTK_SOURCE,
    },
    PublishedRow {
        family: "fno",
        is_neural_operator: true,
        standard: m(5.69, 1.94, 14.45, 14.48),
        zero_shot: m(5.45, 1.89, 17.82, 16.76),
        source: ERA5_TO_WTK_SOURCE,
    },
    PublishedRow {
        family: "dfno",
        is_neural_operator: true,
        standard: m(3.04, 1.26, 12.56, 17.86),
        zero_shot: m(3.53, 1.33, 16.14, 19.4),
        source: ERA5_TO_WTK_SOURCE,
    },
    PublishedRow {
        family: "duno",
        is_neural_operator: true,
        standard: m(2.81, 1.09, 12.11, 18.97),
        zero_shot: m(3.3, 1.16, 15.85, 20.43),
        source: ERA5_TO_WTK_SOURCE,
    },
    PublishedRow {
        family: "dafno",
        is_neural_operator: true,
        standard: m(2.71, 1.02, 12.12, 19.47),
        zero_shot: m(4.17, 1.19, 17.5, 19.51),
        source: ERA5_TO_WTK_SOURCE,
    },
    PublishedRow {
        family: "dcno",
        is_neural_operator: true,
        standard: m(2.47, 0.99, 11.77, 19.79),
        zero_shot: m(4.66, 1.32, 17.32, 19.51),
        source: ERA5_TO_WTK_SOURCE,
    },
];

/// Feature-extractor swap on ERA5-to-WTK: MSE with RRDB vs RSTB blocks
/// (standard, zero-shot). The published finding is that the RRDB variants
/// perform better; recorded as metadata, not asserted at desk scale.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExtractorSwapRow {
    pub family: &'static str,
    pub extractor: &'static str,
    pub standard_mse: f64,
    pub zero_shot_mse: f64,
}

pub const EXTRACTOR_SWAP_WTK: &[ExtractorSwapRow] = &[
    ExtractorSwapRow {
        family: "dfno",
        extractor: "rrdb",
        standard_mse: 3.04,
        zero_shot_mse: 3.53,
    },
    ExtractorSwapRow {
        family: "dfno",
        extractor: "rstb",
        standard_mse: 5.69,
        zero_shot_mse: 6.19,
    },
    ExtractorSwapRow {
        family: "duno",
        extractor: "rrdb",
        standard_mse: 2.81,
        zero_shot_mse: 3.3,
    },
    ExtractorSwapRow {
        family: "duno",
        extractor: "rstb",
        standard_mse: 4.65,
        zero_shot_mse: 5.15,
    },
];

/// Published model scale and training wall-clock on the ERA5-to-WTK setup
/// (single accelerator). Context only; this artifact reports its own
/// timings and does not try to match these.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelScaleRow {
    pub family: &'static str,
    pub parameters_m: f64,
    pub training_hours: f64,
}

pub const PUBLISHED_MODEL_SCALE: &[ModelScaleRow] = &[
    ModelScaleRow {
        family: "srcnn",
        parameters_m: 0.063,
        training_hours: 0.52,
    },
    ModelScaleRow {
        family: "esrgan",
        parameters_m: 39.18,
        training_hours: 14.84,
    },
    ModelScaleRow {
        family: "edsr",
        parameters_m: 2.14,
        training_hours: 0.57,
    },
    ModelScaleRow {
        family: "swinir",
        parameters_m: 12.53,
        training_hours: 10.77,
    },
    ModelScaleRow {
        family: "fno",
        parameters_m: 1.24,
        training_hours: 2.86,
    },
    ModelScaleRow {
        family: "dfno",
        parameters_m: 9.88,
        training_hours: 4.8,
    },
    ModelScaleRow {
        family: "duno",
        parameters_m: 9.36,
        training_hours: 6.73,
    },
    ModelScaleRow {
        family: "dafno",
        parameters_m: 69.15,
        training_hours: 7.64,
    },
    ModelScaleRow {
        family: "dcno",
        parameters_m: 11.33,
        training_hours: 4.83,
    },
];

pub fn find<'a>(table: &'a [PublishedRow], family: &str) -> Option<&'a PublishedRow> {
    table.iter().find(|r| r.family == family)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn headline_values_verbatim() {
        let bicubic = find(ERA5_WIND_8X, "bicubic").unwrap();
        assert_eq!(bicubic.standard.mse, 1.23);
        let swinir = find(ERA5_WIND_8X, "swinir").unwrap();
        assert_eq!(swinir.standard.mse, 0.37);
        assert_eq!(swinir.zero_shot.mse, 0.51);
        let dcno = find(ERA5_WIND_8X, "dcno").unwrap();
        assert_eq!(dcno.standard.mse, 0.45);
        assert_eq!(dcno.zero_shot.mse, 0.92);
    }

    #[test]
    fn provenance_labels_present() {
        for row in ERA5_WIND_8X.iter().chain(ERA5_TO_WTK_5X) {
            assert!(!row.source.is_empty());
            assert!(row.source.contains("published"));
        }
    }

    #[test]
    fn extractor_swap_values() {
        let duno_rrdb = EXTRACTOR_SWAP_WTK
            .iter()
            .find(|r| r.family == "duno" && r.extractor == "rrdb")
            .unwrap();
        let duno_rstb = EXTRACTOR_SWAP_WTK
            .iter()
            .find(|r| r.family == "duno" && r.extractor == "rstb")
            .unwrap();
        assert_eq!(duno_rrdb.standard_mse, 2.81);
        assert_eq!(duno_rstb.standard_mse, 4.65);
    }
}
