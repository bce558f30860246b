//! Gridded snapshot types shared by every module.

use ndarray::{Array3, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Name/unit record for one channel of a snapshot.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelMeta {
    pub name: String,
    pub unit: String,
}

impl ChannelMeta {
    pub fn new(name: impl Into<String>, unit: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            unit: unit.into(),
        }
    }
}

/// A single gridded snapshot: channels × height × width of physical values.
///
/// Data is stored at 32-bit precision, matching the on-disk snapshot format;
/// numerics that need f64 convert on ingest.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    pub data: Array3<f32>,
    /// Grid spacing in km, identical along both axes.
    pub dx_km: f64,
    pub channels: Vec<ChannelMeta>,
}

impl GridField {
    /// Build a field and check its invariants (minimum 4×4 support, finite
    /// values, channel list length).
    pub fn new(data: Array3<f32>, dx_km: f64, channels: Vec<ChannelMeta>) -> Result<Self> {
        let f = Self {
            data,
            dx_km,
            channels,
        };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        let (c, h, w) = self.data.dim();
        if h < 4 || w < 4 {
            return Err(Error::validation(format!(
                "grid must be at least 4x4 (bicubic kernel support), got {h}x{w}"
            )));
        }
        if !(self.dx_km.is_finite() && self.dx_km > 0.0) {
            return Err(Error::validation(format!(
                "dx_km must be positive and finite, got {}",
                self.dx_km
            )));
        }
        if self.channels.len() != c {
            return Err(Error::validation(format!(
                "channel list length {} does not match data channels {c}",
                self.channels.len()
            )));
        }
        if !self.data.iter().all(|v| v.is_finite()) {
            return Err(Error::validation("field contains non-finite values"));
        }
        Ok(())
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        self.data.dim()
    }

    pub fn n_channels(&self) -> usize {
        self.data.dim().0
    }

    pub fn height(&self) -> usize {
        self.data.dim().1
    }

    pub fn width(&self) -> usize {
        self.data.dim().2
    }

    pub fn channel(&self, c: usize) -> ArrayView2<'_, f32> {
        self.data.index_axis(ndarray::Axis(0), c)
    }

    /// Channel as f64 for numerics.
    pub fn channel_f64(&self, c: usize) -> ndarray::Array2<f64> {
        self.channel(c).mapv(|v| v as f64)
    }

    /// Whole field as f64 (C,H,W).
    pub fn data_f64(&self) -> Array3<f64> {
        self.data.mapv(|v| v as f64)
    }

    pub fn same_channels(&self, other: &GridField) -> bool {
        self.channels == other.channels
    }
}

/// Per-channel normalization statistics, computed from the training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl NormStats {
    pub fn validate(&self) -> Result<()> {
        if self.mean.len() != self.std.len() {
            return Err(Error::validation("mean/std length mismatch"));
        }
        if !self.std.iter().all(|s| s.is_finite() && *s > 0.0) {
            return Err(Error::validation("std must be positive and finite"));
        }
        if !self.mean.iter().all(|m| m.is_finite()) {
            return Err(Error::validation("mean must be finite"));
        }
        Ok(())
    }

    pub fn n_channels(&self) -> usize {
        self.mean.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl std::fmt::Display for Split {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Split::Train => write!(f, "train"),
            Split::Val => write!(f, "val"),
            Split::Test => write!(f, "test"),
        }
    }
}

/// One aligned LR/HR pair with its source region.
#[derive(Debug, Clone)]
pub struct Pair {
    pub lr: GridField,
    pub hr: GridField,
    pub region_id: u32,
}

/// Aligned LR/HR snapshot pairs of one split together with the dataset-wide
/// upsampling factor and the training-split normalization statistics.
#[derive(Debug, Clone)]
pub struct PairedDataset {
    pub pairs: Vec<Pair>,
    pub split: Split,
    pub stats: NormStats,
    /// HR-to-LR size ratio along each axis, identical for every pair.
    pub factor: usize,
}

impl PairedDataset {
    pub fn new(pairs: Vec<Pair>, split: Split, stats: NormStats) -> Result<Self> {
        if pairs.is_empty() {
            return Err(Error::validation(format!("{split} split has no pairs")));
        }
        stats.validate()?;
        let first = &pairs[0];
        let (lh, lw) = (first.lr.height(), first.lr.width());
        let (hh, hw) = (first.hr.height(), first.hr.width());
        if hh % lh != 0 || hw % lw != 0 || hh / lh != hw / lw {
            return Err(Error::validation(format!(
                "HR size {hh}x{hw} is not an integer multiple of LR size {lh}x{lw}"
            )));
        }
        let factor = hh / lh;
        let channels = first.lr.channels.clone();
        for (i, p) in pairs.iter().enumerate() {
            p.lr.validate()?;
            p.hr.validate()?;
            if p.hr.height() != p.lr.height() * factor || p.hr.width() != p.lr.width() * factor {
                return Err(Error::validation(format!(
                    "pair {i}: factor {factor} does not relate LR {}x{} to HR {}x{}",
                    p.lr.height(),
                    p.lr.width(),
                    p.hr.height(),
                    p.hr.width()
                )));
            }
            if p.lr.channels != channels || p.hr.channels != channels {
                return Err(Error::validation(format!(
                    "pair {i}: channel lists differ across the dataset"
                )));
            }
        }
        if stats.n_channels() != channels.len() {
            return Err(Error::validation(
                "stats channel count does not match dataset channels",
            ));
        }
        Ok(Self {
            pairs,
            split,
            stats,
            factor,
        })
    }

    pub fn n_channels(&self) -> usize {
        self.pairs[0].lr.n_channels()
    }

    /// Distinct region ids present, in ascending order.
    pub fn region_ids(&self) -> Vec<u32> {
        let mut ids: Vec<u32> = self.pairs.iter().map(|p| p.region_id).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array3;

    fn meta(n: usize) -> Vec<ChannelMeta> {
        (0..n)
            .map(|i| ChannelMeta::new(format!("ch{i}"), "m/s"))
            .collect()
    }

    #[test]
    fn rejects_small_grids() {
        let err = GridField::new(Array3::zeros((1, 2, 8)), 25.0, meta(1));
        assert!(err.is_err(), "2-row grid must be rejected");
    }

    #[test]
    fn rejects_non_finite() {
        let mut data = Array3::zeros((1, 4, 4));
        data[[0, 1, 1]] = f32::NAN;
        assert!(GridField::new(data, 25.0, meta(1)).is_err());
    }

    #[test]
    fn rejects_channel_count_mismatch() {
        assert!(GridField::new(Array3::zeros((2, 4, 4)), 25.0, meta(1)).is_err());
    }

    #[test]
    fn dataset_factor_inferred() {
        let lr = GridField::new(Array3::zeros((1, 4, 4)), 25.0, meta(1)).unwrap();
        let hr = GridField::new(Array3::zeros((1, 16, 16)), 6.25, meta(1)).unwrap();
        let ds = PairedDataset::new(
            vec![Pair {
                lr,
                hr,
                region_id: 0,
            }],
            Split::Train,
            NormStats {
                mean: vec![0.0],
                std: vec![1.0],
            },
        )
        .unwrap();
        assert_eq!(ds.factor, 4);
    }
}
