//! Benchmark framework for zero-shot weather downscaling.
//!
//! The crate pairs low/high-resolution gridded fields, trains neural-operator
//! and conventional super-resolution models on them, and evaluates both
//! standard and zero-shot upsampling (evaluation factors larger than the
//! training factor) with pixel-error metrics and kinetic-energy spectra.
//!
//! Top-level layout:
//!
//! * [`grid`] / [`io`] — gridded snapshots, normalization statistics,
//!   the on-disk snapshot/manifest/stats formats.
//! * [`datagen`] — synthetic Gaussian-random-field ground truth, LR
//!   construction by coarsening or cross-simulation emulation, patch
//!   extraction.
//! * [`regrid`] — bicubic resampling and inverse-distance-weighted
//!   regridding shared by data construction and the model pipelines.
//! * [`autodiff`] — a small reverse-mode tape used by every trainable model.
//! * [`models`] — the model zoo (spectral-operator stacks, RRDB/RSTB
//!   extractors, learned upsamplers) and the pipeline wirings.
//! * [`training`] — supervised and adversarial training plus sweep drivers.
//! * [`evaluation`] — metrics, energy spectra, zero-shot evaluation, reports.
//! * [`oracles`] — independent reference implementations (direct DFT,
//!   kernel-sum interpolation, circular convolution) used by the
//!   verification suite; kept free of the production code paths.

pub mod autodiff;
pub mod cli;
pub mod datagen;
pub mod error;
pub mod evaluation;
pub mod grid;
pub mod io;
pub mod models;
pub mod oracles;
pub mod precision;
pub mod reference;
pub mod regrid;
pub mod training;

mod fft;

pub use error::{Error, Result};
pub use grid::{ChannelMeta, GridField, NormStats, PairedDataset, Split};
