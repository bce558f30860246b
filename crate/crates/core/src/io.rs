//! Persistence: snapshot files, dataset manifests, normalization statistics.
//!
//! Snapshot format v1: a little-endian u32 byte length, a UTF-8 JSON header
//! `{version:1, c, h, w, dx_km, channels, dtype:"f32le"}`, then c·h·w
//! little-endian 32-bit reals in channel-major, row-major order. The format
//! round-trips bit-exactly for every finite f32 payload.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use ndarray::Array3;
use serde::{Deserialize, Serialize};

use crate::grid::{ChannelMeta, GridField, NormStats, Pair, PairedDataset, Split};
use crate::{Error, Result};

const SNAPSHOT_VERSION: u32 = 1;
const SNAPSHOT_DTYPE: &str = "f32le";

#[derive(Debug, Serialize, Deserialize)]
struct SnapshotHeader {
    version: u32,
    c: usize,
    h: usize,
    w: usize,
    dx_km: f64,
    channels: Vec<ChannelMeta>,
    dtype: String,
}

/// Write a snapshot in format v1. Fails on non-finite values.
pub fn write_snapshot(field: &GridField, path: impl AsRef<Path>) -> Result<()> {
    field.validate()?;
    let (c, h, w) = field.shape();
    let header = SnapshotHeader {
        version: SNAPSHOT_VERSION,
        c,
        h,
        w,
        dx_km: field.dx_km,
        channels: field.channels.clone(),
        dtype: SNAPSHOT_DTYPE.to_string(),
    };
    let header_bytes = serde_json::to_vec(&header)?;
    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(&(header_bytes.len() as u32).to_le_bytes())?;
    out.write_all(&header_bytes)?;
    let data = field
        .data
        .as_slice()
        .expect("snapshot data is standard layout");
    let mut payload = Vec::with_capacity(data.len() * 4);
    for v in data {
        payload.extend_from_slice(&v.to_le_bytes());
    }
    out.write_all(&payload)?;
    out.flush()?;
    Ok(())
}

/// Read a v1 snapshot and validate the field invariants.
pub fn read_snapshot(path: impl AsRef<Path>) -> Result<GridField> {
    let mut rd = BufReader::new(File::open(path.as_ref())?);
    let mut len_bytes = [0u8; 4];
    rd.read_exact(&mut len_bytes)
        .map_err(|_| Error::parse("file too short for header length prefix"))?;
    let header_len = u32::from_le_bytes(len_bytes) as usize;
    let mut header_bytes = vec![0u8; header_len];
    rd.read_exact(&mut header_bytes)
        .map_err(|_| Error::parse("truncated header"))?;
    let header: SnapshotHeader = serde_json::from_slice(&header_bytes)
        .map_err(|e| Error::parse(format!("malformed header: {e}")))?;
    if header.version != SNAPSHOT_VERSION {
        return Err(Error::validation(format!(
            "unsupported snapshot version {}",
            header.version
        )));
    }
    if header.dtype != SNAPSHOT_DTYPE {
        return Err(Error::validation(format!(
            "unsupported dtype {:?}",
            header.dtype
        )));
    }
    if header.channels.len() != header.c {
        return Err(Error::parse(format!(
            "header channel list length {} disagrees with c={}",
            header.channels.len(),
            header.c
        )));
    }
    let n = header.c * header.h * header.w;
    let mut payload = vec![0u8; n * 4];
    rd.read_exact(&mut payload)
        .map_err(|_| Error::parse("payload size mismatch"))?;
    let mut trailing = [0u8; 1];
    if rd.read(&mut trailing)? != 0 {
        return Err(Error::parse("payload size mismatch: trailing bytes"));
    }
    let mut values = Vec::with_capacity(n);
    for chunk in payload.chunks_exact(4) {
        values.push(f32::from_le_bytes(chunk.try_into().unwrap()));
    }
    let data = Array3::from_shape_vec((header.c, header.h, header.w), values)
        .map_err(|e| Error::parse(format!("payload reshape failed: {e}")))?;
    GridField::new(data, header.dx_km, header.channels)
}

/// Per-channel mean and population standard deviation over all pixels of the
/// training fields. The standard deviation is floored at 1e-8 so constant
/// channels stay usable.
pub fn compute_norm_stats(train_fields: &[GridField]) -> Result<NormStats> {
    let first = train_fields
        .first()
        .ok_or_else(|| Error::validation("cannot compute stats from an empty field list"))?;
    let c = first.n_channels();
    for f in train_fields {
        if f.channels != first.channels {
            return Err(Error::validation(
                "inconsistent channel lists in training fields",
            ));
        }
    }
    let mut sum = vec![0.0f64; c];
    let mut sum_sq = vec![0.0f64; c];
    let mut count = vec![0.0f64; c];
    for f in train_fields {
        for ch in 0..c {
            for &v in f.channel(ch).iter() {
                let v = v as f64;
                sum[ch] += v;
                sum_sq[ch] += v * v;
                count[ch] += 1.0;
            }
        }
    }
    let mut mean = Vec::with_capacity(c);
    let mut std = Vec::with_capacity(c);
    for ch in 0..c {
        let m = sum[ch] / count[ch];
        let var = (sum_sq[ch] / count[ch] - m * m).max(0.0);
        mean.push(m);
        std.push(var.sqrt().max(1e-8));
    }
    Ok(NormStats { mean, std })
}

/// (x − mean) / std per channel, computed in f64 and stored back at f32.
pub fn normalize(field: &GridField, stats: &NormStats) -> Result<GridField> {
    apply_affine(field, stats, |v, m, s| (v - m) / s)
}

/// Exact inverse of [`normalize`].
pub fn denormalize(field: &GridField, stats: &NormStats) -> Result<GridField> {
    apply_affine(field, stats, |v, m, s| v * s + m)
}

fn apply_affine(
    field: &GridField,
    stats: &NormStats,
    f: impl Fn(f64, f64, f64) -> f64,
) -> Result<GridField> {
    if stats.n_channels() != field.n_channels() {
        return Err(Error::validation(format!(
            "stats have {} channels, field has {}",
            stats.n_channels(),
            field.n_channels()
        )));
    }
    stats.validate()?;
    let mut data = field.data.clone();
    for (ch, mut plane) in data.outer_iter_mut().enumerate() {
        let (m, s) = (stats.mean[ch], stats.std[ch]);
        plane.mapv_inplace(|v| f(v as f64, m, s) as f32);
    }
    GridField::new(data, field.dx_km, field.channels.clone())
}

pub fn write_stats(stats: &NormStats, path: impl AsRef<Path>) -> Result<()> {
    stats.validate()?;
    let mut f = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut f, stats)?;
    f.flush()?;
    Ok(())
}

pub fn read_stats(path: impl AsRef<Path>) -> Result<NormStats> {
    let stats: NormStats = serde_json::from_reader(BufReader::new(File::open(path)?))?;
    stats.validate()?;
    Ok(stats)
}

/// One row of a dataset manifest. Paths are relative to the manifest file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestRow {
    pub lr_path: String,
    pub hr_path: String,
    pub region_id: u32,
    pub split: Split,
}

/// Dataset manifest: snapshot pair listing plus the stats file reference.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub stats_path: String,
    pub rows: Vec<ManifestRow>,
}

impl Manifest {
    pub fn new(stats_path: impl Into<String>, rows: Vec<ManifestRow>) -> Self {
        Self {
            version: 1,
            stats_path: stats_path.into(),
            rows,
        }
    }
}

pub fn write_manifest(manifest: &Manifest, path: impl AsRef<Path>) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut f, manifest)?;
    f.flush()?;
    Ok(())
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<Manifest> {
    let m: Manifest = serde_json::from_reader(BufReader::new(File::open(path.as_ref())?))
        .map_err(|e| Error::parse(format!("manifest parse failed: {e}")))?;
    if m.version != 1 {
        return Err(Error::validation(format!(
            "unsupported manifest version {}",
            m.version
        )));
    }
    Ok(m)
}

/// Load one split of a manifest into memory.
pub fn load_split(manifest_path: impl AsRef<Path>, split: Split) -> Result<PairedDataset> {
    let manifest_path = manifest_path.as_ref();
    let manifest = read_manifest(manifest_path)?;
    let base: PathBuf = manifest_path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_default();
    let stats = read_stats(base.join(&manifest.stats_path))?;
    let mut pairs = Vec::new();
    for row in manifest.rows.iter().filter(|r| r.split == split) {
        pairs.push(Pair {
            lr: read_snapshot(base.join(&row.lr_path))?,
            hr: read_snapshot(base.join(&row.hr_path))?,
            region_id: row.region_id,
        });
    }
    PairedDataset::new(pairs, split, stats)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::ChannelMeta;
    use ndarray::Array3;
    use rand::{Rng, SeedableRng};

    fn meta(n: usize) -> Vec<ChannelMeta> {
        (0..n)
            .map(|i| ChannelMeta::new(format!("ch{i}"), "m/s"))
            .collect()
    }

    #[test]
    fn zero_field_roundtrip() {
        let f = GridField::new(Array3::zeros((1, 4, 4)), 25.0, meta(1)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("zero.dsb");
        write_snapshot(&f, &p).unwrap();
        let g = read_snapshot(&p).unwrap();
        assert_eq!(f, g);
        assert!(g.data.iter().all(|v| v.to_bits() == 0));
    }

    #[test]
    fn random_field_roundtrip_bitwise() {
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(7);
        let data = Array3::from_shape_fn((2, 8, 8), |_| rng.gen_range(-5.0f32..5.0));
        let f = GridField::new(data, 12.5, meta(2)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("rand.dsb");
        write_snapshot(&f, &p).unwrap();
        let g = read_snapshot(&p).unwrap();
        assert_eq!(f.dx_km, g.dx_km);
        assert_eq!(f.channels, g.channels);
        for (a, b) in f.data.iter().zip(g.data.iter()) {
            assert_eq!(a.to_bits(), b.to_bits(), "payload must round-trip bitwise");
        }
    }

    #[test]
    fn rejects_unsupported_dtype() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f64.dsb");
        let header = serde_json::json!({
            "version": 1, "c": 1, "h": 4, "w": 4, "dx_km": 1.0,
            "channels": meta(1), "dtype": "f64le"
        });
        let hb = serde_json::to_vec(&header).unwrap();
        let mut bytes = (hb.len() as u32).to_le_bytes().to_vec();
        bytes.extend_from_slice(&hb);
        bytes.extend_from_slice(&[0u8; 64]);
        std::fs::write(&p, bytes).unwrap();
        let err = read_snapshot(&p).unwrap_err();
        assert!(
            err.to_string().contains("unsupported dtype"),
            "got: {err}"
        );
    }

    #[test]
    fn rejects_truncated_payload() {
        let f = GridField::new(Array3::zeros((1, 4, 4)), 25.0, meta(1)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("trunc.dsb");
        write_snapshot(&f, &p).unwrap();
        let mut bytes = std::fs::read(&p).unwrap();
        bytes.truncate(bytes.len() - 8);
        std::fs::write(&p, &bytes).unwrap();
        let err = read_snapshot(&p).unwrap_err();
        assert!(err.to_string().contains("payload size mismatch"), "{err}");
    }

    #[test]
    fn rejects_minimum_size_violation() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("h2.dsb");
        let header = serde_json::json!({
            "version": 1, "c": 1, "h": 2, "w": 8, "dx_km": 1.0,
            "channels": meta(1), "dtype": "f32le"
        });
        let hb = serde_json::to_vec(&header).unwrap();
        let mut bytes = (hb.len() as u32).to_le_bytes().to_vec();
        bytes.extend_from_slice(&hb);
        bytes.extend_from_slice(&vec![0u8; 2 * 8 * 4]);
        std::fs::write(&p, bytes).unwrap();
        assert!(read_snapshot(&p).is_err(), "H=2 must violate invariants");
    }

    #[test]
    fn rejects_channel_header_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("cha.dsb");
        let header = serde_json::json!({
            "version": 1, "c": 2, "h": 4, "w": 4, "dx_km": 1.0,
            "channels": meta(1), "dtype": "f32le"
        });
        let hb = serde_json::to_vec(&header).unwrap();
        let mut bytes = (hb.len() as u32).to_le_bytes().to_vec();
        bytes.extend_from_slice(&hb);
        bytes.extend_from_slice(&vec![0u8; 2 * 4 * 4 * 4]);
        std::fs::write(&p, bytes).unwrap();
        let err = read_snapshot(&p).unwrap_err();
        assert!(matches!(err, Error::Parse(_)), "got: {err}");
    }

    #[test]
    fn stats_hand_arithmetic() {
        // One field with two values {1, 3}: mean 2, population std 1.
        // Built directly: stats do not require the 4x4 minimum.
        let f = GridField {
            data: Array3::from_shape_vec((1, 1, 2), vec![1.0, 3.0]).unwrap(),
            dx_km: 1.0,
            channels: meta(1),
        };
        let stats = compute_norm_stats(std::slice::from_ref(&f)).unwrap();
        assert!((stats.mean[0] - 2.0).abs() < 1e-12);
        assert!((stats.std[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn stats_constant_field_floor() {
        let f = GridField::new(
            Array3::from_elem((1, 4, 4), 5.0),
            1.0,
            meta(1),
        )
        .unwrap();
        let stats = compute_norm_stats(&[f]).unwrap();
        assert!((stats.mean[0] - 5.0).abs() < 1e-12);
        assert_eq!(stats.std[0], 1e-8, "std is floored on constant channels");
    }

    #[test]
    fn stats_two_fields() {
        let a = GridField {
            data: Array3::from_elem((1, 1, 2), 0.0),
            dx_km: 1.0,
            channels: meta(1),
        };
        let b = GridField {
            data: Array3::from_elem((1, 1, 2), 2.0),
            dx_km: 1.0,
            channels: meta(1),
        };
        let stats = compute_norm_stats(&[a, b]).unwrap();
        assert!((stats.mean[0] - 1.0).abs() < 1e-12);
        assert!((stats.std[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn stats_order_invariant() {
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(3);
        let fields: Vec<GridField> = (0..5)
            .map(|_| {
                GridField::new(
                    Array3::from_shape_fn((2, 4, 4), |_| rng.gen_range(-3.0f32..3.0)),
                    1.0,
                    meta(2),
                )
                .unwrap()
            })
            .collect();
        let s1 = compute_norm_stats(&fields).unwrap();
        let mut rev = fields.clone();
        rev.reverse();
        let s2 = compute_norm_stats(&rev).unwrap();
        for c in 0..2 {
            assert!((s1.mean[c] - s2.mean[c]).abs() < 1e-12);
            assert!((s1.std[c] - s2.std[c]).abs() < 1e-12);
        }
    }

    #[test]
    fn normalize_hand_values() {
        // Values {1, 3} with mean 2, std 1 map to {-1, 1}.
        let f = GridField::new(
            Array3::from_shape_fn((1, 4, 4), |(_, _, x)| if x % 2 == 0 { 1.0 } else { 3.0 }),
            1.0,
            meta(1),
        )
        .unwrap();
        let stats = NormStats {
            mean: vec![2.0],
            std: vec![1.0],
        };
        let n = normalize(&f, &stats).unwrap();
        for (orig, v) in f.data.iter().zip(n.data.iter()) {
            let expect = if *orig == 1.0 { -1.0 } else { 1.0 };
            assert_eq!(*v, expect);
        }
    }

    #[test]
    fn normalize_denormalize_identity() {
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(11);
        let f = GridField::new(
            Array3::from_shape_fn((2, 6, 6), |_| rng.gen_range(-4.0f32..4.0)),
            1.0,
            meta(2),
        )
        .unwrap();
        let stats = NormStats {
            mean: vec![0.3, -1.2],
            std: vec![1.7, 0.4],
        };
        let back = denormalize(&normalize(&f, &stats).unwrap(), &stats).unwrap();
        for (a, b) in f.data.iter().zip(back.data.iter()) {
            assert!((a - b).abs() < 1e-6, "roundtrip {a} vs {b}");
        }
    }

    #[test]
    fn self_normalization_standardizes() {
        let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(13);
        let f = GridField::new(
            Array3::from_shape_fn((1, 16, 16), |_| rng.gen_range(-2.0f32..6.0)),
            1.0,
            meta(1),
        )
        .unwrap();
        let stats = compute_norm_stats(std::slice::from_ref(&f)).unwrap();
        let n = normalize(&f, &stats).unwrap();
        let post = compute_norm_stats(&[n]).unwrap();
        assert!(post.mean[0].abs() < 1e-5, "mean {}", post.mean[0]);
        assert!((post.std[0] - 1.0).abs() < 1e-4, "std {}", post.std[0]);
    }

    #[test]
    fn normalize_channel_mismatch() {
        let f = GridField::new(Array3::zeros((2, 4, 4)), 1.0, meta(2)).unwrap();
        let stats = NormStats {
            mean: vec![0.0],
            std: vec![1.0],
        };
        assert!(normalize(&f, &stats).is_err());
    }

    #[test]
    fn write_rejects_non_finite() {
        let mut data = Array3::zeros((1, 4, 4));
        data[[0, 0, 0]] = f32::INFINITY;
        let f = GridField {
            data,
            dx_km: 1.0,
            channels: meta(1),
        };
        let dir = tempfile::tempdir().unwrap();
        assert!(write_snapshot(&f, dir.path().join("bad.dsb")).is_err());
    }
}
