//! Checkpoint files: a length-prefixed JSON header (model spec, parameter
//! manifest, normalization stats) followed by the flat f64 little-endian
//! parameter payload in manifest order, mirroring the snapshot format.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::grid::NormStats;
use crate::models::{Model, ModelSpec, PluginRegistry};
use crate::{Error, Result};

const DTYPE: &str = "f64le";

#[derive(Debug, Serialize, Deserialize)]
struct ParamManifest {
    name: String,
    shape: Vec<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CheckpointHeader {
    version: u32,
    spec: ModelSpec,
    stats: NormStats,
    params: Vec<ParamManifest>,
    dtype: String,
}

pub fn save_checkpoint(model: &Model, stats: &NormStats, path: impl AsRef<Path>) -> Result<()> {
    let manifest: Vec<ParamManifest> = model
        .params
        .iter()
        .map(|(_, name, v)| ParamManifest {
            name: name.to_string(),
            shape: v.shape().to_vec(),
        })
        .collect();
    let header = CheckpointHeader {
        version: 1,
        spec: model.spec.clone(),
        stats: stats.clone(),
        params: manifest,
        dtype: DTYPE.to_string(),
    };
    let header_bytes = serde_json::to_vec(&header)?;
    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(&(header_bytes.len() as u32).to_le_bytes())?;
    out.write_all(&header_bytes)?;
    for (_, _, v) in model.params.iter() {
        for x in v.iter() {
            out.write_all(&x.to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn load_checkpoint(
    path: impl AsRef<Path>,
    registry: Option<&PluginRegistry>,
) -> Result<(Model, NormStats)> {
    let mut rd = BufReader::new(File::open(path)?);
    let mut len_bytes = [0u8; 4];
    rd.read_exact(&mut len_bytes)
        .map_err(|_| Error::parse("checkpoint too short for header length"))?;
    let mut header_bytes = vec![0u8; u32::from_le_bytes(len_bytes) as usize];
    rd.read_exact(&mut header_bytes)
        .map_err(|_| Error::parse("truncated checkpoint header"))?;
    let header: CheckpointHeader = serde_json::from_slice(&header_bytes)
        .map_err(|e| Error::parse(format!("malformed checkpoint header: {e}")))?;
    if header.version != 1 {
        return Err(Error::validation(format!(
            "unsupported checkpoint version {}",
            header.version
        )));
    }
    if header.dtype != DTYPE {
        return Err(Error::validation(format!(
            "unsupported checkpoint dtype {:?}",
            header.dtype
        )));
    }
    let mut model = Model::build(&header.spec, 0, registry)?;
    let ids: Vec<_> = model.params.iter().map(|(id, _, _)| id).collect();
    if ids.len() != header.params.len() {
        return Err(Error::parse(format!(
            "checkpoint has {} tensors, architecture expects {}",
            header.params.len(),
            ids.len()
        )));
    }
    for (id, manifest) in ids.into_iter().zip(header.params.iter()) {
        let value = model.params.get_mut(id);
        if value.shape() != manifest.shape.as_slice() {
            return Err(Error::parse(format!(
                "tensor {:?}: shape {:?} in file, {:?} in architecture",
                manifest.name,
                manifest.shape,
                value.shape()
            )));
        }
        for x in value.iter_mut() {
            let mut buf = [0u8; 8];
            rd.read_exact(&mut buf)
                .map_err(|_| Error::parse("checkpoint payload size mismatch"))?;
            *x = f64::from_le_bytes(buf);
            if !x.is_finite() {
                return Err(Error::validation("non-finite parameter in checkpoint"));
            }
        }
    }
    let mut trailing = [0u8; 1];
    if rd.read(&mut trailing)? != 0 {
        return Err(Error::parse("checkpoint payload size mismatch: trailing bytes"));
    }
    header.stats.validate()?;
    Ok((model, header.stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Graph;
    use crate::models::Family;
    use ndarray::{ArrayD, IxDyn};

    #[test]
    fn checkpoint_roundtrip_preserves_outputs() {
        let mut spec = ModelSpec::new(Family::Dfno);
        spec.width = 8;
        spec.n_blocks = 1;
        spec.modes = 2;
        spec.n_extractor_blocks = 6;
        spec.in_channels = 1;
        let model = Model::build(&spec, 42, None).unwrap();
        let stats = NormStats {
            mean: vec![0.5],
            std: vec![2.0],
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        save_checkpoint(&model, &stats, &path).unwrap();
        let (loaded, lstats) = load_checkpoint(&path, None).unwrap();
        assert_eq!(stats, lstats);
        let x = ArrayD::from_shape_fn(IxDyn(&[1, 1, 8, 8]), |ix| {
            (ix[2] as f64 * 0.37 - ix[3] as f64 * 0.21).sin()
        });
        let run = |m: &Model| {
            let mut g = Graph::new();
            let xv = g.input(x.clone());
            let y = m.forward_at_factor(&mut g, xv, 4, 1.0).unwrap();
            g.value(y).clone()
        };
        let a = run(&model);
        let b = run(&loaded);
        for (p, q) in a.iter().zip(b.iter()) {
            assert_eq!(p.to_bits(), q.to_bits(), "round-trip must be bit-exact");
        }
    }

    #[test]
    fn rejects_truncated_payload() {
        let mut spec = ModelSpec::new(Family::Srcnn);
        spec.in_channels = 1;
        let model = Model::build(&spec, 1, None).unwrap();
        let stats = NormStats {
            mean: vec![0.0],
            std: vec![1.0],
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        save_checkpoint(&model, &stats, &path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes.truncate(bytes.len() - 16);
        std::fs::write(&path, &bytes).unwrap();
        assert!(load_checkpoint(&path, None).is_err());
    }
}
