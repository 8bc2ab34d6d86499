//! LTM checkpoint file.
//!
//! ```text
//! AHA-LTM 1\n
//! {"config":{...},"image_side":52,"tensors":[{"name":..,"shape":[..]},..]}\n
//! <f32 little-endian values of each tensor, in manifest order>
//! ```

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::{Ltm, LtmConfig};
use crate::nncore::{Activation, ConvLayer, ConvTranspose};

pub const CHECKPOINT_MAGIC: &str = "AHA-LTM 1";

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("checkpoint {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("checkpoint {path}: {message}")]
    Format { path: String, message: String },
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    config: LtmConfig,
    image_side: usize,
    tensors: Vec<TensorInfo>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TensorInfo {
    name: String,
    shape: Vec<usize>,
}

pub fn write_checkpoint(ltm: &Ltm, path: &Path) -> Result<(), CheckpointError> {
    let io = |source| CheckpointError::Io {
        path: path.display().to_string(),
        source,
    };
    let enc = ltm.encoder();
    let dec = ltm.decoder();
    let tensors: [(&str, Vec<usize>, Vec<f32>); 4] = [
        ("encoder.kernels", enc.kernels.shape().to_vec(), enc.kernels.iter().copied().collect()),
        ("encoder.bias", enc.bias.shape().to_vec(), enc.bias.to_vec()),
        ("decoder.kernels", dec.kernels.shape().to_vec(), dec.kernels.iter().copied().collect()),
        ("decoder.bias", vec![1], vec![dec.bias]),
    ];
    let manifest = Manifest {
        config: ltm.config().clone(),
        image_side: ltm.image_side(),
        tensors: tensors
            .iter()
            .map(|(n, s, _)| TensorInfo {
                name: n.to_string(),
                shape: s.clone(),
            })
            .collect(),
    };
    let mut buf = Vec::new();
    writeln!(buf, "{CHECKPOINT_MAGIC}").unwrap();
    serde_json::to_writer(&mut buf, &manifest).expect("manifest serialises");
    buf.push(b'\n');
    for (_, _, values) in &tensors {
        for v in values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(io)?;
    }
    fs::write(path, buf).map_err(io)
}

pub fn read_checkpoint(path: &Path) -> Result<Ltm, CheckpointError> {
    let display = path.display().to_string();
    let io = |source| CheckpointError::Io {
        path: display.clone(),
        source,
    };
    let bad = |message: String| CheckpointError::Format {
        path: display.clone(),
        message,
    };
    let mut reader = BufReader::new(fs::File::open(path).map_err(io)?);
    let mut magic = String::new();
    reader.read_line(&mut magic).map_err(io)?;
    if magic.trim_end() != CHECKPOINT_MAGIC {
        return Err(bad(format!("bad header `{}`", magic.trim_end())));
    }
    let mut line = String::new();
    reader.read_line(&mut line).map_err(io)?;
    let manifest: Manifest = serde_json::from_str(&line).map_err(|e| bad(e.to_string()))?;
    manifest.config.validate().map_err(bad)?;

    let mut read_tensor = |name: &str| -> Result<(Vec<usize>, Vec<f32>), CheckpointError> {
        let info = manifest
            .tensors
            .iter()
            .find(|t| t.name == name)
            .ok_or_else(|| bad(format!("missing tensor {name}")))?;
        let n: usize = info.shape.iter().product();
        let mut bytes = vec![0u8; n * 4];
        reader.read_exact(&mut bytes).map_err(io)?;
        let values = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        Ok((info.shape.clone(), values))
    };

    let cfg = &manifest.config;
    let expect = |name: &str, shape: &[usize], want: &[usize]| {
        if shape == want {
            Ok(())
        } else {
            Err(bad(format!("{name} has shape {shape:?}, config implies {want:?}")))
        }
    };
    let taps = cfg.kernel * cfg.kernel;
    let (es, ek) = read_tensor("encoder.kernels")?;
    expect("encoder.kernels", &es, &[cfg.filters, taps])?;
    let (bs, eb) = read_tensor("encoder.bias")?;
    expect("encoder.bias", &bs, &[cfg.filters])?;
    let (ds, dk) = read_tensor("decoder.kernels")?;
    expect("decoder.kernels", &ds, &[cfg.filters, taps])?;
    let (_, db) = read_tensor("decoder.bias")?;

    let encoder = ConvLayer {
        kernels: Array2::from_shape_vec((cfg.filters, taps), ek).unwrap(),
        bias: Array1::from_vec(eb),
        kh: cfg.kernel,
        kw: cfg.kernel,
        stride: cfg.stride,
    };
    let decoder = ConvTranspose {
        kernels: Array2::from_shape_vec((cfg.filters, taps), dk).unwrap(),
        bias: db[0],
        kh: cfg.kernel,
        kw: cfg.kernel,
        stride: cfg.stride,
        activation: Activation::Sigmoid,
    };
    if reader.read(&mut [0u8; 1]).map_err(io)? != 0 {
        return Err(bad("trailing bytes after the last tensor".into()));
    }
    Ok(Ltm::from_parts(cfg.clone(), manifest.image_side, encoder, decoder))
}
