//! Model checkpoints: `<stem>.json` holds the architecture and a tensor
//! table, `<stem>.bin` the parameters as little-endian `f64`, each tensor
//! row-major at the element offset listed in the table. The fixed separation
//! matrix is not stored; it is rebuilt from the class count on load.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::head::{Head, HeadKind};
use super::layer::{DenseLayer, Param};
use super::network::{Architecture, Network};
use crate::error::{Error, Result};
use crate::separation::{build_separation_matrix, Radius};

pub const CHECKPOINT_FORMAT: &str = "maxsep-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TensorEntry {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    /// Offset in `f64` elements into the binary file.
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointHeader {
    pub format: String,
    pub version: u32,
    pub architecture: Architecture,
    pub head: HeadKind,
    pub rho: Option<f64>,
    pub tensors: Vec<TensorEntry>,
}

fn paths(stem: &Path) -> (PathBuf, PathBuf) {
    (stem.with_extension("json"), stem.with_extension("bin"))
}

fn tensor_names(net: &Network) -> Vec<String> {
    let mut names = Vec::new();
    for i in 0..net.layers().len() {
        names.push(format!("layer{i}.weight"));
        names.push(format!("layer{i}.bias"));
    }
    match net.head_kind() {
        HeadKind::MaxSepFixed => {}
        HeadKind::MaxSepLearnableInit | HeadKind::RandomLearnable => {
            names.push("head.weight".into())
        }
        HeadKind::StandardLinear => {
            names.push("head.weight".into());
            names.push("head.bias".into());
        }
    }
    names
}

/// Write `<stem>.json` and `<stem>.bin`.
pub fn save_checkpoint(net: &Network, stem: impl AsRef<Path>) -> Result<()> {
    let (json_path, bin_path) = paths(stem.as_ref());
    let mut tensors = Vec::new();
    let mut data = Vec::new();
    let mut offset = 0;
    for (name, p) in tensor_names(net).into_iter().zip(net.params()) {
        let (rows, cols) = p.value.shape();
        tensors.push(TensorEntry {
            name,
            rows,
            cols,
            offset,
        });
        for r in 0..rows {
            for c in 0..cols {
                data.extend_from_slice(&p.value[(r, c)].to_le_bytes());
            }
        }
        offset += rows * cols;
    }
    let header = CheckpointHeader {
        format: CHECKPOINT_FORMAT.into(),
        version: CHECKPOINT_VERSION,
        architecture: net.architecture().clone(),
        head: net.head_kind(),
        rho: net.head().rho().map(Radius::get),
        tensors,
    };
    let json = serde_json::to_string_pretty(&header).expect("header serializes");
    write_replace(&bin_path, &data)?;
    write_replace(&json_path, (json + "\n").as_bytes())?;
    Ok(())
}

/// Write to a sibling temp file, then rename over `path`.
fn write_replace(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(stem: impl AsRef<Path>) -> Result<Network> {
    let (json_path, bin_path) = paths(stem.as_ref());
    let text = fs::read_to_string(&json_path).map_err(|e| Error::io(&json_path, e))?;
    let header: CheckpointHeader =
        serde_json::from_str(&text).map_err(|e| Error::parse(&json_path, e.to_string()))?;
    if header.format != CHECKPOINT_FORMAT || header.version != CHECKPOINT_VERSION {
        return Err(Error::parse(
            &json_path,
            format!("unsupported checkpoint {} v{}", header.format, header.version),
        ));
    }
    let bytes = fs::read(&bin_path).map_err(|e| Error::io(&bin_path, e))?;
    let mut tensors = Vec::with_capacity(header.tensors.len());
    for t in &header.tensors {
        let start = t.offset * 8;
        let end = start + t.rows * t.cols * 8;
        let raw = bytes.get(start..end).ok_or_else(|| {
            Error::parse(&bin_path, format!("tensor {} runs past end of file", t.name))
        })?;
        let values = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()));
        tensors.push(DMatrix::from_row_iterator(t.rows, t.cols, values));
    }

    let arch = header.architecture.clone();
    let n_layers = arch.hidden.len() + 1;
    let expected = tensor_count(n_layers, header.head);
    if tensors.len() != expected {
        return Err(Error::parse(
            &json_path,
            format!("expected {expected} tensors, found {}", tensors.len()),
        ));
    }
    let mut it = tensors.into_iter();
    let layers: Vec<DenseLayer> = (0..n_layers)
        .map(|_| DenseLayer::from_parts(it.next().unwrap(), it.next().unwrap()))
        .collect();
    let rho = header.rho.map(Radius::new).transpose()?.unwrap_or_default();
    let head = match header.head {
        HeadKind::MaxSepFixed => Head::MaxSepFixed {
            matrix: build_separation_matrix(arch.num_classes)?.into(),
            rho,
        },
        HeadKind::MaxSepLearnableInit => Head::MaxSepLearnableInit {
            weight: Param::new(it.next().unwrap(), true),
            rho,
        },
        HeadKind::RandomLearnable => Head::RandomLearnable {
            weight: Param::new(it.next().unwrap(), true),
        },
        HeadKind::StandardLinear => Head::StandardLinear {
            layer: DenseLayer::from_parts(it.next().unwrap(), it.next().unwrap()),
        },
    };
    Network::from_parts(arch, layers, head)
}

fn tensor_count(n_layers: usize, head: HeadKind) -> usize {
    2 * n_layers
        + match head {
            HeadKind::MaxSepFixed => 0,
            HeadKind::MaxSepLearnableInit | HeadKind::RandomLearnable => 1,
            HeadKind::StandardLinear => 2,
        }
}
