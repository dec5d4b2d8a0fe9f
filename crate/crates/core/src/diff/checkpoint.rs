//! Parameter checkpoints: one line of JSON naming every tensor and its
//! shape, followed by the raw little-endian f64 payload in header order.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::params::Parameters;
use crate::error::{Error, Result};

pub const CHECKPOINT_FORMAT: &str = "explore-params-v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorHeader {
    pub name: String,
    pub shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub format: String,
    pub tensors: Vec<TensorHeader>,
}

pub fn write_checkpoint<W: Write, M: Parameters<f64> + ?Sized>(mut w: W, model: &M) -> Result<()> {
    let tensors = model.tensors();
    let header = CheckpointHeader {
        format: CHECKPOINT_FORMAT.to_string(),
        tensors: tensors.iter().map(|t| TensorHeader { name: t.name.clone(), shape: t.shape.clone() }).collect(),
    };
    serde_json::to_writer(&mut w, &header)?;
    w.write_all(b"\n")?;
    for t in tensors {
        for v in &t.data {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a checkpoint into `model`, which must have identical tensor names
/// and shapes.
pub fn read_checkpoint<R: Read, M: Parameters<f64> + ?Sized>(r: R, model: &mut M) -> Result<()> {
    let mut reader = BufReader::new(r);
    let mut line = String::new();
    reader.read_line(&mut line)?;
    let header: CheckpointHeader = serde_json::from_str(line.trim_end())?;
    if header.format != CHECKPOINT_FORMAT {
        return Err(Error::Parse(format!("unknown checkpoint format {:?}", header.format)));
    }
    let mut tensors = model.tensors_mut();
    if tensors.len() != header.tensors.len() {
        return Err(Error::Parse(format!(
            "checkpoint has {} tensors, model has {}",
            header.tensors.len(),
            tensors.len()
        )));
    }
    for (t, h) in tensors.iter().zip(&header.tensors) {
        if t.name != h.name || t.shape != h.shape {
            return Err(Error::Parse(format!(
                "tensor mismatch: checkpoint {}{:?}, model {}{:?}",
                h.name, h.shape, t.name, t.shape
            )));
        }
    }
    let mut buf = [0u8; 8];
    for t in tensors.iter_mut() {
        for v in t.data.iter_mut() {
            reader
                .read_exact(&mut buf)
                .map_err(|_| Error::Parse(format!("checkpoint truncated in tensor {}", t.name)))?;
            *v = f64::from_le_bytes(buf);
        }
    }
    if reader.read(&mut buf)? != 0 {
        return Err(Error::Parse("trailing bytes after checkpoint payload".into()));
    }
    Ok(())
}

pub fn save_checkpoint<M: Parameters<f64> + ?Sized>(path: &Path, model: &M) -> Result<()> {
    write_checkpoint(std::io::BufWriter::new(std::fs::File::create(path)?), model)
}

pub fn load_checkpoint<M: Parameters<f64> + ?Sized>(path: &Path, model: &mut M) -> Result<()> {
    read_checkpoint(std::fs::File::open(path)?, model)
}
