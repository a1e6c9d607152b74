//! JSON checkpoint container.
//!
//! ```json
//! {
//!   "format": "mlp-embedder",
//!   "version": 1,
//!   "layer_sizes": [16, 256, 128, 32],
//!   "normalize_output": true,
//!   "layers": [{ "weights": [...], "biases": [...] }, ...]
//! }
//! ```
//!
//! `weights` of layer `l` is the row-major `layer_sizes[l+1] x layer_sizes[l]`
//! matrix flattened. Floats are written in shortest round-trip form and parsed
//! exactly, so save/load is lossless.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::MlpEmbedder;
use crate::error::{Error, Result};
use crate::numerics::Matrix;

pub const CHECKPOINT_FORMAT: &str = "mlp-embedder";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    format: String,
    version: u32,
    layer_sizes: Vec<usize>,
    normalize_output: bool,
    layers: Vec<LayerParams>,
}

#[derive(Serialize, Deserialize)]
struct LayerParams {
    weights: Vec<f64>,
    biases: Vec<f64>,
}

pub fn write_checkpoint<W: Write>(model: &MlpEmbedder, writer: W) -> Result<()> {
    let file = CheckpointFile {
        format: CHECKPOINT_FORMAT.into(),
        version: CHECKPOINT_VERSION,
        layer_sizes: model.layer_sizes().to_vec(),
        normalize_output: model.normalize_output(),
        layers: model
            .weights()
            .iter()
            .zip(model.biases())
            .map(|(w, b)| LayerParams {
                weights: w.as_slice().to_vec(),
                biases: b.clone(),
            })
            .collect(),
    };
    serde_json::to_writer_pretty(writer, &file)?;
    Ok(())
}

pub fn read_checkpoint<R: Read>(reader: R) -> Result<MlpEmbedder> {
    let file: CheckpointFile = serde_json::from_reader(reader)?;
    if file.format != CHECKPOINT_FORMAT {
        return Err(Error::Checkpoint(format!("unknown format {:?}", file.format)));
    }
    if file.version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {}", file.version)));
    }
    if file.layer_sizes.len() < 2 || file.layers.len() != file.layer_sizes.len() - 1 {
        return Err(Error::Checkpoint("layer count does not match layer sizes".into()));
    }
    let mut weights = Vec::with_capacity(file.layers.len());
    let mut biases = Vec::with_capacity(file.layers.len());
    for (l, layer) in file.layers.into_iter().enumerate() {
        weights.push(Matrix::new(
            file.layer_sizes[l + 1],
            file.layer_sizes[l],
            layer.weights,
        )?);
        biases.push(layer.biases);
    }
    MlpEmbedder::from_parts(file.layer_sizes, weights, biases, file.normalize_output)
}

pub fn save_checkpoint(model: &MlpEmbedder, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_checkpoint(model, &mut w)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<MlpEmbedder> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingFile(path.to_path_buf()),
        _ => Error::Io(e),
    })?;
    read_checkpoint(BufReader::new(file))
}
