//! Checkpoint files: a one-line JSON header followed by the flat parameter
//! vector as raw little-endian 64-bit floats. The binary payload makes
//! save/load round trips bit-exact.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::net::{network::Parameters, NetworkConfig};

/// Header stored in the first line of a checkpoint file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub config: NetworkConfig,
    pub seed: u64,
    pub epoch: usize,
    pub param_count: usize,
}

/// A loaded checkpoint: the architecture, training position, and parameters.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub config: NetworkConfig,
    pub seed: u64,
    pub epoch: usize,
    pub params: Parameters,
}

/// Writes `params` with its architecture and training position.
pub fn save_checkpoint(
    path: &Path,
    config: &NetworkConfig,
    seed: u64,
    epoch: usize,
    params: &Parameters,
) -> Result<()> {
    let header = CheckpointHeader {
        config: config.clone(),
        seed,
        epoch,
        param_count: params.len(),
    };
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer(&mut out, &header)?;
    out.write_all(b"\n")?;
    for v in params.flat() {
        out.write_all(&v.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

/// Reads a checkpoint written by [`save_checkpoint`].
pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let mut reader = BufReader::new(File::open(path)?);
    let mut header_line = Vec::new();
    let mut byte = [0u8; 1];
    loop {
        let n = reader.read(&mut byte)?;
        if n == 0 {
            return Err(Error::Checkpoint(format!(
                "{}: missing newline after header",
                path.display()
            )));
        }
        if byte[0] == b'\n' {
            break;
        }
        header_line.push(byte[0]);
    }
    let header: CheckpointHeader = serde_json::from_slice(&header_line)
        .map_err(|e| Error::Checkpoint(format!("{}: bad header: {e}", path.display())))?;

    let mut payload = Vec::new();
    reader.read_to_end(&mut payload)?;
    if payload.len() != header.param_count * 8 {
        return Err(Error::Checkpoint(format!(
            "{}: payload has {} bytes, header promises {} parameters",
            path.display(),
            payload.len(),
            header.param_count
        )));
    }
    let flat: Vec<f64> = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    let params = Parameters::from_flat(&header.config, flat).map_err(|e| {
        Error::Checkpoint(format!("{}: parameters do not fit config: {e}", path.display()))
    })?;
    Ok(Checkpoint {
        config: header.config,
        seed: header.seed,
        epoch: header.epoch,
        params,
    })
}
