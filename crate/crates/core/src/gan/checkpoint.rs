//! On-disk training checkpoints.
//!
//! A checkpoint is a directory:
//!
//! ```text
//! manifest.json            epoch, config_hash, seed, loss_means, ...
//! g_ab.bin g_ba.bin d_a.bin d_b.bin
//! adam_g_ab.bin ...        first then second moments
//! pool_a.bin pool_b.bin    stored pool images, flattened
//! ```
//!
//! Blobs are `FRW1`, one byte of element width, a little-endian `u64`
//! element count, then the elements in little-endian order.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::pool::RngState;
use super::TrainConfig;
use crate::error::{Error, Result};
use crate::nn::Real;

const MAGIC: &[u8; 4] = b"FRW1";
pub const CHECKPOINT_MANIFEST: &str = "manifest.json";

pub fn write_blob<T: Real>(path: &Path, values: &[T]) -> Result<()> {
    let mut out = Vec::with_capacity(13 + values.len() * T::BYTES);
    out.extend_from_slice(MAGIC);
    out.push(T::BYTES as u8);
    out.extend_from_slice(&(values.len() as u64).to_le_bytes());
    for &v in values {
        v.write_le(&mut out);
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_blob<T: Real>(path: &Path) -> Result<Vec<T>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < 13 || &bytes[..4] != MAGIC {
        return Err(Error::format(path, "not a weight blob"));
    }
    if bytes[4] as usize != T::BYTES {
        return Err(Error::Mismatch(format!(
            "{}: stored element width {} bytes, expected {} ({})",
            path.display(),
            bytes[4],
            T::BYTES,
            T::DTYPE
        )));
    }
    let count = u64::from_le_bytes(bytes[5..13].try_into().expect("8 bytes")) as usize;
    let body = &bytes[13..];
    if body.len() != count * T::BYTES {
        return Err(Error::format(
            path,
            format!("header says {count} elements, body holds {} bytes", body.len()),
        ));
    }
    Ok(body.chunks_exact(T::BYTES).map(T::read_le).collect())
}

/// Mean of each logged loss over one epoch.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossMeans {
    pub adv_ab: f64,
    pub adv_ba: f64,
    pub cycle: f64,
    pub identity: f64,
    pub total_g: f64,
    pub d_a: f64,
    pub d_b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolState {
    pub len: usize,
    /// Per-image shape `[c, h, w]`.
    pub image_shape: [usize; 3],
    pub rng: RngState,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointManifest {
    /// Number of completed epochs.
    pub epoch: usize,
    pub config_hash: String,
    pub seed: u64,
    pub loss_means: LossMeans,
    /// Means of every completed epoch, oldest first.
    pub history: Vec<LossMeans>,
    pub dtype: String,
    pub step: u64,
    pub adam_steps: [u64; 4],
    pub pool_a: PoolState,
    pub pool_b: PoolState,
    pub config: TrainConfig,
}

impl CheckpointManifest {
    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(CHECKPOINT_MANIFEST);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::format(&path, e))
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        let path = dir.join(CHECKPOINT_MANIFEST);
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }
}

/// `root/epoch_0003` for the checkpoint written after 3 epochs.
pub fn epoch_dir(root: &Path, epoch: usize) -> PathBuf {
    root.join(format!("epoch_{epoch:04}"))
}

/// Latest checkpoint directory under `root`, by completed-epoch count.
pub fn latest_checkpoint(root: &Path) -> Result<Option<PathBuf>> {
    if !root.exists() {
        return Ok(None);
    }
    let entries = fs::read_dir(root).map_err(|e| Error::io(root, e))?;
    let mut best: Option<(usize, PathBuf)> = None;
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(root, e))?;
        let name = entry.file_name();
        let Some(n) = name.to_str().and_then(|s| s.strip_prefix("epoch_")).and_then(|s| s.parse().ok()) else {
            continue;
        };
        if !entry.path().join(CHECKPOINT_MANIFEST).exists() {
            continue;
        }
        if best.as_ref().is_none_or(|(b, _)| n > *b) {
            best = Some((n, entry.path()));
        }
    }
    Ok(best.map(|(_, p)| p))
}
