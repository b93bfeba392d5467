//! On-disk cache of trained autoencoders, keyed by a content hash.

use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::autoencoder::{AeTrainConfig, AeTrainReport, AutoencoderModel};
use crate::dataset::EmbeddingDataset;
use crate::error::{Error, Result};

/// Bumped whenever training code changes in a way that alters results.
pub const CODE_VERSION: &str = concat!("dimsweep-", env!("CARGO_PKG_VERSION"), "-ae1");

/// Hash of everything in a dataset that can influence training.
pub fn dataset_fingerprint(ds: &EmbeddingDataset) -> String {
    let mut h = Sha256::new();
    h.update((ds.len() as u64).to_le_bytes());
    h.update((ds.dim() as u64).to_le_bytes());
    for v in ds.features().iter() {
        h.update(v.to_le_bytes());
    }
    for t in ds.targets() {
        h.update(t.to_le_bytes());
    }
    for s in ds.splits() {
        h.update([s.map_or(0, |s| s as u8 + 1)]);
    }
    hex::encode(h.finalize())
}

pub fn cache_key(fingerprint: &str, cfg: &AeTrainConfig, latent_dim: usize) -> String {
    let mut h = Sha256::new();
    h.update(fingerprint.as_bytes());
    h.update(serde_json::to_vec(cfg).expect("config serializes"));
    h.update((latent_dim as u64).to_le_bytes());
    h.update(CODE_VERSION.as_bytes());
    hex::encode(h.finalize())
}

#[derive(Debug, Clone)]
pub struct ModelCache {
    root: PathBuf,
}

impl ModelCache {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        ModelCache { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn model_path(&self, key: &str) -> PathBuf {
        self.root.join(format!("ae-{key}.bin"))
    }

    pub fn report_path(&self, key: &str) -> PathBuf {
        self.root.join(format!("ae-{key}.json"))
    }

    /// `Ok(None)` on a miss. A present but unreadable entry is reported as an
    /// error so the caller can warn and retrain.
    pub fn load(&self, key: &str) -> Result<Option<(AutoencoderModel, AeTrainReport)>> {
        let (mp, rp) = (self.model_path(key), self.report_path(key));
        if !mp.exists() || !rp.exists() {
            return Ok(None);
        }
        let bytes = fs::read(&mp).map_err(|e| Error::io(&mp, e))?;
        let model = AutoencoderModel::from_bytes(&bytes)?;
        let text = fs::read(&rp).map_err(|e| Error::io(&rp, e))?;
        let report = serde_json::from_slice(&text)?;
        Ok(Some((model, report)))
    }

    pub fn store(&self, key: &str, model: &AutoencoderModel, report: &AeTrainReport) -> Result<()> {
        fs::create_dir_all(&self.root).map_err(|e| Error::io(&self.root, e))?;
        write_atomic(&self.report_path(key), &serde_json::to_vec_pretty(report)?)?;
        write_atomic(&self.model_path(key), &model.to_bytes())
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}
