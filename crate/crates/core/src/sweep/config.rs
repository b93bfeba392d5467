use std::path::PathBuf;

use ndarray::Array2;

use crate::analysis::{TTestVariant, ThresholdRule, DEFAULT_DELTA};
use crate::autoencoder::AeTrainConfig;
use crate::error::{Error, Result};
use crate::regressor::RegressorSpec;
use crate::rng::RngSeed;

pub const DEFAULT_LADDER: [usize; 10] = [1, 2, 4, 8, 16, 32, 64, 128, 256, 512];

/// Class-probability features aligned row by row with the sweep dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineFeatures {
    pub label: String,
    pub features: Array2<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    /// Latent sizes, strictly increasing.
    pub ladder: Vec<usize>,
    /// Also score the uncompressed embeddings.
    pub include_raw: bool,
    pub regressor: RegressorSpec,
    /// Training settings shared by every ladder entry; the seed is replaced
    /// per entry.
    pub autoencoder: AeTrainConfig,
    pub baselines: Vec<BaselineFeatures>,
    pub seed: RngSeed,
    pub cache_dir: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    pub ttest: TTestVariant,
    pub huber_delta: f64,
    pub id_threshold: f64,
    pub id_rule: ThresholdRule,
    pub workers: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            ladder: DEFAULT_LADDER.to_vec(),
            include_raw: true,
            regressor: RegressorSpec::default(),
            autoencoder: AeTrainConfig::default(),
            baselines: Vec::new(),
            seed: RngSeed(0),
            cache_dir: None,
            output_dir: None,
            ttest: TTestVariant::Paired,
            huber_delta: DEFAULT_DELTA,
            id_threshold: 0.10,
            id_rule: ThresholdRule::Normalized,
            workers: 1,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.ladder.is_empty() && !self.include_raw {
            return Err(Error::InvalidArgument(
                "nothing to sweep: empty ladder without raw".into(),
            ));
        }
        if self.ladder.first() == Some(&0) {
            return Err(Error::InvalidArgument(
                "latent dimensions must be positive".into(),
            ));
        }
        if self.ladder.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument(format!(
                "ladder must be strictly increasing: {:?}",
                self.ladder
            )));
        }
        if !(self.huber_delta > 0.0) {
            return Err(Error::InvalidArgument(
                "huber delta must be positive".into(),
            ));
        }
        if !(self.id_threshold >= 0.0) {
            return Err(Error::InvalidArgument(
                "intrinsic-dimension threshold must be non-negative".into(),
            ));
        }
        if self.workers == 0 {
            return Err(Error::InvalidArgument("workers must be at least 1".into()));
        }
        let mut labels: Vec<&str> = self.baselines.iter().map(|b| b.label.as_str()).collect();
        labels.sort_unstable();
        if labels.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidArgument(
                "baseline labels must be unique".into(),
            ));
        }
        self.autoencoder.validate()
    }

    pub fn ae_seed(&self, latent_dim: usize) -> RngSeed {
        self.seed.derive("ae", latent_dim as u64)
    }

    /// Regressor seed for a ladder entry, keyed by its text form so entries
    /// stay independent of one another.
    pub fn regressor_seed(&self, key: &str) -> RngSeed {
        self.seed.derive(&format!("regressor:{key}"), 0)
    }
}

/// Parses a comma list such as `1,2,4,raw`.
pub fn parse_ladder(s: &str) -> Result<(Vec<usize>, bool)> {
    let mut dims = Vec::new();
    let mut raw = false;
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        if part == "raw" {
            raw = true;
        } else {
            dims.push(
                part.parse()
                    .map_err(|_| Error::InvalidArgument(format!("bad ladder entry {part:?}")))?,
            );
        }
    }
    Ok((dims, raw))
}
