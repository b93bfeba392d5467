use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::analysis::{
    Dimension, LossCurve, SignificanceBand, Similarity, TTestResult, TTestVariant, ThresholdRule,
};
use crate::autoencoder::AeTrainConfig;
use crate::error::{Error, Result};
use crate::regressor::RegressorSpec;
use crate::rng::RngSeed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub provenance: String,
    pub fingerprint: String,
    pub dim: usize,
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AeSummary {
    pub epochs_run: usize,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub stopped_early: bool,
    pub overcomplete: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntryReport {
    pub dimension: Dimension,
    pub mean_huber: f64,
    pub normalized: Option<f64>,
    /// Test of this entry's errors against the best entry's, oriented as
    /// `entry - best`.
    pub vs_best: TTestResult,
    pub band: SignificanceBand,
    pub autoencoder: Option<AeSummary>,
    /// Mean cosine between test embeddings and their reconstructions.
    pub similarity: Option<Similarity>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineRow {
    pub label: String,
    /// Number of classes.
    pub dimension: usize,
    pub mean_huber: f64,
    pub vs_best: TTestResult,
    pub band: SignificanceBand,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntrinsicDimension {
    pub dimension: Dimension,
    pub threshold: f64,
    pub rule: ThresholdRule,
}

/// Everything a sweep produces that is a function of its inputs. Wall-clock
/// timings live in [`Timings`] so that reruns compare byte for byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub code_version: String,
    pub dataset: DatasetSummary,
    pub seed: RngSeed,
    pub regressor: RegressorSpec,
    pub autoencoder: AeTrainConfig,
    pub ttest: TTestVariant,
    pub huber_delta: f64,
    pub curve: LossCurve,
    pub entries: Vec<EntryReport>,
    pub best: Dimension,
    pub intrinsic: Option<IntrinsicDimension>,
    pub baselines: Vec<BaselineRow>,
}

impl SweepReport {
    pub fn entry(&self, dim: Dimension) -> Option<&EntryReport> {
        self.entries.iter().find(|e| e.dimension == dim)
    }

    pub fn raw(&self) -> Option<&EntryReport> {
        self.entries.iter().find(|e| e.dimension.is_raw())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// One row per curve entry: dimension, mean_huber, normalized,
    /// p_vs_best, significance_band.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "dimension",
            "mean_huber",
            "normalized",
            "p_vs_best",
            "significance_band",
        ])
        .map_err(csv_err)?;
        for e in &self.entries {
            w.write_record([
                e.dimension.to_string(),
                e.mean_huber.to_string(),
                e.normalized.map(|v| v.to_string()).unwrap_or_default(),
                e.vs_best.p_value.to_string(),
                e.band.as_str().to_string(),
            ])
            .map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Format(e.to_string())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntryTiming {
    pub label: String,
    pub seconds: f64,
    pub cache_hit: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Timings {
    pub entries: Vec<EntryTiming>,
    pub total_seconds: f64,
}
