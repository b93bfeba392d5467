//! Shared domain types: the embedding dataset and target standardization.

use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "train" => Ok(Split::Train),
            "val" | "valid" | "validation" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(Error::InvalidArgument(format!(
                "unknown split tag {other:?}"
            ))),
        }
    }
}

/// Row-aligned embeddings, targets and split tags.
///
/// Features are stored as `f64` for arithmetic; the on-disk format is `f32`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingDataset {
    features: Array2<f64>,
    targets: Vec<f64>,
    splits: Vec<Option<Split>>,
    doc_ids: Vec<String>,
    dates: Vec<Option<NaiveDate>>,
    provenance: String,
}

impl EmbeddingDataset {
    /// Builds an untagged dataset, rejecting empty input, non-finite features
    /// and a target vector of the wrong length.
    pub fn new(
        features: Array2<f64>,
        targets: Vec<f64>,
        provenance: impl Into<String>,
    ) -> Result<Self> {
        let (n, d) = features.dim();
        if n == 0 {
            return Err(Error::Empty("dataset has no rows".into()));
        }
        if d == 0 {
            return Err(Error::Empty("dataset has zero dimension".into()));
        }
        if targets.len() != n {
            return Err(Error::LengthMismatch {
                what: "feature rows vs targets",
                left: n,
                right: targets.len(),
            });
        }
        check_finite(&features)?;
        if let Some(row) = targets.iter().position(|t| !t.is_finite()) {
            return Err(Error::NonFinite { row, col: 0 });
        }
        Ok(EmbeddingDataset {
            features,
            targets,
            splits: vec![None; n],
            doc_ids: (0..n).map(|i| format!("row-{i}")).collect(),
            dates: vec![None; n],
            provenance: provenance.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn splits(&self) -> &[Option<Split>] {
        &self.splits
    }

    pub fn doc_ids(&self) -> &[String] {
        &self.doc_ids
    }

    pub fn dates(&self) -> &[Option<NaiveDate>] {
        &self.dates
    }

    pub fn provenance(&self) -> &str {
        &self.provenance
    }

    pub fn with_doc_ids(mut self, doc_ids: Vec<String>) -> Result<Self> {
        self.check_len("doc ids", doc_ids.len())?;
        self.doc_ids = doc_ids;
        Ok(self)
    }

    pub fn with_dates(mut self, dates: Vec<Option<NaiveDate>>) -> Result<Self> {
        self.check_len("dates", dates.len())?;
        self.dates = dates;
        Ok(self)
    }

    pub fn with_splits(mut self, splits: Vec<Option<Split>>) -> Result<Self> {
        self.check_len("split tags", splits.len())?;
        self.splits = splits;
        Ok(self)
    }

    pub fn with_targets(mut self, targets: Vec<f64>) -> Result<Self> {
        self.check_len("targets", targets.len())?;
        if let Some(row) = targets.iter().position(|t| !t.is_finite()) {
            return Err(Error::NonFinite { row, col: 0 });
        }
        self.targets = targets;
        Ok(self)
    }

    pub fn with_provenance(mut self, provenance: impl Into<String>) -> Self {
        self.provenance = provenance.into();
        self
    }

    /// Same rows and tags with a different feature matrix (e.g. encoded latents).
    pub fn with_features(&self, features: Array2<f64>) -> Result<Self> {
        self.check_len("feature rows", features.nrows())?;
        check_finite(&features)?;
        Ok(EmbeddingDataset {
            features,
            ..self.clone_without_features()
        })
    }

    fn clone_without_features(&self) -> Self {
        EmbeddingDataset {
            features: Array2::zeros((0, 0)),
            targets: self.targets.clone(),
            splits: self.splits.clone(),
            doc_ids: self.doc_ids.clone(),
            dates: self.dates.clone(),
            provenance: self.provenance.clone(),
        }
    }

    fn check_len(&self, what: &'static str, got: usize) -> Result<()> {
        if got != self.len() {
            return Err(Error::LengthMismatch {
                what,
                left: self.len(),
                right: got,
            });
        }
        Ok(())
    }

    /// Row indices carrying the given tag, in row order.
    pub fn indices(&self, split: Split) -> Vec<usize> {
        self.splits
            .iter()
            .enumerate()
            .filter_map(|(i, s)| (*s == Some(split)).then_some(i))
            .collect()
    }

    /// Errors unless every row is tagged and every split is non-empty.
    pub fn require_splits(&self) -> Result<()> {
        if let Some(row) = self.splits.iter().position(Option::is_none) {
            return Err(Error::InvalidArgument(format!(
                "row {row} has no split tag"
            )));
        }
        for split in Split::ALL {
            if !self.splits.contains(&Some(split)) {
                return Err(Error::Empty(format!("{split} split is empty")));
            }
        }
        Ok(())
    }

    pub fn split_features(&self, split: Split) -> Array2<f64> {
        self.features.select(Axis(0), &self.indices(split))
    }

    pub fn split_targets(&self, split: Split) -> Vec<f64> {
        self.indices(split)
            .into_iter()
            .map(|i| self.targets[i])
            .collect()
    }

    /// Fits a standardizer on the training targets and applies it to every row.
    pub fn standardized(&self) -> Result<(Self, Standardizer)> {
        self.require_splits()?;
        let std = Standardizer::fit(&self.split_targets(Split::Train))?;
        let targets = std.transform(&self.targets);
        Ok((self.clone().with_targets(targets)?, std))
    }
}

fn check_finite(features: &Array2<f64>) -> Result<()> {
    for (row, r) in features.rows().into_iter().enumerate() {
        if let Some(col) = r.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { row, col });
        }
    }
    Ok(())
}

/// Affine target scaling fitted on training targets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: f64,
    pub std: f64,
}

impl Standardizer {
    /// Arithmetic mean and population standard deviation.
    pub fn fit(targets: &[f64]) -> Result<Self> {
        if targets.is_empty() {
            return Err(Error::Empty(
                "cannot standardize an empty target vector".into(),
            ));
        }
        let n = targets.len() as f64;
        let mean = targets.iter().sum::<f64>() / n;
        let var = targets.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / n;
        if targets.iter().all(|&t| t == targets[0]) || var <= 0.0 {
            return Err(Error::ZeroVariance("training targets are constant".into()));
        }
        Ok(Standardizer {
            mean,
            std: var.sqrt(),
        })
    }

    pub fn transform(&self, y: &[f64]) -> Vec<f64> {
        y.iter().map(|v| (v - self.mean) / self.std).collect()
    }

    pub fn inverse(&self, z: &[f64]) -> Vec<f64> {
        z.iter().map(|v| v * self.std + self.mean).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    #[test]
    fn fit_population_std() {
        let s = Standardizer::fit(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(s.mean, 2.0);
        // sqrt(2/3)
        assert!((s.std - 0.816_496_580_927_726).abs() < 1e-12);

        let s = Standardizer::fit(&[0.0, 2.0]).unwrap();
        assert_eq!((s.mean, s.std), (1.0, 1.0));
    }

    #[test]
    fn constant_targets_rejected() {
        let err = Standardizer::fit(&[5.0, 5.0, 5.0]).unwrap_err();
        assert!(matches!(err, Error::ZeroVariance(_)));
        assert!(err.to_string().contains("zero variance"));
        assert!(Standardizer::fit(&[]).is_err());
    }

    #[test]
    fn transform_examples() {
        let s = Standardizer {
            mean: 2.0,
            std: 1.0,
        };
        assert_eq!(s.transform(&[2.0]), vec![0.0]);
        let s = Standardizer {
            mean: 0.0,
            std: 2.0,
        };
        assert_eq!(s.transform(&[4.0, -4.0]), vec![2.0, -2.0]);
        let s = Standardizer::fit(&[1.0, 2.0, 3.0]).unwrap();
        assert!((s.transform(&[3.0])[0] - 1.224_744_871_391_589).abs() < 1e-12);
    }

    #[test]
    fn dataset_rejects_nan_and_bad_lengths() {
        let x = array![[1.0, 2.0], [f64::NAN, 0.0]];
        assert!(matches!(
            EmbeddingDataset::new(x, vec![0.0, 1.0], "t"),
            Err(Error::NonFinite { row: 1, col: 0 })
        ));
        let x = array![[1.0, 2.0]];
        assert!(EmbeddingDataset::new(x, vec![0.0, 1.0], "t").is_err());
        assert!(EmbeddingDataset::new(Array2::zeros((0, 3)), vec![], "t").is_err());
    }

    #[test]
    fn require_splits_needs_all_three() {
        let x = Array2::zeros((3, 2));
        let ds = EmbeddingDataset::new(x, vec![0.0, 1.0, 2.0], "t").unwrap();
        assert!(ds.require_splits().is_err());
        let ds = ds
            .with_splits(vec![
                Some(Split::Train),
                Some(Split::Val),
                Some(Split::Train),
            ])
            .unwrap();
        assert!(ds.require_splits().is_err());
        let ds = ds
            .with_splits(vec![
                Some(Split::Train),
                Some(Split::Val),
                Some(Split::Test),
            ])
            .unwrap();
        ds.require_splits().unwrap();
        assert_eq!(ds.indices(Split::Val), vec![1]);
    }

    #[test]
    fn standardized_uses_train_statistics_only() {
        let x = Array2::zeros((4, 1));
        let ds = EmbeddingDataset::new(x, vec![1.0, 3.0, 100.0, -50.0], "t")
            .unwrap()
            .with_splits(vec![
                Some(Split::Train),
                Some(Split::Train),
                Some(Split::Val),
                Some(Split::Test),
            ])
            .unwrap();
        let (z, s) = ds.standardized().unwrap();
        assert_eq!((s.mean, s.std), (2.0, 1.0));
        assert_eq!(z.targets(), &[-1.0, 1.0, 98.0, -52.0]);
    }

    proptest! {
        #[test]
        fn round_trip(ys in prop::collection::vec(-1e6f64..1e6, 2..50), x in -1e6f64..1e6) {
            prop_assume!(ys.iter().any(|&v| v != ys[0]));
            let s = Standardizer::fit(&ys).unwrap();
            let back = s.inverse(&s.transform(&[x]))[0];
            prop_assert!((back - x).abs() <= 1e-9 * x.abs().max(1.0));
        }

        #[test]
        fn standardized_train_moments(ys in prop::collection::vec(-1e3f64..1e3, 2..50)) {
            prop_assume!(ys.iter().any(|&v| (v - ys[0]).abs() > 1e-3));
            let s = Standardizer::fit(&ys).unwrap();
            let z = s.transform(&ys);
            let n = z.len() as f64;
            let mean = z.iter().sum::<f64>() / n;
            let sd = (z.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
            prop_assert!(mean.abs() < 1e-9);
            prop_assert!((sd - 1.0).abs() < 1e-9);
        }
    }
}
