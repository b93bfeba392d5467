use chrono::NaiveDate;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::dataset::{EmbeddingDataset, Split};
use crate::error::{Error, Result};
use crate::rng::RngSeed;

/// How the validation rows are carved out of the pre-test period.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ValidationRule {
    /// The latest `fraction` of pre-test rows (by date) become validation.
    LastFraction(f64),
    /// Rows dated in `[start, test_start)` become validation.
    StartingAt(NaiveDate),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SplitSpec {
    Random {
        train: f64,
        val: f64,
        test: f64,
        seed: RngSeed,
    },
    Temporal {
        /// Rows dated on or after this day are test rows.
        test_start: NaiveDate,
        validation: ValidationRule,
    },
}

impl SplitSpec {
    pub fn random(train: f64, val: f64, test: f64, seed: RngSeed) -> Self {
        SplitSpec::Random {
            train,
            val,
            test,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            SplitSpec::Random {
                train, val, test, ..
            } => {
                if [train, val, test].iter().any(|f| !(0.0..=1.0).contains(f)) {
                    return Err(Error::InvalidArgument(
                        "split fractions must lie in [0, 1]".into(),
                    ));
                }
                if (train + val + test - 1.0).abs() > 1e-9 {
                    return Err(Error::InvalidArgument(format!(
                        "split fractions sum to {}, expected 1",
                        train + val + test
                    )));
                }
            }
            SplitSpec::Temporal {
                test_start,
                validation,
            } => match validation {
                ValidationRule::LastFraction(f) if !(f > 0.0 && f < 1.0) => {
                    return Err(Error::InvalidArgument(format!(
                        "validation fraction {f} outside (0, 1)"
                    )));
                }
                ValidationRule::StartingAt(start) if start >= test_start => {
                    return Err(Error::InvalidArgument(format!(
                        "validation start {start} must precede test start {test_start}"
                    )));
                }
                _ => {}
            },
        }
        Ok(())
    }
}

/// Tags every row according to `spec`.
pub fn apply_split(ds: &EmbeddingDataset, spec: &SplitSpec) -> Result<EmbeddingDataset> {
    spec.validate()?;
    let n = ds.len();
    let mut tags = vec![None; n];
    match *spec {
        SplitSpec::Random {
            val, test, seed, ..
        } => {
            let n_val = (val * n as f64).round() as usize;
            let n_test = (test * n as f64).round() as usize;
            let n_train = n.saturating_sub(n_val + n_test);
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut seed.rng());
            for (pos, &i) in order.iter().enumerate() {
                tags[i] = Some(if pos < n_train {
                    Split::Train
                } else if pos < n_train + n_val {
                    Split::Val
                } else {
                    Split::Test
                });
            }
        }
        SplitSpec::Temporal {
            test_start,
            validation,
        } => {
            let mut pre = Vec::new();
            for (i, d) in ds.dates().iter().enumerate() {
                let d = d.ok_or_else(|| {
                    Error::InvalidArgument(format!(
                        "row {i} has no date; temporal split needs dates"
                    ))
                })?;
                if d >= test_start {
                    tags[i] = Some(Split::Test);
                } else {
                    pre.push((d, i));
                }
            }
            pre.sort();
            match validation {
                ValidationRule::LastFraction(f) => {
                    let n_val = (f * pre.len() as f64).round() as usize;
                    let cut = pre.len() - n_val.min(pre.len());
                    for (pos, &(_, i)) in pre.iter().enumerate() {
                        tags[i] = Some(if pos < cut { Split::Train } else { Split::Val });
                    }
                }
                ValidationRule::StartingAt(start) => {
                    for &(d, i) in &pre {
                        tags[i] = Some(if d < start { Split::Train } else { Split::Val });
                    }
                }
            }
        }
    }
    let out = ds.clone().with_splits(tags)?;
    out.require_splits()?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    fn dataset(n: usize) -> EmbeddingDataset {
        EmbeddingDataset::new(
            Array2::zeros((n, 2)),
            (0..n).map(|i| i as f64).collect(),
            "t",
        )
        .unwrap()
    }

    fn counts(ds: &EmbeddingDataset) -> [usize; 3] {
        Split::ALL.map(|s| ds.indices(s).len())
    }

    #[test]
    fn random_sizes_follow_fractions() {
        let spec = SplitSpec::random(0.8, 0.1, 0.1, RngSeed(3));
        let a = apply_split(&dataset(10), &spec).unwrap();
        assert_eq!(counts(&a), [8, 1, 1]);
        let b = apply_split(&dataset(10), &spec).unwrap();
        assert_eq!(a.splits(), b.splits());
        let c = apply_split(&dataset(10), &SplitSpec::random(0.8, 0.1, 0.1, RngSeed(4))).unwrap();
        assert_eq!(counts(&c), [8, 1, 1]);
    }

    #[test]
    fn random_rejects_bad_fractions_and_empty_splits() {
        assert!(apply_split(&dataset(10), &SplitSpec::random(0.8, 0.1, 0.2, RngSeed(0))).is_err());
        assert!(apply_split(&dataset(3), &SplitSpec::random(0.8, 0.1, 0.1, RngSeed(0))).is_err());
    }

    #[test]
    fn temporal_last_fraction() {
        let day0 = NaiveDate::from_ymd_opt(2017, 1, 1).unwrap();
        // 100 pre-test rows stored in reverse date order, then 20 test rows.
        let dates: Vec<Option<NaiveDate>> = (0..100)
            .rev()
            .chain(200..220)
            .map(|k| Some(day0 + chrono::Days::new(k)))
            .collect();
        let ds = dataset(120).with_dates(dates).unwrap();
        let spec = SplitSpec::Temporal {
            test_start: day0 + chrono::Days::new(150),
            validation: ValidationRule::LastFraction(0.1),
        };
        let out = apply_split(&ds, &spec).unwrap();
        assert_eq!(counts(&out), [90, 10, 20]);
        // the ten latest pre-test days are rows 0..10 (reverse order)
        assert_eq!(out.indices(Split::Val), (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn temporal_errors() {
        let ds = dataset(5);
        let d = NaiveDate::from_ymd_opt(2023, 1, 1).unwrap();
        let spec = SplitSpec::Temporal {
            test_start: d,
            validation: ValidationRule::LastFraction(0.1),
        };
        assert!(apply_split(&ds, &spec).is_err());
        let bad = SplitSpec::Temporal {
            test_start: d,
            validation: ValidationRule::StartingAt(d),
        };
        assert!(bad.validate().is_err());
    }
}
