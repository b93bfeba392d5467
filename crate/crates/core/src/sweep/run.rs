use std::fs;
use std::path::Path;
use std::time::Instant;

use ndarray::{Array2, ArrayView2, Axis};
use rayon::prelude::*;

use super::cache::{cache_key, dataset_fingerprint, ModelCache, CODE_VERSION};
use super::config::{BaselineFeatures, SweepConfig};
use super::plot::emit_plots;
use super::report::{
    AeSummary, BaselineRow, DatasetSummary, EntryReport, EntryTiming, IntrinsicDimension,
    SweepReport, Timings,
};
use crate::analysis::{
    error_distribution, huber, intrinsic_dimension, normalize_curve, reconstruction_similarity,
    t_test, CurvePoint, Dimension, ErrorDistribution, LossCurve, Similarity,
};
use crate::autoencoder::{ae_train, AeTrainConfig, AeTrainReport, AutoencoderModel};
use crate::dataset::{EmbeddingDataset, Split};
use crate::error::{Error, Result};
use crate::regressor::RegressorSpec;

/// A finished sweep: the deterministic report, the per-sample test errors
/// behind it and how long each entry took.
#[derive(Debug, Clone)]
pub struct SweepRun {
    pub report: SweepReport,
    /// Curve entries in dimension order, then baselines.
    pub errors: Vec<ErrorDistribution>,
    pub timings: Timings,
}

struct EntryOutcome {
    dimension: Dimension,
    errors: ErrorDistribution,
    autoencoder: Option<AeSummary>,
    similarity: Option<Similarity>,
    timing: EntryTiming,
}

/// Train/val/test views of one feature matrix with standardized targets.
struct Splits {
    idx: [Vec<usize>; 3],
    y: [Vec<f64>; 3],
}

impl Splits {
    fn new(ds: &EmbeddingDataset) -> Self {
        let idx = [Split::Train, Split::Val, Split::Test].map(|s| ds.indices(s));
        let y = [Split::Train, Split::Val, Split::Test].map(|s| ds.split_targets(s));
        Splits { idx, y }
    }

    fn evaluate(
        &self,
        x: ArrayView2<f64>,
        regressor: &RegressorSpec,
        delta: f64,
        label: String,
    ) -> std::result::Result<ErrorDistribution, (Error, &'static str)> {
        let [tr, va, te] = self.idx.clone().map(|i| x.select(Axis(0), &i));
        let pred = regressor
            .fit_predict((tr.view(), &self.y[0]), (va.view(), &self.y[1]), te.view())
            .map_err(|e| (e, "regressor"))?;
        error_distribution(&self.y[2], &pred, delta, label).map_err(|e| (e, "evaluate"))
    }
}

/// Runs every ladder entry, the raw embeddings and any baselines, then
/// compares each against the best entry. Writes outputs when
/// `cfg.output_dir` is set.
pub fn run_sweep(dataset: &EmbeddingDataset, cfg: &SweepConfig) -> Result<SweepRun> {
    let start = Instant::now();
    cfg.validate()?;
    dataset.require_splits()?;
    for b in &cfg.baselines {
        check_baseline_shape(dataset, b)?;
        check_simplex(&b.features)?;
    }
    let (ds, _) = dataset.standardized()?;
    let fingerprint = dataset_fingerprint(dataset);
    let cache = cfg.cache_dir.as_ref().map(ModelCache::new);
    let splits = Splits::new(&ds);

    let mut jobs: Vec<Dimension> = cfg.ladder.iter().map(|&d| Dimension::Latent(d)).collect();
    if cfg.include_raw {
        jobs.push(Dimension::Raw(ds.dim()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    let outcomes: Vec<EntryOutcome> = pool.install(|| {
        jobs.par_iter()
            .map(|&dim| run_entry(&ds, &splits, cfg, cache.as_ref(), &fingerprint, dim))
            .collect::<Result<Vec<_>>>()
    })?;
    let baselines: Vec<(BaselineFeatures, ErrorDistribution, f64)> = cfg
        .baselines
        .iter()
        .map(|b| {
            let t0 = Instant::now();
            let seed = cfg.regressor_seed(&format!("baseline:{}", b.label));
            splits
                .evaluate(
                    b.features.view(),
                    &cfg.regressor.with_seed(seed),
                    cfg.huber_delta,
                    b.label.clone(),
                )
                .map(|e| (b.clone(), e, t0.elapsed().as_secs_f64()))
                .map_err(|(e, stage)| e.at_stage(format!("baseline {}", b.label), stage))
        })
        .collect::<Result<_>>()?;

    let mut outcomes = outcomes;
    outcomes.sort_by_key(|o| o.dimension);
    let curve = LossCurve::new(
        outcomes
            .iter()
            .map(|o| CurvePoint {
                dimension: o.dimension,
                mean_huber: o.errors.mean(),
            })
            .collect(),
    )?;
    let curve = normalize_curve(&curve).unwrap_or(curve);
    let best = curve.argmin().expect("at least one entry").dimension;
    let best_errors = &outcomes
        .iter()
        .find(|o| o.dimension == best)
        .unwrap()
        .errors;
    let compare = |e: &ErrorDistribution, what: String| {
        t_test(e, best_errors, cfg.ttest).map_err(|err| err.at_stage(what, "ttest"))
    };

    let mut entries = Vec::with_capacity(outcomes.len());
    for (i, o) in outcomes.iter().enumerate() {
        let vs_best = compare(&o.errors, o.dimension.to_string())?;
        entries.push(EntryReport {
            dimension: o.dimension,
            mean_huber: o.errors.mean(),
            normalized: curve.normalized.as_ref().map(|n| n[i]),
            band: vs_best.band(),
            vs_best,
            autoencoder: o.autoencoder.clone(),
            similarity: o.similarity,
        });
    }
    let mut baseline_rows = Vec::new();
    for (b, e, _) in &baselines {
        let vs_best = compare(e, format!("baseline {}", b.label))?;
        baseline_rows.push(BaselineRow {
            label: b.label.clone(),
            dimension: b.features.ncols(),
            mean_huber: e.mean(),
            band: vs_best.band(),
            vs_best,
        });
    }
    let intrinsic = intrinsic_dimension(&curve, cfg.id_threshold, cfg.id_rule)
        .ok()
        .map(|dimension| IntrinsicDimension {
            dimension,
            threshold: cfg.id_threshold,
            rule: cfg.id_rule,
        });

    let report = SweepReport {
        code_version: CODE_VERSION.to_string(),
        dataset: DatasetSummary {
            provenance: dataset.provenance().to_string(),
            fingerprint,
            dim: ds.dim(),
            n_train: splits.idx[0].len(),
            n_val: splits.idx[1].len(),
            n_test: splits.idx[2].len(),
        },
        seed: cfg.seed,
        regressor: cfg.regressor.clone(),
        autoencoder: cfg.autoencoder.clone(),
        ttest: cfg.ttest,
        huber_delta: cfg.huber_delta,
        curve,
        entries,
        best,
        intrinsic,
        baselines: baseline_rows,
    };
    let mut timings = Timings {
        entries: outcomes.iter().map(|o| o.timing.clone()).collect(),
        total_seconds: 0.0,
    };
    timings
        .entries
        .extend(baselines.iter().map(|(b, _, s)| EntryTiming {
            label: format!("baseline {}", b.label),
            seconds: *s,
            cache_hit: false,
        }));
    timings.total_seconds = start.elapsed().as_secs_f64();
    let errors = outcomes
        .into_iter()
        .map(|o| o.errors)
        .chain(baselines.into_iter().map(|(_, e, _)| e))
        .collect();
    let run = SweepRun {
        report,
        errors,
        timings,
    };
    if let Some(dir) = &cfg.output_dir {
        write_outputs(&run, dir)?;
    }
    Ok(run)
}

fn run_entry(
    ds: &EmbeddingDataset,
    splits: &Splits,
    cfg: &SweepConfig,
    cache: Option<&ModelCache>,
    fingerprint: &str,
    dim: Dimension,
) -> Result<EntryOutcome> {
    let t0 = Instant::now();
    let label = dim.to_string();
    let regressor = cfg.regressor.with_seed(cfg.regressor_seed(&label));
    let tag = |(e, stage): (Error, &'static str)| e.at_stage(&label, stage);
    let (errors, autoencoder, similarity, cache_hit) = match dim {
        Dimension::Raw(_) => {
            let errors = splits
                .evaluate(
                    ds.features().view(),
                    &regressor,
                    cfg.huber_delta,
                    label.clone(),
                )
                .map_err(tag)?;
            (errors, None, None, false)
        }
        Dimension::Latent(dz) => {
            let ae_cfg = AeTrainConfig {
                seed: cfg.ae_seed(dz),
                ..cfg.autoencoder.clone()
            };
            let (model, report, hit) = train_or_load(ds, &ae_cfg, dz, cache, fingerprint)
                .map_err(|e| e.at_stage(&label, "autoencoder"))?;
            let codes = model
                .encode_batch(ds.features().view())
                .map_err(|e| e.at_stage(&label, "encode"))?;
            let errors = splits
                .evaluate(codes.view(), &regressor, cfg.huber_delta, label.clone())
                .map_err(tag)?;
            let test = ds.split_features(Split::Test);
            let similarity = match reconstruction_similarity(&model, test.view()) {
                Ok(s) => Some(s),
                Err(Error::Empty(_)) => None,
                Err(e) => return Err(e.at_stage(&label, "similarity")),
            };
            let summary = AeSummary {
                epochs_run: report.val_loss.len(),
                best_epoch: report.best_epoch,
                best_val_loss: report.best_val_loss,
                stopped_early: report.stopped_early,
                overcomplete: report.overcomplete,
            };
            if report.overcomplete {
                log::warn!("latent dimension {dz} exceeds input dimension {}", ds.dim());
            }
            (errors, Some(summary), similarity, hit)
        }
    };
    let seconds = t0.elapsed().as_secs_f64();
    log::info!(
        "entry {label}: mean huber {:.6} ({seconds:.1}s{})",
        errors.mean(),
        if cache_hit { ", cached" } else { "" }
    );
    Ok(EntryOutcome {
        dimension: dim,
        errors,
        autoencoder,
        similarity,
        timing: EntryTiming {
            label,
            seconds,
            cache_hit,
        },
    })
}

/// Returns the model quantized to its stored precision, so cached and fresh
/// runs see identical parameters.
fn train_or_load(
    ds: &EmbeddingDataset,
    cfg: &AeTrainConfig,
    latent_dim: usize,
    cache: Option<&ModelCache>,
    fingerprint: &str,
) -> Result<(AutoencoderModel, AeTrainReport, bool)> {
    let key = cache_key(fingerprint, cfg, latent_dim);
    if let Some(cache) = cache {
        match cache.load(&key) {
            Ok(Some((model, report)))
                if model.input_dim() == ds.dim() && model.latent_dim() == latent_dim =>
            {
                return Ok((model, report, true));
            }
            Ok(Some(_)) => log::warn!("cached model {key} has the wrong shape; retraining"),
            Ok(None) => {}
            Err(e) => log::warn!("cached model {key} is unreadable ({e}); retraining"),
        }
    }
    let (model, report) = ae_train(ds, cfg, latent_dim)?;
    let model = model.quantized();
    if let Some(cache) = cache {
        cache.store(&key, &model, &report)?;
    }
    Ok((model, report, false))
}

fn check_baseline_shape(ds: &EmbeddingDataset, b: &BaselineFeatures) -> Result<()> {
    if b.features.nrows() != ds.len() {
        return Err(Error::LengthMismatch {
            what: "baseline rows vs dataset rows",
            left: b.features.nrows(),
            right: ds.len(),
        });
    }
    if b.features.ncols() == 0 {
        return Err(Error::Empty(format!("baseline {} has no columns", b.label)));
    }
    Ok(())
}

/// Rows must be non-negative and sum to 1 within 1e-4.
pub fn check_simplex(features: &Array2<f64>) -> Result<()> {
    let bad: Vec<usize> = features
        .axis_iter(Axis(0))
        .enumerate()
        .filter(|(_, row)| {
            row.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) || (row.sum() - 1.0).abs() > 1e-4
        })
        .map(|(i, _)| i)
        .collect();
    if bad.is_empty() {
        Ok(())
    } else {
        Err(Error::NotSimplex { indices: bad })
    }
}

/// Result of scoring one class-probability feature set on its own.
#[derive(Debug, Clone)]
pub struct BaselineResult {
    pub label: String,
    pub dimension: usize,
    pub errors: ErrorDistribution,
    /// Mean test Huber of predicting the standardized train mean (zero).
    pub constant_huber: f64,
}

impl BaselineResult {
    pub fn mean_huber(&self) -> f64 {
        self.errors.mean()
    }
}

/// Fits `regressor` on probability features and scores the test split.
pub fn run_baseline(
    dataset: &EmbeddingDataset,
    features: &Array2<f64>,
    label: &str,
    regressor: &RegressorSpec,
    delta: f64,
) -> Result<BaselineResult> {
    dataset.require_splits()?;
    let b = BaselineFeatures {
        label: label.to_string(),
        features: features.clone(),
    };
    check_baseline_shape(dataset, &b)?;
    check_simplex(features)?;
    let (ds, _) = dataset.standardized()?;
    let splits = Splits::new(&ds);
    let errors = splits
        .evaluate(features.view(), regressor, delta, label.to_string())
        .map_err(|(e, stage)| e.at_stage(format!("baseline {label}"), stage))?;
    let constant_huber = splits.y[2]
        .iter()
        .map(|&y| huber(y, 0.0, delta))
        .sum::<f64>()
        / splits.y[2].len() as f64;
    Ok(BaselineResult {
        label: label.to_string(),
        dimension: features.ncols(),
        errors,
        constant_huber,
    })
}

/// Writes `report.json`, `report.csv`, `timings.json` and the plots.
pub fn write_outputs(run: &SweepRun, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let put = |name: &str, text: String| {
        let p = dir.join(name);
        fs::write(&p, text).map_err(|e| Error::io(&p, e))
    };
    put("report.json", run.report.to_json()?)?;
    put("report.csv", run.report.to_csv()?)?;
    put(
        "timings.json",
        serde_json::to_string_pretty(&run.timings)? + "\n",
    )?;
    emit_plots(&run.report, &dir.join("plots"))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn simplex_check_names_rows() {
        let ok = array![[0.2, 0.3, 0.5], [1.0, 0.0, 0.0]];
        check_simplex(&ok).unwrap();
        let bad = array![[0.2, 0.3, 0.5], [0.3, 0.3, 0.2], [1.2, -0.2, 0.0]];
        match check_simplex(&bad) {
            Err(Error::NotSimplex { indices }) => assert_eq!(indices, vec![1, 2]),
            other => panic!("{other:?}"),
        }
    }
}
