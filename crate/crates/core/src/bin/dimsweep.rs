use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand, ValueEnum};

use dimsweep::analysis::{TTestVariant, ThresholdRule};
use dimsweep::ingest::{
    align_rows, load_chunked, load_embedding_file, load_embedding_pair, load_feature_file,
    pool_records, read_targets, save_embedding_file, PoolMode, SplitSpec, ValidationRule,
};
use dimsweep::regressor::{ForestConfig, MlpConfig, RegressorSpec};
use dimsweep::sweep::{
    emit_overlay, emit_plots, parse_ladder, run_baseline, BaselineFeatures, SweepReport,
};
use dimsweep::{
    run_sweep, AeTrainConfig, EmbeddingDataset, Error, Result, RngSeed, SweepConfig, SynthConfig,
};

#[derive(Parser)]
#[command(
    name = "dimsweep",
    version,
    about = "Embedding compression versus regression error"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Autoencoder ladder, regression and significance report.
    Sweep(SweepArgs),
    /// Score one class-probability feature file.
    Baseline(BaselineArgs),
    /// Write a synthetic dataset.
    Synth(SynthArgs),
    /// Re-render CSV and plots from saved report JSON files.
    Report(ReportArgs),
    /// Mean-pool chunk vectors into one embedding per document.
    Pool(PoolArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum RegressorKind {
    Forest,
    Mlp,
}

#[derive(Args)]
struct DataArgs {
    /// Embedding matrix; its `.csv` sidecar holds targets unless --targets is given.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    targets: Option<PathBuf>,
    /// Random split fractions "train,val,test", overriding split tags.
    #[arg(long, conflicts_with = "split_temporal")]
    split_random: Option<String>,
    /// First test date; the last 10% of earlier rows become validation.
    #[arg(long)]
    split_temporal: Option<NaiveDate>,
}

#[derive(Args)]
struct ModelArgs {
    #[arg(long, value_enum, default_value = "forest")]
    regressor: RegressorKind,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    trees: usize,
    #[arg(long, default_value_t = 128)]
    mlp_hidden: usize,
    #[arg(long, default_value_t = 0.1)]
    mlp_dropout: f64,
}

impl ModelArgs {
    fn regressor(&self) -> RegressorSpec {
        match self.regressor {
            RegressorKind::Forest => RegressorSpec::Forest(ForestConfig {
                n_trees: self.trees,
                ..ForestConfig::default()
            }),
            RegressorKind::Mlp => RegressorSpec::Mlp(MlpConfig {
                hidden_dim: self.mlp_hidden,
                dropout: self.mlp_dropout,
                ..MlpConfig::default()
            }),
        }
    }
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    model: ModelArgs,
    /// Comma list of latent sizes; include "raw" for the uncompressed embeddings.
    #[arg(long, default_value = "1,2,4,8,16,32,64,128,256,512,raw")]
    ladder: String,
    /// Class-probability features as LABEL=PATH (repeatable).
    #[arg(long = "baseline")]
    baselines: Vec<String>,
    #[arg(long, env = "DIMSWEEP_CACHE")]
    cache_dir: Option<PathBuf>,
    #[arg(long)]
    no_cache: bool,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "paired")]
    ttest: TTestVariant,
    #[arg(long, default_value_t = 0.10)]
    id_threshold: f64,
    /// "normalized" (max-min normalized loss) or "relative" (ratio to the minimum).
    #[arg(long, default_value = "normalized")]
    id_rule: ThresholdRule,
    /// Width of an optional ReLU layer on each side of the autoencoder.
    #[arg(long)]
    ae_hidden: Option<usize>,
    #[arg(long, default_value_t = 100)]
    ae_epochs: usize,
    #[arg(long, default_value_t = 1)]
    workers: usize,
}

#[derive(Args)]
struct BaselineArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    model: ModelArgs,
    /// Probability matrix with a doc_id sidecar CSV.
    #[arg(long)]
    probs: PathBuf,
    #[arg(long)]
    label: String,
    /// Output JSON path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 768)]
    dim: usize,
    #[arg(long, default_value_t = 8)]
    latent_dim: usize,
    #[arg(long, default_value_t = 5000)]
    n: usize,
    #[arg(long, default_value_t = 0.0)]
    sigma_y: f64,
    #[arg(long, default_value_t = 0.0)]
    sigma_v: f64,
    #[arg(long, default_value_t = 0)]
    nuisance_dim: usize,
    #[arg(long, default_value_t = 0.0)]
    nuisance_energy: f64,
    #[arg(long)]
    nonlinear: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct ReportArgs {
    /// Report JSON files; several produce a multi-task overlay.
    #[arg(long = "input", required = true)]
    inputs: Vec<PathBuf>,
    /// Task names for the overlay, in input order.
    #[arg(long = "label")]
    labels: Vec<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PoolArgs {
    /// Chunk vectors with a `doc_id,token_count` CSV sidecar.
    #[arg(long)]
    chunks: PathBuf,
    /// Targets CSV (doc_id,target,date,split) for the pooled documents.
    #[arg(long)]
    targets: PathBuf,
    /// Plain mean over chunks instead of token-count weighting.
    #[arg(long)]
    flat: bool,
    #[arg(long)]
    out: PathBuf,
}

fn load_data(a: &DataArgs) -> Result<EmbeddingDataset> {
    let ds = match &a.targets {
        Some(t) => load_embedding_pair(&a.data, t)?,
        None => load_embedding_file(&a.data)?,
    };
    let spec = if let Some(s) = &a.split_random {
        let f: Vec<f64> = s
            .split(',')
            .map(|x| {
                x.trim()
                    .parse()
                    .map_err(|_| Error::InvalidArgument(format!("bad split fractions {s:?}")))
            })
            .collect::<Result<_>>()?;
        let [train, val, test] = f[..] else {
            return Err(Error::InvalidArgument(
                "--split-random needs three fractions".into(),
            ));
        };
        Some(SplitSpec::random(train, val, test, RngSeed(0)))
    } else {
        a.split_temporal.map(|test_start| SplitSpec::Temporal {
            test_start,
            validation: ValidationRule::LastFraction(0.1),
        })
    };
    match spec {
        Some(spec) => dimsweep::ingest::apply_split(&ds, &spec),
        None => Ok(ds),
    }
}

fn load_baseline(path: &Path, ds: &EmbeddingDataset) -> Result<ndarray::Array2<f64>> {
    let (ids, features) = load_feature_file(path)?;
    align_rows(&ids, &features, ds.doc_ids())
}

fn sweep(a: SweepArgs) -> Result<()> {
    let ds = load_data(&a.data)?;
    let (ladder, include_raw) = parse_ladder(&a.ladder)?;
    let baselines = a
        .baselines
        .iter()
        .map(|spec| {
            let (label, path) = spec.split_once('=').ok_or_else(|| {
                Error::InvalidArgument(format!("baseline {spec:?} is not LABEL=PATH"))
            })?;
            Ok(BaselineFeatures {
                label: label.to_string(),
                features: load_baseline(Path::new(path), &ds)?,
            })
        })
        .collect::<Result<_>>()?;
    let cfg = SweepConfig {
        ladder,
        include_raw,
        regressor: a.model.regressor(),
        autoencoder: AeTrainConfig {
            hidden: a.ae_hidden,
            max_epochs: a.ae_epochs,
            ..AeTrainConfig::default()
        },
        baselines,
        seed: RngSeed(a.model.seed),
        cache_dir: if a.no_cache { None } else { a.cache_dir },
        output_dir: Some(a.out.clone()),
        ttest: a.ttest,
        id_threshold: a.id_threshold,
        id_rule: a.id_rule,
        workers: a.workers,
        ..SweepConfig::default()
    };
    let run = run_sweep(&ds, &cfg)?;
    let r = &run.report;
    println!(
        "best dimension: {} (mean Huber {:.6})",
        r.best,
        r.curve.argmin().unwrap().mean_huber
    );
    if let Some(id) = &r.intrinsic {
        println!("intrinsic dimension: {}", id.dimension);
    }
    print!("{}", r.to_csv()?);
    println!("wrote {}", a.out.display());
    Ok(())
}

fn baseline(a: BaselineArgs) -> Result<()> {
    let ds = load_data(&a.data)?;
    let features = load_baseline(&a.probs, &ds)?;
    let res = run_baseline(
        &ds,
        &features,
        &a.label,
        &a.model.regressor().with_seed(RngSeed(a.model.seed)),
        1.0,
    )?;
    let json = serde_json::json!({
        "label": res.label,
        "dimension": res.dimension,
        "mean_huber": res.mean_huber(),
        "constant_predictor_huber": res.constant_huber,
    });
    let text = serde_json::to_string_pretty(&json)? + "\n";
    match a.out {
        Some(p) => std::fs::write(&p, text).map_err(|e| Error::io(&p, e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn synth(a: SynthArgs) -> Result<()> {
    let cfg = SynthConfig {
        dim: a.dim,
        latent_dim: a.latent_dim,
        n: a.n,
        sigma_y: a.sigma_y,
        sigma_v: a.sigma_v,
        nuisance_dim: a.nuisance_dim,
        nuisance_energy: a.nuisance_energy,
        nonlinear: a.nonlinear,
        seed: RngSeed(a.seed),
    };
    let ds = dimsweep::generate(&cfg)?;
    save_embedding_file(&a.out, &ds)?;
    println!("{}", ds.provenance());
    Ok(())
}

fn report(a: ReportArgs) -> Result<()> {
    let reports: Vec<SweepReport> = a
        .inputs
        .iter()
        .map(|p| SweepReport::read(p))
        .collect::<Result<_>>()?;
    if !a.labels.is_empty() && a.labels.len() != reports.len() {
        return Err(Error::InvalidArgument(
            "give one --label per --input".into(),
        ));
    }
    std::fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
    let label = |i: usize| {
        a.labels.get(i).cloned().unwrap_or_else(|| {
            a.inputs[i]
                .file_stem()
                .map_or(format!("task{i}"), |s| s.to_string_lossy().into_owned())
        })
    };
    if let [single] = &reports[..] {
        let p = a.out.join("report.csv");
        std::fs::write(&p, single.to_csv()?).map_err(|e| Error::io(&p, e))?;
        emit_plots(single, &a.out)?;
    } else {
        for (i, r) in reports.iter().enumerate() {
            emit_plots(r, &a.out.join(label(i)))?;
        }
    }
    let named: Vec<(String, &SweepReport)> = reports
        .iter()
        .enumerate()
        .map(|(i, r)| (label(i), r))
        .collect();
    emit_overlay(&named, &a.out)?;
    println!("wrote {}", a.out.display());
    Ok(())
}

fn pool(a: PoolArgs) -> Result<()> {
    let records = load_chunked(
        &a.chunks,
        &dimsweep::ingest::format::sidecar_path(&a.chunks),
    )?;
    let mode = if a.flat {
        PoolMode::Flat
    } else {
        PoolMode::TokenWeighted
    };
    let (ids, features) = pool_records(&records, mode)?;
    let targets = read_targets(&a.targets)?;
    let by_id: std::collections::HashMap<&str, &dimsweep::ingest::TargetRecord> =
        targets.iter().map(|t| (t.doc_id.as_str(), t)).collect();
    let rows: Vec<&dimsweep::ingest::TargetRecord> = ids
        .iter()
        .map(|id| {
            by_id
                .get(id.as_str())
                .copied()
                .ok_or_else(|| Error::InvalidArgument(format!("no target for {id:?}")))
        })
        .collect::<Result<_>>()?;
    let ds = EmbeddingDataset::new(
        features,
        rows.iter().map(|r| r.target).collect(),
        a.chunks.display().to_string(),
    )?
    .with_doc_ids(ids)?
    .with_dates(rows.iter().map(|r| r.date).collect())?
    .with_splits(rows.iter().map(|r| r.split).collect())?;
    save_embedding_file(&a.out, &ds)?;
    println!("pooled {} documents", ds.len());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Sweep(a) => sweep(a),
        Command::Baseline(a) => baseline(a),
        Command::Synth(a) => synth(a),
        Command::Report(a) => report(a),
        Command::Pool(a) => pool(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
