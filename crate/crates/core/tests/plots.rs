use std::fs;
use std::path::Path;

use dimsweep::regressor::{ForestConfig, RegressorSpec};
use dimsweep::sweep::{emit_overlay, emit_plots, BaselineFeatures, SweepReport};
use dimsweep::{generate, run_sweep, RngSeed, SweepConfig, SynthConfig};
use ndarray::Array2;

fn report(ladder: Vec<usize>, baselines: bool, seed: u64) -> SweepReport {
    let ds = generate(&SynthConfig {
        dim: 8,
        latent_dim: 2,
        n: 200,
        sigma_y: 0.5,
        sigma_v: 0.1,
        seed: RngSeed(seed),
        ..SynthConfig::default()
    })
    .unwrap();
    let cfg = SweepConfig {
        ladder,
        regressor: RegressorSpec::Forest(ForestConfig {
            n_trees: 5,
            ..ForestConfig::default()
        }),
        baselines: if baselines {
            vec![BaselineFeatures {
                label: "sentiment".into(),
                features: Array2::from_elem((200, 3), 1.0 / 3.0),
            }]
        } else {
            Vec::new()
        },
        ..SweepConfig::default()
    };
    run_sweep(&ds, &cfg).unwrap().report
}

fn count(path: &Path, needle: &str) -> usize {
    fs::read_to_string(path).unwrap().matches(needle).count()
}

fn csv_rows(path: &Path) -> Vec<csv::StringRecord> {
    csv::Reader::from_path(path)
        .unwrap()
        .records()
        .map(|r| r.unwrap())
        .collect()
}

#[test]
fn three_points_three_markers_and_no_baselines() {
    let r = report(vec![1, 2], false, 1);
    assert_eq!(r.entries.len(), 3);
    let dir = tempfile::tempdir().unwrap();
    let files = emit_plots(&r, dir.path()).unwrap();
    assert_eq!(count(&files.loss, "<circle class=\"point"), 3);
    assert_eq!(count(&files.loss, "class=\"baseline"), 0);
    assert_eq!(csv_rows(&files.loss.with_extension("csv")).len(), 3);
    // similarity has no raw entry
    assert_eq!(count(&files.similarity, "<circle class=\"point"), 2);
    assert_eq!(csv_rows(&files.similarity.with_extension("csv")).len(), 2);
    assert_eq!(count(&files.overlay, "class=\"raw\""), 1);
}

#[test]
fn baselines_get_their_own_markers() {
    let r = report(vec![1, 2], true, 1);
    let dir = tempfile::tempdir().unwrap();
    let files = emit_plots(&r, dir.path()).unwrap();
    assert_eq!(count(&files.loss, "<rect class=\"baseline"), 1);
    let rows = csv_rows(&files.loss.with_extension("csv"));
    assert_eq!(rows.iter().filter(|r| &r[0] == "baseline").count(), 1);
    assert_eq!(
        rows.iter().find(|r| &r[0] == "baseline").unwrap()[2].to_string(),
        "3"
    );
}

#[test]
fn overlay_series_each_span_unit_interval() {
    let a = report(vec![1, 2, 4], false, 1);
    let b = report(vec![1, 2, 4], false, 2);
    let dir = tempfile::tempdir().unwrap();
    let svg = emit_overlay(&[("a".into(), &a), ("b".into(), &b)], dir.path()).unwrap();
    let rows = csv_rows(&svg.with_extension("csv"));
    for task in ["a", "b"] {
        let vals: Vec<f64> = rows
            .iter()
            .filter(|r| &r[0] == task)
            .map(|r| r[3].parse().unwrap())
            .collect();
        assert_eq!(vals.len(), 4);
        let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        assert_eq!((lo, hi), (0.0, 1.0));
    }
    assert_eq!(count(&svg, "stroke-dasharray"), 2);
}

#[test]
fn report_json_round_trips() {
    let r = report(vec![1, 2], true, 3);
    let back = SweepReport::from_json(&r.to_json().unwrap()).unwrap();
    assert_eq!(back, r);
    let csv = r.to_csv().unwrap();
    assert!(csv.starts_with("dimension,mean_huber,normalized,p_vs_best,significance_band\n"));
    assert_eq!(csv.lines().count(), 4);
}
