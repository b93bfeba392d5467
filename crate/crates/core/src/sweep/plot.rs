//! Static SVG figures, each with a CSV sidecar holding the plotted data.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::report::SweepReport;
use crate::analysis::SignificanceBand;
use crate::error::{Error, Result};

const W: f64 = 640.0;
const H: f64 = 400.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 50.0;
const SERIES_COLORS: [&str; 6] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b",
];

#[derive(Debug, Clone, PartialEq)]
pub struct PlotFiles {
    pub loss: PathBuf,
    pub overlay: PathBuf,
    pub similarity: PathBuf,
}

fn band_color(b: SignificanceBand) -> &'static str {
    match b {
        SignificanceBand::NotSignificant => "#4daf4a",
        SignificanceBand::P05 => "#ff7f00",
        SignificanceBand::P01 => "#e41a1c",
    }
}

fn band_class(b: SignificanceBand) -> &'static str {
    match b {
        SignificanceBand::NotSignificant => "ns",
        SignificanceBand::P05 => "p05",
        SignificanceBand::P01 => "p01",
    }
}

/// Log2 x axis over dimensions, linear y axis.
struct Frame {
    x_lo: f64,
    x_hi: f64,
    y_lo: f64,
    y_hi: f64,
}

impl Frame {
    fn new(
        dims: impl Iterator<Item = f64> + Clone,
        ys: impl Iterator<Item = f64> + Clone,
    ) -> Frame {
        let lx: Vec<f64> = dims.map(|d| d.max(1.0).log2()).collect();
        let (mut x_lo, mut x_hi) = min_max(&lx);
        let (mut y_lo, mut y_hi) = min_max(&ys.collect::<Vec<_>>());
        if x_hi - x_lo < 1e-12 {
            x_lo -= 1.0;
            x_hi += 1.0;
        }
        let pad = if y_hi - y_lo < 1e-12 {
            1.0
        } else {
            0.05 * (y_hi - y_lo)
        };
        y_lo -= pad;
        y_hi += pad;
        Frame {
            x_lo,
            x_hi,
            y_lo,
            y_hi,
        }
    }

    fn x(&self, dim: f64) -> f64 {
        LEFT + (dim.max(1.0).log2() - self.x_lo) / (self.x_hi - self.x_lo) * (W - LEFT - RIGHT)
    }

    fn y(&self, v: f64) -> f64 {
        H - BOTTOM - (v - self.y_lo) / (self.y_hi - self.y_lo) * (H - TOP - BOTTOM)
    }

    fn axes(&self, svg: &mut String, title: &str, y_label: &str, ticks: &[usize]) {
        let (x0, x1, y0, y1) = (LEFT, W - RIGHT, TOP, H - BOTTOM);
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="18" text-anchor="middle" font-size="14">{}</text>"#,
            W / 2.0,
            escape(title)
        );
        let _ = writeln!(
            svg,
            r#"<line class="axis" x1="{x0}" y1="{y1}" x2="{x1}" y2="{y1}" stroke="black"/>"#
        );
        let _ = writeln!(
            svg,
            r#"<line class="axis" x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>"#
        );
        for &t in ticks {
            let x = self.x(t as f64);
            let _ = writeln!(
                svg,
                r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle" font-size="10">{t}</text>"#,
                y1 + 15.0
            );
        }
        for i in 0..=4 {
            let v = self.y_lo + (self.y_hi - self.y_lo) * f64::from(i) / 4.0;
            let y = self.y(v);
            let _ = writeln!(
                svg,
                r#"<text x="{:.2}" y="{y:.2}" text-anchor="end" font-size="10">{v:.4}</text>"#,
                x0 - 5.0
            );
        }
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="middle" font-size="12">latent dimension</text>"#,
            W / 2.0,
            H - 12.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="14" y="{}" text-anchor="middle" font-size="12" transform="rotate(-90 14 {})">{}</text>"#,
            H / 2.0,
            H / 2.0,
            escape(y_label)
        );
    }
}

fn min_max(v: &[f64]) -> (f64, f64) {
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if lo.is_finite() {
        (lo, hi)
    } else {
        (0.0, 1.0)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn open_svg() -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    )
}

fn polyline(svg: &mut String, pts: &[(f64, f64)], color: &str, class: &str) {
    if pts.len() < 2 {
        return;
    }
    let coords: Vec<String> = pts.iter().map(|(x, y)| format!("{x:.2},{y:.2}")).collect();
    let _ = writeln!(
        svg,
        r#"<polyline class="{class}" points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
        coords.join(" ")
    );
}

fn write_pair<R: Serialize>(dir: &Path, stem: &str, svg: String, rows: &[R]) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let svg_path = dir.join(format!("{stem}.svg"));
    fs::write(&svg_path, svg + "</svg>\n").map_err(|e| Error::io(&svg_path, e))?;
    let csv_path = dir.join(format!("{stem}.csv"));
    let mut w = csv::Writer::from_path(&csv_path).map_err(|e| Error::csv(&csv_path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| Error::csv(&csv_path, e))?;
    }
    w.flush().map_err(|e| Error::io(&csv_path, e))?;
    Ok(svg_path)
}

#[derive(Serialize)]
struct LossRow {
    kind: &'static str,
    label: String,
    dimension: usize,
    mean_huber: f64,
    p_vs_best: f64,
    significance_band: &'static str,
}

fn loss_plot(report: &SweepReport, dir: &Path) -> Result<PathBuf> {
    let mut rows: Vec<LossRow> = report
        .entries
        .iter()
        .map(|e| LossRow {
            kind: "point",
            label: e.dimension.to_string(),
            dimension: e.dimension.width(),
            mean_huber: e.mean_huber,
            p_vs_best: e.vs_best.p_value,
            significance_band: e.band.as_str(),
        })
        .collect();
    rows.extend(report.baselines.iter().map(|b| LossRow {
        kind: "baseline",
        label: b.label.clone(),
        dimension: b.dimension,
        mean_huber: b.mean_huber,
        p_vs_best: b.vs_best.p_value,
        significance_band: b.band.as_str(),
    }));
    let frame = Frame::new(
        rows.iter().map(|r| r.dimension as f64),
        rows.iter().map(|r| r.mean_huber),
    );
    let mut svg = open_svg();
    let ticks: Vec<usize> = report.entries.iter().map(|e| e.dimension.width()).collect();
    frame.axes(
        &mut svg,
        "Test Huber loss by latent dimension",
        "mean Huber loss",
        &ticks,
    );
    let line: Vec<(f64, f64)> = report
        .entries
        .iter()
        .filter(|e| !e.dimension.is_raw())
        .map(|e| (frame.x(e.dimension.width() as f64), frame.y(e.mean_huber)))
        .collect();
    polyline(&mut svg, &line, "#555555", "curve");
    for e in &report.entries {
        let (x, y) = (frame.x(e.dimension.width() as f64), frame.y(e.mean_huber));
        let _ = writeln!(
            svg,
            r#"<circle class="point {}" cx="{x:.2}" cy="{y:.2}" r="{}" fill="{}"><title>{} {:.6} p={:.4}</title></circle>"#,
            band_class(e.band),
            if e.dimension.is_raw() { 6 } else { 4 },
            band_color(e.band),
            e.dimension,
            e.mean_huber,
            e.vs_best.p_value
        );
    }
    for b in &report.baselines {
        let (x, y) = (frame.x(b.dimension as f64), frame.y(b.mean_huber));
        let _ = writeln!(
            svg,
            r#"<rect class="baseline {}" x="{:.2}" y="{:.2}" width="8" height="8" fill="{}"><title>{} {:.6}</title></rect>"#,
            band_class(b.band),
            x - 4.0,
            y - 4.0,
            band_color(b.band),
            escape(&b.label),
            b.mean_huber
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" font-size="10">{}</text>"#,
            x + 6.0,
            y - 6.0,
            escape(&b.label)
        );
    }
    for (i, band) in [
        SignificanceBand::NotSignificant,
        SignificanceBand::P05,
        SignificanceBand::P01,
    ]
    .into_iter()
    .enumerate()
    {
        let y = TOP + 12.0 * i as f64;
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" font-size="10" fill="{}">{}</text>"#,
            W - RIGHT - 50.0,
            y + 4.0,
            band_color(band),
            band.as_str()
        );
    }
    write_pair(dir, "loss_vs_dimension", svg, &rows)
}

#[derive(Serialize)]
struct OverlayRow {
    task: String,
    dimension: String,
    width: usize,
    normalized: f64,
}

/// Normalized curves of several reports on one axis; each task's raw entry
/// is a dashed horizontal reference line.
pub fn emit_overlay(reports: &[(String, &SweepReport)], dir: &Path) -> Result<PathBuf> {
    let mut rows = Vec::new();
    for (task, r) in reports {
        if let Some(norm) = &r.curve.normalized {
            for (p, v) in r.curve.points.iter().zip(norm) {
                rows.push(OverlayRow {
                    task: task.clone(),
                    dimension: p.dimension.to_string(),
                    width: p.dimension.width(),
                    normalized: *v,
                });
            }
        }
    }
    let frame = Frame {
        y_lo: -0.05,
        y_hi: 1.05,
        ..Frame::new(rows.iter().map(|r| r.width as f64), [0.0, 1.0].into_iter())
    };
    let mut svg = open_svg();
    let mut ticks: Vec<usize> = rows.iter().map(|r| r.width).collect();
    ticks.sort_unstable();
    ticks.dedup();
    frame.axes(&mut svg, "Normalized test loss", "normalized loss", &ticks);
    for (i, (task, r)) in reports.iter().enumerate() {
        let Some(norm) = &r.curve.normalized else {
            continue;
        };
        let color = SERIES_COLORS[i % SERIES_COLORS.len()];
        let pts: Vec<(f64, f64, bool)> = r
            .curve
            .points
            .iter()
            .zip(norm)
            .map(|(p, v)| {
                (
                    frame.x(p.dimension.width() as f64),
                    frame.y(*v),
                    p.dimension.is_raw(),
                )
            })
            .collect();
        let line: Vec<(f64, f64)> = pts.iter().filter(|p| !p.2).map(|p| (p.0, p.1)).collect();
        polyline(&mut svg, &line, color, "series");
        for &(x, y, raw) in &pts {
            if raw {
                let _ = writeln!(
                    svg,
                    r#"<line class="raw" x1="{LEFT}" y1="{y:.2}" x2="{}" y2="{y:.2}" stroke="{color}" stroke-dasharray="6 4"/>"#,
                    W - RIGHT
                );
            } else {
                let _ = writeln!(
                    svg,
                    r#"<circle class="point" cx="{x:.2}" cy="{y:.2}" r="3" fill="{color}"/>"#
                );
            }
        }
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" font-size="10" fill="{color}">{}</text>"#,
            LEFT + 10.0,
            TOP + 12.0 * (i as f64 + 1.0),
            escape(task)
        );
    }
    write_pair(dir, "normalized_overlay", svg, &rows)
}

#[derive(Serialize)]
struct SimilarityRow {
    dimension: usize,
    mean_cosine: f64,
    counted: usize,
    excluded: usize,
}

fn similarity_plot(report: &SweepReport, dir: &Path) -> Result<PathBuf> {
    let rows: Vec<SimilarityRow> = report
        .entries
        .iter()
        .filter_map(|e| {
            e.similarity.map(|s| SimilarityRow {
                dimension: e.dimension.width(),
                mean_cosine: s.mean,
                counted: s.counted,
                excluded: s.excluded,
            })
        })
        .collect();
    let frame = Frame::new(
        rows.iter().map(|r| r.dimension as f64),
        rows.iter().map(|r| r.mean_cosine),
    );
    let mut svg = open_svg();
    let ticks: Vec<usize> = rows.iter().map(|r| r.dimension).collect();
    frame.axes(
        &mut svg,
        "Reconstruction cosine similarity",
        "mean cosine similarity",
        &ticks,
    );
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .map(|r| (frame.x(r.dimension as f64), frame.y(r.mean_cosine)))
        .collect();
    polyline(&mut svg, &pts, SERIES_COLORS[0], "curve");
    for (x, y) in pts {
        let _ = writeln!(
            svg,
            r#"<circle class="point" cx="{x:.2}" cy="{y:.2}" r="4" fill="{}"/>"#,
            SERIES_COLORS[0]
        );
    }
    write_pair(dir, "cosine_similarity", svg, &rows)
}

/// Writes the loss, single-task overlay and similarity figures into `dir`.
pub fn emit_plots(report: &SweepReport, dir: &Path) -> Result<PlotFiles> {
    Ok(PlotFiles {
        loss: loss_plot(report, dir)?,
        overlay: emit_overlay(&[("task".to_string(), report)], dir)?,
        similarity: similarity_plot(report, dir)?,
    })
}
