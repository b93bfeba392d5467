//! End-to-end sweep on synthetic data with caching, report and plots.
//!
//! cargo run --release --example full_sweep -- /tmp/sweep-out

use std::path::PathBuf;

use dimsweep::{generate, run_sweep, RngSeed, SweepConfig, SynthConfig};

fn main() -> dimsweep::Result<()> {
    env_logger::init();
    let out = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("dimsweep-sweep"));
    let ds = generate(&SynthConfig {
        dim: 128,
        latent_dim: 8,
        n: 3000,
        sigma_y: 1.0,
        sigma_v: 0.1,
        seed: RngSeed(1),
        ..SynthConfig::default()
    })?;
    let cfg = SweepConfig {
        ladder: vec![1, 2, 4, 8, 16, 32, 64],
        cache_dir: Some(out.join("cache")),
        output_dir: Some(out.clone()),
        seed: RngSeed(1),
        ..SweepConfig::default()
    };
    let run = run_sweep(&ds, &cfg)?;
    let r = &run.report;
    for e in &r.entries {
        println!(
            "{:>8}  huber {:.4}  p vs best {:.3e}  {}",
            e.dimension.to_string(),
            e.mean_huber,
            e.vs_best.p_value,
            e.band.as_str()
        );
    }
    println!("best {}", r.best);
    if let Some(id) = &r.intrinsic {
        println!("intrinsic dimension {}", id.dimension);
    }
    println!("report and plots in {}", out.display());
    Ok(())
}
