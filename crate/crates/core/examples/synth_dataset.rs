//! Generate a planted low-rank dataset and inspect its ground truth.
//!
//! cargo run --example synth_dataset -- /tmp/synth.bin

use dimsweep::ingest::save_embedding_file;
use dimsweep::{generate_with_truth, RngSeed, Split, SynthConfig};

fn main() -> dimsweep::Result<()> {
    let cfg = SynthConfig {
        dim: 256,
        latent_dim: 8,
        n: 2000,
        sigma_y: 0.5,
        sigma_v: 0.05,
        seed: RngSeed(7),
        ..SynthConfig::default()
    };
    let (ds, truth) = generate_with_truth(&cfg)?;
    println!("{}", ds.provenance());
    println!(
        "features {:?}, basis {:?}",
        ds.features().dim(),
        truth.basis.dim()
    );
    for split in [Split::Train, Split::Val, Split::Test] {
        println!("{:>5}: {} rows", split.as_str(), ds.indices(split).len());
    }
    let first = truth.latents.row(0).to_vec();
    println!(
        "row 0: target {:.4}, noiseless signal {:.4}",
        ds.targets()[0],
        truth.signal_of(&first, false)
    );

    if let Some(path) = std::env::args().nth(1) {
        save_embedding_file(path.as_ref(), &ds)?;
        println!("wrote {path} and its csv sidecar");
    }
    Ok(())
}
