//! Train linear autoencoders of several widths and compare reconstruction.

use dimsweep::analysis::reconstruction_similarity;
use dimsweep::{ae_train, generate, AeTrainConfig, RngSeed, Split, SynthConfig};

fn main() -> dimsweep::Result<()> {
    let ds = generate(&SynthConfig {
        dim: 64,
        latent_dim: 4,
        n: 2000,
        sigma_v: 0.05,
        seed: RngSeed(3),
        ..SynthConfig::default()
    })?;
    let test = ds.split_features(Split::Test);
    for dz in [1, 2, 4, 8, 16] {
        let cfg = AeTrainConfig {
            seed: RngSeed(3).derive("ae", dz as u64),
            ..AeTrainConfig::default()
        };
        let (model, report) = ae_train(&ds, &cfg, dz)?;
        let sim = reconstruction_similarity(&model, test.view())?;
        println!(
            "d_z={dz:>2}: best epoch {:>3}, val loss {:.5}, test cosine {:.4}",
            report.best_epoch, report.best_val_loss, sim.mean
        );
    }
    Ok(())
}
