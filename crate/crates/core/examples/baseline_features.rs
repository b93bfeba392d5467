//! Score class-probability features against the same targets as a sweep.

use dimsweep::regressor::RegressorSpec;
use dimsweep::sweep::run_baseline;
use dimsweep::{generate, RngSeed, SynthConfig};
use ndarray::Array2;

fn main() -> dimsweep::Result<()> {
    let ds = generate(&SynthConfig {
        dim: 32,
        latent_dim: 4,
        n: 1500,
        sigma_y: 0.2,
        seed: RngSeed(5),
        ..SynthConfig::default()
    })?;
    // three-class "sentiment" from the target's sign, softened
    let probs = Array2::from_shape_fn((ds.len(), 3), |(i, c)| {
        let y = ds.targets()[i];
        let class = if y < -0.5 {
            0
        } else if y > 0.5 {
            2
        } else {
            1
        };
        if c == class {
            0.8
        } else {
            0.1
        }
    });
    let uniform = Array2::from_elem((ds.len(), 3), 1.0 / 3.0);
    for (label, features) in [("sentiment", &probs), ("uniform", &uniform)] {
        let res = run_baseline(&ds, features, label, &RegressorSpec::default(), 1.0)?;
        println!(
            "{label:>9}: huber {:.4} (constant predictor {:.4})",
            res.mean_huber(),
            res.constant_huber
        );
    }
    Ok(())
}
