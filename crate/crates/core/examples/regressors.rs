//! Random forest and MLP on the same planted data, scored by Huber loss.

use dimsweep::analysis::{error_distribution, t_test, TTestVariant, DEFAULT_DELTA};
use dimsweep::regressor::{
    forest_fit, forest_predict, mlp_fit, mlp_predict, ForestConfig, MlpConfig,
};
use dimsweep::{generate, RngSeed, Split, SynthConfig};

fn main() -> dimsweep::Result<()> {
    let ds = generate(&SynthConfig {
        dim: 16,
        latent_dim: 4,
        n: 3000,
        sigma_y: 0.3,
        nonlinear: true,
        seed: RngSeed(11),
        ..SynthConfig::default()
    })?;
    let (ds, _) = ds.standardized()?;
    let part = |s| (ds.split_features(s), ds.split_targets(s));
    let ((xtr, ytr), (xva, yva), (xte, yte)) =
        (part(Split::Train), part(Split::Val), part(Split::Test));

    let forest = forest_fit(xtr.view(), &ytr, &ForestConfig::default())?;
    let forest_pred = forest_predict(&forest, xte.view())?;
    let (mlp, report) = mlp_fit(xtr.view(), &ytr, xva.view(), &yva, &MlpConfig::default())?;
    let mlp_pred = mlp_predict(&mlp, xte.view())?;

    let f = error_distribution(&yte, &forest_pred, DEFAULT_DELTA, "forest")?;
    let m = error_distribution(&yte, &mlp_pred, DEFAULT_DELTA, "mlp")?;
    println!(
        "forest: {} trees, test huber {:.4}",
        forest.trees().len(),
        f.mean()
    );
    println!(
        "mlp: stopped at epoch {} (best {}), test huber {:.4}",
        report.train_loss.len(),
        report.best_epoch,
        m.mean()
    );
    let t = t_test(&f, &m, TTestVariant::Paired)?;
    println!(
        "paired t = {:.3}, p = {:.4} ({})",
        t.t_statistic,
        t.p_value,
        t.band().as_str()
    );
    Ok(())
}
