//! Synthetic embedding/target datasets with a known low-rank structure and a
//! controllable signal-to-noise ratio.
//!
//! `v = A·u + sqrt(e)·B·s + σ_v·ε` and `y = f(u) + σ_y·η`, where `A` (d×k) and
//! `B` (d×m) have jointly orthonormal columns, `f(u) = w·u` for a unit-norm
//! `w`, and `u, s, ε, η` are standard normal.

use ndarray::{Array1, Array2, Axis};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::EmbeddingDataset;
use crate::error::{Error, Result};
use crate::ingest::{apply_split, SplitSpec};
use crate::rng::{Rng, RngSeed};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub dim: usize,
    pub latent_dim: usize,
    pub n: usize,
    pub sigma_y: f64,
    pub sigma_v: f64,
    /// Number of high-variance directions unrelated to the target.
    pub nuisance_dim: usize,
    /// Per-direction variance of the nuisance directions.
    pub nuisance_energy: f64,
    /// Replace `w·u` with `Σ_j w_j·u_j·sign(u_{j+1 mod k})`.
    pub nonlinear: bool,
    pub seed: RngSeed,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            dim: 768,
            latent_dim: 8,
            n: 5000,
            sigma_y: 0.0,
            sigma_v: 0.0,
            nuisance_dim: 0,
            nuisance_energy: 0.0,
            nonlinear: false,
            seed: RngSeed(0),
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.latent_dim == 0 || self.latent_dim + self.nuisance_dim > self.dim {
            return Err(Error::InvalidArgument(format!(
                "need 1 <= k + nuisance <= d, got k={} nuisance={} d={}",
                self.latent_dim, self.nuisance_dim, self.dim
            )));
        }
        for (name, v) in [
            ("sigma_y", self.sigma_y),
            ("sigma_v", self.sigma_v),
            ("nuisance_energy", self.nuisance_energy),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "{name} must be finite and non-negative, got {v}"
                )));
            }
        }
        if self.n < 10 {
            return Err(Error::InvalidArgument(
                "need at least 10 rows for an 80/10/10 split".into(),
            ));
        }
        Ok(())
    }
}

/// The generative quantities behind a synthetic dataset.
#[derive(Debug, Clone)]
pub struct SynthTruth {
    /// Latent draws `u`, N×k.
    pub latents: Array2<f64>,
    /// Columns of `A`, d×k.
    pub basis: Array2<f64>,
    pub weights: Array1<f64>,
    /// Noise-free targets `f(u)`.
    pub signal: Vec<f64>,
}

impl SynthTruth {
    pub fn signal_of(&self, u: &[f64], nonlinear: bool) -> f64 {
        signal(u, self.weights.as_slice().unwrap(), nonlinear)
    }
}

pub fn generate(cfg: &SynthConfig) -> Result<EmbeddingDataset> {
    generate_with_truth(cfg).map(|(ds, _)| ds)
}

pub fn generate_with_truth(cfg: &SynthConfig) -> Result<(EmbeddingDataset, SynthTruth)> {
    cfg.validate()?;
    let (d, k, m, n) = (cfg.dim, cfg.latent_dim, cfg.nuisance_dim, cfg.n);
    let frame = orthonormal_columns(d, k + m, &mut cfg.seed.derive("synth-basis", 0).rng());
    let basis = frame.slice(ndarray::s![.., ..k]).to_owned();
    let mut w = normal_matrix(1, k, &mut cfg.seed.derive("synth-weights", 0).rng())
        .row(0)
        .to_owned();
    w /= w.dot(&w).sqrt();

    let u = normal_matrix(n, k, &mut cfg.seed.derive("synth-latent", 0).rng());
    let mut v = u.dot(&basis.t());
    if m > 0 && cfg.nuisance_energy > 0.0 {
        let s = normal_matrix(n, m, &mut cfg.seed.derive("synth-nuisance", 0).rng());
        let b = frame.slice(ndarray::s![.., k..]);
        v.scaled_add(cfg.nuisance_energy.sqrt(), &s.dot(&b.t()));
    }
    if cfg.sigma_v > 0.0 {
        v.scaled_add(
            cfg.sigma_v,
            &normal_matrix(n, d, &mut cfg.seed.derive("synth-feature-noise", 0).rng()),
        );
    }

    let w_slice = w.as_slice().unwrap();
    let sig: Vec<f64> = u
        .axis_iter(Axis(0))
        .map(|r| signal(r.as_slice().unwrap(), w_slice, cfg.nonlinear))
        .collect();
    let eta = normal_matrix(1, n, &mut cfg.seed.derive("synth-target-noise", 0).rng());
    let y: Vec<f64> = sig
        .iter()
        .zip(eta.row(0))
        .map(|(s, e)| s + cfg.sigma_y * e)
        .collect();

    let provenance = format!(
        "synth d={d} k={k} n={n} sigma_y={} sigma_v={} nuisance={m}x{} nonlinear={} seed={} snr={}",
        cfg.sigma_y,
        cfg.sigma_v,
        cfg.nuisance_energy,
        cfg.nonlinear,
        cfg.seed.0,
        snr(&sig, cfg.sigma_y)
    );
    let ds = EmbeddingDataset::new(v, y, provenance)?
        .with_doc_ids((0..n).map(|i| format!("syn{i:06}")).collect())?;
    let ds = apply_split(
        &ds,
        &SplitSpec::random(0.8, 0.1, 0.1, cfg.seed.derive("synth-split", 0)),
    )?;
    Ok((
        ds,
        SynthTruth {
            latents: u,
            basis,
            weights: w,
            signal: sig,
        },
    ))
}

fn signal(u: &[f64], w: &[f64], nonlinear: bool) -> f64 {
    let k = u.len();
    (0..k)
        .map(|j| {
            let flip = if nonlinear && u[(j + 1) % k] < 0.0 {
                -1.0
            } else {
                1.0
            };
            w[j] * u[j] * flip
        })
        .sum()
}

/// `var(signal)/σ_y²` with the sample (population) variance; "inf" when σ_y = 0.
fn snr(signal: &[f64], sigma_y: f64) -> String {
    let n = signal.len() as f64;
    let mean = signal.iter().sum::<f64>() / n;
    let var = signal.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / n;
    if sigma_y == 0.0 {
        "inf".into()
    } else {
        format!("{:.6}", var / (sigma_y * sigma_y))
    }
}

fn normal_matrix(rows: usize, cols: usize, rng: &mut Rng) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || StandardNormal.sample(rng))
}

/// Gaussian columns orthonormalized with modified Gram-Schmidt (twice, for
/// numerical orthogonality).
fn orthonormal_columns(d: usize, k: usize, rng: &mut Rng) -> Array2<f64> {
    let mut q = normal_matrix(d, k, rng);
    for j in 0..k {
        for _ in 0..2 {
            for i in 0..j {
                let proj = q.column(i).dot(&q.column(j));
                let qi = q.column(i).to_owned();
                q.column_mut(j).scaled_add(-proj, &qi);
            }
        }
        let norm = q.column(j).dot(&q.column(j)).sqrt();
        q.column_mut(j).mapv_inplace(|x| x / norm);
    }
    q
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::huber;
    use crate::dataset::Split;

    fn small(k: usize, sigma_y: f64, sigma_v: f64) -> SynthConfig {
        SynthConfig {
            dim: 24,
            latent_dim: k,
            n: 400,
            sigma_y,
            sigma_v,
            seed: RngSeed(11),
            ..SynthConfig::default()
        }
    }

    fn singular_values(x: &Array2<f64>) -> Vec<f64> {
        let m = nalgebra::DMatrix::from_row_slice(x.nrows(), x.ncols(), x.as_slice().unwrap());
        let mut s: Vec<f64> = m.singular_values().iter().copied().collect();
        s.sort_by(|a, b| b.total_cmp(a));
        s
    }

    #[test]
    fn basis_is_orthonormal() {
        let q = orthonormal_columns(50, 10, &mut RngSeed(3).rng());
        let g = q.t().dot(&q);
        for i in 0..10 {
            for j in 0..10 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((g[[i, j]] - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn noiseless_features_have_rank_k() {
        let ds = generate(&small(5, 0.0, 0.0)).unwrap();
        let s = singular_values(ds.features());
        assert!(s[4] > 1e-8 * s[0]);
        assert!(s[5..].iter().all(|&x| x <= 1e-8 * s[0]), "{s:?}");
    }

    #[test]
    fn noisy_features_have_rank_at_least_k() {
        let ds = generate(&small(5, 0.0, 0.1)).unwrap();
        let s = singular_values(ds.features());
        assert!(s[4] > 1e-8 * s[0]);
    }

    #[test]
    fn noiseless_oracle_is_exact() {
        let cfg = small(1, 0.0, 0.0);
        let (ds, truth) = generate_with_truth(&cfg).unwrap();
        for i in ds.indices(Split::Test) {
            // recover u from v through the orthonormal basis, then apply w
            let v = ds.features().row(i);
            let u = truth.basis.t().dot(&v);
            let pred = truth.signal_of(u.as_slice().unwrap(), false);
            assert!(huber(ds.targets()[i], pred, 1.0) < 1e-20);
        }
    }

    fn oracle_and_constant_huber(cfg: &SynthConfig) -> (f64, f64) {
        let (ds, truth) = generate_with_truth(cfg).unwrap();
        let train = ds.split_targets(Split::Train);
        let mean = train.iter().sum::<f64>() / train.len() as f64;
        let test = ds.indices(Split::Test);
        let (mut oracle, mut constant) = (0.0, 0.0);
        for &i in &test {
            let y = ds.targets()[i];
            oracle += huber(y, truth.signal[i], 1.0);
            constant += huber(y, mean, 1.0);
        }
        (oracle / test.len() as f64, constant / test.len() as f64)
    }

    #[test]
    fn huge_target_noise_makes_oracle_no_better_than_constant() {
        let cfg = SynthConfig {
            n: 20_000,
            sigma_y: 100.0,
            ..small(4, 0.0, 0.0)
        };
        let (oracle, constant) = oracle_and_constant_huber(&cfg);
        assert!(
            (oracle - constant).abs() <= 0.05 * constant,
            "{oracle} vs {constant}"
        );
    }

    #[test]
    fn oracle_gap_shrinks_as_target_noise_grows() {
        let ratios: Vec<f64> = [0.5, 2.0, 8.0]
            .iter()
            .map(|&s| {
                let (o, c) = oracle_and_constant_huber(&SynthConfig {
                    n: 4000,
                    ..small(4, s, 0.0)
                });
                o / c
            })
            .collect();
        assert!(ratios[0] < ratios[1] && ratios[1] < ratios[2], "{ratios:?}");
    }

    #[test]
    fn same_seed_same_bytes() {
        let cfg = SynthConfig {
            nuisance_dim: 2,
            nuisance_energy: 0.5,
            nonlinear: true,
            ..small(3, 0.3, 0.2)
        };
        let a = generate(&cfg).unwrap();
        let b = generate(&cfg).unwrap();
        assert_eq!(a, b);
        let c = generate(&SynthConfig {
            seed: RngSeed(12),
            ..cfg
        })
        .unwrap();
        assert_ne!(a.features(), c.features());
    }

    #[test]
    fn provenance_reports_snr() {
        let ds = generate(&small(2, 0.5, 0.0)).unwrap();
        let snr: f64 = ds
            .provenance()
            .rsplit("snr=")
            .next()
            .unwrap()
            .parse()
            .unwrap();
        let sig = generate_with_truth(&small(2, 0.5, 0.0)).unwrap().1.signal;
        let mean = sig.iter().sum::<f64>() / sig.len() as f64;
        let var = sig.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / sig.len() as f64;
        assert!((snr - var / 0.25).abs() < 1e-5);
        assert!(generate(&small(2, 0.0, 0.0))
            .unwrap()
            .provenance()
            .ends_with("snr=inf"));
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(generate(&small(25, 0.0, 0.0)).is_err());
        assert!(generate(&small(0, 0.0, 0.0)).is_err());
        assert!(generate(&small(2, -1.0, 0.0)).is_err());
    }

    #[test]
    fn nonlinear_signal_has_sign_interactions() {
        assert_eq!(signal(&[1.0, -2.0], &[1.0, 1.0], true), -1.0 + -2.0);
        assert_eq!(signal(&[1.0, -2.0], &[1.0, 1.0], false), -1.0);
    }
}
