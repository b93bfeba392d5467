//! Encoder/decoder pair trained on reconstruction error.
//!
//! The default architecture is a single affine encoder `R^d -> R^dz` and a
//! single affine decoder `R^dz -> R^d`. With `hidden = Some(h)` both sides
//! gain a ReLU layer of width `h` (`d -> h -> dz -> h -> d`).

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::dataset::{EmbeddingDataset, Split};
use crate::envelope::{ModelKind, Reader, Writer};
use crate::error::{Error, Result};
use crate::nn::{self, Activation, Adam, Dense, DenseGrad, EarlyStopping, GradCheck, Progress};
use crate::rng::RngSeed;

#[derive(Debug, Clone, PartialEq)]
pub struct AutoencoderModel {
    encoder: Vec<Dense>,
    decoder: Vec<Dense>,
}

impl AutoencoderModel {
    pub fn init(
        input_dim: usize,
        latent_dim: usize,
        hidden: Option<usize>,
        seed: RngSeed,
    ) -> Result<Self> {
        if input_dim == 0 || latent_dim == 0 || hidden == Some(0) {
            return Err(Error::InvalidArgument(
                "autoencoder dimensions must be positive".into(),
            ));
        }
        let mut rng = seed.rng();
        let (encoder, decoder) = match hidden {
            None => (
                vec![Dense::init(
                    input_dim,
                    latent_dim,
                    Activation::Identity,
                    &mut rng,
                )],
                vec![Dense::init(
                    latent_dim,
                    input_dim,
                    Activation::Identity,
                    &mut rng,
                )],
            ),
            Some(h) => (
                vec![
                    Dense::init(input_dim, h, Activation::Relu, &mut rng),
                    Dense::init(h, latent_dim, Activation::Identity, &mut rng),
                ],
                vec![
                    Dense::init(latent_dim, h, Activation::Relu, &mut rng),
                    Dense::init(h, input_dim, Activation::Identity, &mut rng),
                ],
            ),
        };
        Ok(AutoencoderModel { encoder, decoder })
    }

    /// Validates that the layers chain `d -> ... -> dz -> ... -> d`.
    pub fn from_layers(encoder: Vec<Dense>, decoder: Vec<Dense>) -> Result<Self> {
        if encoder.is_empty() || decoder.is_empty() {
            return Err(Error::InvalidArgument(
                "encoder and decoder need at least one layer".into(),
            ));
        }
        let chain = encoder.iter().chain(decoder.iter()).collect::<Vec<_>>();
        for w in chain.windows(2) {
            if w[0].fan_out() != w[1].fan_in() {
                return Err(Error::DimensionMismatch {
                    expected: w[0].fan_out(),
                    got: w[1].fan_in(),
                });
            }
        }
        let (d_in, d_out) = (encoder[0].fan_in(), decoder.last().unwrap().fan_out());
        if d_in != d_out {
            return Err(Error::DimensionMismatch {
                expected: d_in,
                got: d_out,
            });
        }
        Ok(AutoencoderModel { encoder, decoder })
    }

    pub fn input_dim(&self) -> usize {
        self.encoder[0].fan_in()
    }

    pub fn latent_dim(&self) -> usize {
        self.encoder.last().unwrap().fan_out()
    }

    pub fn encoder(&self) -> &[Dense] {
        &self.encoder
    }

    pub fn decoder(&self) -> &[Dense] {
        &self.decoder
    }

    pub fn is_linear(&self) -> bool {
        self.encoder.len() == 1 && self.decoder.len() == 1
    }

    pub fn n_params(&self) -> usize {
        self.encoder
            .iter()
            .chain(&self.decoder)
            .map(Dense::n_params)
            .sum()
    }

    pub fn encode(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.input_dim(), v.len())?;
        let x = ArrayView2::from_shape((1, v.len()), v).expect("row vector");
        Ok(nn::predict(&self.encoder, x).into_raw_vec_and_offset().0)
    }

    pub fn decode(&self, z: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.latent_dim(), z.len())?;
        let x = ArrayView2::from_shape((1, z.len()), z).expect("row vector");
        Ok(nn::predict(&self.decoder, x).into_raw_vec_and_offset().0)
    }

    pub fn encode_batch(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        check_dim(self.input_dim(), x.ncols())?;
        Ok(nn::predict(&self.encoder, x))
    }

    pub fn reconstruct_batch(&self, x: ArrayView2<f64>) -> Result<Array2<f64>> {
        let z = self.encode_batch(x)?;
        Ok(nn::predict(&self.decoder, z.view()))
    }

    /// Mean over rows of the squared reconstruction norm.
    pub fn loss(&self, x: ArrayView2<f64>) -> Result<f64> {
        let recon = self.reconstruct_batch(x)?;
        Ok(mean_sq_norm(&(recon - x)))
    }

    /// Analytic gradient of the reconstruction loss, flattened in parameter
    /// order (encoder layers, then decoder layers; weights row-major, then bias).
    pub fn gradient(&self, x: ArrayView2<f64>) -> Result<(f64, Vec<f64>)> {
        check_dim(self.input_dim(), x.ncols())?;
        let (loss, eg, dg) = loss_and_grads(&self.encoder, &self.decoder, x);
        let mut flat = nn::flatten_grads(&eg);
        flat.extend(nn::flatten_grads(&dg));
        Ok((loss, flat))
    }

    pub fn params(&self) -> Vec<f64> {
        let mut p = nn::flatten_params(&self.encoder);
        p.extend(nn::flatten_params(&self.decoder));
        p
    }

    pub fn set_params(&mut self, flat: &[f64]) {
        let n_enc: usize = self.encoder.iter().map(Dense::n_params).sum();
        nn::set_params(&mut self.encoder, &flat[..n_enc]);
        nn::set_params(&mut self.decoder, &flat[n_enc..]);
    }

    fn relu_pattern(&self, x: ArrayView2<f64>) -> Vec<bool> {
        let mut p = nn::relu_pattern(&self.encoder, x);
        let z = nn::predict(&self.encoder, x);
        p.extend(nn::relu_pattern(&self.decoder, z.view()));
        p
    }

    /// Frobenius norm of the encoder weight matrix (linear architecture only);
    /// an upper bound on the encoder's Lipschitz constant.
    pub fn encoder_frobenius_norm(&self) -> Option<f64> {
        self.is_linear().then(|| {
            self.encoder[0]
                .weights
                .iter()
                .map(|w| w * w)
                .sum::<f64>()
                .sqrt()
        })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new(ModelKind::Autoencoder);
        w.u32(self.encoder.len());
        w.u32(self.decoder.len());
        self.encoder
            .iter()
            .chain(&self.decoder)
            .for_each(|l| w.dense(l));
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes, ModelKind::Autoencoder)?;
        let n_enc = r.u32()?;
        let n_dec = r.u32()?;
        let encoder = (0..n_enc).map(|_| r.dense()).collect::<Result<Vec<_>>>()?;
        let decoder = (0..n_dec).map(|_| r.dense()).collect::<Result<Vec<_>>>()?;
        r.finish()?;
        Self::from_layers(encoder, decoder)
    }

    /// Rounds every parameter to `f32`, i.e. to exactly what
    /// [`to_bytes`](Self::to_bytes) stores.
    pub fn quantized(&self) -> Self {
        let mut m = self.clone();
        let p: Vec<f64> = m.params().iter().map(|&v| f64::from(v as f32)).collect();
        m.set_params(&p);
        m
    }
}

fn loss_and_grads(
    encoder: &[Dense],
    decoder: &[Dense],
    x: ArrayView2<f64>,
) -> (f64, Vec<DenseGrad>, Vec<DenseGrad>) {
    let enc = nn::forward(encoder, x, None);
    let dec = nn::forward(decoder, enc.output.view(), None);
    let diff = &dec.output - &x;
    let n = x.nrows() as f64;
    let loss = mean_sq_norm(&diff);
    let (dec_grads, gz) = nn::backward(decoder, &dec, diff * (2.0 / n), true);
    let (enc_grads, _) = nn::backward(encoder, &enc, gz.expect("requested"), false);
    (loss, enc_grads, dec_grads)
}

fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

fn mean_sq_norm(diff: &Array2<f64>) -> f64 {
    diff.iter().map(|v| v * v).sum::<f64>() / diff.nrows() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AeTrainConfig {
    pub max_epochs: usize,
    pub patience: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Width of the optional symmetric ReLU layer.
    pub hidden: Option<usize>,
    pub seed: RngSeed,
}

impl Default for AeTrainConfig {
    fn default() -> Self {
        AeTrainConfig {
            max_epochs: 100,
            patience: 5,
            batch_size: 256,
            learning_rate: 1e-3,
            hidden: None,
            seed: RngSeed(0),
        }
    }
}

impl AeTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.patience >= self.max_epochs {
            return Err(Error::InvalidArgument(format!(
                "patience {} must be below max epochs {}",
                self.patience, self.max_epochs
            )));
        }
        if self.batch_size == 0 || !(self.learning_rate > 0.0) {
            return Err(Error::InvalidArgument(
                "batch size and learning rate must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AeTrainReport {
    pub latent_dim: usize,
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    /// 1-based epoch whose parameters were restored.
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub stopped_early: bool,
    /// Latent dimension exceeds the input dimension.
    pub overcomplete: bool,
}

/// Trains on the train split with early stopping on the val split and
/// returns the parameters from the epoch with the lowest val loss.
pub fn ae_train(
    dataset: &EmbeddingDataset,
    cfg: &AeTrainConfig,
    latent_dim: usize,
) -> Result<(AutoencoderModel, AeTrainReport)> {
    cfg.validate()?;
    if latent_dim == 0 {
        return Err(Error::InvalidArgument(
            "latent dimension must be at least 1".into(),
        ));
    }
    let train = dataset.split_features(Split::Train);
    let val = dataset.split_features(Split::Val);
    if train.nrows() == 0 || val.nrows() == 0 {
        return Err(Error::Empty(
            "autoencoder training needs train and val rows".into(),
        ));
    }
    let d = dataset.dim();
    let mut model =
        AutoencoderModel::init(d, latent_dim, cfg.hidden, cfg.seed.derive("ae-init", 0))?;
    let mut shuffle_rng = cfg.seed.derive("ae-shuffle", 0).rng();
    let n_enc = model.encoder.len();
    let mut layers: Vec<Dense> = model
        .encoder
        .drain(..)
        .chain(model.decoder.drain(..))
        .collect();
    let mut opt = Adam::new(&layers, cfg.learning_rate);
    let mut stopper = EarlyStopping::new(cfg.patience);
    let mut best_layers = layers.clone();
    let mut order: Vec<usize> = (0..train.nrows()).collect();
    let mut report = AeTrainReport {
        latent_dim,
        train_loss: Vec::new(),
        val_loss: Vec::new(),
        best_epoch: 0,
        best_val_loss: f64::INFINITY,
        stopped_early: false,
        overcomplete: latent_dim > d,
    };

    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut shuffle_rng);
        let mut sum = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let x = train.select(Axis(0), batch);
            let (enc, dec) = layers.split_at(n_enc);
            let (loss, eg, dg) = loss_and_grads(enc, dec, x.view());
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch, loss });
            }
            sum += loss * batch.len() as f64;
            let grads: Vec<DenseGrad> = eg.into_iter().chain(dg).collect();
            opt.step(&mut layers, &grads);
            if !nn::all_finite(&layers) {
                return Err(Error::Diverged {
                    epoch,
                    loss: f64::NAN,
                });
            }
        }
        let train_loss = sum / train.nrows() as f64;
        let val_loss = {
            let recon = nn::predict(
                &layers[n_enc..],
                nn::predict(&layers[..n_enc], val.view()).view(),
            );
            mean_sq_norm(&(recon - &val))
        };
        if !val_loss.is_finite() {
            return Err(Error::Diverged {
                epoch,
                loss: val_loss,
            });
        }
        report.train_loss.push(train_loss);
        report.val_loss.push(val_loss);
        log::debug!("ae dz={latent_dim} epoch {epoch}: train {train_loss:.6} val {val_loss:.6}");
        match stopper.observe(epoch, val_loss) {
            Progress::Improved => best_layers.clone_from(&layers),
            Progress::Stalled => {}
            Progress::Stop => {
                report.stopped_early = epoch < cfg.max_epochs;
                break;
            }
        }
    }
    report.best_epoch = stopper.best_epoch();
    report.best_val_loss = stopper.best();
    let decoder = best_layers.split_off(n_enc);
    Ok((
        AutoencoderModel {
            encoder: best_layers,
            decoder,
        },
        report,
    ))
}

/// Largest relative deviation between the analytic gradient of the
/// reconstruction loss on `batch` and central differences, over at most
/// `max_params` randomly chosen parameters.
pub fn ae_gradient_check(
    model: &AutoencoderModel,
    batch: ArrayView2<f64>,
    max_params: usize,
    seed: RngSeed,
) -> Result<GradCheck> {
    if batch.nrows() == 0 {
        return Err(Error::Empty(
            "gradient check needs a non-empty batch".into(),
        ));
    }
    let (_, analytic) = model.gradient(batch)?;
    let params = model.params();
    let idx = nn::sample_indices(params.len(), max_params, &mut seed.rng());
    let loss = |p: &[f64]| {
        let mut m = model.clone();
        m.set_params(p);
        m.loss(batch).expect("dimension checked")
    };
    let pattern = |p: &[f64]| {
        let mut m = model.clone();
        m.set_params(p);
        m.relu_pattern(batch)
    };
    Ok(nn::finite_difference_check(
        &params, &analytic, &idx, loss, pattern,
    ))
}

/// Cosine similarity between each row and its reconstruction.
pub(crate) fn row_cosines(x: ArrayView2<f64>, recon: ArrayView2<f64>) -> Vec<Option<f64>> {
    x.rows()
        .into_iter()
        .zip(recon.rows())
        .map(|(a, b)| cosine(a, b))
        .collect()
}

fn cosine(a: ArrayView1<f64>, b: ArrayView1<f64>) -> Option<f64> {
    let na = a.dot(&a).sqrt();
    let nb = b.dot(&b).sqrt();
    if na == 0.0 || nb == 0.0 {
        return None;
    }
    Some((a.dot(&b) / (na * nb)).clamp(-1.0, 1.0))
}
