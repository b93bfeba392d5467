//! Three-layer MLP regression head trained on Huber loss.
//!
//! `h1 = drop(relu(W1 z + b1))`, `h2 = drop(relu(W2 h1 + b2))`,
//! `y = W3 h2 + b3`. Dropout is active only while training.

use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::analysis::huber;
use crate::envelope::{ModelKind, Reader, Writer};
use crate::error::{Error, Result};
use crate::nn::{self, Activation, Adam, Dense, EarlyStopping, GradCheck, Progress};
use crate::rng::RngSeed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub hidden_dim: usize,
    pub dropout: f64,
    pub huber_delta: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Start the output layer at zero (all initial predictions 0).
    pub zero_init_output: bool,
    pub seed: RngSeed,
}

impl Default for MlpConfig {
    fn default() -> Self {
        MlpConfig {
            hidden_dim: 128,
            dropout: 0.1,
            huber_delta: 1.0,
            max_epochs: 100,
            patience: 5,
            batch_size: 256,
            learning_rate: 1e-3,
            zero_init_output: false,
            seed: RngSeed(0),
        }
    }
}

impl MlpConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_dim == 0 || self.batch_size == 0 {
            return Err(Error::InvalidArgument(
                "hidden_dim and batch_size must be positive".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::InvalidArgument(format!(
                "dropout {} outside [0, 1)",
                self.dropout
            )));
        }
        if !(self.huber_delta > 0.0) || !(self.learning_rate > 0.0) {
            return Err(Error::InvalidArgument(
                "huber delta and learning rate must be positive".into(),
            ));
        }
        if self.patience >= self.max_epochs {
            return Err(Error::InvalidArgument(
                "patience must be below max_epochs".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    layers: Vec<Dense>,
}

impl MlpModel {
    pub fn init(input_dim: usize, cfg: &MlpConfig) -> Result<Self> {
        cfg.validate()?;
        if input_dim == 0 {
            return Err(Error::InvalidArgument(
                "input dimension must be positive".into(),
            ));
        }
        let mut rng = cfg.seed.derive("mlp-init", 0).rng();
        let h = cfg.hidden_dim;
        let mut out = Dense::init(h, 1, Activation::Identity, &mut rng);
        if cfg.zero_init_output {
            out = Dense::zeros(h, 1, Activation::Identity);
        }
        Ok(MlpModel {
            layers: vec![
                Dense::init(input_dim, h, Activation::Relu, &mut rng),
                Dense::init(h, h, Activation::Relu, &mut rng),
                out,
            ],
        })
    }

    /// Three layers chaining `d -> h -> h -> 1`, ReLU on the first two.
    pub fn from_layers(layers: Vec<Dense>) -> Result<Self> {
        let ok = layers.len() == 3
            && layers[0].fan_out() == layers[1].fan_in()
            && layers[1].fan_out() == layers[2].fan_in()
            && layers[2].fan_out() == 1
            && layers[0].activation == Activation::Relu
            && layers[1].activation == Activation::Relu
            && layers[2].activation == Activation::Identity;
        if !ok {
            return Err(Error::InvalidArgument(
                "MLP layers must chain d -> h -> h -> 1".into(),
            ));
        }
        Ok(MlpModel { layers })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].fan_in()
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn params(&self) -> Vec<f64> {
        nn::flatten_params(&self.layers)
    }

    pub fn set_params(&mut self, flat: &[f64]) {
        nn::set_params(&mut self.layers, flat);
    }

    /// Mean Huber loss without dropout.
    pub fn loss(&self, x: ArrayView2<f64>, y: &[f64], delta: f64) -> Result<f64> {
        let p = mlp_predict(self, x)?;
        Ok(mean_huber(y, &p, delta))
    }

    /// Analytic gradient of the mean Huber loss (dropout off), flattened in
    /// layer order.
    pub fn gradient(&self, x: ArrayView2<f64>, y: &[f64], delta: f64) -> Result<(f64, Vec<f64>)> {
        self.check_input(x, y)?;
        let trace = nn::forward(&self.layers, x, None);
        let (loss, g) = huber_grad(&trace.output, y, delta);
        let (grads, _) = nn::backward(&self.layers, &trace, g, false);
        Ok((loss, nn::flatten_grads(&grads)))
    }

    fn check_input(&self, x: ArrayView2<f64>, y: &[f64]) -> Result<()> {
        if x.ncols() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                got: x.ncols(),
            });
        }
        if x.nrows() != y.len() {
            return Err(Error::LengthMismatch {
                what: "rows vs targets",
                left: x.nrows(),
                right: y.len(),
            });
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = Writer::new(ModelKind::Mlp);
        w.u32(self.layers.len());
        self.layers.iter().for_each(|l| w.dense(l));
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes, ModelKind::Mlp)?;
        let n = r.u32()?;
        let layers = (0..n).map(|_| r.dense()).collect::<Result<Vec<_>>>()?;
        r.finish()?;
        Self::from_layers(layers)
    }
}

fn mean_huber(y: &[f64], p: &[f64], delta: f64) -> f64 {
    y.iter()
        .zip(p)
        .map(|(&a, &b)| huber(a, b, delta))
        .sum::<f64>()
        / y.len() as f64
}

/// Mean Huber loss of a column of predictions and its gradient.
fn huber_grad(pred: &Array2<f64>, y: &[f64], delta: f64) -> (f64, Array2<f64>) {
    let n = y.len() as f64;
    let mut loss = 0.0;
    let mut g = Array2::zeros(pred.dim());
    for (i, &t) in y.iter().enumerate() {
        let p = pred[[i, 0]];
        loss += huber(t, p, delta);
        g[[i, 0]] = (p - t).clamp(-delta, delta) / n;
    }
    (loss / n, g)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpTrainReport {
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub stopped_early: bool,
}

/// Trains on `(x_train, y_train)` with early stopping on `(x_val, y_val)`,
/// restoring the parameters of the best validation epoch.
pub fn mlp_fit(
    x_train: ArrayView2<f64>,
    y_train: &[f64],
    x_val: ArrayView2<f64>,
    y_val: &[f64],
    cfg: &MlpConfig,
) -> Result<(MlpModel, MlpTrainReport)> {
    let model = MlpModel::init(x_train.ncols(), cfg)?;
    model.check_input(x_train, y_train)?;
    model.check_input(x_val, y_val)?;
    if y_train.is_empty() || y_val.is_empty() {
        return Err(Error::Empty("MLP training needs train and val rows".into()));
    }
    let mut layers = model.layers;
    let mut opt = Adam::new(&layers, cfg.learning_rate);
    let mut stopper = EarlyStopping::new(cfg.patience);
    let mut best = layers.clone();
    let mut order: Vec<usize> = (0..y_train.len()).collect();
    let mut shuffle_rng = cfg.seed.derive("mlp-shuffle", 0).rng();
    let mut dropout_rng = cfg.seed.derive("mlp-dropout", 0).rng();
    let mut report = MlpTrainReport {
        train_loss: Vec::new(),
        val_loss: Vec::new(),
        best_epoch: 0,
        best_val_loss: f64::INFINITY,
        stopped_early: false,
    };
    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut shuffle_rng);
        let mut sum = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let x = x_train.select(Axis(0), batch);
            let y: Vec<f64> = batch.iter().map(|&i| y_train[i]).collect();
            let trace = nn::forward(&layers, x.view(), Some((cfg.dropout, &mut dropout_rng)));
            let (loss, g) = huber_grad(&trace.output, &y, cfg.huber_delta);
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch, loss });
            }
            sum += loss * batch.len() as f64;
            let (grads, _) = nn::backward(&layers, &trace, g, false);
            opt.step(&mut layers, &grads);
            if !nn::all_finite(&layers) {
                return Err(Error::Diverged {
                    epoch,
                    loss: f64::NAN,
                });
            }
        }
        let val_pred = nn::predict(&layers, x_val).column(0).to_vec();
        let val_loss = mean_huber(y_val, &val_pred, cfg.huber_delta);
        if !val_loss.is_finite() {
            return Err(Error::Diverged {
                epoch,
                loss: val_loss,
            });
        }
        report.train_loss.push(sum / y_train.len() as f64);
        report.val_loss.push(val_loss);
        match stopper.observe(epoch, val_loss) {
            Progress::Improved => best.clone_from(&layers),
            Progress::Stalled => {}
            Progress::Stop => {
                report.stopped_early = epoch < cfg.max_epochs;
                break;
            }
        }
    }
    report.best_epoch = stopper.best_epoch();
    report.best_val_loss = stopper.best();
    Ok((MlpModel { layers: best }, report))
}

pub fn mlp_predict(model: &MlpModel, x: ArrayView2<f64>) -> Result<Vec<f64>> {
    if x.ncols() != model.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: model.input_dim(),
            got: x.ncols(),
        });
    }
    Ok(nn::predict(&model.layers, x).column(0).to_vec())
}

/// Finite-difference check of [`MlpModel::gradient`] (dropout off).
pub fn mlp_gradient_check(
    model: &MlpModel,
    x: ArrayView2<f64>,
    y: &[f64],
    delta: f64,
    max_params: usize,
    seed: RngSeed,
) -> Result<GradCheck> {
    if y.is_empty() {
        return Err(Error::Empty(
            "gradient check needs a non-empty batch".into(),
        ));
    }
    let (_, analytic) = model.gradient(x, y, delta)?;
    let params = model.params();
    let idx = nn::sample_indices(params.len(), max_params, &mut seed.rng());
    let loss = |p: &[f64]| {
        let mut m = model.clone();
        m.set_params(p);
        m.loss(x, y, delta).expect("shape checked")
    };
    // Huber switches branch at |r| = delta; treat that like a ReLU kink.
    let pattern = |p: &[f64]| {
        let mut m = model.clone();
        m.set_params(p);
        let mut pat = nn::relu_pattern(&m.layers, x);
        let pred = nn::predict(&m.layers, x);
        pat.extend(
            y.iter()
                .enumerate()
                .map(|(i, t)| (t - pred[[i, 0]]).abs() <= delta),
        );
        pat
    };
    Ok(nn::finite_difference_check(
        &params, &analytic, &idx, loss, pattern,
    ))
}
