//! Dense layers with hand-written backprop, the Adam update rule, early
//! stopping, and a finite-difference gradient checker.

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::Rng as _;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Identity,
    Relu,
}

impl Activation {
    pub(crate) fn code(self) -> u8 {
        match self {
            Activation::Identity => 0,
            Activation::Relu => 1,
        }
    }

    pub(crate) fn from_code(c: u8) -> Option<Self> {
        match c {
            0 => Some(Activation::Identity),
            1 => Some(Activation::Relu),
            _ => None,
        }
    }
}

/// Affine map `y = act(W x + b)` with `W` stored as `out × in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
    pub activation: Activation,
}

impl Dense {
    /// Uniform in `±1/sqrt(fan_in)` for weights and bias.
    pub fn init(fan_in: usize, fan_out: usize, activation: Activation, rng: &mut Rng) -> Self {
        let bound = 1.0 / (fan_in as f64).sqrt();
        let dist = Uniform::new_inclusive(-bound, bound).expect("finite bound");
        let weights = Array2::from_shape_simple_fn((fan_out, fan_in), || dist.sample(rng));
        let bias = Array1::from_shape_simple_fn(fan_out, || dist.sample(rng));
        Dense {
            weights,
            bias,
            activation,
        }
    }

    pub fn zeros(fan_in: usize, fan_out: usize, activation: Activation) -> Self {
        Dense {
            weights: Array2::zeros((fan_out, fan_in)),
            bias: Array1::zeros(fan_out),
            activation,
        }
    }

    pub fn identity(dim: usize) -> Self {
        Dense {
            weights: Array2::eye(dim),
            bias: Array1::zeros(dim),
            activation: Activation::Identity,
        }
    }

    pub fn fan_in(&self) -> usize {
        self.weights.ncols()
    }

    pub fn fan_out(&self) -> usize {
        self.weights.nrows()
    }

    pub fn n_params(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    /// Rows of `x` are samples. Returns the pre-activation.
    fn affine(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let mut pre = x.dot(&self.weights.t());
        pre += &self.bias;
        pre
    }

    fn activate(&self, pre: &Array2<f64>) -> Array2<f64> {
        match self.activation {
            Activation::Identity => pre.clone(),
            Activation::Relu => pre.mapv(|v| v.max(0.0)),
        }
    }
}

#[derive(Debug, Clone)]
pub struct DenseGrad {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

/// Intermediate values saved by a forward pass for backprop.
#[derive(Debug)]
pub(crate) struct Trace {
    inputs: Vec<Array2<f64>>,
    /// Pre-activations of ReLU layers (identity layers keep none).
    pre: Vec<Option<Array2<f64>>>,
    /// Inverted-dropout multipliers for each layer output (`None` = no dropout).
    masks: Vec<Option<Array2<f64>>>,
    pub output: Array2<f64>,
}

/// Runs `layers` in sequence. Dropout with probability `dropout.0` is applied
/// to every layer output except the last.
pub(crate) fn forward(
    layers: &[Dense],
    x: ArrayView2<f64>,
    mut dropout: Option<(f64, &mut Rng)>,
) -> Trace {
    let mut inputs = Vec::with_capacity(layers.len());
    let mut pre = Vec::with_capacity(layers.len());
    let mut masks = Vec::with_capacity(layers.len());
    let mut cur = x.to_owned();
    for (li, layer) in layers.iter().enumerate() {
        let p = layer.affine(cur.view());
        let (mut out, p) = match layer.activation {
            Activation::Identity => (p, None),
            Activation::Relu => (layer.activate(&p), Some(p)),
        };
        let mut mask = None;
        if li + 1 < layers.len() {
            if let Some((prob, rng)) = dropout.as_mut() {
                if *prob > 0.0 {
                    let keep = 1.0 - *prob;
                    let m = Array2::from_shape_simple_fn(out.dim(), || {
                        if rng.random::<f64>() < keep {
                            1.0 / keep
                        } else {
                            0.0
                        }
                    });
                    out *= &m;
                    mask = Some(m);
                }
            }
        }
        inputs.push(cur);
        pre.push(p);
        masks.push(mask);
        cur = out;
    }
    Trace {
        inputs,
        pre,
        masks,
        output: cur,
    }
}

pub(crate) fn predict(layers: &[Dense], x: ArrayView2<f64>) -> Array2<f64> {
    let mut cur = x.to_owned();
    for layer in layers {
        cur = layer.affine(cur.view());
        if layer.activation == Activation::Relu {
            cur.mapv_inplace(|v| v.max(0.0));
        }
    }
    cur
}

/// Backprop of `d loss / d output` through the traced layers. Returns
/// per-layer gradients and, when `input_grad` is set, `d loss / d input`.
pub(crate) fn backward(
    layers: &[Dense],
    trace: &Trace,
    grad_out: Array2<f64>,
    input_grad: bool,
) -> (Vec<DenseGrad>, Option<Array2<f64>>) {
    let mut grads = Vec::with_capacity(layers.len());
    let mut g = grad_out;
    for li in (0..layers.len()).rev() {
        let layer = &layers[li];
        if let Some(m) = &trace.masks[li] {
            g *= m;
        }
        if let Some(pre) = &trace.pre[li] {
            Zip::from(&mut g).and(pre).for_each(|gv, &p| {
                if p <= 0.0 {
                    *gv = 0.0;
                }
            });
        }
        let gw = g.t().dot(&trace.inputs[li]);
        let gb = g.sum_axis(Axis(0));
        grads.push(DenseGrad {
            weights: gw,
            bias: gb,
        });
        if li == 0 {
            break;
        }
        g = g.dot(&layer.weights);
    }
    grads.reverse();
    (grads, input_grad.then(|| g.dot(&layers[0].weights)))
}

/// Signs of every ReLU pre-activation; used to detect finite-difference
/// steps that cross a kink.
pub(crate) fn relu_pattern(layers: &[Dense], x: ArrayView2<f64>) -> Vec<bool> {
    let mut out = Vec::new();
    let mut cur = x.to_owned();
    for layer in layers {
        let p = layer.affine(cur.view());
        if layer.activation == Activation::Relu {
            out.extend(p.iter().map(|&v| v > 0.0));
        }
        cur = layer.activate(&p);
    }
    out
}

pub(crate) fn flatten_params(layers: &[Dense]) -> Vec<f64> {
    let mut out = Vec::with_capacity(layers.iter().map(Dense::n_params).sum());
    for l in layers {
        out.extend(l.weights.iter().copied());
        out.extend(l.bias.iter().copied());
    }
    out
}

pub(crate) fn flatten_grads(grads: &[DenseGrad]) -> Vec<f64> {
    let mut out = Vec::new();
    for g in grads {
        out.extend(g.weights.iter().copied());
        out.extend(g.bias.iter().copied());
    }
    out
}

pub(crate) fn set_params(layers: &mut [Dense], flat: &[f64]) {
    let mut it = flat.iter().copied();
    for l in layers {
        l.weights
            .iter_mut()
            .for_each(|w| *w = it.next().expect("param count"));
        l.bias
            .iter_mut()
            .for_each(|b| *b = it.next().expect("param count"));
    }
}

pub(crate) fn all_finite(layers: &[Dense]) -> bool {
    layers
        .iter()
        .all(|l| l.weights.iter().chain(l.bias.iter()).all(|v| v.is_finite()))
}

/// Adaptive-moment optimizer state for a list of dense layers.
#[derive(Debug, Clone)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: i32,
    m: Vec<DenseGrad>,
    v: Vec<DenseGrad>,
}

impl Adam {
    pub fn new(layers: &[Dense], lr: f64) -> Self {
        let zeros = |l: &Dense| DenseGrad {
            weights: Array2::zeros(l.weights.dim()),
            bias: Array1::zeros(l.bias.len()),
        };
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: layers.iter().map(zeros).collect(),
            v: layers.iter().map(zeros).collect(),
        }
    }

    pub fn step(&mut self, layers: &mut [Dense], grads: &[DenseGrad]) {
        self.t += 1;
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
        let c1 = 1.0 - b1.powi(self.t);
        let c2 = 1.0 - b2.powi(self.t);
        let lr = self.lr;
        let update = |p: &mut f64, m: &mut f64, v: &mut f64, g: f64| {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
        };
        for (((layer, g), m), v) in layers
            .iter_mut()
            .zip(grads)
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            Zip::from(&mut layer.weights)
                .and(&mut m.weights)
                .and(&mut v.weights)
                .and(&g.weights)
                .for_each(|p, m, v, &g| update(p, m, v, g));
            Zip::from(&mut layer.bias)
                .and(&mut m.bias)
                .and(&mut v.bias)
                .and(&g.bias)
                .for_each(|p, m, v, &g| update(p, m, v, g));
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Progress {
    Improved,
    Stalled,
    Stop,
}

/// Patience-based early stopping on a validation loss. Only a strict
/// decrease counts as improvement. Epochs are 1-based.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    best: f64,
    best_epoch: usize,
    stalled: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping {
            patience,
            best: f64::INFINITY,
            best_epoch: 0,
            stalled: 0,
        }
    }

    pub fn observe(&mut self, epoch: usize, val_loss: f64) -> Progress {
        if val_loss < self.best {
            self.best = val_loss;
            self.best_epoch = epoch;
            self.stalled = 0;
            Progress::Improved
        } else {
            self.stalled += 1;
            if self.stalled >= self.patience {
                Progress::Stop
            } else {
                Progress::Stalled
            }
        }
    }

    pub fn best(&self) -> f64 {
        self.best
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }
}

/// Outcome of comparing analytic gradients with central differences.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradCheck {
    pub max_rel_error: f64,
    pub checked: usize,
    /// Parameters skipped because the probe crossed a ReLU kink.
    pub skipped: usize,
}

pub const GRAD_CHECK_STEP: f64 = 1e-4;
const REL_ERROR_FLOOR: f64 = 1e-6;

/// Compares `analytic` against `(loss(p + h) - loss(p - h)) / 2h` at the given
/// parameter indices. `pattern` reports the activation pattern at a
/// parameter vector; probes that change it are skipped.
pub(crate) fn finite_difference_check(
    params: &[f64],
    analytic: &[f64],
    indices: &[usize],
    loss: impl Fn(&[f64]) -> f64,
    pattern: impl Fn(&[f64]) -> Vec<bool>,
) -> GradCheck {
    let h = GRAD_CHECK_STEP;
    let base_pattern = pattern(params);
    let mut p = params.to_vec();
    let mut worst: f64 = 0.0;
    let (mut checked, mut skipped) = (0, 0);
    for &i in indices {
        p[i] = params[i] + h;
        let up = loss(&p);
        let up_pattern = pattern(&p);
        p[i] = params[i] - h;
        let down = loss(&p);
        let down_pattern = pattern(&p);
        p[i] = params[i];
        if up_pattern != base_pattern || down_pattern != base_pattern {
            skipped += 1;
            continue;
        }
        let numeric = (up - down) / (2.0 * h);
        let a = analytic[i];
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(REL_ERROR_FLOOR);
        worst = worst.max(rel);
        checked += 1;
    }
    GradCheck {
        max_rel_error: worst,
        checked,
        skipped,
    }
}

/// Up to `max` distinct parameter indices drawn without replacement.
pub(crate) fn sample_indices(n_params: usize, max: usize, rng: &mut Rng) -> Vec<usize> {
    if n_params <= max {
        return (0..n_params).collect();
    }
    let mut idx = rand::seq::index::sample(rng, n_params, max).into_vec();
    idx.sort_unstable();
    idx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngSeed;

    #[test]
    fn early_stopping_trace() {
        let trace = [3.0, 2.0, 2.5, 2.6, 2.7, 2.8, 2.9, 3.0];
        let mut es = EarlyStopping::new(5);
        let mut stopped_at = None;
        for (i, &l) in trace.iter().enumerate() {
            if es.observe(i + 1, l) == Progress::Stop {
                stopped_at = Some(i + 1);
                break;
            }
        }
        assert_eq!(stopped_at, Some(7));
        assert_eq!(es.best_epoch(), 2);
        assert_eq!(es.best(), 2.0);
    }

    #[test]
    fn ties_are_not_improvement() {
        let mut es = EarlyStopping::new(2);
        assert_eq!(es.observe(1, 1.0), Progress::Improved);
        assert_eq!(es.observe(2, 1.0), Progress::Stalled);
        assert_eq!(es.observe(3, 1.0), Progress::Stop);
        assert_eq!(es.best_epoch(), 1);
    }

    #[test]
    fn adam_first_step_moves_by_lr() {
        let mut layers = vec![Dense::zeros(2, 1, Activation::Identity)];
        let mut opt = Adam::new(&layers, 1e-3);
        let g = DenseGrad {
            weights: ndarray::array![[2.0, -0.5]],
            bias: ndarray::array![0.0],
        };
        opt.step(&mut layers, &[g]);
        assert!((layers[0].weights[[0, 0]] + 1e-3).abs() < 1e-9);
        assert!((layers[0].weights[[0, 1]] - 1e-3).abs() < 1e-9);
        assert_eq!(layers[0].bias[0], 0.0);
    }

    #[test]
    fn init_respects_fan_in_bound() {
        let mut rng = RngSeed(1).rng();
        let l = Dense::init(16, 4, Activation::Relu, &mut rng);
        let bound = 0.25;
        assert!(l
            .weights
            .iter()
            .chain(l.bias.iter())
            .all(|w| w.abs() <= bound));
        assert!(l.weights.iter().any(|w| w.abs() > 0.1));
    }

    #[test]
    fn params_round_trip() {
        let mut rng = RngSeed(9).rng();
        let mut layers = vec![
            Dense::init(3, 2, Activation::Relu, &mut rng),
            Dense::init(2, 1, Activation::Identity, &mut rng),
        ];
        let flat = flatten_params(&layers);
        assert_eq!(flat.len(), 3 * 2 + 2 + 2 + 1);
        let zeros = vec![0.0; flat.len()];
        set_params(&mut layers, &zeros);
        assert!(flatten_params(&layers).iter().all(|&v| v == 0.0));
        set_params(&mut layers, &flat);
        assert_eq!(flatten_params(&layers), flat);
    }
}
