//! Feedforward network with ReLU hidden layers and a sigmoid output,
//! trained on mean binary cross-entropy.

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Standardizer, TrainingSet};
use crate::classify::logistic::sigmoid;
use crate::error::{domain, Error, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpConfig {
    pub hidden: Vec<usize>,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: Optimizer,
    pub class_weighting: bool,
}

impl Default for MlpConfig {
    fn default() -> Self {
        Self {
            hidden: vec![256, 256, 128, 64],
            learning_rate: 1e-3,
            epochs: 30,
            batch_size: 256,
            optimizer: Optimizer::Adam,
            class_weighting: false,
        }
    }
}

impl MlpConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden.contains(&0) {
            return domain("hidden layer widths must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return domain("learning rate must be positive");
        }
        if self.batch_size == 0 {
            return domain("batch size must be positive");
        }
        Ok(())
    }

    /// Layer widths from input to the single output.
    pub fn widths(&self, d: usize) -> Vec<usize> {
        let mut w = vec![d];
        w.extend(&self.hidden);
        w.push(1);
        w
    }
}

/// `fan_in × fan_out` weights and a bias per output unit.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub w: Array2<f64>,
    pub b: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub layers: Vec<Layer>,
}

/// Per-layer gradients, shaped like the layers.
pub type Gradients = Vec<Layer>;

impl Network {
    /// Glorot-uniform weights, zero biases.
    pub fn init(widths: &[usize], seed: u64) -> Self {
        let mut rng = seed::rng(seed);
        let layers = widths
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                Layer {
                    w: Array2::from_shape_fn((fan_in, fan_out), |_| rng.random_range(-limit..=limit)),
                    b: Array1::zeros(fan_out),
                }
            })
            .collect();
        Self { layers }
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].w.nrows()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    /// Pre-activations of every layer.
    fn forward(&self, x: ArrayView2<'_, f64>) -> Vec<Array2<f64>> {
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut a = x.to_owned();
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let z = a.dot(&layer.w) + &layer.b;
            if l < last {
                a = z.mapv(|v| v.max(0.0));
            }
            pre.push(z);
        }
        pre
    }

    /// Output logits, one per row.
    pub fn logits(&self, x: ArrayView2<'_, f64>) -> Array1<f64> {
        self.forward(x).pop().expect("network has layers").column(0).to_owned()
    }

    /// Weighted mean cross-entropy and its gradient.
    pub fn loss_and_grad(&self, x: ArrayView2<'_, f64>, y: &[f64], w: &[f64]) -> (f64, Gradients) {
        let n = x.nrows() as f64;
        let pre = self.forward(x);
        let logits = pre.last().expect("network has layers").column(0);
        let mut loss = 0.0;
        let mut dz = Array2::zeros((x.nrows(), 1));
        for t in 0..x.nrows() {
            let z = logits[t];
            let sp = if z > 0.0 {
                z + (-z).exp().ln_1p()
            } else {
                z.exp().ln_1p()
            };
            loss += w[t] * (sp - y[t] * z);
            dz[[t, 0]] = w[t] * (sigmoid(z) - y[t]) / n;
        }
        let mut grads: Vec<Layer> = Vec::with_capacity(self.layers.len());
        for l in (0..self.layers.len()).rev() {
            let input = if l == 0 {
                x.to_owned()
            } else {
                pre[l - 1].mapv(|v| v.max(0.0))
            };
            grads.push(Layer {
                w: input.t().dot(&dz),
                b: dz.sum_axis(Axis(0)),
            });
            if l > 0 {
                let mut da = dz.dot(&self.layers[l].w.t());
                Zip::from(&mut da).and(&pre[l - 1]).for_each(|g, &z| {
                    if z <= 0.0 {
                        *g = 0.0;
                    }
                });
                dz = da;
            }
        }
        grads.reverse();
        (loss / n, grads)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub network: Network,
    pub scaler: Standardizer,
    pub config: MlpConfig,
    pub seed: u64,
}

impl MlpModel {
    pub fn dim(&self) -> usize {
        self.network.input_dim()
    }

    pub fn param_count(&self) -> usize {
        self.network.param_count()
    }

    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
        if x.ncols() != self.dim() {
            return Err(Error::Dimension {
                context: "network input width",
                expected: self.dim(),
                got: x.ncols(),
            });
        }
        let xs = self.scaler.apply(x);
        Ok(self.network.logits(xs.view()).iter().map(|&z| sigmoid(z)).collect())
    }
}

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

struct Adam {
    m: Gradients,
    v: Gradients,
    t: i32,
}

impl Adam {
    fn new(net: &Network) -> Self {
        let zeros = |l: &Layer| Layer {
            w: Array2::zeros(l.w.raw_dim()),
            b: Array1::zeros(l.b.raw_dim()),
        };
        Self {
            m: net.layers.iter().map(zeros).collect(),
            v: net.layers.iter().map(zeros).collect(),
            t: 0,
        }
    }

    fn step(&mut self, net: &mut Network, grads: &Gradients, lr: f64) {
        self.t += 1;
        let c1 = 1.0 - ADAM_BETA1.powi(self.t);
        let c2 = 1.0 - ADAM_BETA2.powi(self.t);
        let update = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
            *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
            *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + ADAM_EPS);
        };
        for (((layer, g), m), v) in net.layers.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            Zip::from(&mut layer.w)
                .and(&g.w)
                .and(&mut m.w)
                .and(&mut v.w)
                .for_each(|p, &g, m, v| update(p, g, m, v));
            Zip::from(&mut layer.b)
                .and(&g.b)
                .and(&mut m.b)
                .and(&mut v.b)
                .for_each(|p, &g, m, v| update(p, g, m, v));
        }
    }
}

fn sgd_step(net: &mut Network, grads: &Gradients, lr: f64) {
    for (layer, g) in net.layers.iter_mut().zip(grads) {
        layer.w.scaled_add(-lr, &g.w);
        layer.b.scaled_add(-lr, &g.b);
    }
}

/// Mini-batch training; batch order is reshuffled every epoch from a
/// stream derived from `seed`.
pub fn fit_mlp(train: &TrainingSet, cfg: &MlpConfig, seed: u64) -> Result<MlpModel> {
    cfg.validate()?;
    let pos = train.labels.iter().filter(|&&v| v == 1).count();
    if pos == 0 || pos == train.len() {
        return domain("training labels contain a single class");
    }
    let scaler = Standardizer::fit(train.features.view());
    let x = scaler.apply(train.features.view());
    let y: Vec<f64> = train.labels.iter().map(|&v| f64::from(v)).collect();
    let n = train.len();
    let w: Vec<f64> = if cfg.class_weighting {
        let (wp, wn) = (n as f64 / (2.0 * pos as f64), n as f64 / (2.0 * (n - pos) as f64));
        y.iter().map(|&v| if v == 1.0 { wp } else { wn }).collect()
    } else {
        vec![1.0; n]
    };
    let mut net = Network::init(&cfg.widths(train.dim()), seed::derive(seed, &[0]));
    let mut adam = Adam::new(&net);
    let mut order: Vec<usize> = (0..n).collect();
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut seed::rng(seed::derive(seed, &[1, epoch as u64])));
        for batch in order.chunks(cfg.batch_size) {
            let xb = x.select(Axis(0), batch);
            let yb: Vec<f64> = batch.iter().map(|&t| y[t]).collect();
            let wb: Vec<f64> = batch.iter().map(|&t| w[t]).collect();
            let (loss, grads) = net.loss_and_grad(xb.view(), &yb, &wb);
            if !loss.is_finite() {
                return Err(Error::Convergence {
                    iterations: epoch,
                    lambda: 0.0,
                    max_change: loss,
                });
            }
            match cfg.optimizer {
                Optimizer::Adam => adam.step(&mut net, &grads, cfg.learning_rate),
                Optimizer::Sgd => sgd_step(&mut net, &grads, cfg.learning_rate),
            }
        }
    }
    Ok(MlpModel {
        network: net,
        scaler,
        config: cfg.clone(),
        seed,
    })
}
