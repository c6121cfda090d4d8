//! Single-hidden-layer fully connected regressor.
//!
//! ```text
//! x(3) -> dense(20, relu) -> batchnorm(20) -> dense(H, act, L1|L2) -> dense(1)
//! ```
//!
//! Trained with Adam on mini-batches. Inputs are z-scored with training-set
//! statistics; targets are divided by [`TARGET_SCALE`] so the output layer
//! works on `[0, 1]`.

use serde::{Deserialize, Serialize};

use super::{FeatureVector, SizeTransform, Standardizer, TrainingSet};
use crate::error::{Error, Result};
use crate::rng::{self, rng_from_seed, SimRng};
use crate::workload::Family;

pub const INPUT_FEATURES: usize = 3;
/// Width of the first dense layer.
pub const FIRST_LAYER: usize = 20;
pub const TARGET_SCALE: f64 = 100.0;
pub const BN_EPS: f64 = 1e-3;
pub const BN_MOMENTUM: f64 = 0.9;
/// The network sees log data size and log cache-to-data ratio.
pub const SIZE_TRANSFORM: SizeTransform = SizeTransform::LogRatio;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Loss {
    Mae,
    Mse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Sigmoid,
    Relu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regularizer {
    L1,
    L2,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FcnConfig {
    pub hidden_neurons: usize,
    pub loss: Loss,
    pub activation: Activation,
    pub epochs: usize,
    pub regularizer: Regularizer,
    /// Penalty strength for either regularizer.
    pub l2_coefficient: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
}

pub const HIDDEN_CHOICES: [usize; 5] = [16, 32, 64, 128, 256];
pub const EPOCH_CHOICES: [usize; 4] = [500, 1000, 2000, 4000];

impl FcnConfig {
    /// Best configuration per family from the hyperparameter sweep.
    pub fn tuned(family: Family) -> Self {
        let (hidden_neurons, loss, epochs) = match family {
            Family::Uniform => (16, Loss::Mae, 4000),
            Family::Gaussian => (64, Loss::Mse, 4000),
            Family::Exponential => (64, Loss::Mse, 4000),
            Family::Zipf => (32, Loss::Mae, 500),
        };
        Self {
            hidden_neurons,
            loss,
            activation: Activation::Sigmoid,
            epochs,
            regularizer: Regularizer::L2,
            l2_coefficient: 1e-4,
            learning_rate: 1e-3,
            batch_size: 15,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !HIDDEN_CHOICES.contains(&self.hidden_neurons) {
            return Err(Error::invalid(format!(
                "hidden_neurons must be one of {HIDDEN_CHOICES:?}, got {}",
                self.hidden_neurons
            )));
        }
        if !EPOCH_CHOICES.contains(&self.epochs) {
            return Err(Error::invalid(format!(
                "epochs must be one of {EPOCH_CHOICES:?}, got {}",
                self.epochs
            )));
        }
        if self.batch_size < 2 {
            return Err(Error::invalid("batch_size must be at least 2 for batch normalisation"));
        }
        if !(self.learning_rate > 0.0) || !(self.l2_coefficient >= 0.0) {
            return Err(Error::invalid(
                "learning rate must be positive and penalty non-negative",
            ));
        }
        Ok(())
    }
}

/// Offsets of each parameter block inside the flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    pub hidden: usize,
}

impl Layout {
    pub fn w1(&self) -> std::ops::Range<usize> {
        0..FIRST_LAYER * INPUT_FEATURES
    }
    pub fn b1(&self) -> std::ops::Range<usize> {
        let s = self.w1().end;
        s..s + FIRST_LAYER
    }
    pub fn gamma(&self) -> std::ops::Range<usize> {
        let s = self.b1().end;
        s..s + FIRST_LAYER
    }
    pub fn beta(&self) -> std::ops::Range<usize> {
        let s = self.gamma().end;
        s..s + FIRST_LAYER
    }
    pub fn w2(&self) -> std::ops::Range<usize> {
        let s = self.beta().end;
        s..s + self.hidden * FIRST_LAYER
    }
    pub fn b2(&self) -> std::ops::Range<usize> {
        let s = self.w2().end;
        s..s + self.hidden
    }
    pub fn w3(&self) -> std::ops::Range<usize> {
        let s = self.b2().end;
        s..s + self.hidden
    }
    pub fn b3(&self) -> usize {
        self.w3().end
    }
    pub fn len(&self) -> usize {
        self.b3() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BnMode {
    /// Normalise with the mini-batch's own statistics.
    Batch,
    /// Normalise with the running statistics.
    Running,
}

/// Network weights and batch-norm running statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct FcnNetwork {
    pub activation: Activation,
    pub loss: Loss,
    pub regularizer: Regularizer,
    pub reg_coefficient: f64,
    pub layout: Layout,
    pub params: Vec<f64>,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
}

/// Intermediate values of one forward pass over a batch.
struct Cache {
    x: Vec<[f64; INPUT_FEATURES]>,
    z1: Vec<f64>,
    xhat: Vec<f64>,
    y: Vec<f64>,
    inv_std: Vec<f64>,
    mean: Vec<f64>,
    var: Vec<f64>,
    z2: Vec<f64>,
    a2: Vec<f64>,
    out: Vec<f64>,
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn xavier(rng: &mut SimRng, fan_in: usize, fan_out: usize, out: &mut [f64]) {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    for w in out {
        *w = (2.0 * rng::unit_f64(rng) - 1.0) * limit;
    }
}

impl FcnNetwork {
    pub fn init(config: &FcnConfig) -> Self {
        let layout = Layout {
            hidden: config.hidden_neurons,
        };
        let mut params = vec![0.0; layout.len()];
        let mut r = rng_from_seed(config.seed);
        xavier(&mut r, INPUT_FEATURES, FIRST_LAYER, &mut params[layout.w1()]);
        for g in &mut params[layout.gamma()] {
            *g = 1.0;
        }
        xavier(&mut r, FIRST_LAYER, layout.hidden, &mut params[layout.w2()]);
        xavier(&mut r, layout.hidden, 1, &mut params[layout.w3()]);
        Self {
            activation: config.activation,
            loss: config.loss,
            regularizer: config.regularizer,
            reg_coefficient: config.l2_coefficient,
            layout,
            params,
            running_mean: vec![0.0; FIRST_LAYER],
            running_var: vec![1.0; FIRST_LAYER],
        }
    }

    pub fn hidden(&self) -> usize {
        self.layout.hidden
    }

    fn forward(&self, x: &[[f64; INPUT_FEATURES]], mode: BnMode) -> Cache {
        let b = x.len();
        let h = self.layout.hidden;
        let p = &self.params;
        let (w1, b1) = (&p[self.layout.w1()], &p[self.layout.b1()]);
        let (gamma, beta) = (&p[self.layout.gamma()], &p[self.layout.beta()]);
        let (w2, b2) = (&p[self.layout.w2()], &p[self.layout.b2()]);
        let (w3, b3) = (&p[self.layout.w3()], p[self.layout.b3()]);

        let mut z1 = vec![0.0; b * FIRST_LAYER];
        for (i, xi) in x.iter().enumerate() {
            for j in 0..FIRST_LAYER {
                let w = &w1[j * INPUT_FEATURES..(j + 1) * INPUT_FEATURES];
                z1[i * FIRST_LAYER + j] = b1[j] + w[0] * xi[0] + w[1] * xi[1] + w[2] * xi[2];
            }
        }
        let a1: Vec<f64> = z1.iter().map(|&v| v.max(0.0)).collect();

        let (mean, var) = match mode {
            BnMode::Batch => {
                let mut mean = vec![0.0; FIRST_LAYER];
                let mut var = vec![0.0; FIRST_LAYER];
                for i in 0..b {
                    for j in 0..FIRST_LAYER {
                        mean[j] += a1[i * FIRST_LAYER + j];
                    }
                }
                mean.iter_mut().for_each(|m| *m /= b as f64);
                for i in 0..b {
                    for j in 0..FIRST_LAYER {
                        var[j] += (a1[i * FIRST_LAYER + j] - mean[j]).powi(2);
                    }
                }
                var.iter_mut().for_each(|v| *v /= b as f64);
                (mean, var)
            }
            BnMode::Running => (self.running_mean.clone(), self.running_var.clone()),
        };
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + BN_EPS).sqrt()).collect();
        let mut xhat = vec![0.0; b * FIRST_LAYER];
        let mut y = vec![0.0; b * FIRST_LAYER];
        for i in 0..b {
            for j in 0..FIRST_LAYER {
                let k = i * FIRST_LAYER + j;
                xhat[k] = (a1[k] - mean[j]) * inv_std[j];
                y[k] = gamma[j] * xhat[k] + beta[j];
            }
        }

        let mut z2 = vec![0.0; b * h];
        for i in 0..b {
            let yi = &y[i * FIRST_LAYER..(i + 1) * FIRST_LAYER];
            for k in 0..h {
                let w = &w2[k * FIRST_LAYER..(k + 1) * FIRST_LAYER];
                z2[i * h + k] = b2[k] + w.iter().zip(yi).map(|(a, c)| a * c).sum::<f64>();
            }
        }
        let a2: Vec<f64> = match self.activation {
            Activation::Sigmoid => z2.iter().map(|&v| sigmoid(v)).collect(),
            Activation::Relu => z2.iter().map(|&v| v.max(0.0)).collect(),
        };
        let out: Vec<f64> = (0..b)
            .map(|i| b3 + w3.iter().zip(&a2[i * h..(i + 1) * h]).map(|(a, c)| a * c).sum::<f64>())
            .collect();
        Cache {
            x: x.to_vec(),
            z1,
            xhat,
            y,
            inv_std,
            mean,
            var,
            z2,
            a2,
            out,
        }
    }

    fn penalty(&self) -> f64 {
        let w2 = &self.params[self.layout.w2()];
        self.reg_coefficient
            * match self.regularizer {
                Regularizer::L2 => w2.iter().map(|w| w * w).sum::<f64>(),
                Regularizer::L1 => w2.iter().map(|w| w.abs()).sum::<f64>(),
            }
    }

    fn data_loss(&self, out: &[f64], t: &[f64]) -> f64 {
        let n = out.len() as f64;
        match self.loss {
            Loss::Mse => out.iter().zip(t).map(|(o, t)| (o - t).powi(2)).sum::<f64>() / n,
            Loss::Mae => out.iter().zip(t).map(|(o, t)| (o - t).abs()).sum::<f64>() / n,
        }
    }

    /// Objective (data loss plus penalty) on scaled inputs and targets.
    pub fn objective(&self, x: &[[f64; INPUT_FEATURES]], t: &[f64], mode: BnMode) -> f64 {
        let c = self.forward(x, mode);
        self.data_loss(&c.out, t) + self.penalty()
    }

    /// Objective and its gradient with respect to every parameter.
    pub fn gradient(&self, x: &[[f64; INPUT_FEATURES]], t: &[f64], mode: BnMode) -> (f64, Vec<f64>) {
        let c = self.forward(x, mode);
        let grad = self.backward(&c, t, mode);
        (self.data_loss(&c.out, t) + self.penalty(), grad)
    }

    fn backward(&self, c: &Cache, t: &[f64], mode: BnMode) -> Vec<f64> {
        let b = c.out.len();
        let bf = b as f64;
        let h = self.layout.hidden;
        let l = self.layout;
        let p = &self.params;
        let mut g = vec![0.0; l.len()];

        let dout: Vec<f64> = c
            .out
            .iter()
            .zip(t)
            .map(|(o, t)| match self.loss {
                Loss::Mse => 2.0 * (o - t) / bf,
                Loss::Mae => (o - t).signum() * if o == t { 0.0 } else { 1.0 } / bf,
            })
            .collect();

        // Output layer.
        let w3 = &p[l.w3()];
        let mut dz2 = vec![0.0; b * h];
        {
            let (gw3_start, gb3) = (l.w3().start, l.b3());
            for i in 0..b {
                g[gb3] += dout[i];
                for k in 0..h {
                    let a = c.a2[i * h + k];
                    g[gw3_start + k] += dout[i] * a;
                    let da = dout[i] * w3[k];
                    dz2[i * h + k] = da
                        * match self.activation {
                            Activation::Sigmoid => a * (1.0 - a),
                            Activation::Relu => {
                                if c.z2[i * h + k] > 0.0 {
                                    1.0
                                } else {
                                    0.0
                                }
                            }
                        };
                }
            }
        }

        // Hidden layer.
        let w2 = &p[l.w2()];
        let mut dy = vec![0.0; b * FIRST_LAYER];
        {
            let (gw2, gb2) = (l.w2().start, l.b2().start);
            for i in 0..b {
                let yi = &c.y[i * FIRST_LAYER..(i + 1) * FIRST_LAYER];
                for k in 0..h {
                    let d = dz2[i * h + k];
                    if d == 0.0 {
                        continue;
                    }
                    g[gb2 + k] += d;
                    let row = gw2 + k * FIRST_LAYER;
                    for j in 0..FIRST_LAYER {
                        g[row + j] += d * yi[j];
                        dy[i * FIRST_LAYER + j] += d * w2[k * FIRST_LAYER + j];
                    }
                }
            }
            for (gi, w) in g[l.w2()].iter_mut().zip(w2) {
                *gi += self.reg_coefficient
                    * match self.regularizer {
                        Regularizer::L2 => 2.0 * w,
                        Regularizer::L1 => w.signum() * if *w == 0.0 { 0.0 } else { 1.0 },
                    };
            }
        }

        // Batch norm.
        let gamma = &p[l.gamma()];
        let mut dxhat = vec![0.0; b * FIRST_LAYER];
        {
            let (gg, gbeta) = (l.gamma().start, l.beta().start);
            for i in 0..b {
                for j in 0..FIRST_LAYER {
                    let k = i * FIRST_LAYER + j;
                    g[gg + j] += dy[k] * c.xhat[k];
                    g[gbeta + j] += dy[k];
                    dxhat[k] = dy[k] * gamma[j];
                }
            }
        }
        let mut da1 = vec![0.0; b * FIRST_LAYER];
        match mode {
            BnMode::Running => {
                for i in 0..b {
                    for j in 0..FIRST_LAYER {
                        da1[i * FIRST_LAYER + j] = dxhat[i * FIRST_LAYER + j] * c.inv_std[j];
                    }
                }
            }
            BnMode::Batch => {
                for j in 0..FIRST_LAYER {
                    let (mut s1, mut s2) = (0.0, 0.0);
                    for i in 0..b {
                        let k = i * FIRST_LAYER + j;
                        s1 += dxhat[k];
                        s2 += dxhat[k] * c.xhat[k];
                    }
                    for i in 0..b {
                        let k = i * FIRST_LAYER + j;
                        da1[k] = c.inv_std[j] / bf * (bf * dxhat[k] - s1 - c.xhat[k] * s2);
                    }
                }
            }
        }

        // First layer (ReLU).
        let (gw1, gb1) = (l.w1().start, l.b1().start);
        for i in 0..b {
            for j in 0..FIRST_LAYER {
                let k = i * FIRST_LAYER + j;
                if c.z1[k] <= 0.0 {
                    continue;
                }
                let d = da1[k];
                g[gb1 + j] += d;
                for f in 0..INPUT_FEATURES {
                    g[gw1 + j * INPUT_FEATURES + f] += d * c.x[i][f];
                }
            }
        }
        g
    }

    fn update_running(&mut self, c: &Cache) {
        for j in 0..FIRST_LAYER {
            self.running_mean[j] = BN_MOMENTUM * self.running_mean[j] + (1.0 - BN_MOMENTUM) * c.mean[j];
            self.running_var[j] = BN_MOMENTUM * self.running_var[j] + (1.0 - BN_MOMENTUM) * c.var[j];
        }
    }

    /// Replaces the running statistics with the batch statistics of `x`.
    pub fn set_population_stats(&mut self, x: &[[f64; INPUT_FEATURES]]) {
        let c = self.forward(x, BnMode::Batch);
        self.running_mean = c.mean;
        self.running_var = c.var;
    }

    /// Inference-mode output (scaled units) for standardised inputs.
    pub fn predict_scaled(&self, x: &[[f64; INPUT_FEATURES]]) -> Vec<f64> {
        self.forward(x, BnMode::Running).out
    }
}

/// Adam with the usual bias correction.
#[derive(Debug, Clone)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    step: i32,
}

impl Adam {
    pub fn new(n: usize, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: vec![0.0; n],
            v: vec![0.0; n],
            step: 0,
        }
    }

    pub fn update(&mut self, params: &mut [f64], grad: &[f64]) {
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step);
        let c2 = 1.0 - self.beta2.powi(self.step);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let mh = self.m[i] / c1;
            let vh = self.v[i] / c2;
            params[i] -= self.lr * mh / (vh.sqrt() + self.eps);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FcnModel {
    pub config: FcnConfig,
    pub standardizer: Standardizer,
    pub network: FcnNetwork,
    /// Mean mini-batch objective per epoch.
    pub loss_history: Vec<f64>,
}

impl FcnModel {
    pub fn predict_many(&self, xs: &[FeatureVector]) -> Vec<f64> {
        let z: Vec<[f64; INPUT_FEATURES]> = xs.iter().map(|x| self.standardizer.apply(x)).collect();
        self.network
            .predict_scaled(&z)
            .into_iter()
            .map(|o| o * TARGET_SCALE)
            .collect()
    }
}

/// Trains a fresh network; deterministic in `config.seed`.
pub fn train_fcn(set: &TrainingSet, config: &FcnConfig) -> Result<FcnModel> {
    train_fcn_observed(set, config, |_, _, _| {})
}

/// [`train_fcn`] with a callback after every epoch, given the epoch index,
/// the network and the input standardiser.
pub fn train_fcn_observed(
    set: &TrainingSet,
    config: &FcnConfig,
    mut on_epoch: impl FnMut(usize, &FcnNetwork, &Standardizer),
) -> Result<FcnModel> {
    config.validate()?;
    if set.len() < config.batch_size {
        return Err(Error::Training(format!(
            "{} rows is fewer than one batch of {}",
            set.len(),
            config.batch_size
        )));
    }
    let c0 = set.rows[0].0.cache_gb;
    if set.rows.iter().all(|(x, _)| x.cache_gb == c0) {
        return Err(Error::Training(
            "cache size has zero variance in the training set".into(),
        ));
    }
    let standardizer = set.standardizer(SIZE_TRANSFORM);
    let xs: Vec<[f64; INPUT_FEATURES]> = set.rows.iter().map(|(x, _)| standardizer.apply(x)).collect();
    let ts: Vec<f64> = set.rows.iter().map(|(_, t)| t / TARGET_SCALE).collect();

    let mut net = FcnNetwork::init(config);
    let mut adam = Adam::new(net.params.len(), config.learning_rate);
    let mut order: Vec<usize> = (0..xs.len()).collect();
    let mut shuffle_rng = rng_from_seed(crate::rng::derive_seed(config.seed, 1));
    let mut history = Vec::with_capacity(config.epochs);
    let mut bx = Vec::with_capacity(config.batch_size);
    let mut bt = Vec::with_capacity(config.batch_size);

    for epoch in 0..config.epochs {
        rng::shuffle(&mut shuffle_rng, &mut order);
        let (mut total, mut batches) = (0.0, 0usize);
        for chunk in order.chunks(config.batch_size) {
            // A single-row batch has no batch statistics.
            if chunk.len() < 2 {
                continue;
            }
            bx.clear();
            bt.clear();
            bx.extend(chunk.iter().map(|&i| xs[i]));
            bt.extend(chunk.iter().map(|&i| ts[i]));
            let cache = net.forward(&bx, BnMode::Batch);
            let grad = net.backward(&cache, &bt, BnMode::Batch);
            total += net.data_loss(&cache.out, &bt) + net.penalty();
            batches += 1;
            net.update_running(&cache);
            adam.update(&mut net.params, &grad);
        }
        let epoch_loss = total / batches.max(1) as f64;
        if !epoch_loss.is_finite() {
            return Err(Error::Training("loss diverged".into()));
        }
        history.push(epoch_loss);
        on_epoch(epoch, &net, &standardizer);
    }
    Ok(FcnModel {
        config: *config,
        standardizer,
        network: net,
        loss_history: history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    fn toy_set(n: usize, f: impl Fn(f64, f64, f64) -> f64) -> TrainingSet {
        let mut r = rng_from_seed(5);
        let rows = (0..n)
            .map(|_| {
                let x = FeatureVector {
                    data_gb: 1.0 + 8.0 * rng::unit_f64(&mut r),
                    cache_gb: 0.1 + 3.9 * rng::unit_f64(&mut r),
                    param: 0.5 + 2.5 * rng::unit_f64(&mut r),
                };
                let t = f(x.data_gb, x.cache_gb, x.param);
                (x, t)
            })
            .collect();
        TrainingSet::new(Family::Zipf, rows).unwrap()
    }

    fn quick_config() -> FcnConfig {
        FcnConfig {
            epochs: 500,
            ..FcnConfig::tuned(Family::Zipf)
        }
    }

    /// Relative error of analytic against central-difference gradients on
    /// ten sampled weights per block.
    fn grad_check(net: &FcnNetwork, mode: BnMode) -> f64 {
        let mut r = rng_from_seed(99);
        let x: Vec<[f64; 3]> = (0..12)
            .map(|_| [0, 1, 2].map(|_| 2.0 * rng::unit_f64(&mut r) - 1.0))
            .collect();
        let t: Vec<f64> = (0..12).map(|_| rng::unit_f64(&mut r)).collect();
        let (_, g) = net.gradient(&x, &t, mode);
        let l = net.layout;
        let blocks = [
            l.w1(),
            l.b1(),
            l.gamma(),
            l.beta(),
            l.w2(),
            l.b2(),
            l.w3(),
            l.b3()..l.b3() + 1,
        ];
        let h = 1e-4;
        let mut worst: f64 = 0.0;
        for block in blocks {
            for _ in 0..10 {
                let i = block.start + rng::below(&mut r, block.len() as u64) as usize;
                let mut plus = net.clone();
                plus.params[i] += h;
                let mut minus = net.clone();
                minus.params[i] -= h;
                let num = (plus.objective(&x, &t, mode) - minus.objective(&x, &t, mode)) / (2.0 * h);
                let denom = g[i].abs().max(num.abs()).max(1e-7);
                worst = worst.max((g[i] - num).abs() / denom);
            }
        }
        worst
    }

    fn perturbed_net(cfg: &FcnConfig) -> FcnNetwork {
        let mut net = FcnNetwork::init(cfg);
        let mut r = rng_from_seed(3);
        for p in net.params.iter_mut() {
            *p += 0.1 * (2.0 * rng::unit_f64(&mut r) - 1.0);
        }
        for (m, v) in net.running_mean.iter_mut().zip(net.running_var.iter_mut()) {
            *m = 0.3 * rng::unit_f64(&mut r);
            *v = 0.5 + rng::unit_f64(&mut r);
        }
        net
    }

    #[test]
    fn gradients_match_finite_differences() {
        for act in [Activation::Sigmoid, Activation::Relu] {
            for reg in [Regularizer::L2, Regularizer::L1] {
                let cfg = FcnConfig {
                    activation: act,
                    regularizer: reg,
                    loss: Loss::Mse,
                    l2_coefficient: 1e-2,
                    ..FcnConfig::tuned(Family::Gaussian)
                };
                let net = perturbed_net(&cfg);
                let e = grad_check(&net, BnMode::Running);
                assert!(e <= 1e-3, "{act:?}/{reg:?} running-stats rel err {e}");
                let e = grad_check(&net, BnMode::Batch);
                assert!(e <= 1e-3, "{act:?}/{reg:?} batch-stats rel err {e}");
            }
        }
    }

    #[test]
    fn loss_decreases_and_training_is_deterministic() {
        let set = toy_set(300, |d, c, _| 100.0 * (c / d).min(1.0));
        let cfg = quick_config();
        let a = train_fcn(&set, &cfg).unwrap();
        assert!(a.loss_history.last().unwrap() <= &a.loss_history[0]);
        let b = train_fcn(&set, &cfg).unwrap();
        assert_eq!(a.network.params, b.network.params);
        assert_eq!(a.network.running_var, b.network.running_var);
    }

    #[test]
    fn constant_target_learned() {
        let set = toy_set(150, |_, _, _| 50.0);
        let m = train_fcn(&set, &FcnConfig::tuned(Family::Uniform)).unwrap();
        let xs: Vec<FeatureVector> = set.rows.iter().map(|r| r.0).collect();
        for p in m.predict_many(&xs) {
            assert!((p - 50.0).abs() <= 1.0, "{p}");
        }
    }

    #[test]
    fn config_and_data_errors() {
        let set = toy_set(10, |_, _, _| 1.0);
        assert!(matches!(train_fcn(&set, &quick_config()), Err(Error::Training(_))));
        let bad = FcnConfig {
            hidden_neurons: 17,
            ..quick_config()
        };
        assert!(train_fcn(&toy_set(100, |_, _, _| 1.0), &bad).is_err());
        let rows = (0..40)
            .map(|i| {
                (
                    FeatureVector {
                        data_gb: 1.0 + i as f64,
                        cache_gb: 1.0,
                        param: 0.0,
                    },
                    10.0,
                )
            })
            .collect();
        let flat = TrainingSet::new(Family::Uniform, rows).unwrap();
        assert!(matches!(train_fcn(&flat, &quick_config()), Err(Error::Training(_))));
    }
}
