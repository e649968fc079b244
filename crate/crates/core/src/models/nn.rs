//! Small dense network: hidden blocks of Dense → BatchNorm → ReLU →
//! Dropout, then a softmax output layer, trained with Adam on cross
//! entropy.
//!
//! The exported [`NnModel`] keeps the batch-norm moving statistics and
//! applies them at inference; the int8 path folds them into the dense
//! layers. Predictions below the confidence threshold map to `Uncertain`.

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::tensor::{Tensor, TensorMap};
use super::{
    argmax, check_dim, check_training, gesture, softmax, Classifier, Footprint, ModelKind, OpCount,
    Prediction,
};
use crate::error::{Error, Result};
use crate::seed;
use crate::signal::GestureClass;

const C: usize = GestureClass::N_GESTURES;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NnConfig {
    pub hidden: Vec<usize>,
    pub dropout: f64,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_epsilon: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub bn_momentum: f64,
    pub bn_epsilon: f64,
    pub confidence_threshold: f64,
    pub seed: u64,
}

impl Default for NnConfig {
    fn default() -> Self {
        Self {
            hidden: vec![16, 16, 8, 4],
            dropout: 0.1,
            learning_rate: 0.0015,
            beta1: 0.9,
            beta2: 0.999,
            adam_epsilon: 1e-7,
            epochs: 10,
            batch_size: 32,
            bn_momentum: 0.99,
            bn_epsilon: 1e-3,
            confidence_threshold: 0.6,
            seed: 0,
        }
    }
}

/// Row-major `out × inp` weights.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    pub inp: usize,
    pub out: usize,
    pub w: Vec<f64>,
    pub b: Vec<f64>,
}

impl Dense {
    fn zeros(inp: usize, out: usize) -> Self {
        Self {
            inp,
            out,
            w: vec![0.0; inp * out],
            b: vec![0.0; out],
        }
    }

    pub fn apply(&self, a: &[f64]) -> Vec<f64> {
        (0..self.out)
            .map(|o| {
                self.b[o]
                    + self.w[o * self.inp..(o + 1) * self.inp]
                        .iter()
                        .zip(a)
                        .map(|(w, x)| w * x)
                        .sum::<f64>()
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BatchNorm {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
    pub moving_mean: Vec<f64>,
    pub moving_var: Vec<f64>,
}

impl BatchNorm {
    fn new(n: usize) -> Self {
        Self {
            gamma: vec![1.0; n],
            beta: vec![0.0; n],
            moving_mean: vec![0.0; n],
            moving_var: vec![1.0; n],
        }
    }
}

/// Training-time network. Also used as the gradient container, where the
/// moving statistics stay unused.
#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    pub hidden: Vec<(Dense, BatchNorm)>,
    pub output: Dense,
    pub bn_epsilon: f64,
}

impl Network {
    pub fn new(input: usize, hidden: &[usize], classes: usize, bn_epsilon: f64) -> Self {
        let mut inp = input;
        let hidden = hidden
            .iter()
            .map(|&h| {
                let l = (Dense::zeros(inp, h), BatchNorm::new(h));
                inp = h;
                l
            })
            .collect();
        Self {
            hidden,
            output: Dense::zeros(inp, classes),
            bn_epsilon,
        }
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init(&mut self, rng: &mut seed::Rng) {
        let mut glorot = |d: &mut Dense| {
            let limit = (6.0 / (d.inp + d.out) as f64).sqrt();
            d.w.iter_mut()
                .for_each(|w| *w = rng.random_range(-limit..limit));
        };
        for (d, _) in &mut self.hidden {
            glorot(d);
        }
        glorot(&mut self.output);
    }

    /// Trainable parameter blocks in a fixed order.
    pub fn trainable_mut(&mut self) -> Vec<&mut Vec<f64>> {
        let mut out = Vec::new();
        for (d, bn) in &mut self.hidden {
            out.push(&mut d.w);
            out.push(&mut d.b);
            out.push(&mut bn.gamma);
            out.push(&mut bn.beta);
        }
        out.push(&mut self.output.w);
        out.push(&mut self.output.b);
        out
    }

    pub fn trainable(&self) -> Vec<&Vec<f64>> {
        let mut out = Vec::new();
        for (d, bn) in &self.hidden {
            out.extend([&d.w, &d.b, &bn.gamma, &bn.beta]);
        }
        out.extend([&self.output.w, &self.output.b]);
        out
    }

    fn zeros_like(&self) -> Self {
        let mut g = self.clone();
        for b in g.trainable_mut() {
            b.iter_mut().for_each(|v| *v = 0.0);
        }
        g
    }
}

/// Per-layer batch statistics from a training-mode forward pass.
pub struct BatchStats {
    pub mean: Vec<Vec<f64>>,
    pub var: Vec<Vec<f64>>,
}

/// Training-mode forward and backward pass over one batch: batch-norm on
/// batch statistics, inverted dropout with `dropout` rate when `rng` is
/// given. Returns mean cross entropy and gradients.
pub fn forward_backward(
    net: &Network,
    x: &[&[f64]],
    y: &[usize],
    dropout: f64,
    mut rng: Option<&mut seed::Rng>,
) -> (f64, Network, BatchStats) {
    let n = x.len();
    let nf = n as f64;
    let mut acts: Vec<Vec<Vec<f64>>> = vec![x.iter().map(|r| r.to_vec()).collect()];
    struct Cache {
        xhat: Vec<Vec<f64>>,
        bn_out: Vec<Vec<f64>>,
        mask: Vec<Vec<f64>>,
        inv_std: Vec<f64>,
    }
    let mut caches = Vec::with_capacity(net.hidden.len());
    let mut stats = BatchStats {
        mean: vec![],
        var: vec![],
    };
    for (dense, bn) in &net.hidden {
        let a = acts.last().expect("input");
        let h: Vec<Vec<f64>> = a.iter().map(|r| dense.apply(r)).collect();
        let u = dense.out;
        let mut mean = vec![0.0; u];
        let mut var = vec![0.0; u];
        for r in &h {
            for j in 0..u {
                mean[j] += r[j] / nf;
            }
        }
        for r in &h {
            for j in 0..u {
                var[j] += (r[j] - mean[j]).powi(2) / nf;
            }
        }
        let inv_std: Vec<f64> = var
            .iter()
            .map(|v| 1.0 / (v + net.bn_epsilon).sqrt())
            .collect();
        let xhat: Vec<Vec<f64>> = h
            .iter()
            .map(|r| (0..u).map(|j| (r[j] - mean[j]) * inv_std[j]).collect())
            .collect();
        let bn_out: Vec<Vec<f64>> = xhat
            .iter()
            .map(|r| (0..u).map(|j| bn.gamma[j] * r[j] + bn.beta[j]).collect())
            .collect();
        let keep = 1.0 - dropout;
        let mask: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                (0..u)
                    .map(|_| match rng.as_deref_mut() {
                        Some(r) if dropout > 0.0 => {
                            if r.random::<f64>() < dropout {
                                0.0
                            } else {
                                1.0 / keep
                            }
                        }
                        _ => 1.0,
                    })
                    .collect()
            })
            .collect();
        let out: Vec<Vec<f64>> = bn_out
            .iter()
            .zip(&mask)
            .map(|(r, m)| r.iter().zip(m).map(|(v, k)| v.max(0.0) * k).collect())
            .collect();
        caches.push(Cache {
            xhat,
            bn_out,
            mask,
            inv_std,
        });
        stats.mean.push(mean);
        stats.var.push(var);
        acts.push(out);
    }
    let last = acts.last().expect("input");
    let mut loss = 0.0;
    let mut dlogits = Vec::with_capacity(n);
    for (a, &yi) in last.iter().zip(y) {
        let p = softmax(&net.output.apply(a));
        loss -= p[yi].max(f64::MIN_POSITIVE).ln() / nf;
        let mut d: Vec<f64> = p.iter().map(|v| v / nf).collect();
        d[yi] -= 1.0 / nf;
        dlogits.push(d);
    }

    let mut g = net.zeros_like();
    let mut delta = dense_backward(&net.output, &mut g.output, last, &dlogits);
    for l in (0..net.hidden.len()).rev() {
        let (dense, bn) = &net.hidden[l];
        let cache = &caches[l];
        let u = dense.out;
        // through dropout and ReLU
        let dbn: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                (0..u)
                    .map(|j| {
                        if cache.bn_out[i][j] > 0.0 {
                            delta[i][j] * cache.mask[i][j]
                        } else {
                            0.0
                        }
                    })
                    .collect()
            })
            .collect();
        let gbn = &mut g.hidden[l].1;
        let mut sum_dxhat = vec![0.0; u];
        let mut sum_dxhat_xhat = vec![0.0; u];
        for i in 0..n {
            for j in 0..u {
                gbn.gamma[j] += dbn[i][j] * cache.xhat[i][j];
                gbn.beta[j] += dbn[i][j];
                let dxh = dbn[i][j] * bn.gamma[j];
                sum_dxhat[j] += dxh;
                sum_dxhat_xhat[j] += dxh * cache.xhat[i][j];
            }
        }
        let dh: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                (0..u)
                    .map(|j| {
                        let dxh = dbn[i][j] * bn.gamma[j];
                        cache.inv_std[j] / nf
                            * (nf * dxh - sum_dxhat[j] - cache.xhat[i][j] * sum_dxhat_xhat[j])
                    })
                    .collect()
            })
            .collect();
        delta = dense_backward(dense, &mut g.hidden[l].0, &acts[l], &dh);
    }
    (loss, g, stats)
}

/// Accumulates weight and bias gradients; returns the input gradient.
fn dense_backward(
    d: &Dense,
    g: &mut Dense,
    input: &[Vec<f64>],
    dout: &[Vec<f64>],
) -> Vec<Vec<f64>> {
    let mut din = vec![vec![0.0; d.inp]; input.len()];
    for ((a, go), di) in input.iter().zip(dout).zip(din.iter_mut()) {
        for o in 0..d.out {
            g.b[o] += go[o];
            let row = o * d.inp;
            for k in 0..d.inp {
                g.w[row + k] += go[o] * a[k];
                di[k] += go[o] * d.w[row + k];
            }
        }
    }
    din
}

/// Mean cross entropy and gradients in training mode without dropout.
pub fn loss_and_grad(net: &Network, x: &[&[f64]], y: &[usize]) -> (f64, Network) {
    let (l, g, _) = forward_backward(net, x, y, 0.0, None);
    (l, g)
}

struct Adam {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: i32,
}

impl Adam {
    fn step(&mut self, net: &mut Network, g: &Network, cfg: &NnConfig) {
        self.t += 1;
        let lr = cfg.learning_rate * (1.0 - cfg.beta2.powi(self.t)).sqrt()
            / (1.0 - cfg.beta1.powi(self.t));
        for (((p, gb), m), v) in net
            .trainable_mut()
            .into_iter()
            .zip(g.trainable())
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            for i in 0..p.len() {
                m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gb[i];
                v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gb[i] * gb[i];
                p[i] -= lr * m[i] / (v[i].sqrt() + cfg.adam_epsilon);
            }
        }
    }
}

/// Trains the batch-norm network and returns it unfolded.
pub fn nn_train_network(x: &[Vec<f64>], y: &[usize], cfg: &NnConfig) -> Result<Network> {
    let dim = check_training(x, y)?;
    if cfg.hidden.iter().any(|&h| h == 0)
        || cfg.batch_size == 0
        || !(0.0..1.0).contains(&cfg.dropout)
        || !(0.0..=1.0).contains(&cfg.confidence_threshold)
    {
        return Err(Error::InvalidInput(format!("network config {cfg:?}")));
    }
    let mut net = Network::new(dim, &cfg.hidden, C, cfg.bn_epsilon);
    net.init(&mut seed::sub_rng(cfg.seed, "nn-init", 0));
    let mut adam = Adam {
        m: net.trainable().iter().map(|b| vec![0.0; b.len()]).collect(),
        v: net.trainable().iter().map(|b| vec![0.0; b.len()]).collect(),
        t: 0,
    };
    let mut order: Vec<usize> = (0..x.len()).collect();
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut seed::sub_rng(cfg.seed, "nn-epoch", epoch as u64));
        let mut drop_rng = seed::sub_rng(cfg.seed, "nn-dropout", epoch as u64);
        for batch in order.chunks(cfg.batch_size) {
            let bx: Vec<&[f64]> = batch.iter().map(|&i| x[i].as_slice()).collect();
            let by: Vec<usize> = batch.iter().map(|&i| y[i]).collect();
            let (loss, g, stats) =
                forward_backward(&net, &bx, &by, cfg.dropout, Some(&mut drop_rng));
            if !loss.is_finite() {
                return Err(Error::DivergedTraining { epoch });
            }
            adam.step(&mut net, &g, cfg);
            let mom = cfg.bn_momentum;
            for ((_, bn), (mean, var)) in
                net.hidden.iter_mut().zip(stats.mean.iter().zip(&stats.var))
            {
                for j in 0..mean.len() {
                    bn.moving_mean[j] = mom * bn.moving_mean[j] + (1.0 - mom) * mean[j];
                    bn.moving_var[j] = mom * bn.moving_var[j] + (1.0 - mom) * var[j];
                }
            }
        }
        if net
            .trainable()
            .iter()
            .any(|b| b.iter().any(|v| !v.is_finite()))
        {
            return Err(Error::DivergedTraining { epoch });
        }
    }
    Ok(net)
}

/// Inference network: dense layers with batch norm in inference mode
/// (moving statistics). Parameter values are exactly representable in
/// f32.
#[derive(Clone, Debug, PartialEq)]
pub struct NnModel {
    pub config: NnConfig,
    pub net: Network,
}

impl NnModel {
    /// Rounds a trained network to storage precision.
    pub fn from_network(net: &Network, config: &NnConfig) -> Self {
        let mut net = net.clone();
        let r = |v: &mut Vec<f64>| v.iter_mut().for_each(|x| *x = f64::from(*x as f32));
        for (d, bn) in &mut net.hidden {
            r(&mut d.w);
            r(&mut d.b);
            r(&mut bn.gamma);
            r(&mut bn.beta);
            r(&mut bn.moving_mean);
            r(&mut bn.moving_var);
        }
        r(&mut net.output.w);
        r(&mut net.output.b);
        net.bn_epsilon = config.bn_epsilon;
        Self {
            config: config.clone(),
            net,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.net
            .hidden
            .first()
            .map_or(self.net.output.inp, |(d, _)| d.inp)
    }

    /// Dense weights and biases only.
    pub fn dense_param_count(&self) -> usize {
        self.net
            .hidden
            .iter()
            .map(|(d, _)| d.w.len() + d.b.len())
            .sum::<usize>()
            + self.net.output.w.len()
            + self.net.output.b.len()
    }

    /// Dense parameters plus four batch-norm values per hidden unit.
    pub fn param_count(&self) -> usize {
        self.dense_param_count()
            + self
                .net
                .hidden
                .iter()
                .map(|(d, _)| 4 * d.out)
                .sum::<usize>()
    }

    /// Dense layers with each batch norm folded in, in f64.
    pub fn folded(&self) -> Vec<Dense> {
        let eps = self.net.bn_epsilon;
        let mut layers: Vec<Dense> = self
            .net
            .hidden
            .iter()
            .map(|(d, bn)| {
                let mut out = d.clone();
                for o in 0..d.out {
                    let k = bn.gamma[o] / (bn.moving_var[o] + eps).sqrt();
                    for w in &mut out.w[o * d.inp..(o + 1) * d.inp] {
                        *w *= k;
                    }
                    out.b[o] = (d.b[o] - bn.moving_mean[o]) * k + bn.beta[o];
                }
                out
            })
            .collect();
        layers.push(self.net.output.clone());
        layers
    }

    pub fn logits(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.input_dim(), v)?;
        let eps = self.net.bn_epsilon;
        let mut a = v.to_vec();
        for (d, bn) in &self.net.hidden {
            a = d.apply(&a);
            for (j, x) in a.iter_mut().enumerate() {
                let n = bn.gamma[j] * (*x - bn.moving_mean[j]) / (bn.moving_var[j] + eps).sqrt()
                    + bn.beta[j];
                *x = n.max(0.0);
            }
        }
        Ok(self.net.output.apply(&a))
    }

    pub fn probabilities(&self, v: &[f64]) -> Result<Vec<f64>> {
        Ok(softmax(&self.logits(v)?))
    }

    pub fn from_tensors(config: NnConfig, m: &TensorMap) -> Result<Self> {
        let read = |name: &str| -> Result<Vec<f64>> {
            Ok(m.f32(name)?.iter().map(|&v| f64::from(v)).collect())
        };
        let dense = |name: &str| -> Result<Dense> {
            let (out, inp) = match m.shape(&format!("{name}.w"))? {
                [o, n] => (*o, *n),
                s => return Err(Error::Format(format!("{name}.w shape {s:?}"))),
            };
            let b = read(&format!("{name}.b"))?;
            if b.len() != out {
                return Err(Error::Format(format!(
                    "{name}.b has {} values, expected {out}",
                    b.len()
                )));
            }
            Ok(Dense {
                inp,
                out,
                w: read(&format!("{name}.w"))?,
                b,
            })
        };
        let mut hidden = Vec::new();
        for i in 0.. {
            let name = format!("hidden{i}");
            if !m.0.contains_key(&format!("{name}.w")) {
                break;
            }
            let d = dense(&name)?;
            let bn = BatchNorm {
                gamma: read(&format!("{name}.bn_gamma"))?,
                beta: read(&format!("{name}.bn_beta"))?,
                moving_mean: read(&format!("{name}.bn_mean"))?,
                moving_var: read(&format!("{name}.bn_var"))?,
            };
            if [&bn.gamma, &bn.beta, &bn.moving_mean, &bn.moving_var]
                .iter()
                .any(|v| v.len() != d.out)
            {
                return Err(Error::Format(format!("{name} batch-norm width")));
            }
            hidden.push((d, bn));
        }
        let output = dense("output")?;
        let mut inp = hidden
            .first()
            .map_or(output.inp, |(d, _): &(Dense, BatchNorm)| d.inp);
        for d in hidden.iter().map(|(d, _)| d).chain([&output]) {
            if d.inp != inp {
                return Err(Error::Format("layer widths do not chain".into()));
            }
            inp = d.out;
        }
        if output.out != C {
            return Err(Error::Format("network must end in a class layer".into()));
        }
        Ok(Self {
            net: Network {
                hidden,
                output,
                bn_epsilon: config.bn_epsilon,
            },
            config,
        })
    }
}

pub fn nn_train(x: &[Vec<f64>], y: &[usize], cfg: &NnConfig) -> Result<NnModel> {
    let net = nn_train_network(x, y, cfg)?;
    Ok(NnModel::from_network(&net, cfg))
}

/// Arg-max class when the top probability reaches `threshold`, otherwise
/// `Uncertain`. The score is the top probability either way.
pub fn decide(probs: &[f64], threshold: f64) -> Prediction {
    let best = argmax(probs);
    let p = probs[best];
    Prediction {
        class: if p >= threshold {
            gesture(best)
        } else {
            GestureClass::Uncertain
        },
        score: p,
    }
}

pub fn nn_predict(model: &NnModel, v: &[f64]) -> Result<Prediction> {
    Ok(decide(
        &model.probabilities(v)?,
        model.config.confidence_threshold,
    ))
}

/// Dense layer ops: a MAC per weight plus a bias add per unit.
pub(crate) fn dense_ops(layers: &[(usize, usize)]) -> u64 {
    layers.iter().map(|&(i, o)| (2 * i * o + o) as u64).sum()
}

/// Softmax over the classes (max, exp, sum, divide) and threshold test.
pub(crate) const SOFTMAX_OPS: u64 = (2 * C + C + C + C + 1) as u64;

impl Classifier for NnModel {
    fn kind(&self) -> ModelKind {
        ModelKind::Nn
    }

    fn input_dim(&self) -> usize {
        NnModel::input_dim(self)
    }

    fn predict(&self, v: &[f64]) -> Result<Prediction> {
        nn_predict(self, v)
    }

    fn footprint(&self) -> Footprint {
        let widest = self
            .net
            .hidden
            .iter()
            .map(|(d, _)| d)
            .chain([&self.net.output])
            .map(|l| l.inp + l.out)
            .max()
            .unwrap_or(0);
        Footprint {
            flash_bytes: self.tensors().byte_len() as u64,
            ram_bytes: (widest * 4) as u64,
        }
    }

    /// Dense layers; per hidden unit the normalization (subtract, add,
    /// square root, divide, scale, shift) and the ReLU compare; softmax.
    fn op_count(&self) -> OpCount {
        let shapes: Vec<(usize, usize)> = self
            .net
            .hidden
            .iter()
            .map(|(d, _)| (d.inp, d.out))
            .chain([(self.net.output.inp, self.net.output.out)])
            .collect();
        let units: usize = self.net.hidden.iter().map(|(d, _)| d.out).sum();
        OpCount(dense_ops(&shapes) + 7 * units as u64 + SOFTMAX_OPS)
    }

    fn tensors(&self) -> TensorMap {
        let f = |v: &[f64]| v.iter().map(|&x| x as f32).collect::<Vec<f32>>();
        let mut m = TensorMap::default();
        for (i, (d, bn)) in self.net.hidden.iter().enumerate() {
            let n = format!("hidden{i}");
            m.insert(format!("{n}.w"), Tensor::f32(vec![d.out, d.inp], f(&d.w)));
            m.insert(format!("{n}.b"), Tensor::f32(vec![d.out], f(&d.b)));
            m.insert(
                format!("{n}.bn_gamma"),
                Tensor::f32(vec![d.out], f(&bn.gamma)),
            );
            m.insert(
                format!("{n}.bn_beta"),
                Tensor::f32(vec![d.out], f(&bn.beta)),
            );
            m.insert(
                format!("{n}.bn_mean"),
                Tensor::f32(vec![d.out], f(&bn.moving_mean)),
            );
            m.insert(
                format!("{n}.bn_var"),
                Tensor::f32(vec![d.out], f(&bn.moving_var)),
            );
        }
        let o = &self.net.output;
        m.insert("output.w", Tensor::f32(vec![o.out, o.inp], f(&o.w)));
        m.insert("output.b", Tensor::f32(vec![o.out], f(&o.b)));
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_model(bias: [f64; 3]) -> NnModel {
        let mut net = Network::new(2, &[], 3, 1e-3);
        net.output.b = bias.to_vec();
        NnModel::from_network(&net, &NnConfig::default())
    }

    #[test]
    fn default_network_parameter_count() {
        let net = Network::new(20, &NnConfig::default().hidden, 3, 1e-3);
        let m = NnModel::from_network(&net, &NnConfig::default());
        // closed form over the layer widths
        let widths = [20usize, 16, 16, 8, 4, 3];
        let dense: usize = widths.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
        assert_eq!(dense, 795);
        assert_eq!(m.dense_param_count(), dense);
        assert_eq!(m.param_count(), dense + 4 * (16 + 16 + 8 + 4));
        assert_eq!(m.tensors().byte_len(), 4 * m.param_count());
        assert_eq!(m.footprint(), m.footprint());
    }

    #[test]
    fn threshold_boundary() {
        let p = |top: f64| [top, (1.0 - top) / 2.0, (1.0 - top) / 2.0];
        assert_eq!(decide(&p(0.6), 0.6).class, GestureClass::O);
        assert_eq!(decide(&p(0.6 + 1e-9), 0.6).class, GestureClass::O);
        assert_eq!(decide(&p(0.6 - 1e-9), 0.6).class, GestureClass::Uncertain);
    }

    #[test]
    fn constructed_logits_cross_the_threshold() {
        // softmax(ln p) = p for probabilities summing to one
        let uncertain = toy_model([0.59f64.ln(), 0.205f64.ln(), 0.205f64.ln()]);
        let p = nn_predict(&uncertain, &[0.3, -0.1]).unwrap();
        assert_eq!(p.class, GestureClass::Uncertain);
        assert!((p.score - 0.59).abs() < 1e-6);
        let sure = toy_model([0.195f64.ln(), 0.61f64.ln(), 0.195f64.ln()]);
        assert_eq!(
            nn_predict(&sure, &[0.3, -0.1]).unwrap().class,
            GestureClass::X
        );
    }

    #[test]
    fn probabilities_sum_to_one() {
        let mut net = Network::new(5, &[4, 3], 3, 1e-3);
        net.init(&mut seed::rng(4));
        let m = NnModel::from_network(&net, &NnConfig::default());
        let mut rng = seed::rng(5);
        for _ in 0..100 {
            let v: Vec<f64> = (0..5).map(|_| rng.random_range(-5.0..5.0)).collect();
            let s: f64 = m.probabilities(&v).unwrap().iter().sum();
            assert!((s - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn folding_matches_inference_mode_network() {
        let mut net = Network::new(3, &[4], 3, 1e-3);
        net.init(&mut seed::rng(6));
        let (d, bn) = &mut net.hidden[0];
        d.b = vec![0.1, -0.2, 0.3, 0.0];
        bn.gamma = vec![1.5, 0.5, 1.0, 2.0];
        bn.beta = vec![0.1, 0.2, -0.3, 0.0];
        bn.moving_mean = vec![0.5, -0.5, 0.0, 1.0];
        bn.moving_var = vec![2.0, 0.5, 1.0, 4.0];
        let m = NnModel::from_network(&net, &NnConfig::default());
        let folded = m.folded();
        let x = [0.7, -1.2, 0.4];
        let mut a = folded[0].apply(&x);
        a.iter_mut().for_each(|v| *v = v.max(0.0));
        let via_fold = folded[1].apply(&a);
        let h = net.hidden[0].0.apply(&x);
        let bn = &net.hidden[0].1;
        let a: Vec<f64> = (0..4)
            .map(|j| {
                (bn.gamma[j] * (h[j] - bn.moving_mean[j]) / (bn.moving_var[j] + 1e-3).sqrt()
                    + bn.beta[j])
                    .max(0.0)
            })
            .collect();
        let want = net.output.apply(&a);
        let got = m.logits(&x).unwrap();
        for ((g, w), f) in got.iter().zip(&want).zip(&via_fold) {
            assert!((g - w).abs() < 1e-5);
            assert!((f - g).abs() < 1e-12);
        }
    }
}
