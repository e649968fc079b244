//! Shallow tree in a learned low-dimensional projection.
//!
//! With `ẑ = Z x`, node `k` contributes `(W_k ẑ) ∘ tanh(σ V_k ẑ)` weighted
//! by its path indicator. Nodes are heap ordered (children of `k` are
//! `2k + 1` left and `2k + 2` right); an internal node routes right when
//! `θ_k · ẑ > 0`. Training uses soft indicators `sigmoid(β θ_k · ẑ)` with
//! `β` annealed towards hard routing, then finishes on hard paths.
//! Loss is the multiclass hinge `max(0, 1 + max_{j≠y} ŷ_j − ŷ_y)` plus an
//! L2 penalty, minimized by plain mini-batch gradient descent.

use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};
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
pub struct BonsaiConfig {
    pub proj_dim: usize,
    /// Levels of the tree; a path visits this many nodes.
    pub depth: usize,
    pub sigma: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub l2: f64,
    /// Fraction of epochs over which the routing temperature is annealed.
    pub anneal_fraction: f64,
    pub beta_max: f64,
    pub seed: u64,
}

impl Default for BonsaiConfig {
    fn default() -> Self {
        Self {
            proj_dim: 13,
            depth: 4,
            sigma: 0.3,
            epochs: 500,
            batch_size: 32,
            learning_rate: 0.01,
            l2: 1e-4,
            anneal_fraction: 0.6,
            beta_max: 50.0,
            seed: 0,
        }
    }
}

/// Dense parameter block; also used for gradients.
#[derive(Clone, Debug, PartialEq)]
pub struct BonsaiParams {
    pub input_dim: usize,
    pub proj_dim: usize,
    pub depth: usize,
    /// `proj_dim × input_dim`
    pub z: Vec<f64>,
    /// `internal × proj_dim`
    pub theta: Vec<f64>,
    /// `nodes × classes × proj_dim`
    pub w: Vec<f64>,
    pub v: Vec<f64>,
}

impl BonsaiParams {
    pub fn zeros(input_dim: usize, proj_dim: usize, depth: usize) -> Self {
        let nodes = (1 << depth) - 1;
        let internal = (1 << (depth - 1)) - 1;
        Self {
            input_dim,
            proj_dim,
            depth,
            z: vec![0.0; proj_dim * input_dim],
            theta: vec![0.0; internal * proj_dim],
            w: vec![0.0; nodes * C * proj_dim],
            v: vec![0.0; nodes * C * proj_dim],
        }
    }

    pub fn nodes(&self) -> usize {
        (1 << self.depth) - 1
    }

    pub fn internal(&self) -> usize {
        (1 << (self.depth - 1)) - 1
    }

    pub fn blocks(&self) -> [&Vec<f64>; 4] {
        [&self.z, &self.theta, &self.w, &self.v]
    }

    pub fn blocks_mut(&mut self) -> [&mut Vec<f64>; 4] {
        [&mut self.z, &mut self.theta, &mut self.w, &mut self.v]
    }

    fn project(&self, x: &[f64]) -> Vec<f64> {
        let d = self.input_dim;
        (0..self.proj_dim)
            .map(|r| {
                self.z[r * d..(r + 1) * d]
                    .iter()
                    .zip(x)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect()
    }

    fn dot_row(m: &[f64], row: usize, zh: &[f64]) -> f64 {
        let p = zh.len();
        m[row * p..(row + 1) * p]
            .iter()
            .zip(zh)
            .map(|(a, b)| a * b)
            .sum()
    }

    fn branch(&self, k: usize, zh: &[f64]) -> f64 {
        Self::dot_row(&self.theta, k, zh)
    }

    /// `(W_k ẑ)_c` and `tanh(σ (V_k ẑ)_c)` for one node.
    fn node_terms(&self, k: usize, zh: &[f64], sigma: f64) -> ([f64; C], [f64; C]) {
        let mut a = [0.0; C];
        let mut t = [0.0; C];
        for c in 0..C {
            a[c] = Self::dot_row(&self.w, k * C + c, zh);
            t[c] = (sigma * Self::dot_row(&self.v, k * C + c, zh)).tanh();
        }
        (a, t)
    }

    /// Hard-path scores and the visited nodes.
    pub fn scores_hard(&self, x: &[f64], sigma: f64) -> ([f64; C], Vec<usize>) {
        let zh = self.project(x);
        let mut y = [0.0; C];
        let mut path = Vec::with_capacity(self.depth);
        let mut k = 0;
        loop {
            path.push(k);
            let (a, t) = self.node_terms(k, &zh, sigma);
            for c in 0..C {
                y[c] += a[c] * t[c];
            }
            if k >= self.internal() {
                break;
            }
            k = if self.branch(k, &zh) > 0.0 {
                2 * k + 2
            } else {
                2 * k + 1
            };
        }
        (y, path)
    }

    /// Path indicators for every node. `beta = None` routes hard.
    /// Also returns the right-branch probabilities of internal nodes.
    fn indicators(&self, zh: &[f64], beta: Option<f64>) -> (Vec<f64>, Vec<f64>) {
        let mut ind = vec![0.0; self.nodes()];
        let mut p = vec![0.0; self.internal()];
        ind[0] = 1.0;
        for k in 0..self.internal() {
            let s = self.branch(k, zh);
            p[k] = match beta {
                Some(b) => 1.0 / (1.0 + (-b * s).exp()),
                None => f64::from(u8::from(s > 0.0)),
            };
            ind[2 * k + 1] = ind[k] * (1.0 - p[k]);
            ind[2 * k + 2] = ind[k] * p[k];
        }
        (ind, p)
    }

    fn sum_sq(&self) -> f64 {
        self.blocks()
            .iter()
            .flat_map(|b| b.iter())
            .map(|v| v * v)
            .sum()
    }
}

/// Mean hinge loss over the batch plus `l2/2 · ‖params‖²`, and its gradient.
pub fn loss_and_grad(
    params: &BonsaiParams,
    x: &[&[f64]],
    y: &[usize],
    sigma: f64,
    beta: Option<f64>,
    l2: f64,
) -> (f64, BonsaiParams) {
    let mut g = BonsaiParams::zeros(params.input_dim, params.proj_dim, params.depth);
    let (d, pd, nodes, internal) = (
        params.input_dim,
        params.proj_dim,
        params.nodes(),
        params.internal(),
    );
    let scale = 1.0 / x.len() as f64;
    let mut loss = 0.0;
    for (xi, &yi) in x.iter().zip(y) {
        let zh = params.project(xi);
        let (ind, p) = params.indicators(&zh, beta);
        let terms: Vec<([f64; C], [f64; C])> = (0..nodes)
            .map(|k| params.node_terms(k, &zh, sigma))
            .collect();
        let mut yh = [0.0; C];
        for k in 0..nodes {
            for c in 0..C {
                yh[c] += ind[k] * terms[k].0[c] * terms[k].1[c];
            }
        }
        let mut rival = usize::MAX;
        for c in 0..C {
            if c != yi && (rival == usize::MAX || yh[c] > yh[rival]) {
                rival = c;
            }
        }
        let margin = 1.0 + yh[rival] - yh[yi];
        if margin <= 0.0 {
            continue;
        }
        loss += margin * scale;
        let mut gy = [0.0; C];
        gy[rival] = scale;
        gy[yi] = -scale;

        let mut gz = vec![0.0; pd];
        // dL/dI_k from the node's own contribution
        let mut e = vec![0.0; nodes];
        for k in 0..nodes {
            let (a, t) = terms[k];
            for c in 0..C {
                if gy[c] == 0.0 {
                    continue;
                }
                e[k] += gy[c] * a[c] * t[c];
                let gw = gy[c] * ind[k] * t[c];
                let gv = gy[c] * ind[k] * a[c] * (1.0 - t[c] * t[c]) * sigma;
                if gw == 0.0 && gv == 0.0 {
                    continue;
                }
                let row = (k * C + c) * pd;
                for j in 0..pd {
                    g.w[row + j] += gw * zh[j];
                    g.v[row + j] += gv * zh[j];
                    gz[j] += gw * params.w[row + j] + gv * params.v[row + j];
                }
            }
        }
        if let Some(b) = beta {
            // total derivative w.r.t. each indicator, leaves upwards
            let mut total = e.clone();
            for k in (0..internal).rev() {
                total[k] += (1.0 - p[k]) * total[2 * k + 1] + p[k] * total[2 * k + 2];
            }
            for k in 0..internal {
                let dp = ind[k] * (total[2 * k + 2] - total[2 * k + 1]);
                let ds = dp * b * p[k] * (1.0 - p[k]);
                for j in 0..pd {
                    g.theta[k * pd + j] += ds * zh[j];
                    gz[j] += ds * params.theta[k * pd + j];
                }
            }
        }
        for r in 0..pd {
            for c in 0..d {
                g.z[r * d + c] += gz[r] * xi[c];
            }
        }
    }
    loss += 0.5 * l2 * params.sum_sq();
    for (gb, pb) in g.blocks_mut().into_iter().zip(params.blocks()) {
        for (gv, pv) in gb.iter_mut().zip(pb) {
            *gv += l2 * pv;
        }
    }
    (loss, g)
}

#[derive(Clone, Debug, PartialEq)]
pub struct BonsaiModel {
    pub config: BonsaiConfig,
    /// Values are exactly representable in f32.
    pub params: BonsaiParams,
}

fn round_f32(v: &mut [f64]) {
    for x in v {
        *x = f64::from(*x as f32);
    }
}

/// Routing temperature for an epoch, `None` once routing is hard.
fn beta_at(cfg: &BonsaiConfig, epoch: usize) -> Option<f64> {
    let anneal = (cfg.anneal_fraction * cfg.epochs as f64).round() as usize;
    if epoch >= anneal {
        return None;
    }
    let frac = if anneal <= 1 {
        1.0
    } else {
        epoch as f64 / (anneal - 1) as f64
    };
    Some(1.0 + (cfg.beta_max - 1.0) * frac)
}

pub fn bonsai_train(x: &[Vec<f64>], y: &[usize], cfg: &BonsaiConfig) -> Result<BonsaiModel> {
    let dim = check_training(x, y)?;
    if cfg.depth == 0 || cfg.depth > 8 || cfg.proj_dim == 0 || cfg.batch_size == 0 {
        return Err(Error::InvalidInput(format!("bonsai config {cfg:?}")));
    }
    if dim < cfg.proj_dim {
        return Err(Error::InvalidInput(format!(
            "projection dimension {} exceeds input dimension {dim}",
            cfg.proj_dim
        )));
    }
    let mut rng = seed::sub_rng(cfg.seed, "bonsai-init", 0);
    let mut params = BonsaiParams::zeros(dim, cfg.proj_dim, cfg.depth);
    let init = |n: usize| Normal::new(0.0, (1.0 / n as f64).sqrt()).expect("finite std");
    let (zd, pd) = (init(dim), init(cfg.proj_dim));
    params.z.iter_mut().for_each(|v| *v = zd.sample(&mut rng));
    params
        .theta
        .iter_mut()
        .for_each(|v| *v = pd.sample(&mut rng));
    params.w.iter_mut().for_each(|v| *v = pd.sample(&mut rng));
    params.v.iter_mut().for_each(|v| *v = pd.sample(&mut rng));

    let mut order: Vec<usize> = (0..x.len()).collect();
    for epoch in 0..cfg.epochs {
        let beta = beta_at(cfg, epoch);
        order.shuffle(&mut seed::sub_rng(cfg.seed, "bonsai-epoch", epoch as u64));
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let bx: Vec<&[f64]> = batch.iter().map(|&i| x[i].as_slice()).collect();
            let by: Vec<usize> = batch.iter().map(|&i| y[i]).collect();
            let (loss, g) = loss_and_grad(&params, &bx, &by, cfg.sigma, beta, cfg.l2);
            epoch_loss += loss;
            for (pb, gb) in params.blocks_mut().into_iter().zip(g.blocks()) {
                for (p, gv) in pb.iter_mut().zip(gb) {
                    *p -= cfg.learning_rate * gv;
                }
            }
        }
        if !epoch_loss.is_finite() || params.sum_sq().is_nan() {
            return Err(Error::DivergedTraining { epoch });
        }
    }
    for b in params.blocks_mut() {
        round_f32(b);
    }
    Ok(BonsaiModel {
        config: cfg.clone(),
        params,
    })
}

/// Hard-path prediction; the score is the softmax margin between the top
/// two classes.
pub fn bonsai_predict(model: &BonsaiModel, v: &[f64]) -> Result<Prediction> {
    check_dim(model.params.input_dim, v)?;
    let (y, _) = model.params.scores_hard(v, model.config.sigma);
    let p = softmax(&y);
    let best = argmax(&p);
    let second = (0..C)
        .filter(|&c| c != best)
        .map(|c| p[c])
        .fold(0.0, f64::max);
    Ok(Prediction {
        class: gesture(best),
        score: p[best] - second,
    })
}

impl BonsaiModel {
    pub fn from_tensors(config: BonsaiConfig, m: &TensorMap) -> Result<Self> {
        let (pd, d) = match m.shape("z")? {
            [a, b] => (*a, *b),
            s => return Err(Error::Format(format!("z shape {s:?}"))),
        };
        if config.depth == 0 || config.depth > 8 || config.proj_dim != pd {
            return Err(Error::Format(
                "bonsai tensors do not match the configuration".into(),
            ));
        }
        let mut p = BonsaiParams::zeros(d, pd, config.depth);
        for (name, dst) in ["z", "theta", "w", "v"].into_iter().zip(p.blocks_mut()) {
            let src = m.f32(name)?;
            if src.len() != dst.len() {
                return Err(Error::Format(format!(
                    "tensor {name} has {} values, expected {}",
                    src.len(),
                    dst.len()
                )));
            }
            for (a, b) in dst.iter_mut().zip(src) {
                *a = f64::from(*b);
            }
        }
        Ok(Self { config, params: p })
    }
}

impl Classifier for BonsaiModel {
    fn kind(&self) -> ModelKind {
        ModelKind::Bonsai
    }

    fn input_dim(&self) -> usize {
        self.params.input_dim
    }

    fn predict(&self, v: &[f64]) -> Result<Prediction> {
        bonsai_predict(self, v)
    }

    fn footprint(&self) -> Footprint {
        Footprint {
            flash_bytes: self.tensors().byte_len() as u64,
            // projected input plus the score vector
            ram_bytes: ((self.params.proj_dim + C) * 4) as u64,
        }
    }

    /// Projection, then per visited node the two class-by-projection
    /// products, `tanh`, the gate product and the score add; each internal
    /// node on the path adds a branch dot product, compare and branch.
    /// Final argmax: 2 compares.
    fn op_count(&self) -> OpCount {
        let (d, pd, h) = (
            self.params.input_dim as u64,
            self.params.proj_dim as u64,
            self.config.depth as u64,
        );
        let c = C as u64;
        let projection = 2 * d * pd;
        let node = 2 * (2 * c * pd) + 3 * c;
        let branch = 2 * pd + 2;
        OpCount(projection + h * node + (h - 1) * branch + 2)
    }

    fn tensors(&self) -> TensorMap {
        let p = &self.params;
        let f = |v: &[f64]| v.iter().map(|x| *x as f32).collect::<Vec<f32>>();
        let mut m = TensorMap::default();
        m.insert("z", Tensor::f32(vec![p.proj_dim, p.input_dim], f(&p.z)));
        m.insert(
            "theta",
            Tensor::f32(vec![p.internal(), p.proj_dim], f(&p.theta)),
        );
        m.insert("w", Tensor::f32(vec![p.nodes(), C, p.proj_dim], f(&p.w)));
        m.insert("v", Tensor::f32(vec![p.nodes(), C, p.proj_dim], f(&p.v)));
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_params(d: usize, pd: usize, h: usize, seed: u64) -> BonsaiParams {
        let mut rng = seed::rng(seed);
        let mut p = BonsaiParams::zeros(d, pd, h);
        for b in p.blocks_mut() {
            b.iter_mut().for_each(|v| *v = rng.random_range(-1.0..1.0));
        }
        p
    }

    #[test]
    fn hard_path_visits_depth_nodes() {
        let p = random_params(5, 3, 4, 1);
        let mut rng = seed::rng(2);
        for _ in 0..50 {
            let x: Vec<f64> = (0..5).map(|_| rng.random_range(-2.0..2.0)).collect();
            let (_, path) = p.scores_hard(&x, 0.3);
            assert_eq!(path.len(), 4);
            assert_eq!(path[0], 0);
            for w in path.windows(2) {
                assert!(w[1] == 2 * w[0] + 1 || w[1] == 2 * w[0] + 2);
            }
        }
    }

    #[test]
    fn root_only_tree_separates_linear_data() {
        let mut rng = seed::rng(3);
        let centres = [[3.0, 0.0, 0.0], [0.0, 3.0, 0.0], [0.0, 0.0, 3.0]];
        let mut x = vec![];
        let mut y = vec![];
        for i in 0..300 {
            let c = i % 3;
            x.push(
                (0..3)
                    .map(|j| centres[c][j] + rng.random_range(-0.5..0.5))
                    .collect::<Vec<f64>>(),
            );
            y.push(c);
        }
        let cfg = BonsaiConfig {
            proj_dim: 3,
            depth: 1,
            epochs: 200,
            ..BonsaiConfig::default()
        };
        let m = bonsai_train(&x, &y, &cfg).unwrap();
        let ok = x
            .iter()
            .zip(&y)
            .filter(|(v, &c)| bonsai_predict(&m, v).unwrap().class.index() == c)
            .count();
        assert!(ok as f64 / 300.0 >= 0.99, "{ok}/300");
    }

    #[test]
    fn projection_wider_than_input_is_rejected() {
        let x = vec![vec![0.0; 4]; 6];
        let y = vec![0, 1, 2, 0, 1, 2];
        assert!(bonsai_train(&x, &y, &BonsaiConfig::default()).is_err());
    }

    #[test]
    fn divergence_is_reported() {
        let x: Vec<Vec<f64>> = (0..30)
            .map(|i| vec![1e150 * (i as f64 - 15.0); 3])
            .collect();
        let y: Vec<usize> = (0..30).map(|i| i % 3).collect();
        let cfg = BonsaiConfig {
            proj_dim: 2,
            depth: 2,
            epochs: 5,
            learning_rate: 10.0,
            ..BonsaiConfig::default()
        };
        assert!(matches!(
            bonsai_train(&x, &y, &cfg),
            Err(Error::DivergedTraining { .. })
        ));
    }

    #[test]
    fn beta_reaches_max_then_goes_hard() {
        let cfg = BonsaiConfig::default();
        assert_eq!(beta_at(&cfg, 0), Some(1.0));
        assert_eq!(beta_at(&cfg, 299), Some(50.0));
        assert_eq!(beta_at(&cfg, 300), None);
    }
}
