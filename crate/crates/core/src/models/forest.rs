//! Random forest of Gini CART trees on bootstrap resamples.
//!
//! Trees are stored flat: per node a split feature (`-1` for a leaf), an
//! f32 threshold and tree-local child indices. A leaf keeps the class
//! histogram of the in-bag samples that reached it; its `left` slot holds
//! the leaf's index within the tree. Samples go left when
//! `v[feature] <= threshold`.

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::tensor::{Tensor, TensorData, TensorMap};
use super::{
    check_dim, check_training, gesture, Classifier, Footprint, ModelKind, OpCount, Prediction,
};
use crate::error::{Error, Result};
use crate::seed;
use crate::signal::GestureClass;

const C: usize = GestureClass::N_GESTURES;
pub const MAX_DEPTH_LIMIT: usize = 14;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RfConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    pub bootstrap: bool,
    /// Candidate features per split; `None` means ⌈√D⌉.
    pub max_features: Option<usize>,
    pub min_samples_split: usize,
    pub seed: u64,
}

impl Default for RfConfig {
    fn default() -> Self {
        Self {
            n_trees: 40,
            max_depth: 7,
            bootstrap: true,
            max_features: None,
            min_samples_split: 2,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Tree {
    pub feature: Vec<i8>,
    pub threshold: Vec<f32>,
    pub left: Vec<u16>,
    pub right: Vec<u16>,
    pub leaves: Vec<[u16; C]>,
}

impl Tree {
    fn leaf_for(&self, v: &[f64]) -> &[u16; C] {
        let mut n = 0usize;
        loop {
            let f = self.feature[n];
            if f < 0 {
                return &self.leaves[self.left[n] as usize];
            }
            n = if v[f as usize] <= f64::from(self.threshold[n]) {
                self.left[n] as usize
            } else {
                self.right[n] as usize
            };
        }
    }

    /// Number of internal nodes on the deepest root-to-leaf path.
    pub fn depth(&self) -> usize {
        fn go(t: &Tree, n: usize) -> usize {
            if t.feature[n] < 0 {
                0
            } else {
                1 + go(t, t.left[n] as usize).max(go(t, t.right[n] as usize))
            }
        }
        go(self, 0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RfModel {
    pub config: RfConfig,
    pub dim: usize,
    pub trees: Vec<Tree>,
}

fn gini(counts: &[usize; C], n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>()
}

struct Split {
    feature: usize,
    threshold: f32,
    impurity: f64,
}

struct Builder<'a> {
    x: &'a [Vec<f64>],
    y: &'a [usize],
    cfg: &'a RfConfig,
    mtry: usize,
    tree: Tree,
}

impl Builder<'_> {
    fn best_split(&self, idx: &[usize], rng: &mut seed::Rng) -> Option<Split> {
        let dim = self.x[0].len();
        let mut features: Vec<usize> = (0..dim).collect();
        features.shuffle(rng);
        let mut best: Option<Split> = None;
        let mut sorted = idx.to_vec();
        for (tried, &f) in features.iter().enumerate() {
            // keep drawing past mtry only while nothing splits
            if tried >= self.mtry && best.is_some() {
                break;
            }
            sorted.sort_by(|&a, &b| self.x[a][f].total_cmp(&self.x[b][f]));
            let vals: Vec<f64> = sorted.iter().map(|&i| self.x[i][f]).collect();
            let mut prefix = vec![[0usize; C]; vals.len() + 1];
            for (k, &i) in sorted.iter().enumerate() {
                prefix[k + 1] = prefix[k];
                prefix[k + 1][self.y[i]] += 1;
            }
            let n = vals.len();
            let total = prefix[n];
            for j in 0..n - 1 {
                if vals[j] == vals[j + 1] {
                    continue;
                }
                let thr = ((vals[j] + vals[j + 1]) / 2.0) as f32;
                let k = vals.partition_point(|v| *v <= f64::from(thr));
                if k == 0 || k == n {
                    continue;
                }
                let l = prefix[k];
                let mut r = total;
                for c in 0..C {
                    r[c] -= l[c];
                }
                let imp = (k as f64 * gini(&l, k) + (n - k) as f64 * gini(&r, n - k)) / n as f64;
                if best.as_ref().map_or(true, |b| imp < b.impurity) {
                    best = Some(Split {
                        feature: f,
                        threshold: thr,
                        impurity: imp,
                    });
                }
            }
        }
        best
    }

    fn push_leaf(&mut self, idx: &[usize]) -> Result<usize> {
        let mut counts = [0u16; C];
        for &i in idx {
            counts[self.y[i]] = counts[self.y[i]]
                .checked_add(1)
                .ok_or_else(|| Error::InvalidInput("leaf count exceeds u16".into()))?;
        }
        let leaf = self.tree.leaves.len();
        self.tree.leaves.push(counts);
        self.push_node(-1, 0.0, leaf as u16, 0)
    }

    fn push_node(&mut self, feature: i8, threshold: f32, left: u16, right: u16) -> Result<usize> {
        let n = self.tree.feature.len();
        if n > u16::MAX as usize {
            return Err(Error::InvalidInput("tree exceeds u16 node indices".into()));
        }
        self.tree.feature.push(feature);
        self.tree.threshold.push(threshold);
        self.tree.left.push(left);
        self.tree.right.push(right);
        Ok(n)
    }

    fn grow(&mut self, idx: &[usize], depth: usize, rng: &mut seed::Rng) -> Result<usize> {
        let mut counts = [0usize; C];
        for &i in idx {
            counts[self.y[i]] += 1;
        }
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        if pure || depth >= self.cfg.max_depth || idx.len() < self.cfg.min_samples_split {
            return self.push_leaf(idx);
        }
        let Some(split) = self.best_split(idx, rng) else {
            return self.push_leaf(idx);
        };
        let (l, r): (Vec<usize>, Vec<usize>) = idx
            .iter()
            .partition(|&&i| self.x[i][split.feature] <= f64::from(split.threshold));
        let node = self.push_node(split.feature as i8, split.threshold, 0, 0)?;
        let li = self.grow(&l, depth + 1, rng)?;
        let ri = self.grow(&r, depth + 1, rng)?;
        self.tree.left[node] = li as u16;
        self.tree.right[node] = ri as u16;
        Ok(node)
    }
}

pub fn rf_train(x: &[Vec<f64>], y: &[usize], cfg: &RfConfig) -> Result<RfModel> {
    let dim = check_training(x, y)?;
    if y.iter().all(|&c| c == y[0]) {
        return Err(Error::DegenerateLabels);
    }
    if dim > i8::MAX as usize {
        return Err(Error::InvalidInput(format!(
            "{dim} features exceed the i8 split index"
        )));
    }
    if cfg.n_trees == 0 || cfg.max_depth > MAX_DEPTH_LIMIT || cfg.max_features == Some(0) {
        return Err(Error::InvalidInput(format!("forest config {cfg:?}")));
    }
    let mtry = cfg
        .max_features
        .unwrap_or_else(|| (dim as f64).sqrt().ceil() as usize)
        .min(dim);
    let trees = (0..cfg.n_trees)
        .map(|t| {
            let mut rng = seed::sub_rng(cfg.seed, "tree", t as u64);
            let idx: Vec<usize> = if cfg.bootstrap {
                (0..x.len()).map(|_| rng.random_range(0..x.len())).collect()
            } else {
                (0..x.len()).collect()
            };
            let mut b = Builder {
                x,
                y,
                cfg,
                mtry,
                tree: Tree {
                    feature: vec![],
                    threshold: vec![],
                    left: vec![],
                    right: vec![],
                    leaves: vec![],
                },
            };
            b.grow(&idx, 0, &mut rng)?;
            Ok(b.tree)
        })
        .collect::<Result<_>>()?;
    Ok(RfModel {
        config: cfg.clone(),
        dim,
        trees,
    })
}

/// Per-class vote counts and summed leaf probabilities.
pub fn rf_votes(model: &RfModel, v: &[f64]) -> Result<([usize; C], [f64; C])> {
    check_dim(model.dim, v)?;
    let mut votes = [0usize; C];
    let mut prob = [0.0f64; C];
    for t in &model.trees {
        let leaf = t.leaf_for(v);
        let total: u32 = leaf.iter().map(|&c| u32::from(c)).sum();
        let mut best = 0;
        for c in 0..C {
            if leaf[c] > leaf[best] {
                best = c;
            }
            if total > 0 {
                prob[c] += f64::from(leaf[c]) / f64::from(total);
            }
        }
        votes[best] += 1;
    }
    Ok((votes, prob))
}

/// Majority vote; ties go to the larger summed leaf probability, then to
/// the lower class index. Never emits `Uncertain`.
pub fn rf_classify(model: &RfModel, v: &[f64]) -> Result<Prediction> {
    let (votes, prob) = rf_votes(model, v)?;
    let mut best = 0;
    for c in 1..C {
        if votes[c] > votes[best] || (votes[c] == votes[best] && prob[c] > prob[best]) {
            best = c;
        }
    }
    Ok(Prediction {
        class: gesture(best),
        score: votes[best] as f64 / model.trees.len() as f64,
    })
}

impl RfModel {
    fn offsets<T: Fn(&Tree) -> usize>(&self, f: T) -> Vec<i32> {
        let mut acc = 0;
        let mut out = vec![0];
        for t in &self.trees {
            acc += f(t);
            out.push(acc as i32);
        }
        out
    }

    pub fn from_tensors(config: RfConfig, m: &TensorMap) -> Result<Self> {
        let dim = m.i32("dim")?.first().copied().unwrap_or(0) as usize;
        let feature = m.i8("feature")?;
        let threshold = m.f32("threshold")?;
        let left = m.u16("left")?;
        let right = m.u16("right")?;
        let leaves = m.u16("leaf_counts")?;
        let node_off = m.i32("node_offsets")?;
        let leaf_off = m.i32("leaf_offsets")?;
        let n = feature.len();
        if threshold.len() != n
            || left.len() != n
            || right.len() != n
            || node_off.len() != leaf_off.len()
        {
            return Err(Error::Format("forest tensors disagree in length".into()));
        }
        let mut trees = Vec::with_capacity(node_off.len().saturating_sub(1));
        for w in 0..node_off.len().saturating_sub(1) {
            let (a, b) = (node_off[w] as usize, node_off[w + 1] as usize);
            let (la, lb) = (leaf_off[w] as usize, leaf_off[w + 1] as usize);
            if a > b || b > n || la > lb || lb * C > leaves.len() {
                return Err(Error::Format("forest offsets out of range".into()));
            }
            let tree = Tree {
                feature: feature[a..b].to_vec(),
                threshold: threshold[a..b].to_vec(),
                left: left[a..b].to_vec(),
                right: right[a..b].to_vec(),
                leaves: leaves[la * C..lb * C]
                    .chunks_exact(C)
                    .map(|c| [c[0], c[1], c[2]])
                    .collect(),
            };
            for i in 0..tree.feature.len() {
                let ok = if tree.feature[i] < 0 {
                    (tree.left[i] as usize) < tree.leaves.len()
                } else {
                    (tree.feature[i] as usize) < dim
                        && (tree.left[i] as usize) < tree.feature.len()
                        && (tree.right[i] as usize) < tree.feature.len()
                };
                if !ok {
                    return Err(Error::Format(format!(
                        "forest node {i} of tree {w} is invalid"
                    )));
                }
            }
            trees.push(tree);
        }
        Ok(Self { config, dim, trees })
    }
}

impl Classifier for RfModel {
    fn kind(&self) -> ModelKind {
        ModelKind::Rf
    }

    fn input_dim(&self) -> usize {
        self.dim
    }

    fn predict(&self, v: &[f64]) -> Result<Prediction> {
        rf_classify(self, v)
    }

    fn footprint(&self) -> Footprint {
        Footprint {
            flash_bytes: self.tensors().byte_len() as u64,
            // node index, vote counts, probability sums
            ram_bytes: (2 + C * 2 + C * 4) as u64,
        }
    }

    /// Per tree: compare and branch per internal node on the deepest path,
    /// then leaf argmax (2), probability normalization (3 divisions and 3
    /// adds) and the vote. Final tally: 2 compares.
    fn op_count(&self) -> OpCount {
        let per_tree: u64 = self
            .trees
            .iter()
            .map(|t| 2 * t.depth() as u64 + 2 + 6 + 1)
            .sum();
        OpCount(per_tree + 2)
    }

    fn tensors(&self) -> TensorMap {
        let mut m = TensorMap::default();
        let n_nodes: usize = self.trees.iter().map(|t| t.feature.len()).sum();
        let n_leaves: usize = self.trees.iter().map(|t| t.leaves.len()).sum();
        m.insert(
            "dim",
            Tensor::new(vec![1], TensorData::I32(vec![self.dim as i32])),
        );
        m.insert(
            "feature",
            Tensor::new(
                vec![n_nodes],
                TensorData::I8(self.trees.iter().flat_map(|t| t.feature.clone()).collect()),
            ),
        );
        m.insert(
            "threshold",
            Tensor::f32(
                vec![n_nodes],
                self.trees
                    .iter()
                    .flat_map(|t| t.threshold.clone())
                    .collect(),
            ),
        );
        m.insert(
            "left",
            Tensor::new(
                vec![n_nodes],
                TensorData::U16(self.trees.iter().flat_map(|t| t.left.clone()).collect()),
            ),
        );
        m.insert(
            "right",
            Tensor::new(
                vec![n_nodes],
                TensorData::U16(self.trees.iter().flat_map(|t| t.right.clone()).collect()),
            ),
        );
        m.insert(
            "leaf_counts",
            Tensor::new(
                vec![n_leaves, C],
                TensorData::U16(
                    self.trees
                        .iter()
                        .flat_map(|t| t.leaves.iter().flatten().copied())
                        .collect(),
                ),
            ),
        );
        let nt = self.trees.len() + 1;
        m.insert(
            "node_offsets",
            Tensor::new(vec![nt], TensorData::I32(self.offsets(|t| t.feature.len()))),
        );
        m.insert(
            "leaf_offsets",
            Tensor::new(vec![nt], TensorData::I32(self.offsets(|t| t.leaves.len()))),
        );
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn blobs(n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
        let mut rng = seed::rng(seed);
        let mut x = vec![];
        let mut y = vec![];
        for i in 0..n {
            let c = i % 2;
            let centre = if c == 0 { -5.0 } else { 5.0 };
            x.push(vec![
                centre + rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            ]);
            y.push(c);
        }
        (x, y)
    }

    fn xor(n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
        let mut rng = seed::rng(seed);
        (0..n)
            .map(|_| {
                let a: f64 = rng.random_range(-1.0..1.0);
                let b: f64 = rng.random_range(-1.0..1.0);
                (vec![a, b], usize::from((a > 0.0) != (b > 0.0)))
            })
            .unzip()
    }

    /// Exhaustive best single split over every feature and midpoint.
    fn best_stump_accuracy(x: &[Vec<f64>], y: &[usize]) -> f64 {
        let mut best = 0usize;
        for f in 0..x[0].len() {
            let mut vals: Vec<f64> = x.iter().map(|r| r[f]).collect();
            vals.sort_by(f64::total_cmp);
            for w in vals.windows(2) {
                let t = (w[0] + w[1]) / 2.0;
                for (lc, rc) in [(0, 1), (1, 0), (0, 0), (1, 1)] {
                    let ok = x
                        .iter()
                        .zip(y)
                        .filter(|(r, &c)| c == if r[f] <= t { lc } else { rc })
                        .count();
                    best = best.max(ok);
                }
            }
        }
        best as f64 / x.len() as f64
    }

    fn accuracy(m: &RfModel, x: &[Vec<f64>], y: &[usize]) -> f64 {
        let ok = x
            .iter()
            .zip(y)
            .filter(|(v, &c)| rf_classify(m, v).unwrap().class.index() == c)
            .count();
        ok as f64 / x.len() as f64
    }

    #[test]
    fn separable_blobs_fit_exactly() {
        let (x, y) = blobs(200, 1);
        let m = rf_train(&x, &y, &RfConfig::default()).unwrap();
        assert_eq!(accuracy(&m, &x, &y), 1.0);
        assert!(m.trees.iter().all(|t| t.depth() <= 7));
    }

    #[test]
    fn xor_forest_beats_baseline_and_best_stump() {
        let (x, y) = xor(400, 2);
        let majority = y
            .iter()
            .filter(|&&c| c == 1)
            .count()
            .max(y.iter().filter(|&&c| c == 0).count()) as f64
            / y.len() as f64;
        let stump = best_stump_accuracy(&x, &y);
        let m = rf_train(
            &x,
            &y,
            &RfConfig {
                max_depth: 2,
                max_features: Some(2),
                ..RfConfig::default()
            },
        )
        .unwrap();
        let acc = accuracy(&m, &x, &y);
        assert!(acc > majority, "{acc} vs majority {majority}");
        assert!(acc >= stump, "{acc} vs stump {stump}");
    }

    #[test]
    fn leaf_histograms_sum_to_in_bag_counts() {
        let (x, y) = blobs(100, 3);
        let m = rf_train(&x, &y, &RfConfig::default()).unwrap();
        for t in &m.trees {
            let total: usize = t.leaves.iter().flatten().map(|&c| c as usize).sum();
            assert_eq!(total, 100);
        }
    }

    #[test]
    fn tree_order_does_not_change_votes() {
        let (x, y) = xor(300, 4);
        let m = rf_train(&x, &y, &RfConfig::default()).unwrap();
        let mut rev = m.clone();
        rev.trees.reverse();
        for v in &x {
            assert_eq!(rf_classify(&m, v).unwrap(), rf_classify(&rev, v).unwrap());
        }
    }

    #[test]
    fn vote_matches_brute_tally() {
        let (x, y) = xor(300, 5);
        let m = rf_train(&x, &y, &RfConfig::default()).unwrap();
        for v in x.iter().take(50) {
            let mut tally = [0usize; C];
            for t in &m.trees {
                // walk the tree recursively
                fn walk(t: &Tree, n: usize, v: &[f64]) -> usize {
                    if t.feature[n] < 0 {
                        let l = t.leaves[t.left[n] as usize];
                        return (0..C)
                            .rev()
                            .max_by_key(|&c| (l[c], std::cmp::Reverse(c)))
                            .unwrap();
                    }
                    let next = if v[t.feature[n] as usize] <= t.threshold[n] as f64 {
                        t.left[n]
                    } else {
                        t.right[n]
                    };
                    walk(t, next as usize, v)
                }
                tally[walk(t, 0, v)] += 1;
            }
            let p = rf_classify(&m, v).unwrap();
            let top = *tally.iter().max().unwrap();
            assert_eq!(tally[p.class.index()], top);
            assert_eq!(p.score, top as f64 / 40.0);
        }
    }

    #[test]
    fn single_class_is_degenerate() {
        let x = vec![vec![1.0], vec![2.0]];
        assert!(matches!(
            rf_train(&x, &[1, 1], &RfConfig::default()),
            Err(Error::DegenerateLabels)
        ));
    }

    #[test]
    fn same_seed_same_forest() {
        let (x, y) = xor(200, 6);
        let a = rf_train(&x, &y, &RfConfig::default()).unwrap();
        let b = rf_train(&x, &y, &RfConfig::default()).unwrap();
        assert_eq!(a, b);
        let c = rf_train(
            &x,
            &y,
            &RfConfig {
                seed: 1,
                ..RfConfig::default()
            },
        )
        .unwrap();
        assert_ne!(a, c);
    }
}
