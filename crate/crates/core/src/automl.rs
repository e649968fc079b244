//! Genetic search over feature subsets, model kinds and hyperparameters.
//!
//! A genome is a [`Pipeline`]: a mask over the candidate feature columns, a
//! model kind, and one bounded hyperparameter record that carries fields for
//! every kind (so crossover between parents of different kinds is per field).
//! Fitness is validation accuracy minus weighted latency and memory costs.
//! Latency cost comes from the analytical op count, not the wall clock, so a
//! search is a pure function of its inputs and seed.
//!
//! Every child gets its own training seed `derive(seed, "individual", g·P + i)`
//! and fitness evaluations within a generation run in parallel. Results do not
//! depend on scheduling.

use std::collections::HashMap;
use std::fmt::Write as _;

use rand::seq::IndexedRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{fit_scaler, FeatureAxis, FeatureSet};
use crate::models::{
    self, BonsaiConfig, Classifier, ModelConfig, ModelKind, NnConfig, PmeConfig, RfConfig,
};
use crate::seed::{self, Rng};

pub const MIN_FEATURES: usize = 3;
/// Op count at which `latency_cost` saturates at 1.
pub const LATENCY_OPS_SCALE: f64 = 10_000.0;
/// Flash plus RAM bytes at which `memory_cost` saturates at 1.
pub const MEMORY_BYTES_SCALE: f64 = 32_768.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub population: usize,
    pub generations: usize,
    pub tournament_k: usize,
    pub crossover_rate: f64,
    pub mutation_rate: f64,
    pub elitism: usize,
    pub seed: u64,
    pub lambda_latency: f64,
    pub lambda_memory: f64,
    pub kinds: Vec<ModelKind>,
    /// Training budget overrides used during search.
    pub nn_epochs: usize,
    pub bonsai_epochs: usize,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            population: 24,
            generations: 12,
            tournament_k: 3,
            crossover_rate: 0.7,
            mutation_rate: 0.15,
            elitism: 2,
            seed: 0,
            lambda_latency: 0.05,
            lambda_memory: 0.05,
            kinds: vec![
                ModelKind::Pme,
                ModelKind::Rf,
                ModelKind::Bonsai,
                ModelKind::Nn,
            ],
            nn_epochs: 10,
            bonsai_epochs: 100,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidInput(m.into()));
        if self.population < 4 {
            return bad("population must be at least 4");
        }
        if self.generations == 0 {
            return bad("generations must be positive");
        }
        if self.tournament_k == 0 || self.tournament_k > self.population {
            return bad("tournament_k must be in 1..=population");
        }
        if self.elitism >= self.population {
            return bad("elitism must be below population");
        }
        for r in [self.crossover_rate, self.mutation_rate] {
            if !(0.0..=1.0).contains(&r) {
                return bad("rates must lie in [0, 1]");
            }
        }
        if !(self.lambda_latency >= 0.0 && self.lambda_memory >= 0.0) {
            return bad("lambda weights must be non-negative");
        }
        if self.kinds.is_empty() || self.kinds.contains(&ModelKind::NnInt8) {
            return bad("kinds must be a non-empty subset of pme, rf, bonsai, nn");
        }
        Ok(())
    }
}

/// Inclusive bounds for a hyperparameter.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bound<T> {
    pub lo: T,
    pub hi: T,
}

pub const PME_AIF_MAX: Bound<u16> = Bound { lo: 50, hi: 400 };
pub const PME_NEURONS: Bound<usize> = Bound { lo: 16, hi: 128 };
pub const RF_TREES: Bound<usize> = Bound { lo: 5, hi: 60 };
pub const RF_DEPTH: Bound<usize> = Bound { lo: 2, hi: 10 };
pub const BONSAI_PROJ: Bound<usize> = Bound { lo: 4, hi: 16 };
pub const BONSAI_DEPTH: Bound<usize> = Bound { lo: 1, hi: 5 };
pub const BONSAI_SIGMA: Bound<f64> = Bound { lo: 0.05, hi: 2.0 };
pub const NN_WIDTH: Bound<usize> = Bound { lo: 4, hi: 32 };
pub const NN_DROPOUT: Bound<f64> = Bound { lo: 0.0, hi: 0.3 };
pub const NN_LR: Bound<f64> = Bound { lo: 1e-4, hi: 1e-2 };

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hyper {
    pub pme_aif_max: u16,
    pub pme_max_neurons: usize,
    pub rf_n_trees: usize,
    pub rf_max_depth: usize,
    pub bonsai_proj_dim: usize,
    pub bonsai_depth: usize,
    pub bonsai_sigma: f64,
    /// Hidden layers are `[w, w, w/2, 4]`.
    pub nn_width: usize,
    pub nn_dropout: f64,
    pub nn_learning_rate: f64,
}

const N_HYPER: usize = 10;

impl Default for Hyper {
    fn default() -> Self {
        let (p, r, b, n) = (
            PmeConfig::default(),
            RfConfig::default(),
            BonsaiConfig::default(),
            NnConfig::default(),
        );
        Self {
            pme_aif_max: p.aif_max,
            pme_max_neurons: p.max_neurons,
            rf_n_trees: r.n_trees,
            rf_max_depth: r.max_depth,
            bonsai_proj_dim: b.proj_dim,
            bonsai_depth: b.depth,
            bonsai_sigma: b.sigma,
            nn_width: n.hidden[0],
            nn_dropout: n.dropout,
            nn_learning_rate: n.learning_rate,
        }
    }
}

fn rand_int(rng: &mut Rng, b: Bound<usize>) -> usize {
    rng.random_range(b.lo..=b.hi)
}

fn rand_real(rng: &mut Rng, b: Bound<f64>) -> f64 {
    rng.random_range(b.lo..=b.hi)
}

fn rand_log(rng: &mut Rng, b: Bound<f64>) -> f64 {
    rng.random_range(b.lo.ln()..=b.hi.ln()).exp()
}

/// Integer step of up to a quarter of the range, at least 1.
fn perturb_int(rng: &mut Rng, v: usize, b: Bound<usize>) -> usize {
    let step = ((b.hi - b.lo) / 4).max(1) as i64;
    let d = rng.random_range(-step..=step);
    (v as i64 + d).clamp(b.lo as i64, b.hi as i64) as usize
}

fn perturb_real(rng: &mut Rng, v: f64, b: Bound<f64>) -> f64 {
    let step = (b.hi - b.lo) / 4.0;
    (v + rng.random_range(-step..=step)).clamp(b.lo, b.hi)
}

fn perturb_log(rng: &mut Rng, v: f64, b: Bound<f64>) -> f64 {
    (v * rng.random_range(0.5f64..=2.0)).clamp(b.lo, b.hi)
}

impl Hyper {
    pub fn random(rng: &mut Rng) -> Self {
        Self {
            pme_aif_max: rand_int(
                rng,
                Bound {
                    lo: PME_AIF_MAX.lo as usize,
                    hi: PME_AIF_MAX.hi as usize,
                },
            ) as u16,
            pme_max_neurons: rand_int(rng, PME_NEURONS),
            rf_n_trees: rand_int(rng, RF_TREES),
            rf_max_depth: rand_int(rng, RF_DEPTH),
            bonsai_proj_dim: rand_int(rng, BONSAI_PROJ),
            bonsai_depth: rand_int(rng, BONSAI_DEPTH),
            bonsai_sigma: rand_real(rng, BONSAI_SIGMA),
            nn_width: rand_int(rng, NN_WIDTH),
            nn_dropout: rand_real(rng, NN_DROPOUT),
            nn_learning_rate: rand_log(rng, NN_LR),
        }
    }

    pub fn in_bounds(&self) -> bool {
        let int = |v: usize, b: Bound<usize>| (b.lo..=b.hi).contains(&v);
        let real = |v: f64, b: Bound<f64>| (b.lo..=b.hi).contains(&v);
        (PME_AIF_MAX.lo..=PME_AIF_MAX.hi).contains(&self.pme_aif_max)
            && int(self.pme_max_neurons, PME_NEURONS)
            && int(self.rf_n_trees, RF_TREES)
            && int(self.rf_max_depth, RF_DEPTH)
            && int(self.bonsai_proj_dim, BONSAI_PROJ)
            && int(self.bonsai_depth, BONSAI_DEPTH)
            && real(self.bonsai_sigma, BONSAI_SIGMA)
            && int(self.nn_width, NN_WIDTH)
            && real(self.nn_dropout, NN_DROPOUT)
            && real(self.nn_learning_rate, NN_LR)
    }

    /// Field `i` taken from `other`.
    fn take_field(&mut self, other: &Hyper, i: usize) {
        match i {
            0 => self.pme_aif_max = other.pme_aif_max,
            1 => self.pme_max_neurons = other.pme_max_neurons,
            2 => self.rf_n_trees = other.rf_n_trees,
            3 => self.rf_max_depth = other.rf_max_depth,
            4 => self.bonsai_proj_dim = other.bonsai_proj_dim,
            5 => self.bonsai_depth = other.bonsai_depth,
            6 => self.bonsai_sigma = other.bonsai_sigma,
            7 => self.nn_width = other.nn_width,
            8 => self.nn_dropout = other.nn_dropout,
            _ => self.nn_learning_rate = other.nn_learning_rate,
        }
    }

    fn perturb_field(&mut self, rng: &mut Rng, i: usize) {
        match i {
            0 => {
                let b = Bound {
                    lo: PME_AIF_MAX.lo as usize,
                    hi: PME_AIF_MAX.hi as usize,
                };
                self.pme_aif_max = perturb_int(rng, self.pme_aif_max as usize, b) as u16;
            }
            1 => self.pme_max_neurons = perturb_int(rng, self.pme_max_neurons, PME_NEURONS),
            2 => self.rf_n_trees = perturb_int(rng, self.rf_n_trees, RF_TREES),
            3 => self.rf_max_depth = perturb_int(rng, self.rf_max_depth, RF_DEPTH),
            4 => self.bonsai_proj_dim = perturb_int(rng, self.bonsai_proj_dim, BONSAI_PROJ),
            5 => self.bonsai_depth = perturb_int(rng, self.bonsai_depth, BONSAI_DEPTH),
            6 => self.bonsai_sigma = perturb_real(rng, self.bonsai_sigma, BONSAI_SIGMA),
            7 => self.nn_width = perturb_int(rng, self.nn_width, NN_WIDTH),
            8 => self.nn_dropout = perturb_real(rng, self.nn_dropout, NN_DROPOUT),
            _ => self.nn_learning_rate = perturb_log(rng, self.nn_learning_rate, NN_LR),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pipeline {
    pub feature_mask: Vec<bool>,
    pub kind: ModelKind,
    pub hyper: Hyper,
    /// Training seed of this individual.
    pub seed: u64,
}

impl Pipeline {
    pub fn n_features(&self) -> usize {
        self.feature_mask.iter().filter(|&&b| b).count()
    }

    pub fn is_valid(&self) -> bool {
        self.n_features() >= MIN_FEATURES && self.hyper.in_bounds()
    }

    pub fn selected(&self) -> impl Iterator<Item = usize> + '_ {
        self.feature_mask
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(i, _)| i)
    }

    /// Model configuration with the search budget applied.
    pub fn model_config(&self, cfg: &SearchConfig) -> ModelConfig {
        let h = &self.hyper;
        let c = match self.kind {
            ModelKind::Pme => ModelConfig::Pme(PmeConfig {
                aif_max: h.pme_aif_max,
                max_neurons: h.pme_max_neurons,
                ..PmeConfig::default()
            }),
            ModelKind::Rf => ModelConfig::Rf(RfConfig {
                n_trees: h.rf_n_trees,
                max_depth: h.rf_max_depth,
                ..RfConfig::default()
            }),
            ModelKind::Bonsai => ModelConfig::Bonsai(BonsaiConfig {
                proj_dim: h.bonsai_proj_dim,
                depth: h.bonsai_depth,
                sigma: h.bonsai_sigma,
                epochs: cfg.bonsai_epochs,
                ..BonsaiConfig::default()
            }),
            ModelKind::Nn | ModelKind::NnInt8 => ModelConfig::Nn(NnConfig {
                hidden: vec![h.nn_width, h.nn_width, (h.nn_width / 2).max(2), 4],
                dropout: h.nn_dropout,
                learning_rate: h.nn_learning_rate,
                epochs: cfg.nn_epochs,
                ..NnConfig::default()
            }),
        };
        c.with_seed(self.seed)
    }

    /// Sets random bits until at least [`MIN_FEATURES`] are selected.
    fn repair(&mut self, rng: &mut Rng) {
        let n = self.feature_mask.len();
        while self.n_features() < MIN_FEATURES.min(n) {
            let i = rng.random_range(0..n);
            self.feature_mask[i] = true;
        }
    }

    fn random(rng: &mut Rng, n_features: usize, kinds: &[ModelKind], seed: u64) -> Self {
        let mut p = Self {
            feature_mask: (0..n_features).map(|_| rng.random_bool(0.5)).collect(),
            kind: *kinds.choose(rng).expect("kinds is non-empty"),
            hyper: Hyper::random(rng),
            seed,
        };
        p.repair(rng);
        p
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitnessScore {
    pub accuracy: f64,
    pub latency_cost: f64,
    pub memory_cost: f64,
    pub scalar: f64,
    /// Set when training or evaluation failed; the scalar is then 0.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl FitnessScore {
    pub fn new(accuracy: f64, latency_cost: f64, memory_cost: f64, cfg: &SearchConfig) -> Self {
        Self {
            accuracy,
            latency_cost,
            memory_cost,
            scalar: scalarize(accuracy, latency_cost, memory_cost, cfg),
            note: None,
        }
    }

    pub fn failed(note: impl Into<String>) -> Self {
        Self {
            accuracy: 0.0,
            latency_cost: 0.0,
            memory_cost: 0.0,
            scalar: 0.0,
            note: Some(note.into()),
        }
    }
}

pub fn scalarize(accuracy: f64, latency_cost: f64, memory_cost: f64, cfg: &SearchConfig) -> f64 {
    accuracy - cfg.lambda_latency * latency_cost - cfg.lambda_memory * memory_cost
}

/// Candidate feature columns for a search: rows are windows, columns follow
/// `names`.
#[derive(Clone, Debug)]
pub struct SearchData<'a> {
    pub names: &'a [String],
    pub train_x: &'a [Vec<f64>],
    pub train_y: &'a [usize],
    pub val_x: &'a [Vec<f64>],
    pub val_y: &'a [usize],
}

impl SearchData<'_> {
    fn validate(&self) -> Result<()> {
        if self.train_x.is_empty() || self.val_x.is_empty() {
            return Err(Error::EmptyInput("search splits".into()));
        }
        if self.train_x.len() != self.train_y.len() || self.val_x.len() != self.val_y.len() {
            return Err(Error::InvalidInput(
                "rows and labels differ in length".into(),
            ));
        }
        let d = self.names.len();
        if d < MIN_FEATURES {
            return Err(Error::InvalidInput(format!(
                "feature pool needs at least {MIN_FEATURES} columns"
            )));
        }
        for r in self.train_x.iter().chain(self.val_x) {
            if r.len() != d {
                return Err(Error::Shape {
                    expected: d,
                    got: r.len(),
                });
            }
        }
        Ok(())
    }
}

fn select_columns(rows: &[Vec<f64>], cols: &[usize]) -> Vec<Vec<f64>> {
    rows.iter()
        .map(|r| cols.iter().map(|&c| r[c]).collect())
        .collect()
}

fn try_fitness(p: &Pipeline, data: &SearchData, cfg: &SearchConfig) -> Result<FitnessScore> {
    let cols: Vec<usize> = p.selected().collect();
    let train = select_columns(data.train_x, &cols);
    let val = select_columns(data.val_x, &cols);
    let scaler = fit_scaler(&train)?;
    let train = scaler.apply_all(&train)?;
    let val = scaler.apply_all(&val)?;
    let model = models::train(&p.model_config(cfg), &train, data.train_y)?;
    let mut correct = 0usize;
    for (v, &y) in val.iter().zip(data.val_y) {
        if model.predict(v)?.class.index() == y {
            correct += 1;
        }
    }
    let accuracy = correct as f64 / val.len() as f64;
    let ops = model.op_count().0 as f64;
    let fp = model.footprint();
    let bytes = (fp.flash_bytes + fp.ram_bytes) as f64;
    Ok(FitnessScore::new(
        accuracy,
        (ops / LATENCY_OPS_SCALE).min(1.0),
        (bytes / MEMORY_BYTES_SCALE).min(1.0),
        cfg,
    ))
}

/// Trains `p` on the masked training columns and scores it on validation.
/// Failures score 0 with a note instead of propagating.
pub fn fitness(p: &Pipeline, data: &SearchData, cfg: &SearchConfig) -> FitnessScore {
    if !p.is_valid() {
        return FitnessScore::failed("pipeline violates mask or hyperparameter bounds");
    }
    if p.feature_mask.len() != data.names.len() {
        return FitnessScore::failed("mask width differs from feature pool");
    }
    try_fitness(p, data, cfg).unwrap_or_else(|e| FitnessScore::failed(e.to_string()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scored {
    pub pipeline: Pipeline,
    pub score: FitnessScore,
}

/// One JSON-lines record per individual per generation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogRecord {
    pub generation: usize,
    pub index: usize,
    pub features: Vec<String>,
    pub pipeline: Pipeline,
    pub score: FitnessScore,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub config: SearchConfig,
    /// Final population, best scalar first.
    pub ranked: Vec<Scored>,
    pub best_per_generation: Vec<f64>,
    pub log: Vec<LogRecord>,
}

impl SearchOutcome {
    pub fn log_jsonl(&self) -> Result<String> {
        let mut s = String::new();
        for r in &self.log {
            s.push_str(&serde_json::to_string(r)?);
            s.push('\n');
        }
        Ok(s)
    }

    /// True when the best scalar never drops from one generation to the next.
    pub fn is_elitist(&self) -> bool {
        self.best_per_generation.windows(2).all(|w| w[1] >= w[0])
    }
}

fn rank(pop: &mut [Scored]) {
    // stable: equal scores keep population order
    pop.sort_by(|a, b| b.score.scalar.total_cmp(&a.score.scalar));
}

fn tournament<'a>(rng: &mut Rng, pop: &'a [Scored], k: usize) -> &'a Scored {
    let mut best = &pop[rng.random_range(0..pop.len())];
    for _ in 1..k {
        let c = &pop[rng.random_range(0..pop.len())];
        if c.score.scalar > best.score.scalar {
            best = c;
        }
    }
    best
}

fn crossover(rng: &mut Rng, a: &Pipeline, b: &Pipeline) -> Pipeline {
    let mut child = a.clone();
    for (m, &other) in child.feature_mask.iter_mut().zip(&b.feature_mask) {
        if rng.random_bool(0.5) {
            *m = other;
        }
    }
    if rng.random_bool(0.5) {
        child.kind = b.kind;
    }
    for i in 0..N_HYPER {
        if rng.random_bool(0.5) {
            child.hyper.take_field(&b.hyper, i);
        }
    }
    child
}

/// Each gene mutates with probability `rate`. The mask counts as one gene
/// and a mask mutation flips one bit.
fn mutate(rng: &mut Rng, p: &mut Pipeline, rate: f64, kinds: &[ModelKind]) {
    if rng.random_bool(rate) {
        let i = rng.random_range(0..p.feature_mask.len());
        p.feature_mask[i] = !p.feature_mask[i];
    }
    if rng.random_bool(rate) {
        p.kind = *kinds.choose(rng).expect("kinds is non-empty");
    }
    for i in 0..N_HYPER {
        if rng.random_bool(rate) {
            p.hyper.perturb_field(rng, i);
        }
    }
}

fn score_all(
    pipelines: &[Pipeline],
    data: &SearchData,
    cfg: &SearchConfig,
    cache: &mut HashMap<String, FitnessScore>,
) -> Result<Vec<FitnessScore>> {
    let keys: Vec<String> = pipelines
        .iter()
        .map(serde_json::to_string)
        .collect::<std::result::Result<_, _>>()?;
    let mut todo: Vec<usize> = Vec::new();
    for (i, k) in keys.iter().enumerate() {
        if !cache.contains_key(k) && !todo.iter().any(|&j| keys[j] == *k) {
            todo.push(i);
        }
    }
    let eval = |&i: &usize| fitness(&pipelines[i], data, cfg);
    #[cfg(feature = "parallel")]
    let fresh: Vec<FitnessScore> = {
        use rayon::prelude::*;
        todo.par_iter().map(eval).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let fresh: Vec<FitnessScore> = todo.iter().map(eval).collect();
    for (i, s) in todo.into_iter().zip(fresh) {
        cache.insert(keys[i].clone(), s);
    }
    Ok(keys.iter().map(|k| cache[k].clone()).collect())
}

/// Runs the genetic search and returns the final population ranked by
/// scalar fitness, with the per-generation log.
pub fn evolve(cfg: &SearchConfig, data: &SearchData) -> Result<SearchOutcome> {
    cfg.validate()?;
    data.validate()?;
    let n = data.names.len();
    let names_of =
        |p: &Pipeline| -> Vec<String> { p.selected().map(|i| data.names[i].clone()).collect() };
    let mut cache = HashMap::new();
    let mut log = Vec::new();
    let mut best_per_generation = Vec::with_capacity(cfg.generations);

    let mut rng = seed::sub_rng(cfg.seed, "population", 0);
    let child_seed =
        |g: usize, i: usize| seed::derive(cfg.seed, "individual", (g * cfg.population + i) as u64);
    let initial: Vec<Pipeline> = (0..cfg.population)
        .map(|i| Pipeline::random(&mut rng, n, &cfg.kinds, child_seed(0, i)))
        .collect();
    let scores = score_all(&initial, data, cfg, &mut cache)?;
    let mut pop: Vec<Scored> = initial
        .into_iter()
        .zip(scores)
        .map(|(pipeline, score)| Scored { pipeline, score })
        .collect();

    for g in 0..cfg.generations {
        if g > 0 {
            let mut rng = seed::sub_rng(cfg.seed, "generation", g as u64);
            let mut next: Vec<Scored> = pop[..cfg.elitism].to_vec();
            let mut children = Vec::with_capacity(cfg.population - cfg.elitism);
            for i in cfg.elitism..cfg.population {
                let a = tournament(&mut rng, &pop, cfg.tournament_k);
                let mut child = if rng.random_bool(cfg.crossover_rate) {
                    let b = tournament(&mut rng, &pop, cfg.tournament_k);
                    crossover(&mut rng, &a.pipeline, &b.pipeline)
                } else {
                    a.pipeline.clone()
                };
                mutate(&mut rng, &mut child, cfg.mutation_rate, &cfg.kinds);
                child.repair(&mut rng);
                child.seed = child_seed(g, i);
                children.push(child);
            }
            let scores = score_all(&children, data, cfg, &mut cache)?;
            next.extend(
                children
                    .into_iter()
                    .zip(scores)
                    .map(|(pipeline, score)| Scored { pipeline, score }),
            );
            pop = next;
        }
        rank(&mut pop);
        best_per_generation.push(pop[0].score.scalar);
        for (index, s) in pop.iter().enumerate() {
            log.push(LogRecord {
                generation: g,
                index,
                features: names_of(&s.pipeline),
                pipeline: s.pipeline.clone(),
                score: s.score.clone(),
            });
        }
    }
    Ok(SearchOutcome {
        config: cfg.clone(),
        ranked: pop,
        best_per_generation,
        log,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureCount {
    pub feature: String,
    pub count: usize,
}

/// Counts how often each pool column is selected by the `top_n` best
/// pipelines of every run. Sorted by count, ties in pool order.
pub fn feature_frequency(
    runs: &[&[Scored]],
    top_n: usize,
    names: &[String],
) -> Result<Vec<FeatureCount>> {
    if runs.is_empty() {
        return Err(Error::EmptyInput("search runs".into()));
    }
    let mut counts = vec![0usize; names.len()];
    for run in runs {
        for s in run.iter().take(top_n) {
            if s.pipeline.feature_mask.len() != names.len() {
                return Err(Error::Shape {
                    expected: names.len(),
                    got: s.pipeline.feature_mask.len(),
                });
            }
            for i in s.pipeline.selected() {
                counts[i] += 1;
            }
        }
    }
    let mut out: Vec<FeatureCount> = names
        .iter()
        .zip(counts)
        .map(|(f, count)| FeatureCount {
            feature: f.clone(),
            count,
        })
        .collect();
    out.sort_by(|a, b| b.count.cmp(&a.count));
    Ok(out)
}

pub fn frequency_csv(freq: &[FeatureCount]) -> String {
    let mut s = String::from("rank,feature,count\n");
    for (i, f) in freq.iter().enumerate() {
        let _ = writeln!(s, "{},{},{}", i + 1, f.feature, f.count);
    }
    s
}

/// Consensus table with one row per feature and one column per axis.
/// Cells hold selection counts, `-` for zero. Cross-axis pairs fill the
/// column of their first axis in pair order (XY, YZ, XZ). Columns that are
/// not pool features are left out.
pub fn consensus_csv(freq: &[FeatureCount]) -> String {
    let count = |name: &str| {
        freq.iter()
            .find(|f| f.feature == name)
            .map_or(0, |f| f.count)
    };
    let pool = FeatureSet::pool();
    let mut s = String::from("feature,accel-X,accel-Y,accel-Z\n");
    for id in crate::features::FeatureId::ALL {
        let mut cells = [String::from("-"), String::from("-"), String::from("-")];
        for (col, e) in pool
            .entries()
            .iter()
            .filter(|e| e.feature == id)
            .enumerate()
        {
            let c = count(&e.name());
            let col = match e.axis {
                FeatureAxis::Single(a) => a.index(),
                FeatureAxis::Pair(..) => col,
            };
            if c > 0 {
                cells[col] = c.to_string();
            }
        }
        let _ = writeln!(s, "{id:?},{}", cells.join(","));
    }
    s
}
