//! `automl`: repeated genetic searches and the feature-frequency tables.

use std::path::PathBuf;

use anyhow::Result;
use clap::Args;
use gesture_core::automl::{
    consensus_csv, evolve, feature_frequency, frequency_csv, SearchConfig, SearchData,
};
use gesture_core::eval::protocol_split;
use gesture_core::features::extract_matrix;
use gesture_core::models::ModelKind;
use serde::Serialize;
use serde_json::json;

use crate::data::{load_dataset, resolve_features};
use crate::manifest::Run;
use crate::model::SplitArgs;
use crate::Summary;

#[derive(Args, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct AutomlArgs {
    /// Dataset directory.
    #[arg(long)]
    pub data: PathBuf,
    /// Candidate feature pool.
    #[arg(long, default_value = "pool30")]
    pub features: String,
    #[serde(flatten)]
    #[command(flatten)]
    pub split: SplitArgs,
    /// Independent searches; run r uses seed `seed + r`.
    #[arg(long, default_value_t = 4)]
    pub runs: u64,
    /// Best pipelines per run counted in the frequency table.
    #[arg(long, default_value_t = 5)]
    pub top: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 24)]
    pub population: usize,
    #[arg(long, default_value_t = 12)]
    pub generations: usize,
    #[arg(long, default_value_t = 3)]
    pub tournament_k: usize,
    #[arg(long, default_value_t = 0.7)]
    pub crossover_rate: f64,
    #[arg(long, default_value_t = 0.15)]
    pub mutation_rate: f64,
    #[arg(long, default_value_t = 2)]
    pub elitism: usize,
    #[arg(long, default_value_t = 0.05)]
    pub lambda_latency: f64,
    #[arg(long, default_value_t = 0.05)]
    pub lambda_memory: f64,
    /// Model kinds the search may pick.
    #[arg(long, value_delimiter = ',', default_values_t = ["pme".to_owned(), "rf".to_owned(), "bonsai".to_owned(), "nn".to_owned()])]
    pub kinds: Vec<String>,
    #[arg(long, default_value_t = 10)]
    pub nn_epochs: usize,
    #[arg(long, default_value_t = 100)]
    pub bonsai_epochs: usize,
    #[arg(long)]
    pub out: PathBuf,
    #[serde(skip)]
    #[arg(long)]
    pub force: bool,
}

impl AutomlArgs {
    fn config(&self, seed: u64) -> Result<SearchConfig> {
        let kinds = self
            .kinds
            .iter()
            .map(|k| k.parse::<ModelKind>())
            .collect::<gesture_core::Result<Vec<_>>>()?;
        let cfg = SearchConfig {
            population: self.population,
            generations: self.generations,
            tournament_k: self.tournament_k,
            crossover_rate: self.crossover_rate,
            mutation_rate: self.mutation_rate,
            elitism: self.elitism,
            seed,
            lambda_latency: self.lambda_latency,
            lambda_memory: self.lambda_memory,
            kinds,
            nn_epochs: self.nn_epochs,
            bonsai_epochs: self.bonsai_epochs,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

pub fn automl(a: AutomlArgs) -> Result<Summary> {
    let mut run = Run::new("automl", &a.out, a.force, &a)?;
    a.split.seeds(&mut run);
    anyhow::ensure!(a.runs > 0, "--runs must be positive");
    let configs = (0..a.runs)
        .map(|r| a.config(a.seed + r))
        .collect::<Result<Vec<_>>>()?;
    let ds = load_dataset(&mut run, &a.data)?;
    let set = resolve_features(&mut run, &a.features)?;
    let sf = a.split.file()?;
    let parts = protocol_split(&ds, &sf.split, &sf.augment)?;
    let label = |d: &gesture_core::Dataset| -> Vec<usize> {
        d.entries().iter().map(|e| e.label().index()).collect()
    };
    let names = set.names();
    let (tx, vx) = (
        extract_matrix(parts.train.windows(), &set)?,
        extract_matrix(parts.val.windows(), &set)?,
    );
    let (ty, vy) = (label(&parts.train), label(&parts.val));
    let data = SearchData {
        names: &names,
        train_x: &tx,
        train_y: &ty,
        val_x: &vx,
        val_y: &vy,
    };
    let mut outcomes = Vec::new();
    let mut lines = Vec::new();
    for (r, cfg) in configs.iter().enumerate() {
        run.seed(&format!("run{r}"), cfg.seed);
        let o = evolve(cfg, &data)?;
        run.write(&format!("run{r}.jsonl"), o.log_jsonl()?)?;
        let best = &o.ranked[0];
        lines.push(format!(
            "run {r}: best {} with {} features, accuracy {:.4}, fitness {:.4}",
            best.pipeline.kind,
            best.pipeline.n_features(),
            best.score.accuracy,
            best.score.scalar
        ));
        outcomes.push(o);
    }
    let ranked: Vec<_> = outcomes
        .iter()
        .map(|o| {
            o.ranked
                .iter()
                .take(a.top)
                .map(|s| {
                    let features: Vec<&String> = s.pipeline.selected().map(|i| &names[i]).collect();
                    json!({ "features": features, "pipeline": s.pipeline, "score": s.score })
                })
                .collect::<Vec<_>>()
        })
        .collect();
    let mut s = serde_json::to_string_pretty(&ranked)?;
    s.push('\n');
    run.write("ranked.json", s)?;
    let runs: Vec<&[_]> = outcomes.iter().map(|o| o.ranked.as_slice()).collect();
    let freq = feature_frequency(&runs, a.top, &names)?;
    run.write("frequency.csv", frequency_csv(&freq))?;
    run.write("consensus.csv", consensus_csv(&freq))?;
    for f in freq.iter().take(5) {
        lines.push(format!("{:>3}  {}", f.count, f.feature));
    }
    Ok(Summary {
        command: "automl",
        lines,
        data: json!({ "ranked": ranked, "frequency": freq }),
        out: run.finish()?.display().to_string(),
    })
}
