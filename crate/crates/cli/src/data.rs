//! Dataset commands: generate, ingest, augment, extract.
//!
//! A dataset directory holds `dataset.csv` (samples keyed by window id) and
//! `provenance.json` (seed, sample rate and per-window provenance).

use std::fs::{self, File};
use std::io::BufReader;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use gesture_core::augment::{balance_classes, AugmentSpec};
use gesture_core::dataset::{ingest_recording, IngestMode};
use gesture_core::features::extract_matrix;
use gesture_core::io::{
    read_dataset_csv, read_recording_csv, write_dataset_csv, write_feature_csv, DatasetMeta,
};
use gesture_core::signal::{DEFAULT_STRIDE, DEFAULT_WINDOW_LEN, MAX_SHIFT, MIN_SHIFT};
use gesture_core::synth::{synth_dataset, SynthParams};
use gesture_core::{Dataset, FeatureSet};
use serde::Serialize;
use serde_json::json;

use crate::manifest::Run;
use crate::Summary;

pub const DATASET_CSV: &str = "dataset.csv";
pub const PROVENANCE_JSON: &str = "provenance.json";

/// Reads a dataset directory and registers its files as inputs.
pub fn load_dataset(run: &mut Run, dir: &Path) -> Result<Dataset> {
    let csv = dir.join(DATASET_CSV);
    let meta = dir.join(PROVENANCE_JSON);
    run.input(&csv)?;
    run.input(&meta)?;
    let meta: DatasetMeta = serde_json::from_str(
        &fs::read_to_string(&meta).with_context(|| format!("reading {}", meta.display()))?,
    )
    .with_context(|| format!("parsing {}", meta.display()))?;
    let file = File::open(&csv).with_context(|| format!("opening {}", csv.display()))?;
    read_dataset_csv(BufReader::new(file), &meta)
        .with_context(|| format!("reading {}", csv.display()))
}

pub fn save_dataset(run: &mut Run, ds: &Dataset) -> Result<()> {
    let mut buf = Vec::new();
    let meta = write_dataset_csv(&mut buf, ds)?;
    run.write(DATASET_CSV, buf)?;
    let mut s = serde_json::to_string_pretty(&meta)?;
    s.push('\n');
    run.write(PROVENANCE_JSON, s)?;
    Ok(())
}

fn class_lines(ds: &Dataset) -> Vec<String> {
    let counts = ds.class_counts();
    let mut line = format!("{} windows", ds.len());
    for (c, n) in &counts {
        line.push_str(&format!(", {c}: {n}"));
    }
    vec![line]
}

fn class_json(ds: &Dataset) -> serde_json::Value {
    let counts: std::collections::BTreeMap<String, usize> = ds
        .class_counts()
        .into_iter()
        .map(|(c, n)| (c.to_string(), n))
        .collect();
    json!({ "windows": ds.len(), "classes": counts })
}

fn summary(command: &'static str, out: PathBuf, ds: &Dataset) -> Summary {
    Summary {
        command,
        out: out.display().to_string(),
        lines: class_lines(ds),
        data: class_json(ds),
    }
}

#[derive(Args, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct GenerateArgs {
    /// Windows per class per user.
    #[arg(long, default_value_t = 200)]
    pub per_class: usize,
    #[arg(long, default_value_t = 5)]
    pub users: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Gesture amplitude in g.
    #[arg(long, default_value_t = 1.5)]
    pub amplitude: f64,
    /// Sensor noise standard deviation in g.
    #[arg(long, default_value_t = 0.05)]
    pub noise: f64,
    /// Relative spread of gesture speed across repetitions.
    #[arg(long, default_value_t = 0.1)]
    pub jitter: f64,
    /// Bound on the per-user bias of each axis in g.
    #[arg(long, default_value_t = 0.05)]
    pub offset: f64,
    #[arg(long)]
    pub out: PathBuf,
    #[serde(skip)]
    #[arg(long)]
    pub force: bool,
}

pub fn generate(a: GenerateArgs) -> Result<Summary> {
    let mut run = Run::new("generate", &a.out, a.force, &a)?;
    run.seed("seed", a.seed);
    let params = SynthParams {
        amplitude_g: a.amplitude,
        noise_std_g: a.noise,
        speed_jitter: a.jitter,
        per_user_offset_g: [a.offset; 3],
        rng_seed: a.seed,
    };
    let ds = synth_dataset(a.per_class, a.users, &params)?;
    save_dataset(&mut run, &ds)?;
    Ok(summary("generate", run.finish()?, &ds))
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Annotated,
    Stream,
}

#[derive(Args, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct IngestArgs {
    /// Recording CSV with columns t,ax,ay,az[,label].
    #[arg(long)]
    pub recording: PathBuf,
    /// JSON list of {start, end, class} annotations.
    #[arg(long)]
    pub annotations: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Mode::Annotated)]
    pub mode: Mode,
    #[arg(long, default_value_t = DEFAULT_WINDOW_LEN)]
    pub window_len: usize,
    #[arg(long, default_value_t = DEFAULT_STRIDE)]
    pub stride: usize,
    #[arg(long)]
    pub user: Option<u32>,
    #[arg(long)]
    pub out: PathBuf,
    #[serde(skip)]
    #[arg(long)]
    pub force: bool,
}

pub fn ingest(a: IngestArgs) -> Result<Summary> {
    let mut run = Run::new("ingest", &a.out, a.force, &a)?;
    run.input(&a.recording)?;
    let sidecar = match &a.annotations {
        Some(p) => {
            run.input(p)?;
            Some(fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?)
        }
        None => None,
    };
    let file =
        File::open(&a.recording).with_context(|| format!("opening {}", a.recording.display()))?;
    let rec = read_recording_csv(BufReader::new(file), sidecar.as_deref())
        .with_context(|| format!("reading {}", a.recording.display()))?;
    let mode = match a.mode {
        Mode::Annotated => IngestMode::Annotated,
        Mode::Stream => IngestMode::Stream { stride: a.stride },
    };
    let ds = ingest_recording(&rec, a.window_len, mode, a.user)?;
    save_dataset(&mut run, &ds)?;
    Ok(summary("ingest", run.finish()?, &ds))
}

/// Augmentation ranges shared by `augment`, `train` and `automl`.
#[derive(Args, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct AugmentRanges {
    /// Temporal shift magnitude bounds in samples, `min,max`.
    #[arg(long, value_delimiter = ',', default_values_t = [MIN_SHIFT, MAX_SHIFT])]
    pub shift_range: Vec<usize>,
    /// Amplitude factor bounds, `min,max`.
    #[arg(long, value_delimiter = ',', default_values_t = [0.9, 1.1])]
    pub amp_range: Vec<f64>,
    /// Time-stretch factor bounds, `min,max`.
    #[arg(long, value_delimiter = ',', default_values_t = [0.95, 1.05])]
    pub stretch_range: Vec<f64>,
}

impl AugmentRanges {
    pub fn spec(&self, seed: u64) -> Result<AugmentSpec> {
        let pair = |v: &[f64], name: &str| -> Result<(f64, f64)> {
            match v {
                [a, b] => Ok((*a, *b)),
                _ => bail!("--{name} takes two values"),
            }
        };
        let [s0, s1] = self.shift_range[..] else {
            bail!("--shift-range takes two values");
        };
        let spec = AugmentSpec {
            shift_range: (s0, s1),
            amp_range: pair(&self.amp_range, "amp-range")?,
            stretch_range: pair(&self.stretch_range, "stretch-range")?,
            rng_seed: seed,
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Args, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct AugmentArgs {
    /// Dataset directory.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[serde(flatten)]
    #[command(flatten)]
    pub ranges: AugmentRanges,
    #[arg(long)]
    pub out: PathBuf,
    #[serde(skip)]
    #[arg(long)]
    pub force: bool,
}

pub fn augment(a: AugmentArgs) -> Result<Summary> {
    let mut run = Run::new("augment", &a.out, a.force, &a)?;
    run.seed("seed", a.seed);
    let ds = load_dataset(&mut run, &a.data)?;
    let out = balance_classes(&ds, &a.ranges.spec(a.seed)?)?;
    save_dataset(&mut run, &out)?;
    Ok(summary("augment", run.finish()?, &out))
}

/// `default20`, `pool30`, or a JSON file with a list of feature entries.
pub fn resolve_features(run: &mut Run, spec: &str) -> Result<FeatureSet> {
    if let Some(fs) = FeatureSet::named(spec) {
        return Ok(fs);
    }
    let path = Path::new(spec);
    if !path.is_file() {
        bail!("unknown feature set {spec:?} (expected default20, pool30 or a JSON file)");
    }
    run.input(path)?;
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).with_context(|| format!("parsing feature set {spec}"))
}

#[derive(Args, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct ExtractArgs {
    /// Dataset directory.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value = "default20")]
    pub features: String,
    #[arg(long)]
    pub out: PathBuf,
    #[serde(skip)]
    #[arg(long)]
    pub force: bool,
}

pub fn extract(a: ExtractArgs) -> Result<Summary> {
    let mut run = Run::new("extract", &a.out, a.force, &a)?;
    let ds = load_dataset(&mut run, &a.data)?;
    let set = resolve_features(&mut run, &a.features)?;
    let rows = extract_matrix(ds.windows(), &set)?;
    let ids: Vec<u64> = ds.entries().iter().map(|e| e.provenance.id).collect();
    let labels: Vec<_> = ds.windows().map(|w| w.label()).collect();
    let mut buf = Vec::new();
    write_feature_csv(&mut buf, &set.names(), &ids, &labels, &rows)?;
    run.write("features.csv", buf)?;
    let mut s = serde_json::to_string_pretty(&set)?;
    s.push('\n');
    run.write("feature_set.json", s)?;
    Ok(Summary {
        command: "extract",
        lines: vec![format!("{} windows x {} features", rows.len(), set.len())],
        data: json!({ "windows": rows.len(), "features": set.names() }),
        out: run.finish()?.display().to_string(),
    })
}
