//! Model commands: train, evaluate, profile, export.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{ArgAction, Args, ValueEnum};
use gesture_core::eval::{
    confusion_csv, evaluate as eval_model, protocol_split, EvalReport, SplitSpec,
};
use gesture_core::features::{extract_matrix, fit_scaler};
use gesture_core::models::envelope::Deployed;
use gesture_core::models::quant::quantize_nn;
use gesture_core::models::{
    self, Classifier, Model, ModelConfig, ModelFile, ModelKind, TensorData,
};
use gesture_core::profile::profile_latency;
use gesture_core::report::{Report, ReportRow};
use gesture_core::{Dataset, Window};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::data::{load_dataset, resolve_features, AugmentRanges};
use crate::manifest::Run;
use crate::Summary;

/// Split flags shared by `train` and `automl`.
#[derive(Args, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct SplitArgs {
    #[arg(long, default_value_t = 42)]
    pub split_seed: u64,
    /// Train, validation and test fractions.
    #[arg(long, value_delimiter = ',', default_values_t = [0.6, 0.2, 0.2])]
    pub fractions: Vec<f64>,
    /// Keep each user's windows inside one part.
    #[arg(long, action = ArgAction::Set, default_value_t = false)]
    pub group_by_user: bool,
    /// Seed of the class-balancing augmentation of train and validation.
    #[arg(long, default_value_t = 42)]
    pub augment_seed: u64,
    #[serde(flatten)]
    #[command(flatten)]
    pub ranges: AugmentRanges,
}

/// Everything needed to rebuild the parts of a split; written as
/// `split.json` by `train`.
#[derive(Debug, Serialize, Deserialize)]
pub struct SplitFile {
    pub split: SplitSpec,
    pub augment: gesture_core::augment::AugmentSpec,
}

impl SplitArgs {
    pub fn file(&self) -> Result<SplitFile> {
        let [train, val, test] = self.fractions[..] else {
            bail!("--fractions takes three values");
        };
        let split = SplitSpec {
            train,
            val,
            test,
            seed: self.split_seed,
            stratified: true,
            group_by_user: self.group_by_user,
        };
        split.validate()?;
        Ok(SplitFile {
            split,
            augment: self.ranges.spec(self.augment_seed)?,
        })
    }

    pub fn seeds(&self, run: &mut Run) {
        run.seed("split-seed", self.split_seed);
        run.seed("augment-seed", self.augment_seed);
    }
}

/// Applies `key=value` pairs separated by `;` to a model configuration.
/// Values are JSON where they parse as JSON, strings otherwise.
pub fn apply_hyper(config: ModelConfig, hyper: &str) -> Result<ModelConfig> {
    let mut v = serde_json::to_value(&config)?;
    let obj = v.as_object_mut().expect("model config is an object");
    for pair in hyper.split(';').map(str::trim).filter(|p| !p.is_empty()) {
        let Some((k, val)) = pair.split_once('=') else {
            bail!("--hyper entry {pair:?} is not key=value");
        };
        let k = k.trim().replace('-', "_");
        if k == "kind" || !obj.contains_key(&k) {
            let known: Vec<&String> = obj.keys().filter(|k| *k != "kind").collect();
            bail!(
                "unknown hyperparameter {k:?} for {}; known: {known:?}",
                config.kind()
            );
        }
        let val = val.trim();
        let parsed = serde_json::from_str(val).unwrap_or_else(|_| json!(val));
        obj.insert(k, parsed);
    }
    serde_json::from_value(v).context("invalid hyperparameters")
}

fn window_refs(ds: &Dataset) -> Vec<&Window> {
    ds.windows().collect()
}

fn labels(ds: &Dataset) -> Vec<usize> {
    ds.entries().iter().map(|e| e.label().index()).collect()
}

#[derive(Args, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct TrainArgs {
    /// Dataset directory.
    #[arg(long)]
    pub data: PathBuf,
    /// pme, rf, bonsai, nn or nn-int8.
    #[arg(long)]
    pub model: String,
    #[arg(long, default_value = "default20")]
    pub features: String,
    /// Model seed.
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[serde(flatten)]
    #[command(flatten)]
    pub split: SplitArgs,
    /// Hyperparameter overrides, e.g. `epochs=50;hidden=[16,16,8,4]`.
    #[arg(long)]
    pub hyper: Option<String>,
    #[arg(long)]
    pub out: PathBuf,
    #[serde(skip)]
    #[arg(long)]
    pub force: bool,
}

pub fn train(a: TrainArgs) -> Result<Summary> {
    let mut run = Run::new("train", &a.out, a.force, &a)?;
    run.seed("seed", a.seed);
    a.split.seeds(&mut run);
    let kind: ModelKind = a.model.parse()?;
    let ds = load_dataset(&mut run, &a.data)?;
    let set = resolve_features(&mut run, &a.features)?;
    let sf = a.split.file()?;
    let parts = protocol_split(&ds, &sf.split, &sf.augment)?;
    let raw = extract_matrix(parts.train.windows(), &set)?;
    let scaler = fit_scaler(&raw)?;
    let x = scaler.apply_all(&raw)?;
    let mut config = ModelConfig::default_for(kind).with_seed(a.seed);
    if let Some(h) = &a.hyper {
        config = apply_hyper(config, h)?;
    }
    let model = models::train(&config, &x, &labels(&parts.train))?;
    let val = eval_model(&model, &window_refs(&parts.val), &set, &scaler)?;
    let file = ModelFile::new(&model, set, scaler);
    run.write("model.json", file.to_json()?)?;
    let mut s = serde_json::to_string_pretty(&sf)?;
    s.push('\n');
    run.write("split.json", s)?;
    Ok(Summary {
        command: "train",
        lines: vec![
            format!(
                "{kind}: {} train windows, validation accuracy {:.4}",
                parts.train.len(),
                val.accuracy
            ),
            format!(
                "flash {} B, ram {} B, {} ops",
                file.footprint.flash_bytes,
                file.footprint.ram_bytes,
                model.op_count().0
            ),
        ],
        data: json!({
            "kind": kind,
            "train_windows": parts.train.len(),
            "val_accuracy": val.accuracy,
            "footprint": file.footprint,
            "op_count": model.op_count(),
        }),
        out: run.finish()?.display().to_string(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Part {
    Train,
    Val,
    Test,
    All,
}

/// Model file, dataset and the part of it to use.
#[derive(Args, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct EvalData {
    /// Dataset directory.
    #[arg(long)]
    pub data: PathBuf,
    /// `split.json` from `train`; without it the whole dataset is used.
    #[arg(long)]
    pub split: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Part::Test)]
    pub part: Part,
}

impl EvalData {
    fn load(&self, run: &mut Run) -> Result<Dataset> {
        let ds = load_dataset(run, &self.data)?;
        let Some(path) = &self.split else {
            return Ok(ds);
        };
        run.input(path)?;
        let sf: SplitFile = serde_json::from_str(&fs::read_to_string(path)?)
            .with_context(|| format!("parsing {}", path.display()))?;
        let p = protocol_split(&ds, &sf.split, &sf.augment)?;
        Ok(match self.part {
            Part::Train => p.train,
            Part::Val => p.val,
            Part::Test => p.test,
            Part::All => ds,
        })
    }
}

fn load_model(run: &mut Run, path: &Path) -> Result<(ModelFile, Deployed)> {
    run.input(path)?;
    let f = ModelFile::load(path).with_context(|| format!("loading {}", path.display()))?;
    let d = Deployed::from_file(&f).with_context(|| format!("loading {}", path.display()))?;
    Ok((f, d))
}

/// Report names: the model kind, qualified by the parent directory when
/// several files share a kind.
fn model_names(paths: &[PathBuf], kinds: &[ModelKind]) -> Vec<String> {
    paths
        .iter()
        .zip(kinds)
        .map(|(p, k)| {
            let dup = kinds.iter().filter(|o| *o == k).count() > 1;
            match p.parent().and_then(|d| d.file_name()) {
                Some(dir) if dup => format!("{k}:{}", dir.to_string_lossy()),
                _ => k.to_string(),
            }
        })
        .collect()
}

fn write_report(run: &mut Run, report: &Report) -> Result<()> {
    run.write("report.csv", report.to_csv()?)?;
    run.write("report.json", report.to_json()?)?;
    run.write("report.txt", report.to_text())?;
    Ok(())
}

#[derive(Args, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct EvaluateArgs {
    /// Model file.
    #[arg(long)]
    pub model: PathBuf,
    #[serde(flatten)]
    #[command(flatten)]
    pub eval: EvalData,
    #[arg(long)]
    pub out: PathBuf,
    #[serde(skip)]
    #[arg(long)]
    pub force: bool,
}

pub fn evaluate(a: EvaluateArgs) -> Result<Summary> {
    let mut run = Run::new("evaluate", &a.out, a.force, &a)?;
    let (file, d) = load_model(&mut run, &a.model)?;
    let ds = a.eval.load(&mut run)?;
    let r = eval_model(&d.model, &window_refs(&ds), &d.feature_set, &d.scaler)?;
    run.write("confusion.csv", confusion_csv(&r.confusion))?;
    let mut s = serde_json::to_string_pretty(&r)?;
    s.push('\n');
    run.write("eval.json", s)?;
    let report = Report::new(vec![ReportRow::from_eval(file.kind.to_string(), &r)]);
    write_report(&mut run, &report)?;
    Ok(Summary {
        command: "evaluate",
        lines: report.to_text().lines().map(String::from).collect(),
        data: serde_json::to_value(&r)?,
        out: run.finish()?.display().to_string(),
    })
}

#[derive(Args, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct ProfileArgs {
    /// Model files, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub model: Vec<PathBuf>,
    #[serde(flatten)]
    #[command(flatten)]
    pub eval: EvalData,
    /// Timed passes over the profiling windows.
    #[arg(long, default_value_t = 30)]
    pub reps: usize,
    /// Windows used for timing, taken from the start of the part.
    #[arg(long, default_value_t = 40)]
    pub windows: usize,
    #[arg(long)]
    pub out: PathBuf,
    #[serde(skip)]
    #[arg(long)]
    pub force: bool,
}

pub fn profile(a: ProfileArgs) -> Result<Summary> {
    let mut run = Run::new("profile", &a.out, a.force, &a)?;
    let ds = a.eval.load(&mut run)?;
    let windows = window_refs(&ds);
    let timed = &windows[..a.windows.min(windows.len())];
    let mut rows = Vec::new();
    let mut profiles = Vec::new();
    let loaded = a
        .model
        .iter()
        .map(|p| load_model(&mut run, p))
        .collect::<Result<Vec<_>>>()?;
    let kinds: Vec<ModelKind> = loaded.iter().map(|(f, _)| f.kind).collect();
    for ((_, d), name) in loaded.iter().zip(model_names(&a.model, &kinds)) {
        let mut r: EvalReport = eval_model(&d.model, &windows, &d.feature_set, &d.scaler)?;
        let p = profile_latency(&d.model, timed, &d.feature_set, &d.scaler, a.reps)?;
        r.latency = Some(p.inference);
        profiles.push(json!({ "model": name, "profile": p, "op_count": d.model.op_count() }));
        rows.push(ReportRow::from_eval(name, &r));
    }
    let mut s = serde_json::to_string_pretty(&profiles)?;
    s.push('\n');
    run.write("profile.json", s)?;
    let report = Report::new(rows);
    write_report(&mut run, &report)?;
    Ok(Summary {
        command: "profile",
        lines: report.to_text().lines().map(String::from).collect(),
        data: json!(profiles),
        out: run.finish()?.display().to_string(),
    })
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    C,
    Json,
}

#[derive(Args, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct ExportArgs {
    /// Model file.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::C)]
    pub format: Format,
    /// Quantize a float network to int8; needs `--data` for calibration.
    #[arg(long, action = ArgAction::Set, default_value_t = false)]
    pub quantize: bool,
    /// Dataset directory with calibration windows.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[serde(skip)]
    #[arg(long)]
    pub force: bool,
}

fn c_ident(s: &str) -> String {
    s.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() {
                c.to_ascii_lowercase()
            } else {
                '_'
            }
        })
        .collect()
}

fn c_array<T: std::fmt::Display>(out: &mut String, ty: &str, name: &str, v: &[T]) {
    let _ = writeln!(out, "static const {ty} {name}[{}] = {{", v.len().max(1));
    for chunk in v.chunks(8) {
        let cells: Vec<String> = chunk.iter().map(|x| x.to_string()).collect();
        let _ = writeln!(out, "    {},", cells.join(", "));
    }
    if v.is_empty() {
        out.push_str("    0,\n");
    }
    out.push_str("};\n\n");
}

fn c_float(x: f64) -> String {
    let s = format!("{:?}", x as f32);
    format!("{s}f")
}

/// Self-contained C header with the feature list, scaler and parameter
/// tensors of a model file.
pub fn c_header(f: &ModelFile) -> String {
    let guard = format!(
        "GESTURE_MODEL_{}_H",
        c_ident(f.kind.as_str()).to_uppercase()
    );
    let mut s = String::new();
    let _ = writeln!(s, "/* gesture model: kind {}, seed {} */", f.kind, f.seed);
    let _ = writeln!(
        s,
        "#ifndef {guard}\n#define {guard}\n\n#include <stdint.h>\n"
    );
    let _ = writeln!(s, "#define GESTURE_N_FEATURES {}", f.feature_set.len());
    let _ = writeln!(s, "#define GESTURE_FLASH_BYTES {}", f.footprint.flash_bytes);
    let _ = writeln!(s, "#define GESTURE_RAM_BYTES {}\n", f.footprint.ram_bytes);
    s.push_str("/* features, in input order:\n");
    for (i, n) in f.feature_set.names().iter().enumerate() {
        let _ = writeln!(s, " * {i:2} {n}");
    }
    s.push_str(" */\n\n");
    let mean: Vec<String> = f.scaler.mean.iter().map(|&x| c_float(x)).collect();
    let std: Vec<String> = f.scaler.std.iter().map(|&x| c_float(x)).collect();
    c_array(&mut s, "float", "gesture_scaler_mean", &mean);
    c_array(&mut s, "float", "gesture_scaler_std", &std);
    for (name, t) in &f.params.0 {
        let ident = format!("gesture_{}", c_ident(name));
        let shape: Vec<String> = t.shape.iter().map(usize::to_string).collect();
        let _ = writeln!(s, "/* {name}: shape [{}] */", shape.join(", "));
        match &t.data {
            TensorData::F32(v) => {
                let v: Vec<String> = v.iter().map(|&x| c_float(f64::from(x))).collect();
                c_array(&mut s, "float", &ident, &v);
            }
            TensorData::I8(v) => c_array(&mut s, "int8_t", &ident, v),
            TensorData::U8(v) => c_array(&mut s, "uint8_t", &ident, v),
            TensorData::U16(v) => c_array(&mut s, "uint16_t", &ident, v),
            TensorData::I32(v) => c_array(&mut s, "int32_t", &ident, v),
        }
    }
    let _ = writeln!(s, "#endif /* {guard} */");
    s
}

pub fn export(a: ExportArgs) -> Result<Summary> {
    let mut run = Run::new("export", &a.out, a.force, &a)?;
    let (mut file, d) = load_model(&mut run, &a.model)?;
    if a.quantize {
        let Model::Nn(nn) = &d.model else {
            bail!("--quantize needs a float nn model, got {}", file.kind);
        };
        let Some(dir) = &a.data else {
            bail!("--quantize needs --data for calibration");
        };
        let ds = load_dataset(&mut run, dir)?;
        let raw = extract_matrix(ds.windows(), &d.feature_set)?;
        let calib = d.scaler.apply_all(&raw)?;
        let q = Model::NnInt8(quantize_nn(nn, &calib)?);
        file = ModelFile::new(&q, d.feature_set.clone(), d.scaler.clone());
    } else if a.data.is_some() {
        bail!("--data is only used with --quantize true");
    }
    let name = match a.format {
        Format::C => {
            run.write("model.h", c_header(&file))?;
            "model.h"
        }
        Format::Json => {
            run.write("model.json", file.to_json()?)?;
            "model.json"
        }
    };
    Ok(Summary {
        command: "export",
        lines: vec![format!(
            "{name}: {} model, flash {} B, ram {} B",
            file.kind, file.footprint.flash_bytes, file.footprint.ram_bytes
        )],
        data: json!({ "file": name, "kind": file.kind, "footprint": file.footprint }),
        out: run.finish()?.display().to_string(),
    })
}
