//! Plain Rust side of the demo, kept free of JS types so it can be tested
//! natively. Windows cross the boundary as flat `[ax, ay, az, ax, ...]`
//! arrays.

use gesture_core::augment::{amplitude_scale, temporal_shift, time_stretch};
use gesture_core::eval::{split, SplitSpec};
use gesture_core::features::{extract_matrix, extract_vector, fit_scaler};
use gesture_core::models::{self, Classifier, Model, ModelConfig, ModelKind};
use gesture_core::signal::{DEFAULT_RATE_HZ, DEFAULT_WINDOW_LEN, MAX_SHIFT};
use gesture_core::synth::{synth_dataset, synth_segment, SynthParams, UserProfile};
use gesture_core::{FeatureSet, GestureClass, Recording, Sample, Scaler, Window};
use serde::Serialize;

pub type Result<T> = std::result::Result<T, String>;

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

pub fn flatten(samples: &[Sample]) -> Vec<f64> {
    samples.iter().flat_map(|s| [s.ax, s.ay, s.az]).collect()
}

fn samples(flat: &[f64]) -> Result<Vec<Sample>> {
    if !flat.len().is_multiple_of(3) || flat.is_empty() {
        return Err(format!(
            "expected a non-empty multiple of 3 values, got {}",
            flat.len()
        ));
    }
    Ok(flat
        .chunks_exact(3)
        .enumerate()
        .map(|(i, c)| Sample::new(i as u64, c[0], c[1], c[2]))
        .collect())
}

pub fn window(flat: &[f64]) -> Result<Window> {
    Window::new(samples(flat)?, DEFAULT_RATE_HZ, None).map_err(err)
}

/// A window of `class` with `MAX_SHIFT` samples of stream on each side.
pub fn synthesize(class: &str, seed: u64, amplitude: f64, noise: f64) -> Result<Vec<f64>> {
    let class: GestureClass = class.parse().map_err(err)?;
    let params = SynthParams {
        amplitude_g: amplitude,
        noise_std_g: noise,
        ..SynthParams::default().with_seed(seed)
    };
    let user = UserProfile::draw((seed % 100) as u32, &params);
    let seg = synth_segment(class, &params, &user).map_err(err)?;
    Ok(flatten(seg.samples()))
}

/// Applies one augmentation to a synthesized segment and returns the
/// resulting 100-sample window. `op` is `shift`, `amplitude` or `stretch`.
pub fn augment(segment: &[f64], op: &str, value: f64) -> Result<Vec<f64>> {
    let s = samples(segment)?;
    if s.len() != DEFAULT_WINDOW_LEN + 2 * MAX_SHIFT {
        return Err("expected a synthesized segment".into());
    }
    let ann =
        gesture_core::Annotation::new(MAX_SHIFT, MAX_SHIFT + DEFAULT_WINDOW_LEN, GestureClass::O);
    let rec = Recording::new(s, vec![ann]).map_err(err)?;
    let centered = rec
        .crop(MAX_SHIFT as isize, DEFAULT_WINDOW_LEN, None)
        .ok_or("segment too short")?;
    let out = match op {
        "shift" => temporal_shift(&rec, &ann, value.round() as isize, DEFAULT_WINDOW_LEN),
        "amplitude" => amplitude_scale(&centered, value),
        "stretch" => time_stretch(&centered, value),
        other => return Err(format!("unknown augmentation {other:?}")),
    }
    .map_err(err)?;
    Ok(flatten(out.samples()))
}

#[derive(Serialize)]
pub struct Classified {
    pub class: String,
    pub score: f64,
    pub features: Vec<(String, f64)>,
}

/// A random forest trained on a small synthetic set at construction.
pub struct Demo {
    model: Model,
    set: FeatureSet,
    scaler: Scaler,
    pub test_accuracy: f64,
}

impl Demo {
    pub fn train(seed: u64) -> Result<Self> {
        let ds = synth_dataset(20, 4, &SynthParams::default().with_seed(seed)).map_err(err)?;
        let parts = split(
            &ds,
            &SplitSpec {
                seed,
                ..SplitSpec::default()
            },
        )
        .map_err(err)?;
        let set = FeatureSet::default20();
        let rows = |idx: &[usize]| {
            let w = idx.iter().map(|&i| &ds.entries()[i].window);
            extract_matrix(w, &set).map_err(err)
        };
        let labels = |idx: &[usize]| -> Vec<usize> {
            idx.iter()
                .map(|&i| ds.entries()[i].label().index())
                .collect()
        };
        let train_raw = rows(&parts.train)?;
        let scaler = fit_scaler(&train_raw).map_err(err)?;
        let x = scaler.apply_all(&train_raw).map_err(err)?;
        let cfg = ModelConfig::default_for(ModelKind::Rf).with_seed(seed);
        let model = models::train(&cfg, &x, &labels(&parts.train)).map_err(err)?;
        let test = scaler.apply_all(&rows(&parts.test)?).map_err(err)?;
        let truth = labels(&parts.test);
        let mut correct = 0;
        for (v, &y) in test.iter().zip(&truth) {
            if model.predict(v).map_err(err)?.class.index() == y {
                correct += 1;
            }
        }
        Ok(Self {
            model,
            set,
            scaler,
            test_accuracy: correct as f64 / truth.len() as f64,
        })
    }

    pub fn classify(&self, flat: &[f64]) -> Result<Classified> {
        let w = window(flat)?;
        let raw = extract_vector(&w, &self.set).map_err(err)?;
        let p = self
            .model
            .predict(&self.scaler.apply(&raw).map_err(err)?)
            .map_err(err)?;
        Ok(Classified {
            class: p.class.to_string(),
            score: p.score,
            features: self.set.names().into_iter().zip(raw).collect(),
        })
    }
}
