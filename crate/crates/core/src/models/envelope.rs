//! Model file: a JSON envelope around the parameter tensors.
//!
//! ```json
//! { "format": "gesture-model/1", "kind": "nn", "feature_set": [...],
//!   "scaler": {...}, "params": { name: {dtype, shape, data} },
//!   "footprint": {...}, "training_config": {...}, "seed": 7 }
//! ```
//!
//! `data` is base64 of the little-endian values. Scalars needed at
//! inference (thresholds, kernel width) travel in `training_config`.
//! Output is pretty-printed with sorted tensor names, so identical models
//! give identical bytes.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Classifier, Footprint, Model, ModelConfig, ModelKind, Prediction, TensorMap};
use crate::error::{Error, Result};
use crate::features::{FeatureSet, Scaler};

pub const FORMAT: &str = "gesture-model/1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: String,
    pub kind: ModelKind,
    pub feature_set: FeatureSet,
    pub scaler: Scaler,
    pub params: TensorMap,
    pub footprint: Footprint,
    pub training_config: ModelConfig,
    pub seed: u64,
}

impl ModelFile {
    pub fn new(model: &Model, feature_set: FeatureSet, scaler: Scaler) -> Self {
        let config = model.config();
        Self {
            format: FORMAT.to_owned(),
            kind: model.kind(),
            feature_set,
            scaler,
            params: model.tensors(),
            footprint: model.footprint(),
            seed: config.seed(),
            training_config: config,
        }
    }

    pub fn model(&self) -> Result<Model> {
        if self.format != FORMAT {
            return Err(Error::Format(format!(
                "unsupported model format {:?}",
                self.format
            )));
        }
        if self.training_config.kind() != self.kind {
            return Err(Error::Format("kind and training_config disagree".into()));
        }
        let m = Model::from_tensors(&self.training_config, &self.params)?;
        if m.input_dim() != self.feature_set.len() || self.scaler.dim() != self.feature_set.len() {
            return Err(Error::Format(
                "feature set, scaler and model disagree in width".into(),
            ));
        }
        Ok(m)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// A loaded model with its feature pipeline: raw feature vectors in,
/// predictions out.
#[derive(Clone, Debug)]
pub struct Deployed {
    pub model: Model,
    pub feature_set: FeatureSet,
    pub scaler: Scaler,
}

impl Deployed {
    pub fn from_file(f: &ModelFile) -> Result<Self> {
        Ok(Self {
            model: f.model()?,
            feature_set: f.feature_set.clone(),
            scaler: f.scaler.clone(),
        })
    }

    pub fn predict_raw(&self, features: &[f64]) -> Result<Prediction> {
        self.model.predict(&self.scaler.apply(features)?)
    }
}
