//! The four classifiers behind one contract, plus int8 quantization of the
//! network and footprint/op-count estimates.
//!
//! Every model consumes scaled feature vectors and returns a [`Prediction`].
//! Parameters are held at storage precision (f32 or integer) and inference
//! widens them to f64, so a model read back from its file predicts
//! bit-identically.
//!
//! Op counts are worst-case per inference: a multiply-accumulate counts 2,
//! every add, compare, branch, abs, division, `exp` or `tanh` counts 1.

pub mod bonsai;
pub mod envelope;
pub mod forest;
pub mod nn;
pub mod pme;
pub mod quant;
pub mod tensor;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::GestureClass;

pub use bonsai::{BonsaiConfig, BonsaiModel};
pub use envelope::ModelFile;
pub use forest::{RfConfig, RfModel};
pub use nn::{NnConfig, NnModel};
pub use pme::{PmeConfig, PmeModel};
pub use quant::QuantizedNnModel;
pub use tensor::{Tensor, TensorData, TensorMap};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub class: GestureClass,
    pub score: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Footprint {
    pub flash_bytes: u64,
    pub ram_bytes: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct OpCount(pub u64);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Pme,
    Rf,
    Bonsai,
    Nn,
    NnInt8,
}

impl ModelKind {
    /// The trainable kinds; `NnInt8` is derived from a trained network.
    pub const TRAINABLE: [ModelKind; 4] = [
        ModelKind::Pme,
        ModelKind::Rf,
        ModelKind::Bonsai,
        ModelKind::Nn,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Pme => "pme",
            ModelKind::Rf => "rf",
            ModelKind::Bonsai => "bonsai",
            ModelKind::Nn => "nn",
            ModelKind::NnInt8 => "nn-int8",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "pme" => ModelKind::Pme,
            "rf" | "forest" => ModelKind::Rf,
            "bonsai" => ModelKind::Bonsai,
            "nn" => ModelKind::Nn,
            "nn-int8" | "int8" => ModelKind::NnInt8,
            _ => return Err(Error::InvalidInput(format!("unknown model kind {s:?}"))),
        })
    }
}

pub trait Classifier {
    fn kind(&self) -> ModelKind;
    fn input_dim(&self) -> usize;
    fn predict(&self, v: &[f64]) -> Result<Prediction>;
    fn footprint(&self) -> Footprint;
    fn op_count(&self) -> OpCount;
    fn tensors(&self) -> TensorMap;
}

/// Hyperparameters per kind; also the `training_config` of a model file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ModelConfig {
    Pme(PmeConfig),
    Rf(RfConfig),
    Bonsai(BonsaiConfig),
    Nn(NnConfig),
    NnInt8(NnConfig),
}

impl ModelConfig {
    pub fn default_for(kind: ModelKind) -> Self {
        match kind {
            ModelKind::Pme => ModelConfig::Pme(PmeConfig::default()),
            ModelKind::Rf => ModelConfig::Rf(RfConfig::default()),
            ModelKind::Bonsai => ModelConfig::Bonsai(BonsaiConfig::default()),
            ModelKind::Nn => ModelConfig::Nn(NnConfig::default()),
            ModelKind::NnInt8 => ModelConfig::NnInt8(NnConfig::default()),
        }
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            ModelConfig::Pme(_) => ModelKind::Pme,
            ModelConfig::Rf(_) => ModelKind::Rf,
            ModelConfig::Bonsai(_) => ModelKind::Bonsai,
            ModelConfig::Nn(_) => ModelKind::Nn,
            ModelConfig::NnInt8(_) => ModelKind::NnInt8,
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            ModelConfig::Pme(c) => c.seed,
            ModelConfig::Rf(c) => c.seed,
            ModelConfig::Bonsai(c) => c.seed,
            ModelConfig::Nn(c) | ModelConfig::NnInt8(c) => c.seed,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        match &mut self {
            ModelConfig::Pme(c) => c.seed = seed,
            ModelConfig::Rf(c) => c.seed = seed,
            ModelConfig::Bonsai(c) => c.seed = seed,
            ModelConfig::Nn(c) | ModelConfig::NnInt8(c) => c.seed = seed,
        }
        self
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Model {
    Pme(PmeModel),
    Rf(RfModel),
    Bonsai(BonsaiModel),
    Nn(NnModel),
    NnInt8(QuantizedNnModel),
}

impl Model {
    fn inner(&self) -> &dyn Classifier {
        match self {
            Model::Pme(m) => m,
            Model::Rf(m) => m,
            Model::Bonsai(m) => m,
            Model::Nn(m) => m,
            Model::NnInt8(m) => m,
        }
    }

    /// Configuration that reproduces this model, including inference
    /// scalars such as the confidence threshold.
    pub fn config(&self) -> ModelConfig {
        match self {
            Model::Pme(m) => ModelConfig::Pme(m.config.clone()),
            Model::Rf(m) => ModelConfig::Rf(m.config.clone()),
            Model::Bonsai(m) => ModelConfig::Bonsai(m.config.clone()),
            Model::Nn(m) => ModelConfig::Nn(m.config.clone()),
            Model::NnInt8(m) => ModelConfig::NnInt8(m.config.clone()),
        }
    }

    pub fn from_tensors(config: &ModelConfig, params: &TensorMap) -> Result<Self> {
        Ok(match config {
            ModelConfig::Pme(c) => Model::Pme(PmeModel::from_tensors(c.clone(), params)?),
            ModelConfig::Rf(c) => Model::Rf(RfModel::from_tensors(c.clone(), params)?),
            ModelConfig::Bonsai(c) => Model::Bonsai(BonsaiModel::from_tensors(c.clone(), params)?),
            ModelConfig::Nn(c) => Model::Nn(NnModel::from_tensors(c.clone(), params)?),
            ModelConfig::NnInt8(c) => {
                Model::NnInt8(QuantizedNnModel::from_tensors(c.clone(), params)?)
            }
        })
    }

    pub fn predict_all(&self, rows: &[Vec<f64>]) -> Result<Vec<Prediction>> {
        rows.iter().map(|r| self.predict(r)).collect()
    }
}

impl Classifier for Model {
    fn kind(&self) -> ModelKind {
        self.inner().kind()
    }
    fn input_dim(&self) -> usize {
        self.inner().input_dim()
    }
    fn predict(&self, v: &[f64]) -> Result<Prediction> {
        self.inner().predict(v)
    }
    fn footprint(&self) -> Footprint {
        self.inner().footprint()
    }
    fn op_count(&self) -> OpCount {
        self.inner().op_count()
    }
    fn tensors(&self) -> TensorMap {
        self.inner().tensors()
    }
}

impl Classifier for PmeModel {
    fn kind(&self) -> ModelKind {
        ModelKind::Pme
    }
    fn input_dim(&self) -> usize {
        self.dim
    }
    fn predict(&self, v: &[f64]) -> Result<Prediction> {
        pme::pme_classify(self, v)
    }
    fn footprint(&self) -> Footprint {
        PmeModel::footprint(self)
    }
    fn op_count(&self) -> OpCount {
        PmeModel::op_count(self)
    }
    fn tensors(&self) -> TensorMap {
        PmeModel::tensors(self)
    }
}

/// Trains one model. `NnInt8` trains the float network and quantizes it
/// with the training rows as calibration data.
pub fn train(config: &ModelConfig, x: &[Vec<f64>], y: &[usize]) -> Result<Model> {
    Ok(match config {
        ModelConfig::Pme(c) => Model::Pme(pme::pme_train(x, y, c)?.model),
        ModelConfig::Rf(c) => Model::Rf(forest::rf_train(x, y, c)?),
        ModelConfig::Bonsai(c) => Model::Bonsai(bonsai::bonsai_train(x, y, c)?),
        ModelConfig::Nn(c) => Model::Nn(nn::nn_train(x, y, c)?),
        ModelConfig::NnInt8(c) => {
            let float = nn::nn_train(x, y, c)?;
            Model::NnInt8(quant::quantize_nn(&float, x)?)
        }
    })
}

pub fn model_footprint(model: &dyn Classifier) -> Footprint {
    model.footprint()
}

/// Checks a training matrix: non-empty, rectangular, finite, labels in the
/// gesture classes. Returns the input dimension.
pub(crate) fn check_training(x: &[Vec<f64>], y: &[usize]) -> Result<usize> {
    if x.is_empty() {
        return Err(Error::EmptyInput("training matrix".into()));
    }
    if x.len() != y.len() {
        return Err(Error::Shape {
            expected: x.len(),
            got: y.len(),
        });
    }
    let dim = x[0].len();
    if dim == 0 {
        return Err(Error::EmptyInput("feature vector".into()));
    }
    for row in x {
        if row.len() != dim {
            return Err(Error::Shape {
                expected: dim,
                got: row.len(),
            });
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite feature value".into()));
        }
    }
    if let Some(c) = y.iter().find(|&&c| c >= GestureClass::N_GESTURES) {
        return Err(Error::InvalidInput(format!(
            "label {c} outside the gesture classes"
        )));
    }
    Ok(dim)
}

pub(crate) fn check_dim(expected: usize, v: &[f64]) -> Result<()> {
    if v.len() != expected {
        return Err(Error::Shape {
            expected,
            got: v.len(),
        });
    }
    Ok(())
}

pub(crate) fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|z| (z - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// First index of the maximum.
pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

pub(crate) fn gesture(index: usize) -> GestureClass {
    GestureClass::GESTURES[index]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kind_names_round_trip() {
        for k in [
            ModelKind::Pme,
            ModelKind::Rf,
            ModelKind::Bonsai,
            ModelKind::Nn,
            ModelKind::NnInt8,
        ] {
            assert_eq!(k.as_str().parse::<ModelKind>().unwrap(), k);
            assert_eq!(serde_json::to_string(&k).unwrap(), format!("\"{k}\""));
        }
        assert!("svm".parse::<ModelKind>().is_err());
    }

    #[test]
    fn config_is_tagged_by_kind() {
        let c = ModelConfig::default_for(ModelKind::Rf).with_seed(9);
        let json = serde_json::to_string(&c).unwrap();
        assert!(json.starts_with("{\"kind\":\"rf\""));
        assert_eq!(serde_json::from_str::<ModelConfig>(&json).unwrap(), c);
        assert_eq!(c.seed(), 9);
    }

    #[test]
    fn argmax_takes_first_maximum() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0]), 1);
        let p = softmax(&[1.0, 2.0, 3.0]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn training_checks() {
        assert!(matches!(
            check_training(&[], &[]),
            Err(Error::EmptyInput(_))
        ));
        assert!(check_training(&[vec![1.0], vec![1.0, 2.0]], &[0, 1]).is_err());
        assert!(check_training(&[vec![f64::NAN]], &[0]).is_err());
        assert!(check_training(&[vec![1.0]], &[3]).is_err());
        assert_eq!(check_training(&[vec![1.0, 2.0]], &[2]).unwrap(), 2);
    }
}
