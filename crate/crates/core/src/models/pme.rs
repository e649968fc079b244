//! Pattern matching engine: L1 prototypes with per-prototype areas of
//! influence, trained with the restricted-coulomb-energy commit/shrink rule.
//!
//! Inputs are z-scored features mapped to 8-bit components
//! (`clamp(round(128 + gain · z), 0, 255)`), so distances and areas of
//! influence are integers, as on pattern-matching hardware. Shrinking an
//! area to `distance − 1` is the integer form of `distance − ε`.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::tensor::{Tensor, TensorData, TensorMap};
use super::{Footprint, OpCount, Prediction};
use crate::error::{Error, Result};
use crate::seed;
use crate::signal::GestureClass;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PmeConfig {
    pub aif_min: u16,
    pub aif_max: u16,
    pub max_neurons: usize,
    pub max_epochs: usize,
    /// Component units per standard deviation of a scaled feature.
    pub gain: f64,
    pub seed: u64,
}

impl Default for PmeConfig {
    fn default() -> Self {
        Self {
            aif_min: 25,
            aif_max: 400,
            max_neurons: 128,
            max_epochs: 5,
            gain: 24.0,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Prototype {
    pub center: Vec<u8>,
    pub class: GestureClass,
    pub aif: u16,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PmeModel {
    pub config: PmeConfig,
    pub dim: usize,
    pub prototypes: Vec<Prototype>,
}

/// Trained model plus training status.
#[derive(Clone, Debug)]
pub struct PmeTraining {
    pub model: PmeModel,
    /// Set when commits were refused because `max_neurons` was reached.
    pub capacity_exhausted: bool,
    pub epochs: usize,
    pub converged: bool,
}

pub fn l1(a: &[u8], b: &[u8]) -> u32 {
    a.iter()
        .zip(b)
        .map(|(x, y)| u32::from(x.abs_diff(*y)))
        .sum()
}

impl PmeModel {
    pub fn quantize(&self, v: &[f64]) -> Result<Vec<u8>> {
        quantize_with(self.config.gain, self.dim, v)
    }

    /// Nearest firing prototype for an already quantized input.
    pub fn classify_components(&self, q: &[u8]) -> Prediction {
        let mut best: Option<(u32, &Prototype)> = None;
        for p in &self.prototypes {
            let d = l1(q, &p.center);
            if d <= u32::from(p.aif) && best.map_or(true, |(bd, _)| d < bd) {
                best = Some((d, p));
            }
        }
        match best {
            Some((d, p)) => Prediction {
                class: p.class,
                score: 1.0 - f64::from(d) / f64::from(p.aif),
            },
            None => Prediction {
                class: GestureClass::Uncertain,
                score: 0.0,
            },
        }
    }

    pub fn tensors(&self) -> TensorMap {
        let n = self.prototypes.len();
        let mut m = TensorMap::default();
        m.insert(
            "centers",
            Tensor::new(
                vec![n, self.dim],
                TensorData::U8(
                    self.prototypes
                        .iter()
                        .flat_map(|p| p.center.iter().copied())
                        .collect(),
                ),
            ),
        );
        m.insert(
            "aif",
            Tensor::new(
                vec![n],
                TensorData::U16(self.prototypes.iter().map(|p| p.aif).collect()),
            ),
        );
        m.insert(
            "class",
            Tensor::new(
                vec![n],
                TensorData::U8(
                    self.prototypes
                        .iter()
                        .map(|p| p.class.index() as u8)
                        .collect(),
                ),
            ),
        );
        m
    }

    pub fn from_tensors(config: PmeConfig, m: &TensorMap) -> Result<Self> {
        let shape = m.shape("centers")?;
        let (n, dim) = match shape {
            [n, d] => (*n, *d),
            _ => return Err(Error::Format(format!("centers shape {shape:?}"))),
        };
        let centers = m.u8("centers")?;
        let aif = m.u16("aif")?;
        let class = m.u8("class")?;
        if aif.len() != n || class.len() != n {
            return Err(Error::Format("prototype tensors disagree in length".into()));
        }
        let prototypes = (0..n)
            .map(|i| {
                let class = GestureClass::from_index(class[i] as usize)
                    .filter(|c| c.is_gesture())
                    .ok_or_else(|| Error::Format(format!("prototype class {}", class[i])))?;
                Ok(Prototype {
                    center: centers[i * dim..(i + 1) * dim].to_vec(),
                    class,
                    aif: aif[i],
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            config,
            dim,
            prototypes,
        })
    }

    pub fn footprint(&self) -> Footprint {
        Footprint {
            flash_bytes: self.tensors().byte_len() as u64,
            // quantized input, running distance, best distance and index
            ram_bytes: (self.dim + 4 + 4 + 2) as u64,
        }
    }

    /// Per prototype: |a − b| and accumulate per component (3 ops), then
    /// the area test and the best-distance test. Input quantization costs
    /// a multiply-add and two clamps per component.
    pub fn op_count(&self) -> OpCount {
        let d = self.dim as u64;
        let p = self.prototypes.len() as u64;
        OpCount(4 * d + p * (3 * d + 2))
    }
}

fn quantize_with(gain: f64, dim: usize, v: &[f64]) -> Result<Vec<u8>> {
    if v.len() != dim {
        return Err(Error::Shape {
            expected: dim,
            got: v.len(),
        });
    }
    Ok(v.iter()
        .map(|z| (128.0 + gain * z).round().clamp(0.0, 255.0) as u8)
        .collect())
}

/// Commit/shrink training over at most `max_epochs` passes, visiting the
/// samples in a seeded random order each pass; stops early after a pass
/// without commits or shrinks.
pub fn pme_train(x: &[Vec<f64>], y: &[usize], cfg: &PmeConfig) -> Result<PmeTraining> {
    if x.is_empty() || x.len() != y.len() {
        return Err(Error::Shape {
            expected: x.len(),
            got: y.len(),
        });
    }
    if cfg.aif_min == 0 || cfg.aif_min > cfg.aif_max || cfg.max_neurons == 0 {
        return Err(Error::InvalidInput(format!("PME config {cfg:?}")));
    }
    for c in 0..GestureClass::N_GESTURES {
        if !y.contains(&c) {
            return Err(Error::InvalidInput(format!(
                "no training sample of class {c}"
            )));
        }
    }
    let dim = x[0].len();
    let q: Vec<Vec<u8>> = x
        .iter()
        .map(|v| quantize_with(cfg.gain, dim, v))
        .collect::<Result<_>>()?;
    let classes: Vec<GestureClass> = y
        .iter()
        .map(|&c| GestureClass::from_index(c).filter(|c| c.is_gesture()))
        .collect::<Option<_>>()
        .ok_or_else(|| Error::InvalidInput("label outside the gesture classes".into()))?;

    let mut protos: Vec<Prototype> = Vec::new();
    let mut capacity_exhausted = false;
    let mut order: Vec<usize> = (0..x.len()).collect();
    let mut rng = seed::sub_rng(cfg.seed, "pme", 0);
    let mut epochs = 0;
    let mut converged = false;
    while epochs < cfg.max_epochs {
        epochs += 1;
        order.shuffle(&mut rng);
        let mut changed = false;
        for &i in &order {
            let (sample, class) = (&q[i], classes[i]);
            let mut covered = false;
            for p in protos.iter_mut() {
                let d = l1(sample, &p.center);
                if d > u32::from(p.aif) {
                    continue;
                }
                if p.class == class {
                    covered = true;
                } else {
                    let shrunk = d.saturating_sub(1).max(u32::from(cfg.aif_min)) as u16;
                    if shrunk < p.aif {
                        p.aif = shrunk;
                        changed = true;
                    }
                }
            }
            if covered {
                continue;
            }
            if protos.len() >= cfg.max_neurons {
                capacity_exhausted = true;
                continue;
            }
            let nearest_other = protos
                .iter()
                .filter(|p| p.class != class)
                .map(|p| l1(sample, &p.center))
                .min()
                .unwrap_or(u32::from(cfg.aif_max));
            let aif = nearest_other.clamp(u32::from(cfg.aif_min), u32::from(cfg.aif_max)) as u16;
            protos.push(Prototype {
                center: sample.clone(),
                class,
                aif,
            });
            changed = true;
        }
        if !changed {
            converged = true;
            break;
        }
    }
    Ok(PmeTraining {
        model: PmeModel {
            config: cfg.clone(),
            dim,
            prototypes: protos,
        },
        capacity_exhausted,
        epochs,
        converged,
    })
}

pub fn pme_classify(model: &PmeModel, v: &[f64]) -> Result<Prediction> {
    Ok(model.classify_components(&model.quantize(v)?))
}
