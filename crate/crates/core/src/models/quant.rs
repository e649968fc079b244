//! Post-training int8 quantization of the folded network.
//!
//! Weights use one symmetric scale per tensor (`max|w| / 127`), biases are
//! int32 in the accumulator scale, activations are affine int8 with scale
//! and zero point from the calibration range (widened to include 0).
//! Each layer requantizes its int32 accumulator with one multiplier
//! `s_in · s_w / s_out`; the last layer dequantizes to float logits.
//! Only the multipliers and zero points are stored, next to the integer
//! tensors.

use super::nn::{decide, dense_ops, NnConfig, NnModel, SOFTMAX_OPS};
use super::tensor::{Tensor, TensorData, TensorMap};
use super::{check_dim, softmax, Classifier, Footprint, ModelKind, OpCount, Prediction};
use crate::error::{Error, Result};

pub const MIN_CALIBRATION: usize = 100;

/// Symmetric per-tensor quantization. An all-zero tensor gets scale 1.
pub fn quantize_symmetric(w: &[f64]) -> (Vec<i8>, f64) {
    let max = w.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let scale = if max > 0.0 { max / 127.0 } else { 1.0 };
    let q = w
        .iter()
        .map(|v| (v / scale).round().clamp(-127.0, 127.0) as i8)
        .collect();
    (q, scale)
}

/// Scale and zero point mapping `[min, max] ∪ {0}` onto `[-128, 127]`.
pub fn affine_params(min: f64, max: f64) -> (f64, i8) {
    let (lo, hi) = (min.min(0.0), max.max(0.0));
    let scale = if hi > lo { (hi - lo) / 255.0 } else { 1.0 };
    let zp = (-128.0 - lo / scale).round().clamp(-128.0, 127.0) as i8;
    (scale, zp)
}

fn quantize_activation(v: f64, scale: f64, zp: i8) -> i8 {
    (v / scale + f64::from(zp)).round().clamp(-128.0, 127.0) as i8
}

#[derive(Clone, Debug, PartialEq)]
pub struct QLayer {
    pub inp: usize,
    pub out: usize,
    pub w: Vec<i8>,
    pub b: Vec<i32>,
    /// Requantization multiplier, or the dequantization scale on the last
    /// layer.
    pub multiplier: f32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuantizedNnModel {
    pub config: NnConfig,
    pub input_scale: f32,
    /// Input zero point followed by each hidden layer's output zero point.
    pub zero_points: Vec<i8>,
    pub layers: Vec<QLayer>,
}

pub fn quantize_nn(model: &NnModel, calibration: &[Vec<f64>]) -> Result<QuantizedNnModel> {
    if calibration.len() < MIN_CALIBRATION {
        return Err(Error::InvalidInput(format!(
            "calibration needs at least {MIN_CALIBRATION} vectors, got {}",
            calibration.len()
        )));
    }
    let dim = model.input_dim();
    let folded = model.folded();
    // activation ranges at every layer input, from the float model
    let n_layers = folded.len();
    let mut ranges = vec![(f64::INFINITY, f64::NEG_INFINITY); n_layers];
    for v in calibration {
        check_dim(dim, v)?;
        let mut a = v.clone();
        for (i, l) in folded.iter().enumerate() {
            for x in &a {
                ranges[i].0 = ranges[i].0.min(*x);
                ranges[i].1 = ranges[i].1.max(*x);
            }
            a = l.apply(&a);
            a.iter_mut().for_each(|x| *x = x.max(0.0));
        }
    }
    let act: Vec<(f64, i8)> = ranges
        .iter()
        .map(|&(lo, hi)| affine_params(lo, hi))
        .collect();
    // scales are stored as f32; derive everything from the stored values
    let act_scale: Vec<f64> = act.iter().map(|(s, _)| f64::from(*s as f32)).collect();
    let layers = folded
        .iter()
        .enumerate()
        .map(|(i, l)| {
            let (w, ws) = quantize_symmetric(&l.w);
            let acc_scale = act_scale[i] * ws;
            let b = l
                .b
                .iter()
                .map(|v| {
                    (v / acc_scale)
                        .round()
                        .clamp(f64::from(i32::MIN), f64::from(i32::MAX)) as i32
                })
                .collect();
            let multiplier = if i + 1 < n_layers {
                acc_scale / act_scale[i + 1]
            } else {
                acc_scale
            };
            QLayer {
                inp: l.inp,
                out: l.out,
                w,
                b,
                multiplier: multiplier as f32,
            }
        })
        .collect();
    Ok(QuantizedNnModel {
        config: model.config.clone(),
        input_scale: act_scale[0] as f32,
        zero_points: act.iter().map(|(_, z)| *z).collect(),
        layers,
    })
}

impl QuantizedNnModel {
    pub fn input_dim(&self) -> usize {
        self.layers[0].inp
    }

    /// Integer forward pass; float logits from the last accumulator.
    pub fn logits(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.input_dim(), v)?;
        let scale = f64::from(self.input_scale);
        let mut a: Vec<i8> = v
            .iter()
            .map(|x| quantize_activation(*x, scale, self.zero_points[0]))
            .collect();
        let last = self.layers.len() - 1;
        for (i, l) in self.layers.iter().enumerate() {
            let zin = i32::from(self.zero_points[i]);
            let acc: Vec<i32> = (0..l.out)
                .map(|o| {
                    l.b[o]
                        + l.w[o * l.inp..(o + 1) * l.inp]
                            .iter()
                            .zip(&a)
                            .map(|(w, x)| i32::from(*w) * (i32::from(*x) - zin))
                            .sum::<i32>()
                })
                .collect();
            let m = f64::from(l.multiplier);
            if i == last {
                return Ok(acc.iter().map(|&s| f64::from(s) * m).collect());
            }
            let zout = self.zero_points[i + 1];
            a = acc
                .iter()
                .map(|&s| {
                    let q = (f64::from(s) * m).round() + f64::from(zout);
                    // ReLU in the quantized domain
                    q.clamp(f64::from(zout), 127.0) as i8
                })
                .collect();
        }
        unreachable!("network has at least one layer")
    }

    pub fn from_tensors(config: NnConfig, m: &TensorMap) -> Result<Self> {
        let multipliers = m.f32("multiplier")?;
        let mut layers = Vec::new();
        for (i, &multiplier) in multipliers.iter().enumerate() {
            let name = format!("dense{i}.w");
            let (out, inp) = match m.shape(&name)? {
                [o, n] => (*o, *n),
                s => return Err(Error::Format(format!("{name} shape {s:?}"))),
            };
            let b = m.i32(&format!("dense{i}.b"))?.to_vec();
            if b.len() != out {
                return Err(Error::Format(format!("layer {i} bias length")));
            }
            layers.push(QLayer {
                inp,
                out,
                w: m.i8(&name)?.to_vec(),
                b,
                multiplier,
            });
        }
        let zero_points = m.i8("zero_points")?.to_vec();
        if layers.is_empty() || zero_points.len() != layers.len() {
            return Err(Error::Format("quantized network tensors disagree".into()));
        }
        Ok(Self {
            config,
            input_scale: m.f32("input_scale")?.first().copied().unwrap_or(1.0),
            zero_points,
            layers,
        })
    }
}

impl Classifier for QuantizedNnModel {
    fn kind(&self) -> ModelKind {
        ModelKind::NnInt8
    }

    fn input_dim(&self) -> usize {
        QuantizedNnModel::input_dim(self)
    }

    fn predict(&self, v: &[f64]) -> Result<Prediction> {
        Ok(decide(
            &softmax(&self.logits(v)?),
            self.config.confidence_threshold,
        ))
    }

    /// int8 activations for the widest layer plus its int32 accumulators.
    fn footprint(&self) -> Footprint {
        let ram = self
            .layers
            .iter()
            .map(|l| l.inp + l.out + 4 * l.out)
            .max()
            .unwrap_or(0);
        Footprint {
            flash_bytes: self.tensors().byte_len() as u64,
            ram_bytes: ram as u64,
        }
    }

    /// Same arithmetic shape as the float network plus input quantization
    /// and per-unit requantization.
    fn op_count(&self) -> OpCount {
        let shapes: Vec<(usize, usize)> = self.layers.iter().map(|l| (l.inp, l.out)).collect();
        let hidden: usize = self.layers[..self.layers.len() - 1]
            .iter()
            .map(|l| l.out)
            .sum();
        let input = 4 * self.input_dim() as u64;
        let requant = 4 * hidden as u64 + 3 * self.layers.last().map_or(0, |l| l.out) as u64;
        OpCount(dense_ops(&shapes) + input + requant + SOFTMAX_OPS)
    }

    fn tensors(&self) -> TensorMap {
        let mut m = TensorMap::default();
        for (i, l) in self.layers.iter().enumerate() {
            m.insert(
                format!("dense{i}.w"),
                Tensor::new(vec![l.out, l.inp], TensorData::I8(l.w.clone())),
            );
            m.insert(
                format!("dense{i}.b"),
                Tensor::new(vec![l.out], TensorData::I32(l.b.clone())),
            );
        }
        m.insert(
            "multiplier",
            Tensor::f32(
                vec![self.layers.len()],
                self.layers.iter().map(|l| l.multiplier).collect(),
            ),
        );
        m.insert("input_scale", Tensor::f32(vec![1], vec![self.input_scale]));
        m.insert(
            "zero_points",
            Tensor::new(
                vec![self.zero_points.len()],
                TensorData::I8(self.zero_points.clone()),
            ),
        );
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::nn::Network;
    use crate::seed;
    use proptest::prelude::*;
    use rand::Rng;

    proptest! {
        #[test]
        fn weight_round_trip_within_half_step(w in proptest::collection::vec(-10.0f64..10.0, 1..64)) {
            let (q, s) = quantize_symmetric(&w);
            for (a, b) in w.iter().zip(&q) {
                prop_assert!((a - f64::from(*b) * s).abs() <= s / 2.0 + 1e-12);
            }
        }

        #[test]
        fn affine_range_contains_zero_exactly(lo in -50.0f64..50.0, span in 0.0f64..100.0) {
            let (s, z) = affine_params(lo, lo + span);
            prop_assert!(s > 0.0);
            // zero maps to the zero point
            prop_assert_eq!(quantize_activation(0.0, s, z), z);
        }
    }

    #[test]
    fn zero_tensor_stays_zero() {
        let (q, s) = quantize_symmetric(&[0.0; 8]);
        assert_eq!(q, vec![0i8; 8]);
        assert_eq!(s, 1.0);
    }

    #[test]
    fn small_calibration_is_rejected() {
        let net = Network::new(3, &[4], 3, 1e-3);
        let m = NnModel::from_network(&net, &NnConfig::default());
        assert!(quantize_nn(&m, &vec![vec![0.0; 3]; 99]).is_err());
    }

    #[test]
    fn tracks_float_logits() {
        let mut net = Network::new(6, &[8, 4], 3, 1e-3);
        net.init(&mut seed::rng(1));
        let m = NnModel::from_network(&net, &NnConfig::default());
        let mut rng = seed::rng(2);
        let cal: Vec<Vec<f64>> = (0..200)
            .map(|_| (0..6).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        let q = quantize_nn(&m, &cal).unwrap();
        for v in cal.iter().take(50) {
            let f = m.logits(v).unwrap();
            let g = q.logits(v).unwrap();
            for (a, b) in f.iter().zip(&g) {
                assert!((a - b).abs() < 0.1, "{f:?} vs {g:?}");
            }
        }
    }
}
