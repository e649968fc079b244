//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use gesture_core::features::{FeatureAxis, FeatureId};
use gesture_core::models::pme::PmeModel;
use gesture_core::seed::Rng;
use gesture_core::{Axis, GestureClass, Sample, Window};
use rand::Rng as _;

/// Random window; `coarse` rounds values to multiples of 0.5 to force ties.
pub fn random_window(rng: &mut Rng, len: usize, coarse: bool) -> Window {
    let offset = [
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
    ];
    let amp = rng.random_range(0.05..3.0);
    let samples = (0..len)
        .map(|t| {
            let mut v = [0.0f64; 3];
            for (k, x) in v.iter_mut().enumerate() {
                *x = offset[k] + amp * rng.random_range(-1.0..1.0);
                if coarse {
                    *x = (*x * 2.0).round() / 2.0;
                }
            }
            Sample::new(t as u64, v[0], v[1], v[2])
        })
        .collect();
    Window::new(samples, 25.0, None).unwrap()
}

pub fn channel(w: &Window, a: Axis) -> Vec<f64> {
    w.samples()
        .iter()
        .map(|s| match a {
            Axis::X => s.ax,
            Axis::Y => s.ay,
            Axis::Z => s.az,
        })
        .collect()
}

/// k-th smallest value (0-based) by counting, without sorting.
fn order_statistic(x: &[f64], k: usize) -> f64 {
    for &v in x {
        let below = x.iter().filter(|&&u| u < v).count();
        let at_or_below = x.iter().filter(|&&u| u <= v).count();
        if below <= k && k < at_or_below {
            return v;
        }
    }
    unreachable!("order statistic {k} of {} values", x.len())
}

fn percentile(x: &[f64], p: f64) -> f64 {
    let pos = p * (x.len() as f64 - 1.0);
    let lo = pos.floor();
    let frac = pos - lo;
    let a = order_statistic(x, lo as usize);
    if frac == 0.0 {
        a
    } else {
        let b = order_statistic(x, lo as usize + 1);
        a + frac * (b - a)
    }
}

fn mean(x: &[f64]) -> f64 {
    let mut s = 0.0;
    for v in x {
        s += v;
    }
    s / x.len() as f64
}

fn moment(x: &[f64], k: i32) -> f64 {
    let m = mean(x);
    let mut s = 0.0;
    for v in x {
        let d = v - m;
        let mut p = 1.0;
        for _ in 0..k {
            p *= d;
        }
        s += p;
    }
    s / x.len() as f64
}

fn first_index(x: &[f64], target: f64) -> usize {
    x.iter().position(|&v| v == target).unwrap()
}

fn min(x: &[f64]) -> f64 {
    x.iter().copied().fold(f64::INFINITY, f64::min)
}

fn max(x: &[f64]) -> f64 {
    x.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Brute-force feature value written from the definitions only.
pub fn feature(w: &Window, f: FeatureId, axis: FeatureAxis) -> f64 {
    if let FeatureAxis::Pair(a, b) = axis {
        assert_eq!(f, FeatureId::MedianCrossAxisDiff);
        return percentile(&channel(w, a), 0.5) - percentile(&channel(w, b), 0.5);
    }
    let FeatureAxis::Single(a) = axis else {
        unreachable!()
    };
    let x = channel(w, a);
    match f {
        FeatureId::Mean => mean(&x),
        FeatureId::Variance => moment(&x, 2),
        FeatureId::Kurtosis => {
            let m2 = moment(&x, 2);
            if m2 < 1e-12 {
                0.0
            } else {
                moment(&x, 4) / (m2 * m2) - 3.0
            }
        }
        FeatureId::P25 => percentile(&x, 0.25),
        FeatureId::IqrRange => percentile(&x, 0.75) - percentile(&x, 0.25),
        FeatureId::NegZeroCrossings => {
            let m = mean(&x);
            let mut n = 0;
            for i in 1..x.len() {
                if x[i - 1] - m > 0.0 && x[i] - m <= 0.0 {
                    n += 1;
                }
            }
            n as f64
        }
        FeatureId::GlobalMinMaxSum => min(&x) + max(&x),
        FeatureId::MinMaxDistance => {
            let i = first_index(&x, max(&x)) as f64;
            let j = first_index(&x, min(&x)) as f64;
            (i - j).abs()
        }
        FeatureId::GlobalP2P => max(&x) - min(&x),
        FeatureId::MedianCrossAxisDiff => unreachable!(),
    }
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

/// `|a − n| / max(|a|, |n|, floor)`.
pub fn rel_err(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Nearest firing prototype by direct scan, lower index on ties.
pub fn pme_oracle(m: &PmeModel, v: &[f64]) -> (GestureClass, f64) {
    let q: Vec<i64> = v
        .iter()
        .map(|&z| (128.0 + m.config.gain * z).round().clamp(0.0, 255.0) as i64)
        .collect();
    let mut best: Option<(i64, usize)> = None;
    for (i, p) in m.prototypes.iter().enumerate() {
        let d: i64 = p
            .center
            .iter()
            .zip(&q)
            .map(|(&c, &x)| (i64::from(c) - x).abs())
            .sum();
        if d <= i64::from(p.aif) {
            match best {
                Some((bd, _)) if bd <= d => {}
                _ => best = Some((d, i)),
            }
        }
    }
    match best {
        None => (GestureClass::Uncertain, 0.0),
        Some((d, i)) => {
            let p = &m.prototypes[i];
            (p.class, 1.0 - d as f64 / f64::from(p.aif))
        }
    }
}

/// Synthetic data run through the split, extraction and scaling steps.
pub struct Prepared {
    pub dataset: gesture_core::Dataset,
    pub split: gesture_core::eval::Split,
    pub feature_set: gesture_core::FeatureSet,
    pub scaler: gesture_core::Scaler,
    pub x_train: Vec<Vec<f64>>,
    pub y_train: Vec<usize>,
    pub x_val: Vec<Vec<f64>>,
    pub y_val: Vec<usize>,
}

impl Prepared {
    pub fn new(per_class: usize, users: usize, seed: u64) -> Self {
        use gesture_core::eval::{split, SplitSpec};
        use gesture_core::features::{extract_matrix, fit_scaler};
        use gesture_core::synth::{synth_dataset, SynthParams};
        let dataset =
            synth_dataset(per_class, users, &SynthParams::default().with_seed(seed)).unwrap();
        let split = split(
            &dataset,
            &SplitSpec {
                seed,
                ..SplitSpec::default()
            },
        )
        .unwrap();
        let feature_set = gesture_core::FeatureSet::default20();
        let raw = |idx: &[usize]| {
            let w: Vec<&Window> = idx.iter().map(|&i| &dataset.entries()[i].window).collect();
            let x = extract_matrix(w.iter().copied(), &feature_set).unwrap();
            let y: Vec<usize> = w.iter().map(|w| w.label().unwrap().index()).collect();
            (x, y)
        };
        let (xt, y_train) = raw(&split.train);
        let (xv, y_val) = raw(&split.val);
        let scaler = fit_scaler(&xt).unwrap();
        Self {
            x_train: scaler.apply_all(&xt).unwrap(),
            x_val: scaler.apply_all(&xv).unwrap(),
            y_train,
            y_val,
            scaler,
            feature_set,
            split,
            dataset,
        }
    }

    pub fn windows(&self, idx: &[usize]) -> Vec<&Window> {
        idx.iter()
            .map(|&i| &self.dataset.entries()[i].window)
            .collect()
    }
}
