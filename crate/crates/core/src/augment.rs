//! Timeseries augmentation: temporal shift, amplitude scaling, time stretch,
//! and class balancing built from them.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Entry, Origin, Provenance};
use crate::error::{Error, Result};
use crate::seed;
use crate::signal::{
    centered_start, Annotation, GestureClass, Recording, Sample, Window, FULL_SCALE_G, MAX_SHIFT,
    MIN_SHIFT,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AugmentSpec {
    /// Magnitude bounds of the temporal shift; the sign is drawn uniformly.
    pub shift_range: (usize, usize),
    pub amp_range: (f64, f64),
    pub stretch_range: (f64, f64),
    pub rng_seed: u64,
}

impl Default for AugmentSpec {
    fn default() -> Self {
        Self {
            shift_range: (MIN_SHIFT, MAX_SHIFT),
            amp_range: (0.90, 1.10),
            stretch_range: (0.95, 1.05),
            rng_seed: 0,
        }
    }
}

impl AugmentSpec {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.rng_seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let (s0, s1) = self.shift_range;
        let interval = |(lo, hi): (f64, f64)| {
            lo.is_finite() && hi.is_finite() && 0.0 < lo && lo <= hi && lo <= 1.0 && 1.0 <= hi
        };
        if s0 == 0 || s0 > s1 || !interval(self.amp_range) || !interval(self.stretch_range) {
            return Err(Error::InvalidInput(format!("augmentation spec {self:?}")));
        }
        Ok(())
    }
}

/// Crops the annotation's centered window translated by `shift` samples
/// along the parent recording. `|shift|` must lie in `[7, 15]`.
pub fn temporal_shift(
    recording: &Recording,
    annotation: &Annotation,
    shift: isize,
    window_len: usize,
) -> Result<Window> {
    let magnitude = shift.unsigned_abs();
    if !(MIN_SHIFT..=MAX_SHIFT).contains(&magnitude) {
        return Err(Error::InvalidInput(format!(
            "shift {shift} outside ±[{MIN_SHIFT}, {MAX_SHIFT}]"
        )));
    }
    shift_crop(recording, annotation, shift, window_len)
}

fn shift_crop(
    recording: &Recording,
    annotation: &Annotation,
    shift: isize,
    window_len: usize,
) -> Result<Window> {
    let index = recording
        .annotations()
        .iter()
        .position(|a| a == annotation)
        .unwrap_or(0);
    let start = centered_start(annotation, window_len) + shift;
    recording
        .crop(start, window_len, Some(annotation.class))
        .ok_or(Error::EdgeClipped {
            index,
            start: annotation.start,
            end: annotation.end,
        })
}

/// Multiplies every axis value by `factor`, saturating at full scale.
pub fn amplitude_scale(window: &Window, factor: f64) -> Result<Window> {
    if !(factor.is_finite() && factor > 0.0) {
        return Err(Error::InvalidInput(format!("amplitude factor {factor}")));
    }
    let samples = window
        .samples()
        .iter()
        .map(|s| s.map(|v| (v * factor).clamp(-FULL_SCALE_G, FULL_SCALE_G)))
        .collect();
    Window::new(samples, window.rate_hz(), window.label())
}

/// Stretches the signal in time by `factor` about the window center using
/// linear interpolation; output sample `i` reads source position
/// `c + (i - c) / factor` with `c = (L - 1) / 2`, clamped to the window
/// (edge padding). Factors above 1 slow the motion down.
pub fn time_stretch(window: &Window, factor: f64) -> Result<Window> {
    if !(factor.is_finite() && factor > 0.0) {
        return Err(Error::InvalidInput(format!("stretch factor {factor}")));
    }
    let src = window.samples();
    let last = (src.len() - 1) as f64;
    let center = last / 2.0;
    let samples = src
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let pos = (center + (i as f64 - center) / factor).clamp(0.0, last);
            let k = (pos.floor() as usize).min(src.len() - 2);
            let frac = pos - k as f64;
            let lerp = |a: f64, b: f64| if frac == 0.0 { a } else { a + (b - a) * frac };
            let (a, b) = (&src[k], &src[k + 1]);
            Sample::new(s.t, lerp(a.ax, b.ax), lerp(a.ay, b.ay), lerp(a.az, b.az))
        })
        .collect();
    Window::new(samples, window.rate_hz(), window.label())
}

#[derive(Clone, Copy, Debug)]
enum Op {
    Shift(isize),
    Amplitude(f64),
    Stretch(f64),
}

impl Op {
    fn describe(self) -> String {
        match self {
            Op::Shift(s) => format!("shift:{s:+}"),
            Op::Amplitude(f) => format!("amp:{f:.6}"),
            Op::Stretch(f) => format!("stretch:{f:.6}"),
        }
    }
}

fn apply(entry: &Entry, op: Op) -> Result<Window> {
    match op {
        Op::Shift(s) => {
            let ctx = entry.context.as_ref().ok_or_else(|| {
                Error::InvalidInput("temporal shift needs a parent stream".into())
            })?;
            temporal_shift(ctx, &ctx.annotations()[0], s, entry.window.len())
        }
        Op::Amplitude(f) => amplitude_scale(&entry.window, f),
        Op::Stretch(f) => time_stretch(&entry.window, f),
    }
}

/// Raises every class to the largest class count with augmented copies of
/// randomly chosen windows of that class, one augmentation per copy drawn
/// uniformly from the three operations. Originals are kept in order and the
/// new windows appended.
pub fn balance_classes(dataset: &Dataset, spec: &AugmentSpec) -> Result<Dataset> {
    spec.validate()?;
    if dataset.is_empty() {
        return Err(Error::EmptyInput("dataset".into()));
    }
    let counts = dataset.class_counts();
    if counts.len() < GestureClass::N_GESTURES {
        return Err(Error::InvalidInput(format!(
            "every class needs at least one window, got {counts:?}"
        )));
    }
    let target = counts.values().copied().max().unwrap_or(0);
    let mut entries = dataset.entries().to_vec();
    let mut next_id = dataset.next_id();
    for class in GestureClass::GESTURES {
        let deficit = target - counts[&class];
        if deficit == 0 {
            continue;
        }
        let pool: Vec<&Entry> = dataset
            .entries()
            .iter()
            .filter(|e| e.label() == class)
            .collect();
        let mut rng = seed::sub_rng(spec.rng_seed, "balance", class.index() as u64);
        for _ in 0..deficit {
            let parent = pool[rng.random_range(0..pool.len())];
            let n_ops = if parent.context.is_some() { 3 } else { 2 };
            let op = match rng.random_range(0..n_ops) + (3 - n_ops) {
                0 => {
                    let m = rng.random_range(spec.shift_range.0..=spec.shift_range.1) as isize;
                    Op::Shift(if rng.random_bool(0.5) { m } else { -m })
                }
                1 => Op::Amplitude(rng.random_range(spec.amp_range.0..=spec.amp_range.1)),
                _ => Op::Stretch(rng.random_range(spec.stretch_range.0..=spec.stretch_range.1)),
            };
            let window = apply(parent, op)?;
            entries.push(Entry {
                window,
                provenance: Provenance {
                    id: next_id,
                    origin: Origin::Augmented,
                    source: Some(parent.provenance.id),
                    user: parent.provenance.user,
                    seed: Some(spec.rng_seed),
                    op: Some(op.describe()),
                },
                context: None,
            });
            next_id += 1;
        }
    }
    Dataset::new(entries, dataset.seed())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{extract_annotated_with_margin, Axis};
    use crate::synth::{synth_dataset, SynthParams};

    fn ramp_recording(n: usize) -> Recording {
        let samples = (0..n as u64)
            .map(|t| Sample::new(t, (t as f64 * 0.01).sin(), t as f64 * 1e-3, 1.0))
            .collect();
        Recording::new(samples, vec![Annotation::new(100, 200, GestureClass::X)]).unwrap()
    }

    fn mean(x: &[f64]) -> f64 {
        x.iter().sum::<f64>() / x.len() as f64
    }

    fn var(x: &[f64]) -> f64 {
        let m = mean(x);
        x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / x.len() as f64
    }

    #[test]
    fn shift_translates_crop() {
        let r = ramp_recording(400);
        let a = r.annotations()[0];
        let w = temporal_shift(&r, &a, 10, 100).unwrap();
        assert_eq!(w.samples()[0].t, 110);
        assert_eq!(w.samples()[99].t, 209);
        assert_eq!(w.label(), Some(GestureClass::X));
    }

    #[test]
    fn zero_shift_is_rejected() {
        let r = ramp_recording(400);
        assert!(temporal_shift(&r, &r.annotations()[0], 0, 100).is_err());
        assert!(temporal_shift(&r, &r.annotations()[0], 16, 100).is_err());
        assert!(temporal_shift(&r, &r.annotations()[0], -6, 100).is_err());
    }

    #[test]
    fn shift_past_edge_is_clipped() {
        let r = ramp_recording(205);
        assert!(matches!(
            temporal_shift(&r, &r.annotations()[0], 10, 100),
            Err(Error::EdgeClipped { .. })
        ));
    }

    #[test]
    fn shifted_window_shares_len_minus_shift_samples() {
        let r = ramp_recording(400);
        let a = r.annotations()[0];
        let base = extract_annotated_with_margin(&r, 100, 0).unwrap().remove(0);
        for s in [-15isize, -7, 7, 11, 15] {
            let w = temporal_shift(&r, &a, s, 100).unwrap();
            let ts: std::collections::HashSet<u64> = base.samples().iter().map(|s| s.t).collect();
            let shared = w.samples().iter().filter(|s| ts.contains(&s.t)).count();
            assert_eq!(shared, 100 - s.unsigned_abs());
        }
    }

    #[test]
    fn shift_inverse_recovers_window() {
        let r = ramp_recording(400);
        let a = r.annotations()[0];
        let base = extract_annotated_with_margin(&r, 100, 0).unwrap().remove(0);
        for s in [-12isize, 9] {
            let moved = Annotation::new(
                (a.start as isize + s) as usize,
                (a.end as isize + s) as usize,
                a.class,
            );
            assert_eq!(temporal_shift(&r, &moved, -s, 100).unwrap(), base);
        }
    }

    fn sample_window() -> Window {
        synth_dataset(1, 1, &SynthParams::default().with_seed(3))
            .unwrap()
            .entries()[1]
            .window
            .clone()
    }

    #[test]
    fn amplitude_identity_and_moments() {
        let w = sample_window();
        assert_eq!(amplitude_scale(&w, 1.0).unwrap(), w);
        let s = amplitude_scale(&w, 1.1).unwrap();
        for axis in Axis::ALL {
            let (a, b) = (w.channel(axis), s.channel(axis));
            assert!((mean(&b) - 1.1 * mean(&a)).abs() < 1e-9);
            assert!((var(&b) - 1.21 * var(&a)).abs() < 1e-9);
        }
        assert_eq!(s.label(), w.label());
    }

    #[test]
    fn stretch_identity_and_length() {
        let w = sample_window();
        assert_eq!(time_stretch(&w, 1.0).unwrap(), w);
        for f in [0.95, 0.97, 1.01, 1.05] {
            let s = time_stretch(&w, f).unwrap();
            assert_eq!(s.len(), w.len());
            assert_eq!(s.label(), w.label());
        }
    }

    fn zero_crossing_period(x: &[f64]) -> f64 {
        let ups: Vec<f64> = x
            .windows(2)
            .enumerate()
            .filter(|(_, w)| w[0] < 0.0 && w[1] >= 0.0)
            .map(|(i, w)| i as f64 + -w[0] / (w[1] - w[0]))
            .collect();
        (ups[ups.len() - 1] - ups[0]) / (ups.len() - 1) as f64
    }

    #[test]
    fn stretch_lengthens_period() {
        let samples = (0..100u64)
            .map(|t| {
                let v = (2.0 * std::f64::consts::PI * (t as f64 + 0.3) / 20.0).sin();
                Sample::new(t, v, 0.0, 1.0)
            })
            .collect();
        let w = Window::new(samples, 25.0, Some(GestureClass::O)).unwrap();
        let s = time_stretch(&w, 1.05).unwrap();
        // edge padding flattens the ends; measure over the interior
        let period = zero_crossing_period(&s.channel(Axis::X)[5..95]);
        assert!((period - 21.0).abs() < 0.1, "period {period}");
    }

    #[test]
    fn balancing_counts_and_determinism() {
        let full = synth_dataset(50, 1, &SynthParams::default().with_seed(8)).unwrap();
        let entries: Vec<Entry> = full
            .entries()
            .iter()
            .filter(|e| e.label() != GestureClass::X || e.provenance.id < 80)
            .cloned()
            .collect();
        let d = Dataset::new(entries, full.seed()).unwrap();
        assert_eq!(d.class_counts()[&GestureClass::X], 30);
        let spec = AugmentSpec::default().with_seed(1);
        let b = balance_classes(&d, &spec).unwrap();
        assert!(b.class_counts().values().all(|&c| c == 50));
        let augmented: Vec<_> = b
            .entries()
            .iter()
            .filter(|e| e.provenance.origin == Origin::Augmented)
            .collect();
        assert_eq!(augmented.len(), 20);
        assert!(augmented.iter().all(|e| e.label() == GestureClass::X));
        assert_eq!(&b.entries()[..d.len()], d.entries());
        assert_eq!(b, balance_classes(&d, &spec).unwrap());
        assert_eq!(balance_classes(&full, &spec).unwrap(), full);
    }
}
