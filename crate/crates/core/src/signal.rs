//! Accelerometer samples, windows, recordings and the window segmenter.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Segment length used throughout: 100 samples, 4 s at 25 Hz.
pub const DEFAULT_WINDOW_LEN: usize = 100;
pub const DEFAULT_RATE_HZ: f64 = 25.0;
/// Segmenter stride, one second at the default rate.
pub const DEFAULT_STRIDE: usize = 25;
/// Sensor full-scale bound in g.
pub const FULL_SCALE_G: f64 = 16.0;
/// Largest temporal shift applied by augmentation, in samples.
pub const MAX_SHIFT: usize = 15;
pub const MIN_SHIFT: usize = 7;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GestureClass {
    O,
    X,
    Random,
    /// Prediction-only outcome; never a ground-truth label.
    Uncertain,
}

impl GestureClass {
    pub const GESTURES: [GestureClass; 3] =
        [GestureClass::O, GestureClass::X, GestureClass::Random];
    pub const ALL: [GestureClass; 4] = [
        GestureClass::O,
        GestureClass::X,
        GestureClass::Random,
        GestureClass::Uncertain,
    ];
    pub const N_GESTURES: usize = 3;

    pub fn index(self) -> usize {
        match self {
            GestureClass::O => 0,
            GestureClass::X => 1,
            GestureClass::Random => 2,
            GestureClass::Uncertain => 3,
        }
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn is_gesture(self) -> bool {
        self != GestureClass::Uncertain
    }

    pub fn as_str(self) -> &'static str {
        match self {
            GestureClass::O => "O",
            GestureClass::X => "X",
            GestureClass::Random => "RANDOM",
            GestureClass::Uncertain => "UNC",
        }
    }
}

impl fmt::Display for GestureClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GestureClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "O" => Ok(GestureClass::O),
            "X" => Ok(GestureClass::X),
            "RANDOM" | "RAND" => Ok(GestureClass::Random),
            "UNC" | "UNCERTAIN" => Ok(GestureClass::Uncertain),
            other => Err(Error::InvalidInput(format!(
                "unknown gesture class {other:?}"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Axis::X => "X",
            Axis::Y => "Y",
            Axis::Z => "Z",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: u64,
    pub ax: f64,
    pub ay: f64,
    pub az: f64,
}

impl Sample {
    pub fn new(t: u64, ax: f64, ay: f64, az: f64) -> Self {
        Self { t, ax, ay, az }
    }

    pub fn axis(&self, axis: Axis) -> f64 {
        match axis {
            Axis::X => self.ax,
            Axis::Y => self.ay,
            Axis::Z => self.az,
        }
    }

    pub fn is_valid(&self) -> bool {
        [self.ax, self.ay, self.az]
            .iter()
            .all(|v| v.is_finite() && v.abs() <= FULL_SCALE_G)
    }

    pub(crate) fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::new(self.t, f(self.ax), f(self.ay), f(self.az))
    }
}

fn check_samples(samples: &[Sample]) -> Result<()> {
    if let Some((i, _)) = samples.iter().enumerate().find(|(_, s)| !s.is_valid()) {
        return Err(Error::InvalidInput(format!(
            "sample {i} is non-finite or beyond ±{FULL_SCALE_G} g"
        )));
    }
    if let Some(w) = samples.windows(2).find(|w| w[1].t != w[0].t + 1) {
        return Err(Error::InvalidInput(format!(
            "sample indices must increase by 1 (found {} after {})",
            w[1].t, w[0].t
        )));
    }
    Ok(())
}

/// Fixed-length triaxial segment, the unit of classification.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Window {
    samples: Vec<Sample>,
    rate_hz: f64,
    label: Option<GestureClass>,
}

impl Window {
    pub fn new(samples: Vec<Sample>, rate_hz: f64, label: Option<GestureClass>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::TooShort {
                what: "a window",
                len: samples.len(),
            });
        }
        if label == Some(GestureClass::Uncertain) {
            return Err(Error::InvalidClass(GestureClass::Uncertain));
        }
        if !(rate_hz.is_finite() && rate_hz > 0.0) {
            return Err(Error::InvalidInput(format!("sampling rate {rate_hz}")));
        }
        check_samples(&samples)?;
        Ok(Self {
            samples,
            rate_hz,
            label,
        })
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn rate_hz(&self) -> f64 {
        self.rate_hz
    }

    pub fn label(&self) -> Option<GestureClass> {
        self.label
    }

    pub fn with_label(mut self, label: Option<GestureClass>) -> Result<Self> {
        if label == Some(GestureClass::Uncertain) {
            return Err(Error::InvalidClass(GestureClass::Uncertain));
        }
        self.label = label;
        Ok(self)
    }

    pub fn channel(&self, axis: Axis) -> Vec<f64> {
        self.samples.iter().map(|s| s.axis(axis)).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotation {
    pub start: usize,
    pub end: usize,
    pub class: GestureClass,
}

impl Annotation {
    pub fn new(start: usize, end: usize, class: GestureClass) -> Self {
        Self { start, end, class }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    /// Number of samples shared with `[start, end)`.
    pub fn overlap(&self, start: usize, end: usize) -> usize {
        self.end.min(end).saturating_sub(self.start.max(start))
    }
}

/// Long unsegmented stream with gesture annotations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Recording {
    samples: Vec<Sample>,
    annotations: Vec<Annotation>,
    rate_hz: f64,
}

impl Recording {
    pub fn new(samples: Vec<Sample>, mut annotations: Vec<Annotation>) -> Result<Self> {
        check_samples(&samples)?;
        annotations.sort_by_key(|a| a.start);
        for (i, a) in annotations.iter().enumerate() {
            if a.is_empty() || a.end > samples.len() {
                return Err(Error::InvalidInput(format!(
                    "annotation {i} [{}, {}) out of bounds for {} samples",
                    a.start,
                    a.end,
                    samples.len()
                )));
            }
            if !a.class.is_gesture() {
                return Err(Error::InvalidClass(a.class));
            }
        }
        if let Some(w) = annotations.windows(2).find(|w| w[1].start < w[0].end) {
            return Err(Error::InvalidInput(format!(
                "annotations [{}, {}) and [{}, {}) overlap",
                w[0].start, w[0].end, w[1].start, w[1].end
            )));
        }
        Ok(Self {
            samples,
            annotations,
            rate_hz: DEFAULT_RATE_HZ,
        })
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn annotations(&self) -> &[Annotation] {
        &self.annotations
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn rate_hz(&self) -> f64 {
        self.rate_hz
    }

    /// Copies `[start, start + len)` into a window, or `None` when out of bounds.
    pub fn crop(&self, start: isize, len: usize, label: Option<GestureClass>) -> Option<Window> {
        if start < 0 || start as usize + len > self.samples.len() {
            return None;
        }
        let start = start as usize;
        Window::new(
            self.samples[start..start + len].to_vec(),
            self.rate_hz,
            label,
        )
        .ok()
    }

    /// Auto-label for the span `[start, end)`: the class of the annotation it
    /// covers by at least 75% of that annotation's length, otherwise Random.
    pub fn label_for_span(&self, start: usize, end: usize) -> GestureClass {
        self.annotations
            .iter()
            .filter(|a| 4 * a.overlap(start, end) >= 3 * a.len())
            // largest covered fraction wins; earlier annotation on ties
            .max_by(|a, b| {
                let fa = a.overlap(start, end) * b.len();
                let fb = b.overlap(start, end) * a.len();
                fa.cmp(&fb).then(b.start.cmp(&a.start))
            })
            .map_or(GestureClass::Random, |a| a.class)
    }
}

/// Number of windows `segment_stream` yields.
pub fn window_count(n: usize, window_len: usize, stride: usize) -> usize {
    if n < window_len || stride == 0 {
        0
    } else {
        (n - window_len) / stride + 1
    }
}

/// Slides a `window_len` window over the recording every `stride` samples.
pub fn segment_stream(
    recording: &Recording,
    window_len: usize,
    stride: usize,
) -> Result<Vec<Window>> {
    if window_len < 2 || stride == 0 {
        return Err(Error::InvalidInput(format!(
            "window_len {window_len} must be >= 2 and stride {stride} >= 1"
        )));
    }
    if recording.len() < window_len {
        return Err(Error::EmptyInput(format!(
            "recording has {} samples, window needs {window_len}",
            recording.len()
        )));
    }
    let count = window_count(recording.len(), window_len, stride);
    Ok((0..count)
        .map(|k| {
            let start = k * stride;
            let label = recording.label_for_span(start, start + window_len);
            Window {
                samples: recording.samples[start..start + window_len].to_vec(),
                rate_hz: recording.rate_hz,
                label: Some(label),
            }
        })
        .collect())
}

/// First sample of the window centered on the annotation midpoint.
pub fn centered_start(annotation: &Annotation, window_len: usize) -> isize {
    let mid = (annotation.start + annotation.end) / 2;
    mid as isize - (window_len / 2) as isize
}

/// One window per annotation, centered on its midpoint.
///
/// The window plus `MAX_SHIFT` samples on each side must lie inside the
/// recording so that every extracted gesture can later be shifted by the
/// augmentation stage.
pub fn extract_annotated(recording: &Recording, window_len: usize) -> Result<Vec<Window>> {
    extract_annotated_with_margin(recording, window_len, MAX_SHIFT)
}

pub fn extract_annotated_with_margin(
    recording: &Recording,
    window_len: usize,
    margin: usize,
) -> Result<Vec<Window>> {
    if window_len < 2 {
        return Err(Error::InvalidInput(format!(
            "window_len {window_len} must be >= 2"
        )));
    }
    recording
        .annotations
        .iter()
        .enumerate()
        .map(|(index, a)| {
            let start = centered_start(a, window_len);
            let clipped = Error::EdgeClipped {
                index,
                start: a.start,
                end: a.end,
            };
            if start < margin as isize || (start as usize) + window_len + margin > recording.len() {
                return Err(clipped);
            }
            recording
                .crop(start, window_len, Some(a.class))
                .ok_or(clipped)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn flat(n: usize) -> Vec<Sample> {
        (0..n as u64)
            .map(|t| Sample::new(t, t as f64 * 1e-3, 0.0, 1.0))
            .collect()
    }

    fn rec(n: usize, anns: Vec<Annotation>) -> Recording {
        Recording::new(flat(n), anns).unwrap()
    }

    #[test]
    fn single_window_boundary() {
        let w = segment_stream(&rec(100, vec![]), 100, 25).unwrap();
        assert_eq!(w.len(), 1);
    }

    #[test]
    fn five_windows_at_stride_offsets() {
        let w = segment_stream(&rec(200, vec![]), 100, 25).unwrap();
        let starts: Vec<u64> = w.iter().map(|w| w.samples()[0].t).collect();
        assert_eq!(starts, vec![0, 25, 50, 75, 100]);
    }

    #[test]
    fn short_recording_is_empty_input() {
        assert!(matches!(
            segment_stream(&rec(99, vec![]), 100, 25),
            Err(Error::EmptyInput(_))
        ));
    }

    #[test]
    fn o_span_labels_match_brute_force() {
        let r = rec(300, vec![Annotation::new(50, 150, GestureClass::O)]);
        let windows = segment_stream(&r, 100, 25).unwrap();
        for (k, w) in windows.iter().enumerate() {
            let start = k * 25;
            let shared = (start..start + 100)
                .filter(|i| (50..150).contains(i))
                .count();
            let expect = if shared as f64 >= 0.75 * 100.0 {
                GestureClass::O
            } else {
                GestureClass::Random
            };
            assert_eq!(w.label(), Some(expect), "window at {start}");
        }
        // offsets 25, 50, 75 share 75, 100, 75 samples
        let labels: Vec<_> = windows.iter().map(|w| w.label().unwrap()).collect();
        assert_eq!(
            labels,
            vec![
                GestureClass::Random,
                GestureClass::O,
                GestureClass::O,
                GestureClass::O,
                GestureClass::Random,
                GestureClass::Random,
                GestureClass::Random,
                GestureClass::Random,
                GestureClass::Random
            ]
        );
    }

    #[test]
    fn extract_exact_fit() {
        let r = rec(400, vec![Annotation::new(100, 200, GestureClass::X)]);
        let w = extract_annotated(&r, 100).unwrap();
        assert_eq!(w[0].samples()[0].t, 100);
        assert_eq!(w[0].samples()[99].t, 199);
        assert_eq!(w[0].label(), Some(GestureClass::X));
    }

    #[test]
    fn extract_centers_short_span() {
        let r = rec(400, vec![Annotation::new(100, 180, GestureClass::O)]);
        let w = extract_annotated(&r, 100).unwrap();
        assert_eq!(w[0].samples()[0].t, 90);
        assert_eq!(w[0].samples()[99].t, 189);
    }

    #[test]
    fn extract_near_edge_is_clipped() {
        let r = rec(120, vec![Annotation::new(10, 90, GestureClass::O)]);
        assert!(matches!(
            extract_annotated(&r, 100),
            Err(Error::EdgeClipped {
                index: 0,
                start: 10,
                end: 90
            })
        ));
    }

    #[test]
    fn overlapping_annotations_rejected() {
        let err = Recording::new(
            flat(300),
            vec![
                Annotation::new(0, 100, GestureClass::O),
                Annotation::new(90, 190, GestureClass::X),
            ],
        );
        assert!(err.is_err());
    }

    #[test]
    fn uncertain_is_not_a_label() {
        assert!(Window::new(flat(10), 25.0, Some(GestureClass::Uncertain)).is_err());
    }

    proptest! {
        #[test]
        fn count_formula_and_contiguity(n in 2usize..600, l in 2usize..150, stride in 1usize..60) {
            prop_assume!(n >= l);
            let r = rec(n, vec![]);
            let w = segment_stream(&r, l, stride).unwrap();
            prop_assert_eq!(w.len(), (n - l) / stride + 1);
            for (k, win) in w.iter().enumerate() {
                prop_assert_eq!(win.samples(), &r.samples()[k * stride..k * stride + l]);
            }
        }

        #[test]
        fn labels_agree_with_overlap_scan(
            spans in proptest::collection::vec((0usize..3, 20usize..140, 0usize..60), 1..5),
            stride in 1usize..40,
        ) {
            let mut anns = Vec::new();
            let mut cursor = 0;
            for (c, len, gap) in spans {
                let start = cursor + gap;
                anns.push(Annotation::new(start, start + len, GestureClass::GESTURES[c]));
                cursor = start + len;
            }
            let n = cursor + 50;
            let r = rec(n, anns.clone());
            let windows = segment_stream(&r, 100.min(n), stride).unwrap();
            let l = 100.min(n);
            for (k, w) in windows.iter().enumerate() {
                let start = k * stride;
                let mut best: Option<(f64, usize)> = None;
                for (i, a) in anns.iter().enumerate() {
                    let shared = (start..start + l).filter(|t| (a.start..a.end).contains(t)).count();
                    let frac = shared as f64 / a.len() as f64;
                    if frac >= 0.75 && best.map_or(true, |(f, _)| frac > f) {
                        best = Some((frac, i));
                    }
                }
                let expect = best.map_or(GestureClass::Random, |(_, i)| anns[i].class);
                prop_assert_eq!(w.label(), Some(expect));
            }
        }
    }
}
