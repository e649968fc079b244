//! Feature bank over accelerometer windows and z-score scaling.
//!
//! Conventions fixed here:
//! * variance and kurtosis use population moments (divide by `L`);
//!   kurtosis is the excess form `m4 / m2² − 3`, and 0 for a flat signal;
//! * percentiles interpolate linearly between order statistics at
//!   rank `p · (L − 1)`; the median is the 50th percentile;
//! * negative zero crossings are downward crossings of the window mean;
//! * min-max distance is the sample distance between the first argmax and
//!   the first argmin, while peak-to-peak is the value range.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{Axis, Window};

pub type FeatureVector = Vec<f64>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FeatureId {
    Mean,
    Variance,
    Kurtosis,
    P25,
    IqrRange,
    NegZeroCrossings,
    GlobalMinMaxSum,
    MedianCrossAxisDiff,
    MinMaxDistance,
    GlobalP2P,
}

impl FeatureId {
    pub const ALL: [FeatureId; 10] = [
        FeatureId::Mean,
        FeatureId::Variance,
        FeatureId::Kurtosis,
        FeatureId::P25,
        FeatureId::IqrRange,
        FeatureId::NegZeroCrossings,
        FeatureId::GlobalMinMaxSum,
        FeatureId::MedianCrossAxisDiff,
        FeatureId::MinMaxDistance,
        FeatureId::GlobalP2P,
    ];

    pub fn is_cross_axis(self) -> bool {
        self == FeatureId::MedianCrossAxisDiff
    }
}

/// A single accelerometer axis, or an ordered axis pair for cross-axis features.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum FeatureAxis {
    Single(Axis),
    Pair(Axis, Axis),
}

impl FeatureAxis {
    pub const PAIRS: [FeatureAxis; 3] = [
        FeatureAxis::Pair(Axis::X, Axis::Y),
        FeatureAxis::Pair(Axis::Y, Axis::Z),
        FeatureAxis::Pair(Axis::X, Axis::Z),
    ];
}

impl fmt::Display for FeatureAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FeatureAxis::Single(a) => f.write_str(a.as_str()),
            FeatureAxis::Pair(a, b) => write!(f, "{}{}", a.as_str(), b.as_str()),
        }
    }
}

impl FromStr for FeatureAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let axis = |c: char| match c.to_ascii_uppercase() {
            'X' => Ok(Axis::X),
            'Y' => Ok(Axis::Y),
            'Z' => Ok(Axis::Z),
            _ => Err(Error::InvalidInput(format!("unknown axis {s:?}"))),
        };
        let chars: Vec<char> = s.trim().chars().collect();
        match chars.as_slice() {
            [a] => Ok(FeatureAxis::Single(axis(*a)?)),
            [a, b] => Ok(FeatureAxis::Pair(axis(*a)?, axis(*b)?)),
            _ => Err(Error::InvalidInput(format!("unknown axis {s:?}"))),
        }
    }
}

impl TryFrom<String> for FeatureAxis {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<FeatureAxis> for String {
    fn from(a: FeatureAxis) -> String {
        a.to_string()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FeatureEntry {
    pub feature: FeatureId,
    pub axis: FeatureAxis,
}

impl FeatureEntry {
    pub fn new(feature: FeatureId, axis: FeatureAxis) -> Self {
        Self { feature, axis }
    }

    pub fn single(feature: FeatureId, axis: Axis) -> Self {
        Self::new(feature, FeatureAxis::Single(axis))
    }

    pub fn is_valid(&self) -> bool {
        match self.axis {
            FeatureAxis::Single(_) => !self.feature.is_cross_axis(),
            FeatureAxis::Pair(a, b) => self.feature.is_cross_axis() && a != b,
        }
    }

    /// Column name used in CSV headers, e.g. `Mean[X]`.
    pub fn name(&self) -> String {
        format!("{:?}[{}]", self.feature, self.axis)
    }
}

/// Ordered, duplicate-free list of feature entries.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<FeatureEntry>", into = "Vec<FeatureEntry>")]
pub struct FeatureSet(Vec<FeatureEntry>);

impl FeatureSet {
    pub fn new(entries: Vec<FeatureEntry>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::EmptyInput("feature set".into()));
        }
        for (i, e) in entries.iter().enumerate() {
            if !e.is_valid() {
                return Err(Error::InvalidInput(format!(
                    "entry {i} {e:?} pairs feature and axis wrongly"
                )));
            }
            if entries[..i].contains(e) {
                return Err(Error::InvalidInput(format!(
                    "duplicate feature entry {}",
                    e.name()
                )));
            }
        }
        Ok(Self(entries))
    }

    /// The 20 entries selected by the original feature search.
    pub fn default20() -> Self {
        use Axis::{X, Y, Z};
        use FeatureId::*;
        let single = |f: FeatureId, axes: &[Axis]| -> Vec<FeatureEntry> {
            axes.iter().map(|&a| FeatureEntry::single(f, a)).collect()
        };
        let e: Vec<FeatureEntry> = [
            single(Mean, &[X, Y]),
            single(Variance, &[Y, Z]),
            single(Kurtosis, &[Y]),
            single(P25, &[Y]),
            single(IqrRange, &[X, Y]),
            single(NegZeroCrossings, &[X, Y, Z]),
            single(GlobalMinMaxSum, &[X]),
            FeatureAxis::PAIRS
                .map(|p| FeatureEntry::new(MedianCrossAxisDiff, p))
                .to_vec(),
            single(MinMaxDistance, &[X, Y, Z]),
            single(GlobalP2P, &[Y, Z]),
        ]
        .concat();
        Self(e)
    }

    /// Every feature on every applicable axis or pair: 30 entries.
    pub fn pool() -> Self {
        Self(
            FeatureId::ALL
                .iter()
                .flat_map(|&f| {
                    let axes: Vec<FeatureAxis> = if f.is_cross_axis() {
                        FeatureAxis::PAIRS.to_vec()
                    } else {
                        Axis::ALL.iter().map(|&a| FeatureAxis::Single(a)).collect()
                    };
                    axes.into_iter().map(move |a| FeatureEntry::new(f, a))
                })
                .collect(),
        )
    }

    /// Resolves `default20`, `pool30`, or a JSON list of `{feature, axis}`.
    pub fn named(name: &str) -> Option<Self> {
        match name {
            "default20" | "default" => Some(Self::default20()),
            "pool30" | "pool" => Some(Self::pool()),
            _ => None,
        }
    }

    pub fn entries(&self) -> &[FeatureEntry] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn names(&self) -> Vec<String> {
        self.0.iter().map(FeatureEntry::name).collect()
    }

    pub fn subset(&self, mask: &[bool]) -> Result<Self> {
        Self::new(
            self.0
                .iter()
                .zip(mask)
                .filter(|(_, &m)| m)
                .map(|(e, _)| *e)
                .collect(),
        )
    }
}

impl TryFrom<Vec<FeatureEntry>> for FeatureSet {
    type Error = Error;
    fn try_from(v: Vec<FeatureEntry>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<FeatureSet> for Vec<FeatureEntry> {
    fn from(s: FeatureSet) -> Self {
        s.0
    }
}

/// Linear-interpolation percentile of an ascending slice, `p` in `[0, 1]`.
pub fn percentile_sorted(sorted: &[f64], p: f64) -> f64 {
    let rank = p * (sorted.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (rank - lo as f64)
}

struct Channel {
    values: Vec<f64>,
    sorted: Vec<f64>,
    mean: f64,
}

impl Channel {
    fn new(values: Vec<f64>) -> Self {
        let mut sorted = values.clone();
        sorted.sort_by(f64::total_cmp);
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        Self {
            values,
            sorted,
            mean,
        }
    }

    fn central_moment(&self, k: i32) -> f64 {
        self.values
            .iter()
            .map(|v| (v - self.mean).powi(k))
            .sum::<f64>()
            / self.values.len() as f64
    }

    fn value(&self, feature: FeatureId) -> Result<f64> {
        let x = &self.values;
        let first_extreme = |better: fn(f64, f64) -> bool| {
            x.iter()
                .enumerate()
                .fold(
                    (0, x[0]),
                    |(bi, bv), (i, &v)| if better(v, bv) { (i, v) } else { (bi, bv) },
                )
                .0
        };
        Ok(match feature {
            FeatureId::Mean => self.mean,
            FeatureId::Variance => self.central_moment(2),
            FeatureId::Kurtosis => {
                if x.len() < 4 {
                    return Err(Error::TooShort {
                        what: "kurtosis",
                        len: x.len(),
                    });
                }
                let m2 = self.central_moment(2);
                if m2 < 1e-12 {
                    0.0
                } else {
                    self.central_moment(4) / (m2 * m2) - 3.0
                }
            }
            FeatureId::P25 => percentile_sorted(&self.sorted, 0.25),
            FeatureId::IqrRange => {
                percentile_sorted(&self.sorted, 0.75) - percentile_sorted(&self.sorted, 0.25)
            }
            FeatureId::NegZeroCrossings => x
                .windows(2)
                .filter(|w| w[0] - self.mean > 0.0 && w[1] - self.mean <= 0.0)
                .count() as f64,
            FeatureId::GlobalMinMaxSum => self.sorted[0] + self.sorted[x.len() - 1],
            FeatureId::MinMaxDistance => {
                let argmax = first_extreme(|v, best| v > best);
                let argmin = first_extreme(|v, best| v < best);
                argmax.abs_diff(argmin) as f64
            }
            FeatureId::GlobalP2P => self.sorted[x.len() - 1] - self.sorted[0],
            FeatureId::MedianCrossAxisDiff => {
                unreachable!("cross-axis feature on a single channel")
            }
        })
    }

    fn median(&self) -> f64 {
        percentile_sorted(&self.sorted, 0.5)
    }
}

/// Lazily computed per-axis channels of one window.
struct Channels<'a> {
    window: &'a Window,
    cache: [Option<Channel>; 3],
}

impl<'a> Channels<'a> {
    fn new(window: &'a Window) -> Self {
        Self {
            window,
            cache: [None, None, None],
        }
    }

    fn get(&mut self, axis: Axis) -> &Channel {
        let w = self.window;
        self.cache[axis.index()].get_or_insert_with(|| Channel::new(w.channel(axis)))
    }

    fn value(&mut self, entry: &FeatureEntry) -> Result<f64> {
        if !entry.is_valid() {
            return Err(Error::InvalidInput(format!(
                "{entry:?} pairs feature and axis wrongly"
            )));
        }
        match entry.axis {
            FeatureAxis::Single(a) => self.get(a).value(entry.feature),
            FeatureAxis::Pair(a, b) => {
                let ma = self.get(a).median();
                Ok(ma - self.get(b).median())
            }
        }
    }
}

/// Value of one feature on one axis (or axis pair) of the window.
pub fn feature_value(window: &Window, feature: FeatureId, axis: FeatureAxis) -> Result<f64> {
    Channels::new(window).value(&FeatureEntry::new(feature, axis))
}

/// Feature vector of `window` in the order of `set`.
pub fn extract_vector(window: &Window, set: &FeatureSet) -> Result<FeatureVector> {
    let mut channels = Channels::new(window);
    set.entries()
        .iter()
        .enumerate()
        .map(|(index, e)| {
            channels.value(e).map_err(|source| Error::FeatureEntry {
                index,
                source: Box::new(source),
            })
        })
        .collect()
}

pub fn extract_matrix<'a>(
    windows: impl IntoIterator<Item = &'a Window>,
    set: &FeatureSet,
) -> Result<Vec<FeatureVector>> {
    windows
        .into_iter()
        .map(|w| extract_vector(w, set))
        .collect()
}

/// Per-feature z-score standardization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

/// Below this standard deviation a feature is treated as constant.
pub const MIN_FEATURE_STD: f64 = 1e-9;

impl Scaler {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, v: &[f64]) -> Result<FeatureVector> {
        if v.len() != self.dim() {
            return Err(Error::Shape {
                expected: self.dim(),
                got: v.len(),
            });
        }
        Ok(v.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(x, (m, s))| (x - m) / s)
            .collect())
    }

    pub fn apply_all(&self, rows: &[FeatureVector]) -> Result<Vec<FeatureVector>> {
        rows.iter().map(|r| self.apply(r)).collect()
    }

    pub fn invert(&self, z: &[f64]) -> Result<FeatureVector> {
        if z.len() != self.dim() {
            return Err(Error::Shape {
                expected: self.dim(),
                got: z.len(),
            });
        }
        Ok(z.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(z, (m, s))| z * s + m)
            .collect())
    }
}

/// Fits mean and population standard deviation per feature.
pub fn fit_scaler(vectors: &[FeatureVector]) -> Result<Scaler> {
    if vectors.len() < 2 {
        return Err(Error::EmptyInput(format!(
            "scaler needs at least 2 vectors, got {}",
            vectors.len()
        )));
    }
    let dim = vectors[0].len();
    if let Some(v) = vectors.iter().find(|v| v.len() != dim) {
        return Err(Error::Shape {
            expected: dim,
            got: v.len(),
        });
    }
    let n = vectors.len() as f64;
    let mut mean = vec![0.0; dim];
    for v in vectors {
        mean.iter_mut().zip(v).for_each(|(m, x)| *m += x);
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut std = vec![0.0; dim];
    for v in vectors {
        std.iter_mut()
            .zip(v.iter().zip(&mean))
            .for_each(|(s, (x, m))| *s += (x - m) * (x - m));
    }
    for (index, s) in std.iter_mut().enumerate() {
        *s = (*s / n).sqrt();
        if !(*s > MIN_FEATURE_STD) {
            return Err(Error::DegenerateFeature { index });
        }
    }
    Ok(Scaler { mean, std })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{GestureClass, Sample};

    fn window_x(x: &[f64]) -> Window {
        let samples = x
            .iter()
            .enumerate()
            .map(|(i, &v)| Sample::new(i as u64, v, v * 0.5 + 0.1, 1.0))
            .collect();
        Window::new(samples, 25.0, Some(GestureClass::O)).unwrap()
    }

    fn fx(w: &Window, f: FeatureId) -> f64 {
        feature_value(w, f, FeatureAxis::Single(Axis::X)).unwrap()
    }

    #[test]
    fn constant_signal() {
        let w = window_x(&[2.0; 100]);
        assert_eq!(fx(&w, FeatureId::Mean), 2.0);
        assert_eq!(fx(&w, FeatureId::Variance), 0.0);
        assert_eq!(fx(&w, FeatureId::GlobalP2P), 0.0);
        assert_eq!(fx(&w, FeatureId::NegZeroCrossings), 0.0);
        assert_eq!(fx(&w, FeatureId::GlobalMinMaxSum), 4.0);
        assert_eq!(fx(&w, FeatureId::Kurtosis), 0.0);
    }

    #[test]
    fn square_wave_crossings() {
        let x: Vec<f64> = [0.0, 1.0, 0.0, -1.0].repeat(25);
        // brute-force count of downward mean crossings on the explicit array
        let mean = x.iter().sum::<f64>() / 100.0;
        let mut expected = 0;
        for i in 1..x.len() {
            if x[i - 1] - mean > 0.0 && x[i] - mean <= 0.0 {
                expected += 1;
            }
        }
        assert_eq!(expected, 25);
        assert_eq!(fx(&window_x(&x), FeatureId::NegZeroCrossings), 25.0);
    }

    #[test]
    fn quartiles_of_four() {
        let w = window_x(&[1.0, 2.0, 3.0, 4.0]);
        assert!((fx(&w, FeatureId::P25) - 1.75).abs() < 1e-12);
        assert!((fx(&w, FeatureId::IqrRange) - 1.5).abs() < 1e-12);
    }

    #[test]
    fn kurtosis_needs_four_samples() {
        let w = window_x(&[1.0, 2.0, 3.0]);
        assert!(matches!(
            feature_value(&w, FeatureId::Kurtosis, FeatureAxis::Single(Axis::X)),
            Err(Error::TooShort { .. })
        ));
        let set = FeatureSet::new(vec![
            FeatureEntry::single(FeatureId::Mean, Axis::X),
            FeatureEntry::single(FeatureId::Kurtosis, Axis::Y),
        ])
        .unwrap();
        assert!(matches!(
            extract_vector(&w, &set),
            Err(Error::FeatureEntry { index: 1, .. })
        ));
    }

    #[test]
    fn axis_must_match_feature() {
        let w = window_x(&[1.0, 2.0, 3.0, 4.0]);
        assert!(feature_value(&w, FeatureId::Mean, FeatureAxis::Pair(Axis::X, Axis::Y)).is_err());
        assert!(feature_value(
            &w,
            FeatureId::MedianCrossAxisDiff,
            FeatureAxis::Single(Axis::X)
        )
        .is_err());
    }

    #[test]
    fn default_set_shape() {
        let set = FeatureSet::default20();
        assert_eq!(set.len(), 20);
        assert!(FeatureSet::new(set.entries().to_vec()).is_ok());
        assert_eq!(FeatureSet::pool().len(), 30);
        let w = window_x(&[0.5; 100]);
        assert_eq!(extract_vector(&w, &set).unwrap().len(), 20);
    }

    #[test]
    fn singleton_mean() {
        let set = FeatureSet::new(vec![FeatureEntry::single(FeatureId::Mean, Axis::X)]).unwrap();
        assert_eq!(
            extract_vector(&window_x(&[1.0; 100]), &set).unwrap(),
            vec![1.0]
        );
    }

    #[test]
    fn vector_is_composition_of_single_values() {
        let x: Vec<f64> = (0..100).map(|i| ((i * 37 % 17) as f64).sin()).collect();
        let w = window_x(&x);
        let set = FeatureSet::pool();
        let v = extract_vector(&w, &set).unwrap();
        for (e, got) in set.entries().iter().zip(&v) {
            assert_eq!(*got, feature_value(&w, e.feature, e.axis).unwrap());
        }
    }

    #[test]
    fn set_json_shape() {
        let set = FeatureSet::new(vec![
            FeatureEntry::single(FeatureId::P25, Axis::Y),
            FeatureEntry::new(
                FeatureId::MedianCrossAxisDiff,
                FeatureAxis::Pair(Axis::X, Axis::Z),
            ),
        ])
        .unwrap();
        let json = serde_json::to_string(&set).unwrap();
        assert_eq!(
            json,
            r#"[{"feature":"P25","axis":"Y"},{"feature":"MedianCrossAxisDiff","axis":"XZ"}]"#
        );
        assert_eq!(serde_json::from_str::<FeatureSet>(&json).unwrap(), set);
        assert!(serde_json::from_str::<FeatureSet>(
            r#"[{"feature":"P25","axis":"Y"},{"feature":"P25","axis":"Y"}]"#
        )
        .is_err());
    }

    #[test]
    fn scaler_two_points() {
        let s = fit_scaler(&[vec![0.0], vec![2.0]]).unwrap();
        assert_eq!(s.mean, vec![1.0]);
        assert_eq!(s.std, vec![1.0]);
        assert_eq!(s.apply(&[2.0]).unwrap(), vec![1.0]);
    }

    #[test]
    fn scaler_standardizes_fit_set() {
        let rows: Vec<Vec<f64>> = (0..50)
            .map(|i| {
                vec![
                    i as f64 * 0.3 - 2.0,
                    ((i * i) % 7) as f64,
                    (i as f64).sqrt(),
                ]
            })
            .collect();
        let s = fit_scaler(&rows).unwrap();
        let z = s.apply_all(&rows).unwrap();
        for j in 0..3 {
            let col: Vec<f64> = z.iter().map(|r| r[j]).collect();
            let m = col.iter().sum::<f64>() / 50.0;
            let sd = (col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / 50.0).sqrt();
            assert!(m.abs() < 1e-9);
            assert!((sd - 1.0).abs() < 1e-9);
        }
        let back = s.invert(&z[3]).unwrap();
        assert!(back
            .iter()
            .zip(&rows[3])
            .all(|(a, b)| (a - b).abs() < 1e-12));
    }

    #[test]
    fn constant_column_is_degenerate() {
        let rows = vec![vec![1.0, 3.0], vec![2.0, 3.0], vec![4.0, 3.0]];
        assert!(matches!(
            fit_scaler(&rows),
            Err(Error::DegenerateFeature { index: 1 })
        ));
    }
}
