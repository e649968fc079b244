//! Train/validation/test splitting and classification metrics.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::augment::{balance_classes, AugmentSpec};
use crate::dataset::{Dataset, Origin};
use crate::error::{Error, Result};
use crate::features::{extract_vector, FeatureSet, Scaler};
use crate::models::{Classifier, Footprint, OpCount};
use crate::profile::LatencyStats;
use crate::seed;
use crate::signal::{GestureClass, Window};

const G: usize = GestureClass::N_GESTURES;

/// Minimum windows per class for a stratified split.
pub const MIN_PER_CLASS: usize = 10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train: f64,
    pub val: f64,
    pub test: f64,
    pub seed: u64,
    pub stratified: bool,
    pub group_by_user: bool,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train: 0.6,
            val: 0.2,
            test: 0.2,
            seed: 0,
            stratified: true,
            group_by_user: false,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        let r = self.ratios();
        if r.iter().any(|v| !(*v > 0.0)) || (r.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidInput(format!(
                "split ratios {r:?} must be positive and sum to 1"
            )));
        }
        Ok(())
    }

    fn ratios(&self) -> [f64; 3] {
        [self.train, self.val, self.test]
    }
}

/// Indices into the dataset's entries.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl Split {
    fn parts_mut(&mut self) -> [&mut Vec<usize>; 3] {
        [&mut self.train, &mut self.val, &mut self.test]
    }

    pub fn parts(&self) -> [&Vec<usize>; 3] {
        [&self.train, &self.val, &self.test]
    }
}

/// Splits `n` items by ratio: floors, then the largest remainders (ties to
/// the earlier part).
pub fn apportion(n: usize, ratios: &[f64]) -> Vec<usize> {
    let quotas: Vec<f64> = ratios.iter().map(|r| r * n as f64).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let mut order: Vec<usize> = (0..ratios.len()).collect();
    order.sort_by(|&a, &b| {
        (quotas[b] - quotas[b].floor())
            .total_cmp(&(quotas[a] - quotas[a].floor()))
            .then(a.cmp(&b))
    });
    let mut left = n - counts.iter().sum::<usize>().min(n);
    for i in order.into_iter().cycle() {
        if left == 0 {
            break;
        }
        counts[i] += 1;
        left -= 1;
    }
    counts
}

/// Per-class split sizes whose column sums hit the global targets.
fn stratified_counts(class_sizes: &[usize], ratios: &[f64; 3]) -> Vec<[usize; 3]> {
    let total: usize = class_sizes.iter().sum();
    let target = apportion(total, ratios);
    let mut counts: Vec<[usize; 3]> = Vec::with_capacity(class_sizes.len());
    let mut fracs = Vec::new();
    for (c, &n) in class_sizes.iter().enumerate() {
        let mut row = [0; 3];
        for s in 0..3 {
            let q = n as f64 * ratios[s];
            row[s] = q.floor() as usize;
            fracs.push((q - q.floor(), c, s));
        }
        counts.push(row);
    }
    let mut need: Vec<usize> = (0..3)
        .map(|s| target[s].saturating_sub(counts.iter().map(|r| r[s]).sum()))
        .collect();
    let mut spare: Vec<usize> = class_sizes
        .iter()
        .zip(&counts)
        .map(|(n, r)| n - r.iter().sum::<usize>())
        .collect();
    fracs.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let pairs: Vec<(usize, usize)> = fracs
        .iter()
        .map(|&(_, c, s)| (c, s))
        .chain((0..class_sizes.len()).flat_map(|c| (0..3).map(move |s| (c, s))))
        .collect();
    for (c, s) in pairs {
        if spare[c] > 0 && need[s] > 0 {
            counts[c][s] += 1;
            spare[c] -= 1;
            need[s] -= 1;
        }
    }
    counts
}

/// Partitions the non-augmented windows; augmented windows follow their
/// source into train and are dropped when the source landed in val or
/// test.
pub fn split(dataset: &Dataset, spec: &SplitSpec) -> Result<Split> {
    spec.validate()?;
    let entries = dataset.entries();
    let base: Vec<usize> = (0..entries.len())
        .filter(|&i| entries[i].provenance.origin != Origin::Augmented)
        .collect();
    if base.is_empty() {
        return Err(Error::EmptyInput("dataset".into()));
    }
    let ratios = spec.ratios();
    let mut out = Split::default();
    if spec.group_by_user {
        let users: BTreeSet<Option<u32>> =
            base.iter().map(|&i| entries[i].provenance.user).collect();
        if users.len() < 3 {
            return Err(Error::SplitInfeasible(format!(
                "{} user group(s) cannot fill three splits",
                users.len()
            )));
        }
        let mut users: Vec<Option<u32>> = users.into_iter().collect();
        users.shuffle(&mut seed::sub_rng(spec.seed, "split-users", 0));
        let mut counts = apportion(users.len(), &ratios);
        // every part gets at least one user
        for s in 0..3 {
            if counts[s] == 0 {
                let donor = (0..3).max_by_key(|&k| counts[k]).expect("three parts");
                counts[donor] -= 1;
                counts[s] += 1;
            }
        }
        let mut assign = BTreeMap::new();
        let mut it = users.into_iter();
        for (s, &n) in counts.iter().enumerate() {
            for u in it.by_ref().take(n) {
                assign.insert(u, s);
            }
        }
        for &i in &base {
            out.parts_mut()[assign[&entries[i].provenance.user]].push(i);
        }
    } else if spec.stratified {
        let mut by_class: Vec<Vec<usize>> = vec![vec![]; G];
        for &i in &base {
            by_class[entries[i].label().index()].push(i);
        }
        for (c, idx) in by_class.iter().enumerate() {
            if idx.len() < MIN_PER_CLASS {
                return Err(Error::SplitInfeasible(format!(
                    "class {} has {} windows, need at least {MIN_PER_CLASS}",
                    GestureClass::GESTURES[c],
                    idx.len()
                )));
            }
        }
        let sizes: Vec<usize> = by_class.iter().map(Vec::len).collect();
        let counts = stratified_counts(&sizes, &ratios);
        for (c, mut idx) in by_class.into_iter().enumerate() {
            idx.shuffle(&mut seed::sub_rng(spec.seed, "split", c as u64));
            let mut it = idx.into_iter();
            for (s, part) in out.parts_mut().into_iter().enumerate() {
                part.extend(it.by_ref().take(counts[c][s]));
            }
        }
    } else {
        let mut idx = base.clone();
        idx.shuffle(&mut seed::sub_rng(spec.seed, "split", 0));
        let counts = apportion(idx.len(), &ratios);
        let mut it = idx.into_iter();
        for (s, part) in out.parts_mut().into_iter().enumerate() {
            part.extend(it.by_ref().take(counts[s]));
        }
    }
    let train_ids: BTreeSet<u64> = out
        .train
        .iter()
        .map(|&i| entries[i].provenance.id)
        .collect();
    for (i, e) in entries.iter().enumerate() {
        if e.provenance.origin == Origin::Augmented
            && e.provenance.source.is_some_and(|s| train_ids.contains(&s))
        {
            out.train.push(i);
        }
    }
    for part in out.parts_mut() {
        part.sort_unstable();
    }
    Ok(out)
}

/// The three parts of a split as datasets. Train and validation are
/// class-balanced by augmentation; test keeps its natural class mix.
#[derive(Clone, Debug)]
pub struct ProtocolSplit {
    pub train: Dataset,
    pub val: Dataset,
    pub test: Dataset,
}

/// Splits, then balances train and validation with `augment`. Validation
/// uses a sub-seed of the augmentation seed.
pub fn protocol_split(
    dataset: &Dataset,
    spec: &SplitSpec,
    augment: &AugmentSpec,
) -> Result<ProtocolSplit> {
    let s = split(dataset, spec)?;
    let val_aug = augment
        .clone()
        .with_seed(seed::derive(augment.rng_seed, "balance-val", 0));
    Ok(ProtocolSplit {
        train: balance_classes(&dataset.subset(&s.train)?, augment)?,
        val: balance_classes(&dataset.subset(&s.val)?, &val_aug)?,
        test: dataset.subset(&s.test)?,
    })
}

/// Exact fraction of two counts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ratio {
    pub num: u64,
    pub den: u64,
}

impl Ratio {
    pub fn new(num: u64, den: u64) -> Self {
        Self { num, den }
    }

    /// Zero for an empty denominator.
    pub fn value(self) -> f64 {
        if self.den == 0 {
            0.0
        } else {
            self.num as f64 / self.den as f64
        }
    }

    /// Tenths of a percent, truncated.
    pub fn permille_floor(self) -> u64 {
        if self.den == 0 {
            0
        } else {
            1000 * self.num / self.den
        }
    }

    /// Tenths of a percent, rounded half up.
    pub fn permille_round(self) -> u64 {
        if self.den == 0 {
            0
        } else {
            (2000 * self.num + self.den) / (2 * self.den)
        }
    }
}

/// Counts by true gesture (rows) and prediction including `Uncertain`
/// (columns, in class order).
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub counts: [[u64; G + 1]; G],
}

impl Confusion {
    pub fn from_counts(counts: [[u64; G + 1]; G]) -> Self {
        Self { counts }
    }

    pub fn from_predictions(truth: &[GestureClass], predicted: &[GestureClass]) -> Result<Self> {
        if truth.len() != predicted.len() {
            return Err(Error::Shape {
                expected: truth.len(),
                got: predicted.len(),
            });
        }
        let mut m = Self::default();
        for (t, p) in truth.iter().zip(predicted) {
            if !t.is_gesture() {
                return Err(Error::InvalidClass(*t));
            }
            m.counts[t.index()][p.index()] += 1;
        }
        Ok(m)
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn support(&self, c: usize) -> u64 {
        self.counts[c].iter().sum()
    }

    pub fn predicted(&self, col: usize) -> u64 {
        self.counts.iter().map(|r| r[col]).sum()
    }

    /// `Uncertain` predictions are neither true nor false positives.
    pub fn precision(&self, c: usize) -> Ratio {
        Ratio::new(self.counts[c][c], self.predicted(c))
    }

    pub fn recall(&self, c: usize) -> Ratio {
        Ratio::new(self.counts[c][c], self.support(c))
    }

    pub fn accuracy(&self) -> Ratio {
        Ratio::new((0..G).map(|c| self.counts[c][c]).sum(), self.total())
    }

    /// Zero when precision and recall are both zero.
    pub fn f1(&self, c: usize) -> f64 {
        let (p, r) = (self.precision(c).value(), self.recall(c).value());
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }

    /// Mean F1 over the gesture classes.
    pub fn macro_f1(&self) -> f64 {
        (0..G).map(|c| self.f1(c)).sum::<f64>() / G as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: GestureClass,
    pub support: u64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub confusion: Confusion,
    pub classes: Vec<ClassMetrics>,
    pub accuracy: f64,
    pub macro_f1: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latency: Option<LatencyStats>,
    pub footprint: Footprint,
    pub op_count: OpCount,
}

impl EvalReport {
    pub fn from_confusion(confusion: Confusion, footprint: Footprint, op_count: OpCount) -> Self {
        let classes = (0..G)
            .map(|c| ClassMetrics {
                class: GestureClass::GESTURES[c],
                support: confusion.support(c),
                precision: confusion.precision(c).value(),
                recall: confusion.recall(c).value(),
                f1: confusion.f1(c),
            })
            .collect();
        Self {
            accuracy: confusion.accuracy().value(),
            macro_f1: confusion.macro_f1(),
            classes,
            confusion,
            latency: None,
            footprint,
            op_count,
        }
    }
}

/// Predicts every window (features, scaling, model) in window order.
pub fn predict_windows<M: Classifier + Sync + ?Sized>(
    model: &M,
    windows: &[&Window],
    feature_set: &FeatureSet,
    scaler: &Scaler,
) -> Result<Vec<GestureClass>> {
    let one = |w: &&Window| -> Result<GestureClass> {
        let v = scaler.apply(&extract_vector(w, feature_set)?)?;
        Ok(model.predict(&v)?.class)
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        windows.par_iter().map(one).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        windows.iter().map(one).collect()
    }
}

pub fn evaluate<M: Classifier + Sync + ?Sized>(
    model: &M,
    windows: &[&Window],
    feature_set: &FeatureSet,
    scaler: &Scaler,
) -> Result<EvalReport> {
    if windows.is_empty() {
        return Err(Error::EmptyInput("test windows".into()));
    }
    let truth: Vec<GestureClass> = windows
        .iter()
        .map(|w| {
            w.label()
                .ok_or_else(|| Error::InvalidInput("unlabeled test window".into()))
        })
        .collect::<Result<_>>()?;
    let predicted = predict_windows(model, windows, feature_set, scaler)?;
    let confusion = Confusion::from_predictions(&truth, &predicted)?;
    Ok(EvalReport::from_confusion(
        confusion,
        model.footprint(),
        model.op_count(),
    ))
}

/// Confusion matrix as CSV with row and column labels.
pub fn confusion_csv(c: &Confusion) -> String {
    let mut s = String::from("truth");
    for cls in GestureClass::ALL {
        s.push(',');
        s.push_str(cls.as_str());
    }
    s.push_str(",support\n");
    for (r, row) in c.counts.iter().enumerate() {
        s.push_str(GestureClass::GESTURES[r].as_str());
        for v in row {
            s.push_str(&format!(",{v}"));
        }
        s.push_str(&format!(",{}\n", c.support(r)));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{synth_dataset, SynthParams};
    use proptest::prelude::*;

    #[test]
    fn hundred_windows_split_sixty_twenty_twenty() {
        assert_eq!(apportion(100, &[0.6, 0.2, 0.2]), vec![60, 20, 20]);
        let counts = stratified_counts(&[34, 33, 33], &[0.6, 0.2, 0.2]);
        let cols: Vec<usize> = (0..3).map(|s| counts.iter().map(|r| r[s]).sum()).collect();
        assert_eq!(cols, vec![60, 20, 20]);
        for (row, n) in counts.iter().zip([34, 33, 33]) {
            assert_eq!(row.iter().sum::<usize>(), n);
        }
    }

    proptest! {
        #[test]
        fn stratified_counts_hit_targets(sizes in proptest::collection::vec(10usize..200, 3), a in 0.1f64..0.8) {
            let b = (1.0 - a) / 2.0;
            let ratios = [a, b, 1.0 - a - b];
            let counts = stratified_counts(&sizes, &ratios);
            let target = apportion(sizes.iter().sum(), &ratios);
            for s in 0..3 {
                prop_assert_eq!(counts.iter().map(|r| r[s]).sum::<usize>(), target[s]);
            }
            for (row, n) in counts.iter().zip(&sizes) {
                prop_assert_eq!(row.iter().sum::<usize>(), *n);
            }
        }
    }

    #[test]
    fn split_is_a_partition() {
        let ds = synth_dataset(20, 5, &SynthParams::default().with_seed(1)).unwrap();
        let s = split(&ds, &SplitSpec::default()).unwrap();
        let mut all: Vec<usize> = s.parts().into_iter().flatten().copied().collect();
        assert_eq!([s.train.len(), s.val.len(), s.test.len()], [180, 60, 60]);
        all.sort_unstable();
        assert_eq!(all, (0..ds.len()).collect::<Vec<_>>());
        assert_eq!(s, split(&ds, &SplitSpec::default()).unwrap());
    }

    #[test]
    fn users_stay_in_one_split() {
        let ds = synth_dataset(12, 5, &SynthParams::default().with_seed(2)).unwrap();
        let spec = SplitSpec {
            group_by_user: true,
            ..SplitSpec::default()
        };
        let s = split(&ds, &spec).unwrap();
        let users = |idx: &[usize]| -> BTreeSet<Option<u32>> {
            idx.iter()
                .map(|&i| ds.entries()[i].provenance.user)
                .collect()
        };
        let (a, b, c) = (users(&s.train), users(&s.val), users(&s.test));
        assert!(a.is_disjoint(&b) && a.is_disjoint(&c) && b.is_disjoint(&c));
        assert_eq!(a.len() + b.len() + c.len(), 5);
    }

    #[test]
    fn too_few_per_class_is_infeasible() {
        let ds = synth_dataset(3, 2, &SynthParams::default()).unwrap();
        assert!(matches!(
            split(&ds, &SplitSpec::default()),
            Err(Error::SplitInfeasible(_))
        ));
        let bad = SplitSpec {
            train: 0.7,
            ..SplitSpec::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn perfect_classifier_metrics() {
        let truth = [
            GestureClass::O,
            GestureClass::X,
            GestureClass::Random,
            GestureClass::X,
        ];
        let m = Confusion::from_predictions(&truth, &truth).unwrap();
        assert_eq!(m.accuracy(), Ratio::new(4, 4));
        assert_eq!(m.macro_f1(), 1.0);
        assert_eq!(m.counts[1], [0, 2, 0, 0]);
    }

    #[test]
    fn empty_denominators_give_zero() {
        let truth = [GestureClass::O, GestureClass::O, GestureClass::O];
        let pred = [GestureClass::Uncertain; 3];
        let m = Confusion::from_predictions(&truth, &pred).unwrap();
        assert_eq!(m.precision(0).value(), 0.0);
        assert_eq!(m.f1(1), 0.0);
        assert_eq!(m.accuracy().value(), 0.0);
    }

    #[test]
    fn percent_rounding() {
        let r = Ratio::new(223, 224);
        assert_eq!(r.permille_floor(), 995);
        assert_eq!(r.permille_round(), 996);
        assert_eq!(Ratio::new(1, 2000).permille_round(), 1);
    }

    #[test]
    fn csv_has_labels() {
        let m = Confusion::from_counts([[1, 0, 0, 1], [0, 2, 0, 0], [0, 0, 3, 0]]);
        let csv = confusion_csv(&m);
        assert_eq!(csv.lines().next().unwrap(), "truth,O,X,RANDOM,UNC,support");
        assert_eq!(csv.lines().nth(1).unwrap(), "O,1,0,0,1,2");
    }
}
