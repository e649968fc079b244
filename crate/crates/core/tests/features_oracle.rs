mod common;

use gesture_core::features::{extract_vector, feature_value, FeatureAxis, FeatureId, FeatureSet};
use gesture_core::seed;
use gesture_core::{Sample, Window};
use rand::Rng as _;

fn map(w: &Window, f: impl Fn(f64) -> f64) -> Window {
    let s = w
        .samples()
        .iter()
        .map(|s| Sample::new(s.t, f(s.ax), f(s.ay), f(s.az)))
        .collect();
    Window::new(s, w.rate_hz(), w.label()).unwrap()
}

#[test]
fn all_features_match_brute_force_on_1000_windows() {
    let mut rng = seed::rng(2024);
    let pool = FeatureSet::pool();
    let mut worst = 0.0f64;
    for i in 0..1000 {
        let len = if i % 4 == 0 {
            rng.random_range(4..160)
        } else {
            100
        };
        let w = common::random_window(&mut rng, len, i % 3 == 0);
        let got = extract_vector(&w, &pool).unwrap();
        for (e, g) in pool.entries().iter().zip(&got) {
            let want = common::feature(&w, e.feature, e.axis);
            assert!(
                common::close(*g, want, 1e-9),
                "window {i} {}: {g} vs {want}",
                e.name()
            );
            worst = worst.max((g - want).abs());
        }
    }
    assert!(worst <= 1e-9, "{worst}");
}

#[test]
fn vector_equals_per_feature_calls() {
    let mut rng = seed::rng(7);
    let set = FeatureSet::default20();
    for _ in 0..50 {
        let w = common::random_window(&mut rng, 100, false);
        let v = extract_vector(&w, &set).unwrap();
        assert_eq!(v.len(), 20);
        for (e, x) in set.entries().iter().zip(&v) {
            assert_eq!(*x, feature_value(&w, e.feature, e.axis).unwrap());
        }
    }
}

#[derive(Clone, Copy, Debug)]
enum Law {
    Invariant,
    Linear,
    Quadratic,
}

#[test]
fn shift_and_scale_table() {
    use FeatureId::*;
    use Law::*;
    let shift_invariant = [
        Variance,
        Kurtosis,
        IqrRange,
        NegZeroCrossings,
        GlobalP2P,
        MinMaxDistance,
    ];
    let scale: [(FeatureId, Law); 10] = [
        (Mean, Linear),
        (P25, Linear),
        (GlobalMinMaxSum, Linear),
        (MedianCrossAxisDiff, Linear),
        (GlobalP2P, Linear),
        (Variance, Quadratic),
        (Kurtosis, Invariant),
        (NegZeroCrossings, Invariant),
        (MinMaxDistance, Invariant),
        (IqrRange, Linear),
    ];
    let mut rng = seed::rng(99);
    let pool = FeatureSet::pool();
    for _ in 0..200 {
        let w = common::random_window(&mut rng, 100, false);
        let c = rng.random_range(-3.0..3.0);
        let f = rng.random_range(0.2..3.0);
        let shifted = map(&w, |v| v + c);
        let scaled = map(&w, |v| v * f);
        for e in pool.entries() {
            let base = feature_value(&w, e.feature, e.axis).unwrap();
            if shift_invariant.contains(&e.feature) {
                let s = feature_value(&shifted, e.feature, e.axis).unwrap();
                assert!(
                    common::close(s, base, 1e-9),
                    "shift {}: {s} vs {base}",
                    e.name()
                );
            }
            let law = scale.iter().find(|(id, _)| *id == e.feature).unwrap().1;
            let want = match law {
                Invariant => base,
                Linear => f * base,
                Quadratic => f * f * base,
            };
            let s = feature_value(&scaled, e.feature, e.axis).unwrap();
            assert!(
                common::close(s, want, 1e-9),
                "scale {} {law:?}: {s} vs {want}",
                e.name()
            );
        }
    }
}

#[test]
fn worked_examples() {
    let w = Window::new(
        (0..100)
            .map(|t| {
                let v = [0.0, 1.0, 0.0, -1.0][t % 4];
                Sample::new(t as u64, v, 2.0, 0.0)
            })
            .collect(),
        25.0,
        None,
    )
    .unwrap();
    let x = FeatureAxis::Single(gesture_core::Axis::X);
    let y = FeatureAxis::Single(gesture_core::Axis::Y);
    assert_eq!(
        feature_value(&w, FeatureId::NegZeroCrossings, x).unwrap(),
        25.0
    );
    assert_eq!(feature_value(&w, FeatureId::Mean, y).unwrap(), 2.0);
    assert_eq!(
        feature_value(&w, FeatureId::GlobalMinMaxSum, y).unwrap(),
        4.0
    );
    assert_eq!(feature_value(&w, FeatureId::GlobalP2P, y).unwrap(), 0.0);
    assert_eq!(
        feature_value(&w, FeatureId::NegZeroCrossings, y).unwrap(),
        0.0
    );
}
