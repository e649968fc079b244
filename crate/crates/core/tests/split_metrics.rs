use std::collections::BTreeSet;

use gesture_core::augment::{balance_classes, AugmentSpec};
use gesture_core::eval::{split, Confusion, SplitSpec};
use gesture_core::synth::{synth_dataset, SynthParams};
use gesture_core::{Dataset, GestureClass, Origin};
use proptest::prelude::*;

fn unbalanced() -> Dataset {
    let ds = synth_dataset(30, 4, &SynthParams::default().with_seed(9)).unwrap();
    // drop two thirds of the O windows so balancing has work to do
    let keep: Vec<usize> = (0..ds.len())
        .filter(|&i| ds.entries()[i].label() != GestureClass::O || i % 3 == 0)
        .collect();
    let ds = ds.subset(&keep).unwrap();
    balance_classes(&ds, &AugmentSpec::default().with_seed(4)).unwrap()
}

#[test]
fn parts_are_disjoint_and_augmented_windows_follow_their_source() {
    let ds = unbalanced();
    for spec in [
        SplitSpec::default(),
        SplitSpec {
            group_by_user: true,
            seed: 3,
            ..SplitSpec::default()
        },
    ] {
        let s = split(&ds, &spec).unwrap();
        let sets: Vec<BTreeSet<usize>> = s
            .parts()
            .iter()
            .map(|p| p.iter().copied().collect())
            .collect();
        for a in 0..3 {
            for b in a + 1..3 {
                assert!(sets[a].is_disjoint(&sets[b]));
            }
        }
        let train_ids: BTreeSet<u64> = s
            .train
            .iter()
            .map(|&i| ds.entries()[i].provenance.id)
            .collect();
        for part in [&s.val, &s.test] {
            assert!(part
                .iter()
                .all(|&i| ds.entries()[i].provenance.origin != Origin::Augmented));
        }
        for (i, e) in ds.entries().iter().enumerate() {
            if e.provenance.origin == Origin::Augmented {
                let src = e.provenance.source.unwrap();
                assert_eq!(s.train.contains(&i), train_ids.contains(&src));
            }
        }
        if spec.group_by_user {
            let users = |p: &Vec<usize>| -> BTreeSet<Option<u32>> {
                p.iter().map(|&i| ds.entries()[i].provenance.user).collect()
            };
            assert!(users(&s.train).is_disjoint(&users(&s.test)));
            assert!(users(&s.val).is_disjoint(&users(&s.test)));
        }
    }
}

#[test]
fn stratified_counts_follow_ratios_per_class() {
    let ds = synth_dataset(50, 2, &SynthParams::default().with_seed(1)).unwrap();
    let s = split(&ds, &SplitSpec::default()).unwrap();
    for c in GestureClass::GESTURES {
        let n = |p: &Vec<usize>| p.iter().filter(|&&i| ds.entries()[i].label() == c).count();
        assert_eq!((n(&s.train), n(&s.val), n(&s.test)), (60, 20, 20));
    }
}

fn class(i: usize) -> GestureClass {
    GestureClass::from_index(i).unwrap()
}

proptest! {
    #[test]
    fn confusion_agrees_with_direct_counting(
        pairs in prop::collection::vec((0usize..3, 0usize..4), 1..300)
    ) {
        let truth: Vec<GestureClass> = pairs.iter().map(|p| class(p.0)).collect();
        let pred: Vec<GestureClass> = pairs.iter().map(|p| class(p.1)).collect();
        let c = Confusion::from_predictions(&truth, &pred).unwrap();
        let hits = pairs.iter().filter(|p| p.0 == p.1).count() as u64;
        prop_assert_eq!(c.accuracy().num, hits);
        prop_assert_eq!(c.accuracy().den, pairs.len() as u64);
        let mut f1_sum = 0.0;
        for k in 0..3 {
            let tp = pairs.iter().filter(|p| p.0 == k && p.1 == k).count() as f64;
            let support = pairs.iter().filter(|p| p.0 == k).count() as f64;
            let predicted = pairs.iter().filter(|p| p.1 == k).count() as f64;
            prop_assert_eq!(c.recall(k).value(), if support > 0.0 { tp / support } else { 0.0 });
            prop_assert_eq!(c.precision(k).value(), if predicted > 0.0 { tp / predicted } else { 0.0 });
            let f1 = if support + predicted > 0.0 { 2.0 * tp / (support + predicted) } else { 0.0 };
            prop_assert!((c.f1(k) - f1).abs() < 1e-12);
            f1_sum += f1;
        }
        prop_assert!((c.macro_f1() - f1_sum / 3.0).abs() < 1e-12);
    }
}
