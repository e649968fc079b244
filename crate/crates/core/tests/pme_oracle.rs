mod common;

use gesture_core::models::pme::{pme_classify, pme_train, PmeConfig};
use gesture_core::seed;
use rand::Rng as _;

#[test]
fn classification_matches_direct_scan_on_1000_queries() {
    let p = common::Prepared::new(40, 3, 11);
    let cfg = PmeConfig::default();
    let t = pme_train(&p.x_train, &p.y_train, &cfg).unwrap();
    let m = &t.model;
    assert!(!m.prototypes.is_empty() && m.prototypes.len() <= cfg.max_neurons);
    assert!(m
        .prototypes
        .iter()
        .all(|q| (cfg.aif_min..=cfg.aif_max).contains(&q.aif)));

    let mut rng = seed::rng(3);
    let mut uncertain = 0;
    for i in 0..1000 {
        let q: Vec<f64> = if i % 2 == 0 {
            let base = &p.x_val[i % p.x_val.len()];
            base.iter()
                .map(|v| v + rng.random_range(-0.5..0.5))
                .collect()
        } else {
            (0..m.dim).map(|_| rng.random_range(-3.0..3.0)).collect()
        };
        let got = pme_classify(m, &q).unwrap();
        let (class, score) = common::pme_oracle(m, &q);
        assert_eq!((got.class, got.score), (class, score), "query {i}");
        uncertain += usize::from(class == gesture_core::GestureClass::Uncertain);
    }
    // both branches of the decision rule were exercised
    assert!(uncertain > 0 && uncertain < 1000, "{uncertain}");
}

#[test]
fn no_wrong_class_prototype_fires_on_training_rows_after_convergence() {
    let p = common::Prepared::new(30, 3, 5);
    let cfg = PmeConfig {
        max_epochs: 20,
        ..PmeConfig::default()
    };
    let t = pme_train(&p.x_train, &p.y_train, &cfg).unwrap();
    assert!(
        t.converged && !t.capacity_exhausted,
        "{:?}",
        (t.epochs, t.model.prototypes.len())
    );
    for (x, &y) in p.x_train.iter().zip(&p.y_train) {
        let q = t.model.quantize(x).unwrap();
        for proto in &t.model.prototypes {
            let d = gesture_core::models::pme::l1(&q, &proto.center);
            if proto.class.index() != y && d <= u32::from(proto.aif) {
                // only a prototype already shrunk to the floor may still fire
                assert_eq!(proto.aif, cfg.aif_min);
            }
        }
    }
}
