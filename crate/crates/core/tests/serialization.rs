mod common;

use gesture_core::models::envelope::{Deployed, ModelFile};
use gesture_core::models::{self, Classifier, ModelConfig, ModelKind};
use gesture_core::seed;
use rand::Rng as _;

fn small_config(kind: ModelKind) -> ModelConfig {
    match ModelConfig::default_for(kind) {
        ModelConfig::Bonsai(mut c) => {
            c.epochs = 30;
            ModelConfig::Bonsai(c)
        }
        c => c,
    }
    .with_seed(21)
}

#[test]
fn every_model_round_trips_bit_exactly() {
    let p = common::Prepared::new(40, 3, 17);
    let mut rng = seed::rng(1);
    let queries: Vec<Vec<f64>> = (0..1000)
        .map(|_| (0..20).map(|_| rng.random_range(-3.0..3.0)).collect())
        .collect();
    for kind in [
        ModelKind::Pme,
        ModelKind::Rf,
        ModelKind::Bonsai,
        ModelKind::Nn,
        ModelKind::NnInt8,
    ] {
        let m = models::train(&small_config(kind), &p.x_train, &p.y_train).unwrap();
        let file = ModelFile::new(&m, p.feature_set.clone(), p.scaler.clone());
        let json = file.to_json().unwrap();
        let back = ModelFile::from_json(&json).unwrap();
        assert_eq!(back, file, "{kind}");
        assert_eq!(back.to_json().unwrap(), json, "{kind}: bytes differ");
        let m2 = back.model().unwrap();
        assert_eq!(m2, m, "{kind}");
        assert_eq!(m2.footprint(), m.footprint());
        for q in &queries {
            let (a, b) = (m.predict(q).unwrap(), m2.predict(q).unwrap());
            assert_eq!(a.class, b.class, "{kind}");
            assert_eq!(a.score.to_bits(), b.score.to_bits(), "{kind}");
        }
        let d = Deployed::from_file(&back).unwrap();
        let raw = p.scaler.invert(&queries[0]).unwrap();
        assert_eq!(
            d.predict_raw(&raw).unwrap().class,
            m.predict(&p.scaler.apply(&raw).unwrap()).unwrap().class
        );
    }
}

#[test]
fn corrupted_files_are_rejected() {
    let p = common::Prepared::new(20, 3, 2);
    let m = models::train(&small_config(ModelKind::Rf), &p.x_train, &p.y_train).unwrap();
    let file = ModelFile::new(&m, p.feature_set.clone(), p.scaler.clone());
    let mut bad = file.clone();
    bad.format = "other/9".into();
    assert!(bad.model().is_err());
    let mut bad = file.clone();
    bad.kind = ModelKind::Nn;
    assert!(bad.model().is_err());
    let mut bad = file;
    bad.feature_set = gesture_core::FeatureSet::pool();
    assert!(bad.model().is_err());
    assert!(ModelFile::from_json("{}").is_err());
}
