use std::fs;

use mtptune_core::data::{
    calibrate_max_budget, load_bundle, round_up_budget, save_bundle, synth_matrix_completion, synth_multilabel,
    DataError, DatasetBundle,
};
use mtptune_core::metrics::MetricSpec;
use mtptune_core::mtp::{auto_answer, split, AutoAnswerOptions, ScoreType, ValidationSetting};
use mtptune_core::objective::{default_space, MtpObjective};

fn reload(bundle: &DatasetBundle, dir: &std::path::Path) -> DatasetBundle {
    let p = save_bundle(bundle, dir).unwrap();
    load_bundle(
        p.scores.as_deref().unwrap(),
        p.instance_features.as_deref(),
        p.target_features.as_deref(),
        p.test.as_deref(),
    )
    .unwrap()
}

#[test]
fn save_then_load_is_lossless() {
    let dir = tempfile::tempdir().unwrap();
    let ml = synth_multilabel(40, 5, 3, 0.3, 2).unwrap();
    let back = reload(&ml, dir.path());
    assert_eq!(back.train, ml.train);
    assert_eq!(back.train.score_type, ScoreType::Binary);

    let mc = synth_matrix_completion(20, 15, 2, 0.1, 0.5, 4).unwrap().bundle;
    let mut with_test = mc.clone();
    let (a, b) = mc.train.triplets.split_at(100);
    with_test.train = mc.train.with_triplets(a.to_vec());
    with_test.test = Some(mc.train.with_triplets(b.to_vec()));
    let back = reload(&with_test, &dir.path().join("mc"));
    // ids are renumbered by first appearance; compare by name
    let named = |d: &mtptune_core::mtp::MtpDataset| -> Vec<(String, String, u64)> {
        d.triplets
            .iter()
            .map(|t| {
                (
                    d.instance_ids[t.instance].clone(),
                    d.target_ids[t.target].clone(),
                    t.score.to_bits(),
                )
            })
            .collect()
    };
    assert_eq!(named(&back.train), named(&with_test.train));
    assert_eq!(
        named(back.test.as_ref().unwrap()),
        named(with_test.test.as_ref().unwrap())
    );
    assert_eq!(back.train.score_type, ScoreType::Real);
}

#[test]
fn dense_and_triplet_forms_agree() {
    let dir = tempfile::tempdir().unwrap();
    let dense = dir.path().join("dense.csv");
    fs::write(&dense, "id,a,b\nx,1,\ny,0,1\n").unwrap();
    let trip = dir.path().join("trip.csv");
    fs::write(&trip, "instance_id,target_id,value\nx,a,1\ny,a,0\ny,b,1\n").unwrap();
    let d = load_bundle(&dense, None, None, None).unwrap();
    let t = load_bundle(&trip, None, None, None).unwrap();
    assert_eq!(d.train, t.train);
    assert_eq!(d.train.triplets.len(), 3);
    let answers = auto_answer(&d.train, None, &AutoAnswerOptions::default()).unwrap();
    assert!(!answers.q5);
}

#[test]
fn loader_errors_are_specific() {
    let dir = tempfile::tempdir().unwrap();
    let scores = dir.path().join("s.csv");
    fs::write(&scores, "instance_id,target_id,value\nx,a,1\nx,b,0\n").unwrap();
    let feats = dir.path().join("f.csv");
    fs::write(&feats, "id,f1\nx,0.5\nz,1.0\n").unwrap();
    assert!(matches!(
        load_bundle(&scores, Some(&feats), None, None),
        Err(DataError::UnknownId { ref id, .. }) if id == "z"
    ));
    fs::write(&feats, "id,f1\nx,abc\n").unwrap();
    assert!(matches!(
        load_bundle(&scores, Some(&feats), None, None),
        Err(DataError::NonNumeric { .. })
    ));
    assert!(load_bundle(&dir.path().join("missing.csv"), None, None, None).is_err());
}

#[test]
fn generator_factors_explain_the_matrix() {
    let (n, m, noise) = (100, 80, 0.01);
    let s = synth_matrix_completion(n, m, 3, noise, 0.3, 17).unwrap();
    let mut sse = 0.0;
    for i in 0..n {
        for j in 0..m {
            sse += (s.full[i * m + j] - s.signal(i, j)).powi(2);
        }
    }
    let rms = (sse / (n * m) as f64).sqrt();
    assert!(rms <= 1.1 * noise, "residual {rms}");
    assert_eq!(s.bundle.train.triplets.len(), 2400);
    for t in &s.bundle.train.triplets {
        assert_eq!(t.score, s.full[t.instance * m + t.target]);
    }
    assert_eq!(
        synth_matrix_completion(10, 8, 2, 0.1, 0.4, 5).unwrap(),
        synth_matrix_completion(10, 8, 2, 0.1, 0.4, 5).unwrap()
    );
}

#[test]
fn calibration_lands_on_a_power_or_the_cap() {
    let b = synth_matrix_completion(20, 16, 2, 0.05, 0.6, 3).unwrap().bundle;
    let folds = split(&b.train, ValidationSetting::A, 0.2, 0.2, 3)
        .unwrap()
        .folds(&b.train);
    let obj = MtpObjective::new(b.train.clone(), folds, MetricSpec::MICRO_RMSE, 3).unwrap();
    let space = default_space(&b.train).unwrap();
    for cap in [9, 20] {
        let r = calibrate_max_budget(&obj, &space, 3, cap, 3, 1).unwrap();
        assert!(r == cap || [3, 9, 27].contains(&r), "{r}");
        assert!((3..=cap).contains(&r));
    }
    assert!(calibrate_max_budget(&obj, &space, 0, 9, 3, 1).is_err());
    assert_eq!(round_up_budget(20.4, 3, 1000), 27);
}
