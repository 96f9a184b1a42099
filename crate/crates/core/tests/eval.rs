use std::collections::BTreeMap;

use polprog_core::corpus::synth::MARKER_TOKENS;
use polprog_core::corpus::{generate_synthetic, split};
use polprog_core::eval::{
    metrics, prepare, r2, rmse, run_grid, run_prepared, snap_to_category, snapped_accuracy, EvalError, FeatureConfig,
    GridConfig, GridResult, Representation, CSV_HEADER,
};
use polprog_core::explain::permutation_importance;
use polprog_core::models::fit;
use polprog_core::{ModelKind, RegressorSpec, StageLabel};
use proptest::prelude::*;

proptest! {
    #[test]
    fn rmse_matches_naive_loop(pairs in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 1..60)) {
        let (y, p): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let mut acc = 0.0;
        for i in 0..y.len() {
            acc += (y[i] - p[i]) * (y[i] - p[i]);
        }
        let naive = (acc / y.len() as f64).sqrt();
        prop_assert!((rmse(&y, &p).unwrap() - naive).abs() <= 1e-12 * (1.0 + naive));
    }

    #[test]
    fn r2_is_one_at_truth_and_zero_at_mean(y in prop::collection::vec(0.0f64..1.0, 2..40)) {
        let mean = y.iter().sum::<f64>() / y.len() as f64;
        prop_assume!(y.iter().any(|v| (v - mean).abs() > 1e-6));
        prop_assert!((r2(&y, &y).unwrap() - 1.0).abs() < 1e-12);
        prop_assert!(r2(&y, &vec![mean; y.len()]).unwrap().abs() < 1e-12);
    }

    #[test]
    fn snapping_lands_on_a_stage(v in -2.0f64..3.0) {
        let label = snap_to_category(v).unwrap();
        let clamped = v.clamp(0.0, 1.0);
        prop_assert!((label.value() - clamped).abs() <= 0.125 + 1e-12);
    }
}

#[test]
fn snapping_inverts_the_mapping() {
    for label in StageLabel::ALL {
        let back = snap_to_category(label.value()).unwrap();
        assert_eq!(back.value(), label.value());
    }
    assert_eq!(snap_to_category(-0.4).unwrap(), StageLabel::Blocked);
    assert_eq!(snap_to_category(7.0).unwrap(), StageLabel::AdoptedCompleted);
}

#[test]
fn metric_errors() {
    assert!(matches!(
        rmse(&[1.0], &[1.0, 2.0]),
        Err(EvalError::LengthMismatch { .. })
    ));
    assert!(matches!(rmse(&[], &[]), Err(EvalError::Empty)));
    assert!(matches!(r2(&[0.5, 0.5], &[0.1, 0.2]), Err(EvalError::ConstantTarget)));
    assert!(matches!(rmse(&[f64::NAN], &[0.0]), Err(EvalError::NonFinite(_))));
    let m = metrics(&[0.0, 1.0], &[0.0, 1.0]).unwrap();
    assert_eq!((m.rmse, m.r2, m.n), (0.0, 1.0, 2));
    // out-of-range predictions are scored as-is; snapping clamps
    let m = metrics(&[0.0, 1.0], &[-0.5, 1.5]).unwrap();
    assert!((m.rmse - 0.5).abs() < 1e-15);
    assert_eq!(snapped_accuracy(&[0.0, 1.0], &[-0.5, 1.5]).unwrap(), 1.0);
}

#[test]
fn grid_shape_and_round_trip() {
    let corpus = generate_synthetic(3, 120, 80).unwrap();
    let grid = run_grid(&corpus, &GridConfig::default(), &BTreeMap::new()).unwrap();
    assert_eq!(grid.rows.len(), 8);
    for kind in ModelKind::ALL {
        for flag in [true, false] {
            assert_eq!(
                grid.rows
                    .iter()
                    .filter(|r| r.model == kind && r.with_metadata == flag)
                    .count(),
                1
            );
        }
    }
    let csv = grid.to_csv();
    assert!(csv.starts_with(&format!("{CSV_HEADER}\n")));
    let back = GridResult::from_csv(&csv).unwrap();
    assert_eq!(back, grid);
    assert_eq!(back.to_csv(), csv);

    let again = run_grid(&corpus, &GridConfig::default(), &BTreeMap::new()).unwrap();
    assert_eq!(again.to_csv(), csv);
}

#[test]
fn missing_embedding_is_reported() {
    let corpus = generate_synthetic(3, 60, 50).unwrap();
    let config = GridConfig {
        representations: vec![Representation::Tfidf, Representation::EmbeddingA],
        ..Default::default()
    };
    assert!(matches!(
        run_grid(&corpus, &config, &BTreeMap::new()),
        Err(EvalError::MissingEmbedding(Representation::EmbeddingA))
    ));
}

#[test]
fn planted_signal_ranks_high() {
    let corpus = generate_synthetic(7, 300, 200).unwrap();
    let s = split(&corpus, 0.2, 42, true).unwrap();
    let data = prepare(&corpus, &s, &FeatureConfig::default(), &BTreeMap::new()).unwrap();
    let (train, test) = data.design(Representation::Tfidf, true).unwrap();
    let model = fit(
        &RegressorSpec::new(ModelKind::BayesianRidge).with_seed(42),
        &train,
        &data.y_train,
    )
    .unwrap();
    let report = permutation_importance(&model, &test, &data.y_test, 10, 42).unwrap();
    let top: Vec<&str> = report.ranked().iter().take(5).map(|e| e.feature.as_str()).collect();
    assert!(top.contains(&"meta:no_party"), "{top:?}");
    assert!(
        MARKER_TOKENS
            .iter()
            .any(|m| top.contains(&format!("text:{m}").as_str())),
        "{top:?}"
    );

    let grid = run_prepared(&data, &GridConfig::default()).unwrap();
    assert!(grid.best(true).unwrap().metrics.r2 >= 0.5);
}
