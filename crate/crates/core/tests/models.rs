use ndarray::Array2;
use polprog_core::models::{fit, posterior_mean, ModelError, ModelInternals, TreeNode};
use polprog_core::{Column, FeatureGroup, FeatureMatrix, ModelKind, RegressorSpec, TrainedModel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn matrix(values: Array2<f64>) -> FeatureMatrix {
    let (n, p) = values.dim();
    FeatureMatrix::new(
        (0..n).map(|i| format!("r{i}")).collect(),
        (0..p)
            .map(|j| Column::new(format!("x{j}"), FeatureGroup::Metadata))
            .collect(),
        values,
    )
    .unwrap()
}

fn random_problem(seed: u64, n: usize, p: usize) -> (FeatureMatrix, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = Array2::from_shape_fn((n, p), |_| rng.random::<f64>());
    let y = (0..n)
        .map(|i| (x[[i, 0]] * 0.7 + 0.3 * x[[i, 1 % p]] * x[[i, 0]] + 0.05 * rng.random::<f64>()).clamp(0.0, 1.0))
        .collect();
    (matrix(x), y)
}

fn rmse(a: &[f64], b: &[f64]) -> f64 {
    (a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64).sqrt()
}

#[test]
fn ridge_recovers_noiseless_coefficient() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x = Array2::from_shape_fn((50, 5), |_| rng.random::<f64>() * 2.0 - 1.0);
    let y: Vec<f64> = (0..50).map(|i| 3.0 * x[[i, 0]]).collect();
    let fm = matrix(x.clone());
    let model = fit(&RegressorSpec::new(ModelKind::BayesianRidge), &fm, &y).unwrap();
    let ModelInternals::BayesianRidge(r) = model.internals() else {
        panic!()
    };
    assert!((r.coef[0] - 3.0).abs() < 1e-3, "{:?}", r.coef);
    for w in &r.coef[1..] {
        assert!(w.abs() < 1e-3, "{:?}", r.coef);
    }
    // closed form with the converged precisions on centred data
    let means: Vec<f64> = (0..5).map(|j| x.column(j).mean().unwrap()).collect();
    let xc = Array2::from_shape_fn((50, 5), |(i, j)| x[[i, j]] - means[j]);
    let ym = y.iter().sum::<f64>() / 50.0;
    let yc: Vec<f64> = y.iter().map(|v| v - ym).collect();
    let closed = posterior_mean(xc.view(), &yc, r.alpha, r.lambda);
    for (a, b) in closed.iter().zip(&r.coef) {
        assert!((a - b).abs() < 1e-9);
    }
    let pred = model.predict(&fm).unwrap();
    assert!(rmse(&pred, &y) < 1e-3);
    assert!(!model.training_curve().is_empty());
}

#[test]
fn gbdt_constant_target() {
    let (x, _) = random_problem(2, 30, 3);
    let y = vec![0.5; 30];
    let spec = RegressorSpec::new(ModelKind::Gbdt).with("n_rounds", 1.0);
    let model = fit(&spec, &x, &y).unwrap();
    for p in model.predict(&x).unwrap() {
        assert!((p - 0.5).abs() < 1e-9);
    }
}

#[test]
fn svr_constant_target_inside_tube() {
    let (x, _) = random_problem(3, 40, 4);
    let y = vec![0.3; 40];
    let model = fit(&RegressorSpec::new(ModelKind::Svr), &x, &y).unwrap();
    for p in model.predict(&x).unwrap() {
        assert!((p - 0.3).abs() <= 0.1 + 1e-6, "{p}");
    }
}

#[test]
fn gbdt_training_rmse_non_increasing() {
    for seed in 0..5 {
        let (x, y) = random_problem(10 + seed, 80, 6);
        let model = fit(&RegressorSpec::new(ModelKind::Gbdt).with_seed(seed), &x, &y).unwrap();
        let curve = model.training_curve();
        assert_eq!(curve.len(), 500);
        for w in curve.windows(2) {
            assert!(w[1] <= w[0], "{} > {}", w[1], w[0]);
        }
    }
}

#[test]
fn gbdt_capacity() {
    for seed in 0..3 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let x = matrix(Array2::from_shape_fn((50, 4), |_| rng.random::<f64>()));
        let y: Vec<f64> = (0..50).map(|_| rng.random::<f64>()).collect();
        let spec = RegressorSpec::new(ModelKind::Gbdt).with("learning_rate", 0.1);
        let model = fit(&spec, &x, &y).unwrap();
        assert!(*model.training_curve().last().unwrap() < 0.05);
    }
}

#[test]
fn svr_dual_objective_non_decreasing() {
    for seed in 0..5 {
        let (x, y) = random_problem(20 + seed, 60, 5);
        let model = fit(&RegressorSpec::new(ModelKind::Svr).with("c", 10.0), &x, &y).unwrap();
        let curve = model.training_curve();
        assert!(curve.len() >= 2);
        for w in curve.windows(2) {
            assert!(w[1] >= w[0], "{} < {}", w[1], w[0]);
        }
    }
}

#[test]
fn svr_non_support_vectors_inside_tube() {
    for seed in 0..5 {
        let (x, y) = random_problem(30 + seed, 50, 3);
        let spec = RegressorSpec::new(ModelKind::Svr).with("tol", 1e-9);
        let model = fit(&spec, &x, &y).unwrap();
        let ModelInternals::Svr(s) = model.internals() else {
            panic!()
        };
        let pred = model.predict(&x).unwrap();
        let eps = 0.1;
        let mut n_sv = 0;
        for i in 0..50 {
            let z: Vec<f64> = (0..3).map(|j| (x.get(i, j) - s.center[j]) / s.scale[j]).collect();
            if s.support_vectors.iter().any(|sv| sv == &z) {
                n_sv += 1;
            } else {
                assert!(
                    (pred[i] - y[i]).abs() <= eps + 1e-6,
                    "row {i}: {}",
                    (pred[i] - y[i]).abs()
                );
            }
        }
        assert_eq!(n_sv, s.support_vectors.len());
    }
}

#[test]
fn forest_shape_and_curve() {
    let (x, y) = random_problem(4, 60, 6);
    let model = fit(&RegressorSpec::new(ModelKind::RandomForest).with_seed(9), &x, &y).unwrap();
    assert_eq!(model.training_curve().len(), 1);
    let ModelInternals::RandomForest(f) = model.internals() else {
        panic!()
    };
    assert_eq!(f.trees.len(), 100);
    assert!(model.training_curve()[0] < rmse(&vec![y.iter().sum::<f64>() / 60.0; 60], &y));
}

#[test]
fn tree_invariants_hold() {
    let (x, y) = random_problem(5, 70, 5);
    for kind in [ModelKind::RandomForest, ModelKind::Gbdt] {
        let model = fit(&RegressorSpec::new(kind), &x, &y).unwrap();
        let trees = match model.internals() {
            ModelInternals::RandomForest(f) => &f.trees,
            ModelInternals::Gbdt(g) => &g.trees,
            _ => unreachable!(),
        };
        for tree in trees {
            for node in &tree.nodes {
                match *node {
                    TreeNode::Leaf { value } => assert!(value.is_finite()),
                    TreeNode::Split { feature, threshold, .. } => {
                        assert!(feature < 5);
                        let col = x.values().column(feature);
                        let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
                        let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                        assert!(threshold >= lo && threshold <= hi);
                    }
                }
            }
        }
    }
}

#[test]
fn fits_are_deterministic_and_row_independent() {
    let (x, y) = random_problem(6, 50, 4);
    let (probe, _) = random_problem(7, 20, 4);
    for kind in ModelKind::ALL {
        let spec = RegressorSpec::new(kind).with_seed(13);
        let a = fit(&spec, &x, &y).unwrap();
        let b = fit(&spec, &x, &y).unwrap();
        assert_eq!(a.predict(&probe).unwrap(), b.predict(&probe).unwrap(), "{kind}");

        let order: Vec<usize> = (0..20).rev().collect();
        let permuted = probe.take_rows(&order).unwrap();
        let pa = a.predict(&probe).unwrap();
        let pp = a.predict(&permuted).unwrap();
        for (k, &i) in order.iter().enumerate() {
            assert_eq!(pp[k], pa[i]);
        }
        let empty = probe.take_rows(&[]).unwrap();
        assert!(a.predict(&empty).unwrap().is_empty());
    }
}

#[test]
fn json_round_trip() {
    let (x, y) = random_problem(8, 40, 3);
    for kind in ModelKind::ALL {
        let model = fit(&RegressorSpec::new(kind).with_seed(1), &x, &y).unwrap();
        let text = model.to_json();
        let back = TrainedModel::from_json(&text).unwrap();
        assert_eq!(back, model);
        assert_eq!(back.predict(&x).unwrap(), model.predict(&x).unwrap());
    }
    assert!(TrainedModel::from_json("{\"format\":\"other\"}").is_err());
}

#[test]
fn column_mismatch_names_first_offender() {
    let (x, y) = random_problem(9, 30, 3);
    let model = fit(&RegressorSpec::new(ModelKind::BayesianRidge), &x, &y).unwrap();
    let renamed = FeatureMatrix::new(
        x.row_ids().to_vec(),
        vec![
            Column::new("x0", FeatureGroup::Metadata),
            Column::new("zz", FeatureGroup::Metadata),
            Column::new("x2", FeatureGroup::Metadata),
        ],
        x.values().clone(),
    )
    .unwrap();
    match model.predict(&renamed) {
        Err(ModelError::ColumnMismatch { position, found, .. }) => {
            assert_eq!(position, 1);
            assert_eq!(found, "zz");
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn invalid_hyperparameters_rejected() {
    let (x, y) = random_problem(10, 20, 2);
    let bad = [
        RegressorSpec::new(ModelKind::Gbdt).with("learning_rate", 0.0),
        RegressorSpec::new(ModelKind::Gbdt).with("max_depth", 0.0),
        RegressorSpec::new(ModelKind::RandomForest).with("n_trees", 0.0),
        RegressorSpec::new(ModelKind::Svr).with("c", -1.0),
        RegressorSpec::new(ModelKind::Svr).with("epsilon", 0.0),
        RegressorSpec::new(ModelKind::BayesianRidge).with("tol", f64::NAN),
    ];
    for spec in bad {
        assert!(
            matches!(fit(&spec, &x, &y), Err(ModelError::InvalidHyperparameter { .. })),
            "{spec:?}"
        );
    }
    assert!(matches!(
        fit(&RegressorSpec::new(ModelKind::Svr).with("depth", 1.0), &x, &y),
        Err(ModelError::UnknownHyperparameter { .. })
    ));
    assert!(matches!(
        fit(&RegressorSpec::new(ModelKind::Svr), &x, &y[..5]),
        Err(ModelError::Shape { .. })
    ));
    let mut y_nan = y.clone();
    y_nan[3] = f64::NAN;
    assert!(matches!(
        fit(&RegressorSpec::new(ModelKind::Svr), &x, &y_nan),
        Err(ModelError::NonFiniteTarget(3))
    ));
}

#[test]
fn svr_iteration_cap_is_an_error() {
    let (x, y) = random_problem(11, 30, 3);
    let spec = RegressorSpec::new(ModelKind::Svr)
        .with("max_iter", 2.0)
        .with("tol", 1e-12);
    match fit(&spec, &x, &y) {
        Err(ModelError::NotConverged { iterations, violation }) => {
            assert_eq!(iterations, 2);
            assert!(violation >= 1e-12);
        }
        other => panic!("{other:?}"),
    }
}
