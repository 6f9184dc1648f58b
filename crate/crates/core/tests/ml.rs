mod common;

use dsa_core::ml::cart::{DecisionTree, TreeNode, TreeParams};
use dsa_core::ml::forest::{bootstrap_indices, ForestParams, RandomForest};
use dsa_core::ml::model::{carve_validation, ModelParameters, SvmHyper};
use dsa_core::ml::svm::{gram, smo, SvmModel};
use dsa_core::ml::*;
use dsa_core::seed;
use proptest::prelude::*;
use rand::Rng;
use serde_json::json;

use common::*;

fn small_hyper() -> Hyperparameters {
    let mut h = Hyperparameters::default();
    h.rf.n_trees = 25;
    h.mlp.max_epochs = 200;
    h
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn root_split_is_exhaustive_best(
        d in 1usize..=3,
        raw in prop::collection::vec((prop::collection::vec(-5i32..5, 3), 0u8..2), 4..=20),
    ) {
        let x: Vec<Vec<f64>> = raw.iter().map(|(r, _)| r[..d].iter().map(|&v| v as f64).collect()).collect();
        let y: Vec<u8> = raw.iter().map(|(_, l)| *l).collect();
        let params = TreeParams { max_depth: Some(1), min_leaf: 1, max_features: None };
        let tree = DecisionTree::fit(&x, &y, &params);
        let c1 = y.iter().filter(|&&l| l == 1).count() as f64;
        let parent = oracle_gini(y.len() as f64 - c1, c1);
        match (tree.nodes[0].split, oracle_best_impurity(&x, &y)) {
            (Some(s), Some(best)) => {
                let got = oracle_split_impurity(&x, &y, s.feature, s.threshold);
                prop_assert!((got - best).abs() < 1e-12, "split {s:?} impurity {got} vs best {best}");
            }
            (None, best) => {
                prop_assert!(best.is_none_or(|b| parent - b < 1e-9), "missed a split with gain {:?}", best.map(|b| parent - b));
            }
            (Some(s), None) => prop_assert!(false, "split {s:?} on constant features"),
        }
    }

    #[test]
    fn mlp_gradient_matches_finite_differences(seed_value in 0u64..1000) {
        let err = mlp_gradient_error(seed_value);
        prop_assert!(err < 1e-5, "relative error {}", err);
    }
}

#[test]
fn svm_satisfies_kkt_conditions() {
    let ds = noisy_benchmark(300, 5);
    let (c, gamma, tol) = (10.0, 0.5, 1e-3);
    let (model, sol) = SvmModel::fit(&ds.features, &ds.labels, c, gamma, tol, 1_000_000);
    assert!(sol.converged);
    let mut worst: f64 = 0.0;
    for (i, row) in ds.features.iter().enumerate() {
        let y = if ds.labels[i] == 1 { 1.0 } else { -1.0 };
        let m = y * model.decision(row);
        let a = sol.alpha[i];
        let v = if a <= 0.0 {
            (1.0 - m).max(0.0)
        } else if a >= c {
            (m - 1.0).max(0.0)
        } else {
            (m - 1.0).abs()
        };
        worst = worst.max(v);
    }
    assert!(worst <= tol, "worst KKT violation {worst}");
}

#[test]
fn svm_support_vectors_sit_on_the_margin() {
    let ds = separable(40, 2);
    let (model, sol) = SvmModel::fit(&ds.features, &ds.labels, 100.0, 0.5, 1e-3, 100_000);
    assert!(sol.converged);
    for (i, row) in ds.features.iter().enumerate() {
        if sol.alpha[i] > 0.0 {
            let y = if ds.labels[i] == 1 { 1.0 } else { -1.0 };
            assert_eq!(model.predict(row), ds.labels[i]);
            assert!(y * model.decision(row) >= 1.0 - 1e-3);
        }
    }
}

#[test]
fn svm_ignores_an_all_zero_feature() {
    let ds = noisy_benchmark(120, 9);
    let padded: Vec<Vec<f64>> = ds
        .features
        .iter()
        .map(|r| {
            let mut r = r.clone();
            r.push(0.0);
            r
        })
        .collect();
    let (a, _) = SvmModel::fit(&ds.features, &ds.labels, 1.0, 0.3, 1e-3, 1_000_000);
    let (b, _) = SvmModel::fit(&padded, &ds.labels, 1.0, 0.3, 1e-3, 1_000_000);
    for (r, p) in ds.features.iter().zip(&padded) {
        assert!((a.decision(r) - b.decision(p)).abs() < 1e-9);
    }
}

#[test]
fn smo_reports_iteration_cap() {
    let ds = noisy_benchmark(200, 1);
    let k = gram(&ds.features, 1.0);
    let sol = smo(&k, &ds.labels, 100.0, 1e-3, 5);
    assert!(!sol.converged);
    let hyper = Hyperparameters {
        svm: SvmHyper {
            c_grid: vec![100.0],
            gamma_factors: vec![1.0],
            tolerance: 1e-3,
            max_iterations: Some(5),
        },
        ..Default::default()
    };
    let empty = ds.subset(&[]);
    let m = train_classifier(Algorithm::Svm, &ds, &empty, &hyper, 0).unwrap();
    assert!(!m.converged());
}

#[test]
fn svm_separates_xor() {
    let ds = Dataset::from_rows(
        vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![0.0, 1.0], vec![1.0, 0.0]],
        vec![0, 0, 1, 1],
    )
    .unwrap();
    let mut hyper = Hyperparameters::default();
    hyper.svm.c_grid = vec![10.0];
    hyper.svm.gamma_factors = vec![1.0];
    let m = train_classifier(Algorithm::Svm, &ds, &ds.subset(&[]), &hyper, 0).unwrap();
    assert_eq!(evaluate(&m, &ds).unwrap().accuracy, 1.0);
}

#[test]
fn single_tree_forest_equals_cart_on_its_bootstrap() {
    let ds = noisy_benchmark(200, 3);
    let params = ForestParams {
        n_trees: 1,
        max_features: Some(6),
        min_leaf: 1,
        max_depth: None,
    };
    let forest = RandomForest::fit(&ds.features, &ds.labels, &params, 77);
    let boot = ds.subset(&bootstrap_indices(77, 0, ds.len()));
    let tree = DecisionTree::fit(
        &boot.features,
        &boot.labels,
        &TreeParams {
            max_depth: None,
            min_leaf: 1,
            max_features: None,
        },
    );
    let test = noisy_benchmark(500, 4);
    for r in &test.features {
        assert_eq!(forest.predict(r), tree.predict(r));
    }
}

#[test]
fn forest_beats_single_tree_on_average() {
    let hyper = Hyperparameters::default();
    let (mut cart, mut rf) = (0.0, 0.0);
    for s in 0..20u64 {
        let pool = noisy_benchmark(400, 100 + s);
        let test = noisy_benchmark(1000, 200 + s);
        let (train, val) = carve_validation(&pool, s).unwrap();
        cart += evaluate(&train_classifier(Algorithm::Cart, &train, &val, &hyper, s).unwrap(), &test)
            .unwrap()
            .accuracy;
        rf += evaluate(&train_classifier(Algorithm::Rf, &train, &val, &hyper, s).unwrap(), &test)
            .unwrap()
            .accuracy;
    }
    println!("mean accuracy: cart {:.4}, rf {:.4}", cart / 20.0, rf / 20.0);
    assert!(rf >= cart);
}

#[test]
fn shuffled_labels_give_chance_accuracy() {
    let mut rng = seed::rng(11);
    let rows: Vec<Vec<f64>> = (0..1000).map(|_| (0..4).map(|_| rng.random_range(0.0..1.0)).collect()).collect();
    let labels: Vec<u8> = (0..1000).map(|i| (i % 2) as u8).collect();
    let ds = Dataset::from_rows(rows, labels).unwrap();
    let cv = cross_validate(Algorithm::Cart, &ds, 10, &Hyperparameters::default(), 3).unwrap();
    assert!((0.45..=0.55).contains(&cv.mean_accuracy), "{}", cv.mean_accuracy);
}

#[test]
fn separable_data_is_learned_by_every_algorithm() {
    let ds = separable(200, 8);
    let hyper = small_hyper();
    for alg in Algorithm::ALL {
        let cv = cross_validate(alg, &ds, 10, &hyper, 1).unwrap();
        assert_eq!(cv.mean_accuracy, 1.0, "{alg}");
        assert_eq!(cv.folds.len(), 10);
    }
}

#[test]
fn cross_validation_is_reproducible() {
    let ds = noisy_benchmark(200, 21);
    let hyper = small_hyper();
    for alg in [Algorithm::Rf, Algorithm::Mlp] {
        let a = cross_validate(alg, &ds, 10, &hyper, 5).unwrap();
        let b = cross_validate(alg, &ds, 10, &hyper, 5).unwrap();
        assert_eq!(a, b);
    }
    let mut labels = vec![1u8; 100];
    labels[..5].fill(0);
    let tiny = Dataset::from_rows(vec![vec![0.0]; 100], labels).unwrap();
    assert!(cross_validate(Algorithm::Cart, &tiny, 10, &hyper, 0).is_err());
}

#[test]
fn models_serialize_bit_exactly() {
    let ds = noisy_benchmark(150, 31);
    let (train, val, test) = split_dataset(&ds, &SplitSpec::default()).unwrap();
    let hyper = small_hyper();
    for alg in Algorithm::ALL {
        let m = train_classifier(alg, &train, &val, &hyper, 9).unwrap();
        assert_eq!(m, train_classifier(alg, &train, &val, &hyper, 9).unwrap(), "{alg} not deterministic");
        let back = ClassifierModel::from_json(&m.to_json().unwrap(), "mem").unwrap();
        assert_eq!(back, m, "{alg}");
        for r in &test.features {
            let (p, q) = (m.predict(r).unwrap(), back.predict(r).unwrap());
            assert_eq!(p.label, q.label);
            assert_eq!(p.score.map(f64::to_bits), q.score.map(f64::to_bits));
        }
        let v: serde_json::Value = serde_json::from_str(&m.to_json().unwrap()).unwrap();
        assert_eq!(v["algorithm"], json!(alg.name()));
    }
}

#[test]
fn prediction_contract() {
    let leaf = ClassifierModel {
        algorithm: Algorithm::Cart,
        hyperparameters: json!({}),
        parameters: ModelParameters::Cart(DecisionTree {
            n_features: 2,
            nodes: vec![TreeNode {
                counts: [1, 4],
                split: None,
            }],
        }),
        feature_names: vec!["a".into(), "b".into()],
        training_seed: 0,
    };
    assert_eq!(leaf.predict(&[-1e9, 3.0]).unwrap().label, 1);
    assert!(leaf.predict(&[1.0]).is_err());

    let truth = [0, 0, 0, 1, 1, 1, 1, 1, 1, 1];
    let m = evaluate(&leaf, &Dataset::from_rows(vec![vec![0.0, 0.0]; 10], truth.to_vec()).unwrap()).unwrap();
    assert_eq!(m.accuracy, 0.7);

    let predicted = [0, 1, 0, 1, 0, 1, 1, 0, 1, 1];
    let m = Metrics::from_predictions(&truth, &predicted).unwrap();
    assert_eq!(
        (m.confusion.true_positive, m.confusion.false_positive, m.confusion.false_negative, m.confusion.true_negative),
        (2, 2, 1, 5)
    );
    assert_eq!(m.accuracy, 0.7);
}

#[test]
fn training_rejects_a_single_class() {
    let ds = Dataset::from_rows(vec![vec![1.0], vec![2.0]], vec![1, 1]).unwrap();
    assert!(train_classifier(Algorithm::Cart, &ds, &ds, &Hyperparameters::default(), 0).is_err());
}

#[test]
fn confidence_interval_of_identical_runs() {
    let ci = aggregate_runs(&[0.9; 75]).unwrap();
    assert_eq!(ci.half_width, 0.0);
    assert!((ci.mean - 0.9).abs() < 1e-12);
    assert_eq!(ci.n_runs, 75);
}
