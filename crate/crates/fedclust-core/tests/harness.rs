//! Experiment-harness tests: config parsing, learning-rate resolution,
//! grid execution, report rendering, and threshold tuning.

use fedclust_core::data::{
    gen_mixture_linreg, save_federated_csv, ClientDataset, SyntheticSpec, Targets,
};
use fedclust_core::distance::DistanceKind;
use fedclust_core::harness::{
    emit_report, materialize_dataset, run_experiment, tune_lambda, Algo, DatasetSpec,
    ExperimentConfig, LearningRate, Report, ReportFormat, TrainSpec,
};
use fedclust_core::models::{ModelKind, TrainConfig};
use fedclust_core::srfca::SrfcaConfig;
use fedclust_core::Error;
use ndarray::Array2;
use std::str::FromStr;

fn mixture_json(m: usize, steps: usize) -> String {
    format!(
        r#"{{
            "dataset": {{"kind": "synthetic", "m": {m}, "n": 40, "d": 8, "c": 2, "sigma": 0.0}},
            "train": {{"steps": {steps}, "learning_rate": 0.3}}
        }}"#
    )
}

#[test]
fn minimal_configs_fill_in_defaults() {
    let cfg = ExperimentConfig::from_json("test", &mixture_json(6, 50)).unwrap();
    assert_eq!(cfg.seeds, vec![0]);
    assert_eq!(cfg.algorithms, Algo::ALL.to_vec());
    assert_eq!(cfg.format, ReportFormat::Json);
    assert!(cfg.out.is_none());
    assert_eq!(cfg.srfca.min_cluster_size, 2);
    assert_eq!(cfg.srfca.refine_rounds, 1);
    assert_eq!(cfg.srfca.metric, DistanceKind::L2Params);
    assert!(cfg.srfca.lambda.is_none());
    assert_eq!(cfg.ifca.k, 2);
    assert!(cfg.ifca.rounds.is_none());
    assert_eq!(cfg.global.participation, 1.0);
    assert_eq!(cfg.train.local_steps, 1);
    assert_eq!(cfg.train.trim, 0.0);
    match &cfg.dataset {
        DatasetSpec::Synthetic(s) => {
            assert_eq!(s.train_fraction, 0.8, "default split");
            assert_eq!((s.m, s.n, s.d, s.c), (6, 40, 8, 2));
        }
        other => panic!("wrong dataset spec {other:?}"),
    }
}

#[test]
fn bad_configs_are_rejected_with_context() {
    // Unparseable JSON names the source label.
    match ExperimentConfig::from_json("cfg.json", "{") {
        Err(Error::Json { path, .. }) => assert_eq!(path, "cfg.json"),
        other => panic!("expected JSON error, got {other:?}"),
    }
    // Unknown algorithm name fails at deserialization.
    let bad_algo = r#"{
        "dataset": {"kind": "synthetic", "m": 4, "n": 10, "d": 2, "c": 2, "sigma": 0.1},
        "train": {"steps": 1, "learning_rate": 0.1},
        "algorithms": ["srfca", "kmeans"]
    }"#;
    assert!(ExperimentConfig::from_json("t", bad_algo).is_err());
    // Unknown named learning rate fails validation.
    let bad_lr = r#"{
        "dataset": {"kind": "synthetic", "m": 4, "n": 10, "d": 2, "c": 2, "sigma": 0.1},
        "train": {"steps": 1, "learning_rate": "fast"}
    }"#;
    assert!(matches!(
        ExperimentConfig::from_json("t", bad_lr),
        Err(Error::InvalidConfig(_))
    ));
    // Empty seed list.
    let no_seeds = r#"{
        "dataset": {"kind": "synthetic", "m": 4, "n": 10, "d": 2, "c": 2, "sigma": 0.1},
        "train": {"steps": 1, "learning_rate": 0.1},
        "seeds": []
    }"#;
    assert!(ExperimentConfig::from_json("t", no_seeds).is_err());
}

#[test]
fn algo_names_round_trip() {
    for algo in Algo::ALL {
        assert_eq!(Algo::from_str(algo.name()).unwrap(), algo);
        assert_eq!(algo.to_string(), algo.name());
    }
    assert!(Algo::from_str("kmeans").is_err());
}

/// Two clients whose train designs have sample second-moment matrices
/// diag(1, 2, 4) and diag(1, 1, 2): the auto rate must be 1 / max λ = 1/4.
#[test]
fn auto_learning_rate_is_one_over_the_worst_smoothness() {
    let diag_client = |id: usize, lams: [f64; 3]| {
        let n = 3.0;
        let mut rows = vec![0.0; 9];
        for (k, l) in lams.iter().enumerate() {
            rows[k * 3 + k] = (n * l).sqrt();
        }
        ClientDataset::with_prefix_split(
            id,
            Array2::from_shape_vec((3, 3), rows).unwrap(),
            Targets::Real(vec![1.0, 2.0, 3.0]),
            3,
        )
        .unwrap()
    };
    let fd = fedclust_core::data::FederatedDataset::new(
        vec![diag_client(0, [1.0, 2.0, 4.0]), diag_client(1, [1.0, 1.0, 2.0])],
        None,
        ModelKind::LinearRegression { d: 3 },
        None,
    )
    .unwrap();
    let spec = TrainSpec {
        steps: 10,
        learning_rate: LearningRate::Named("auto".into()),
        projection_diameter: None,
        local_steps: 1,
        trim: 0.0,
    };
    let cfg = spec.resolve(&fd).unwrap();
    assert!((cfg.learning_rate - 0.25).abs() < 1e-9, "got {}", cfg.learning_rate);
    assert_eq!(cfg.steps, 10);
    // Fixed rates resolve to themselves; bad names fail.
    let fixed = TrainSpec { learning_rate: LearningRate::Fixed(0.7), ..spec.clone() };
    assert_eq!(fixed.resolve(&fd).unwrap().learning_rate, 0.7);
    let named = TrainSpec { learning_rate: LearningRate::Named("fast".into()), ..spec };
    assert!(named.resolve(&fd).is_err());
}

#[test]
fn experiment_grids_isolate_cell_failures() {
    let mut cfg = ExperimentConfig::from_json("t", &mixture_json(6, 40)).unwrap();
    cfg.algorithms = vec![Algo::Srfca, Algo::Local];
    cfg.srfca.min_cluster_size = 50; // dissolves everything, srfca cells fail
    cfg.seeds = vec![1, 2];
    let report = run_experiment(&cfg).unwrap();
    assert_eq!(report.cells.len(), 4);
    for cell in &report.cells {
        match cell.algo {
            Algo::Srfca => {
                assert!(cell.error.is_some(), "srfca should have failed");
                assert!(cell.mean_test_loss.is_none());
            }
            Algo::Local => {
                assert!(cell.error.is_none());
                assert!(cell.mean_test_loss.is_some());
            }
            _ => unreachable!("only two algorithms configured"),
        }
    }
    // The summary covers local (two seeds) but has nothing for srfca.
    assert!(report.summary.contains_key("local"));
    assert!(!report.summary.contains_key("srfca"));
    assert_eq!(report.timings.cells.len(), 4);
}

#[test]
fn summaries_use_the_unbiased_standard_deviation() {
    let mut cfg = ExperimentConfig::from_json("t", &mixture_json(6, 40)).unwrap();
    cfg.algorithms = vec![Algo::Local];
    cfg.seeds = vec![1, 2, 3];
    let report = run_experiment(&cfg).unwrap();
    let vals: Vec<f64> = report.cells.iter().map(|c| c.mean_test_loss.unwrap()).collect();
    let mean = vals.iter().sum::<f64>() / 3.0;
    let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / 2.0;
    let s = &report.summary["local"]["mean_test_loss"];
    assert!((s.mean - mean).abs() < 1e-15);
    assert!((s.std.unwrap() - var.sqrt()).abs() < 1e-15);

    // A single seed has no deviation.
    cfg.seeds = vec![1];
    let single = run_experiment(&cfg).unwrap();
    assert!(single.summary["local"]["mean_test_loss"].std.is_none());
}

#[test]
fn json_reports_parse_back_to_the_same_report() {
    let mut cfg = ExperimentConfig::from_json("t", &mixture_json(6, 30)).unwrap();
    cfg.algorithms = vec![Algo::Local, Algo::Srfca];
    let report = run_experiment(&cfg).unwrap();
    let text = emit_report(&report, ReportFormat::Json).unwrap();
    assert!(text.ends_with('\n'));
    let parsed: Report = serde_json::from_str(&text).unwrap();
    assert_eq!(parsed, report);
}

#[test]
fn csv_reports_have_cell_rows_and_a_summary_table() {
    let mut cfg = ExperimentConfig::from_json("t", &mixture_json(6, 30)).unwrap();
    cfg.algorithms = vec![Algo::Local, Algo::Global];
    cfg.seeds = vec![4, 5];
    let report = run_experiment(&cfg).unwrap();
    let text = emit_report(&report, ReportFormat::Csv).unwrap();
    let mut sections = text.split("\n\n");
    let cells: Vec<&str> = sections.next().unwrap().lines().collect();
    assert_eq!(
        cells[0],
        "seed,algo,mean_test_loss,accuracy,misclustering,cluster_count,lambda,error"
    );
    assert_eq!(cells.len(), 1 + 4, "header plus one row per cell");
    assert!(cells[1].starts_with("4,local,"));
    let summary: Vec<&str> = sections.next().unwrap().lines().collect();
    assert_eq!(summary[0], "algo,metric,mean,std");
    assert!(summary[1..].iter().any(|l| l.starts_with("global,mean_test_loss,")));
}

#[test]
fn synthetic_datasets_take_the_run_seed() {
    let spec = SyntheticSpec {
        m: 4,
        n: 10,
        d: 3,
        c: 2,
        sigma: 0.1,
        train_fraction: 0.8,
        seed: 999, // ignored: the run seed wins
    };
    let made = materialize_dataset(&DatasetSpec::Synthetic(spec.clone()), 3).unwrap();
    let direct = gen_mixture_linreg(&SyntheticSpec { seed: 3, ..spec }).unwrap();
    assert_eq!(made, direct);
}

#[test]
fn path_datasets_round_trip_through_materialize() {
    let spec = SyntheticSpec {
        m: 4,
        n: 10,
        d: 3,
        c: 2,
        sigma: 0.1,
        train_fraction: 0.8,
        seed: 6,
    };
    let fd = gen_mixture_linreg(&spec).unwrap();
    let dir = tempfile::tempdir().unwrap();
    save_federated_csv(&fd, dir.path()).unwrap();
    let loaded = materialize_dataset(
        &DatasetSpec::Path { path: dir.path().to_path_buf() },
        42, // ignored by path datasets
    )
    .unwrap();
    assert_eq!(loaded.clients(), fd.clients());
    assert_eq!(loaded.ground_truth, fd.ground_truth);
}

#[test]
fn transform_split_datasets_infer_their_model_kind() {
    let dir = tempfile::tempdir().unwrap();
    // 8 rows, 4 features (a 2×2 "image"), integer targets → classification.
    let mut classes = String::new();
    let mut reals = String::new();
    for i in 0..8 {
        let f: Vec<String> = (0..4).map(|j| format!("{}.5", i + j)).collect();
        classes.push_str(&format!("{},{}\n", f.join(","), i % 3));
        reals.push_str(&format!("{},{}.25\n", f.join(","), i));
    }
    let class_path = dir.path().join("classes.csv");
    let real_path = dir.path().join("reals.csv");
    std::fs::write(&class_path, classes).unwrap();
    std::fs::write(&real_path, reals).unwrap();

    let class_fd = materialize_dataset(
        &DatasetSpec::TransformSplit {
            base: class_path,
            transforms: vec![
                fedclust_core::data::Transform::Identity,
                fedclust_core::data::Transform::Rotate180,
            ],
            m: 4,
            n: 2,
        },
        9,
    )
    .unwrap();
    assert_eq!(class_fd.model_kind, ModelKind::MultinomialLogistic { d: 4, classes: 3 });
    assert_eq!(class_fd.len(), 4);
    let gt = class_fd.ground_truth.as_ref().unwrap();
    assert_eq!(gt.cluster_count(), 2);

    let real_fd = materialize_dataset(
        &DatasetSpec::TransformSplit {
            base: real_path,
            transforms: vec![fedclust_core::data::Transform::Identity],
            m: 4,
            n: 2,
        },
        9,
    )
    .unwrap();
    assert_eq!(real_fd.model_kind, ModelKind::LinearRegression { d: 4 });
}

#[test]
fn srfca_cells_write_their_traces_when_out_is_set() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::from_json("t", &mixture_json(6, 40)).unwrap();
    cfg.algorithms = vec![Algo::Srfca];
    cfg.seeds = vec![5];
    cfg.out = Some(dir.path().to_path_buf());
    let report = run_experiment(&cfg).unwrap();
    assert!(report.cells[0].error.is_none());
    let sub = dir.path().join("srfca_seed5");
    assert!(sub.join("round_0.csv").is_file(), "one-shot trace");
    assert!(sub.join("round_1.csv").is_file(), "refinement trace");
    assert!(!sub.join("round_2.csv").exists(), "only R+1 rounds");
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(sub.join("summary.json")).unwrap()).unwrap();
    assert!(summary["lambda"].as_f64().unwrap() > 0.0);
    assert_eq!(summary["cluster_count"].as_u64().unwrap(), 2);
}

#[test]
fn lambda_tuning_prefers_the_separating_threshold() {
    let spec = SyntheticSpec {
        m: 6,
        n: 40,
        d: 8,
        c: 2,
        sigma: 0.0,
        train_fraction: 0.8,
        seed: 11,
    };
    let fd = gen_mixture_linreg(&spec).unwrap();
    // Precondition: the planted models sit further apart than λ = 1, so
    // that threshold separates (node models land within ~1e-10 of the
    // planted ones here) while λ = 50 merges everything.
    let prov = fd.synthetic.as_ref().unwrap();
    let delta: f64 = prov.cluster_models[0]
        .0
        .iter()
        .zip(&prov.cluster_models[1].0)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    assert!(delta > 1.1, "planted separation {delta}");

    let cfg = SrfcaConfig::new(TrainConfig::new(300, 0.3));
    let out = tune_lambda(&fd, &[50.0, 1.0, 0.0], &cfg, 0).unwrap();
    assert_eq!(out.best_lambda, 1.0);
    assert_eq!(out.points.len(), 3);
    // Points come back sorted by lambda.
    assert_eq!(out.points[0].lambda, 0.0);
    assert!(out.points[0].objective.is_none(), "no edges at λ = 0");
    assert_eq!(out.points[1].cluster_count, Some(2));
    assert_eq!(out.points[2].cluster_count, Some(1));
    let sep = out.points[1].objective.unwrap();
    let merged = out.points[2].objective.unwrap();
    assert!(sep > merged, "separating threshold must score higher");

    // A grid where every threshold dissolves is an error.
    assert!(matches!(
        tune_lambda(&fd, &[0.0], &cfg, 0),
        Err(Error::NoClusterMeetsMinSize { .. })
    ));
    // An empty grid is rejected.
    assert!(tune_lambda(&fd, &[], &cfg, 0).is_err());
}

#[test]
fn report_cells_keep_srfca_metadata() {
    // 300 steps drive the node models to within ~1e-10 of the planted ones,
    // so the noiseless test loss sits far below the 1e-6 floor asserted
    // here.
    let mut cfg = ExperimentConfig::from_json("t", &mixture_json(6, 300)).unwrap();
    cfg.algorithms = vec![Algo::Srfca];
    let report = run_experiment(&cfg).unwrap();
    let cell = &report.cells[0];
    assert_eq!(cell.algo, Algo::Srfca);
    assert_eq!(cell.cluster_count, Some(2));
    assert_eq!(cell.cluster_sizes, Some(vec![3, 3]));
    assert!(cell.lambda.unwrap() > 0.0);
    assert_eq!(cell.misclustering, Some(0.0));
    assert!(cell.mean_test_loss.unwrap() < 1e-6, "noiseless recovery");
}
