//! Generator, transform-split, and persistence tests.

use fedclust_core::data::{
    gen_mixture_linreg, load_federated_csv, make_transform_splits, resample_clients,
    save_federated_csv, SyntheticSpec, Targets, Transform,
};
use fedclust_core::models::ModelKind;
use fedclust_core::Error;
use ndarray::{array, Array2};

fn spec(seed: u64) -> SyntheticSpec {
    SyntheticSpec {
        m: 6,
        n: 10,
        d: 8,
        c: 2,
        sigma: 0.01,
        train_fraction: 0.8,
        seed,
    }
}

#[test]
fn generation_is_a_pure_function_of_the_spec() {
    let a = gen_mixture_linreg(&spec(42)).unwrap();
    let b = gen_mixture_linreg(&spec(42)).unwrap();
    assert_eq!(a, b);
    let c = gen_mixture_linreg(&spec(43)).unwrap();
    assert_ne!(a, c);
}

#[test]
fn ground_truth_and_shapes_follow_the_spec() {
    let fd = gen_mixture_linreg(&spec(7)).unwrap();
    assert_eq!(fd.len(), 6);
    assert_eq!(fd.model_kind, ModelKind::LinearRegression { d: 8 });
    let gt = fd.ground_truth.as_ref().unwrap();
    assert_eq!(gt.cluster_count(), 2);
    assert_eq!(gt.members(0), vec![0, 1, 2]);
    assert_eq!(gt.members(1), vec![3, 4, 5]);
    for client in fd.clients() {
        assert_eq!(client.n(), 10);
        assert_eq!(client.d(), 8);
        assert_eq!(client.train_indices, vec![0, 1, 2, 3, 4, 5, 6, 7]);
        assert_eq!(client.test_indices, vec![8, 9]);
    }
    let prov = fd.synthetic.as_ref().unwrap();
    assert_eq!(prov.cluster_models.len(), 2);
    for w in &prov.cluster_models {
        assert!(w.0.iter().all(|&v| v == 0.0 || v == 1.0));
    }
}

/// Clients of one cluster share a design up to row permutation; clients of
/// different clusters do not.
#[test]
fn same_cluster_clients_share_their_design_rows()
{
    let fd = gen_mixture_linreg(&spec(3)).unwrap();
    let rows_of = |id: usize| {
        let c = fd.client(id);
        let mut rows: Vec<Vec<u64>> = (0..c.n())
            .map(|i| c.features.row(i).iter().map(|v| v.to_bits()).collect())
            .collect();
        rows.sort();
        rows
    };
    assert_eq!(rows_of(0), rows_of(1));
    assert_eq!(rows_of(0), rows_of(2));
    assert_ne!(rows_of(0), rows_of(3));
    assert_eq!(rows_of(3), rows_of(5));
    // Different clients still present the shared rows in different orders.
    let ordered = |id: usize| -> Vec<u64> {
        fd.client(id).features.iter().map(|v| v.to_bits()).collect()
    };
    assert_ne!(ordered(0), ordered(1));
}

#[test]
fn noiseless_targets_equal_the_planted_signal_exactly() {
    let mut s = spec(5);
    s.sigma = 0.0;
    let fd = gen_mixture_linreg(&s).unwrap();
    let prov = fd.synthetic.as_ref().unwrap();
    for (id, client) in fd.clients().iter().enumerate() {
        let w = &prov.cluster_models[id / 3];
        let Targets::Real(ys) = &client.targets else { panic!("regression targets") };
        for i in 0..client.n() {
            let signal: f64 = client
                .features
                .row(i)
                .iter()
                .zip(&w.0)
                .map(|(a, b)| a * b)
                .sum();
            assert_eq!(ys[i], signal);
        }
    }
}

#[test]
fn generated_features_are_standard_normal_in_aggregate() {
    let s = SyntheticSpec {
        m: 4,
        n: 500,
        d: 500,
        c: 2,
        sigma: 0.0,
        train_fraction: 0.8,
        seed: 12,
    };
    let fd = gen_mixture_linreg(&s).unwrap();
    let mut count = 0usize;
    let (mut sum, mut sumsq) = (0.0, 0.0);
    for client in fd.clients() {
        for v in client.features.iter() {
            sum += v;
            sumsq += v * v;
            count += 1;
        }
    }
    let mean = sum / count as f64;
    let var = sumsq / count as f64 - mean * mean;
    assert!(count >= 1_000_000);
    assert!(mean.abs() < 0.01, "feature mean {mean}");
    assert!((var - 1.0).abs() < 0.02, "feature variance {var}");
}

#[test]
fn invalid_specs_are_rejected() {
    assert!(matches!(
        gen_mixture_linreg(&SyntheticSpec { m: 5, ..spec(0) }),
        Err(Error::InvalidConfig(_)) // m not divisible by c
    ));
    assert!(gen_mixture_linreg(&SyntheticSpec { sigma: -1.0, ..spec(0) }).is_err());
    assert!(gen_mixture_linreg(&SyntheticSpec { train_fraction: 0.0, ..spec(0) }).is_err());
    assert!(gen_mixture_linreg(&SyntheticSpec { train_fraction: 1.5, ..spec(0) }).is_err());
    assert!(gen_mixture_linreg(&SyntheticSpec { d: 0, ..spec(0) }).is_err());
    // train_fraction that floors to zero training rows
    assert!(gen_mixture_linreg(&SyntheticSpec { train_fraction: 0.05, ..spec(0) }).is_err());
}

#[test]
fn resampling_keeps_the_mixture_but_redraws_the_data() {
    let fd = gen_mixture_linreg(&spec(21)).unwrap();
    let s = spec(21);
    let r1 = resample_clients(&fd, &s, 1).unwrap();
    let r1b = resample_clients(&fd, &s, 1).unwrap();
    let r2 = resample_clients(&fd, &s, 2).unwrap();
    assert_eq!(r1, r1b);
    assert_ne!(r1, r2);
    assert_ne!(fd, r1);
    assert_eq!(fd.ground_truth, r1.ground_truth);
    assert_eq!(
        fd.synthetic.as_ref().unwrap().cluster_models,
        r1.synthetic.as_ref().unwrap().cluster_models
    );
}

#[test]
fn resampling_a_loaded_dataset_fails() {
    let fd = gen_mixture_linreg(&spec(2)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    save_federated_csv(&fd, dir.path()).unwrap();
    let loaded = load_federated_csv(dir.path()).unwrap();
    assert!(matches!(
        resample_clients(&loaded, &spec(2), 1),
        Err(Error::NotSynthetic)
    ));
}

#[test]
fn save_load_round_trip_is_exact() {
    let fd = gen_mixture_linreg(&spec(99)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    save_federated_csv(&fd, dir.path()).unwrap();
    let loaded = load_federated_csv(dir.path()).unwrap();
    // Everything round-trips bitwise except provenance, which is not
    // persisted.
    assert_eq!(loaded.clients(), fd.clients());
    assert_eq!(loaded.ground_truth, fd.ground_truth);
    assert_eq!(loaded.model_kind, fd.model_kind);
    assert!(loaded.synthetic.is_none());
}

#[test]
fn missing_ground_truth_loads_as_none() {
    let fd = gen_mixture_linreg(&spec(1)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    save_federated_csv(&fd, dir.path()).unwrap();
    std::fs::remove_file(dir.path().join("ground_truth.csv")).unwrap();
    let loaded = load_federated_csv(dir.path()).unwrap();
    assert!(loaded.ground_truth.is_none());
    assert_eq!(loaded.clients(), fd.clients());
}

#[test]
fn malformed_rows_name_the_file_and_line() {
    let fd = gen_mixture_linreg(&spec(1)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    save_federated_csv(&fd, dir.path()).unwrap();
    let path = dir.path().join("client_0.csv");
    let mut text = std::fs::read_to_string(&path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    let mut bad = lines[..2].join("\n");
    bad.push_str("\n1.0,2.0,oops\n");
    bad.push_str(&lines[3..].join("\n"));
    text = bad;
    std::fs::write(&path, text).unwrap();
    match load_federated_csv(dir.path()) {
        Err(Error::Malformed { path: p, line, .. }) => {
            assert!(p.ends_with("client_0.csv"));
            assert_eq!(line, 3);
        }
        other => panic!("expected a malformed-row error, got {other:?}"),
    }
}

fn tiny_base() -> (Array2<f64>, Targets) {
    // Eight flattened 2×2 "images" with class labels.
    let features = Array2::from_shape_vec(
        (8, 4),
        (0..32).map(|v| (v as f64) / 31.0).collect(),
    )
    .unwrap();
    let targets = Targets::Class(vec![0, 1, 0, 1, 2, 2, 1, 0]);
    (features, targets)
}

#[test]
fn transform_split_assigns_round_robin_ground_truth() {
    let (features, targets) = tiny_base();
    let fd = make_transform_splits(
        &features,
        &targets,
        &[Transform::Identity, Transform::Rotate180],
        4,
        2,
        5,
    )
    .unwrap();
    assert_eq!(fd.len(), 4);
    assert_eq!(fd.model_kind, ModelKind::MultinomialLogistic { d: 4, classes: 3 });
    let gt = fd.ground_truth.as_ref().unwrap();
    assert_eq!(gt.cluster_of(0), Some(0));
    assert_eq!(gt.cluster_of(1), Some(1));
    assert_eq!(gt.cluster_of(2), Some(0));
    assert_eq!(gt.cluster_of(3), Some(1));
    // n = 2 with the default 0.8 train fraction floors to 1 train row.
    assert_eq!(fd.client(0).train_indices, vec![0]);
    assert_eq!(fd.client(0).test_indices, vec![1]);
}

#[test]
fn transforms_match_their_definitions() {
    let row = [1.0, 2.0, 3.0, 4.0]; // [[1,2],[3,4]]
    assert_eq!(Transform::Rotate90.apply(&row, 2), vec![3.0, 1.0, 4.0, 2.0]);
    assert_eq!(Transform::Rotate180.apply(&row, 2), vec![4.0, 3.0, 2.0, 1.0]);
    assert_eq!(Transform::Rotate270.apply(&row, 2), vec![2.0, 4.0, 1.0, 3.0]);
    assert_eq!(Transform::Identity.apply(&row, 2), row.to_vec());
    let inv = Transform::PixelInvert.apply(&[0.25, 1.0], 0);
    assert_eq!(inv, vec![0.75, 0.0]);
    // Four quarter turns are the identity.
    let mut r = row.to_vec();
    for _ in 0..4 {
        r = Transform::Rotate90.apply(&r, 2);
    }
    assert_eq!(r, row.to_vec());
}

#[test]
fn transform_split_rejects_bad_requests() {
    let (features, targets) = tiny_base();
    // Rotation on non-square features (3 columns).
    let f3 = Array2::from_shape_vec((8, 3), (0..24).map(|v| v as f64).collect()).unwrap();
    assert!(make_transform_splits(&f3, &targets, &[Transform::Rotate90], 2, 2, 0).is_err());
    // Not enough rows for m*n.
    assert!(make_transform_splits(&features, &targets, &[Transform::Identity], 5, 2, 0).is_err());
    // No transforms.
    assert!(make_transform_splits(&features, &targets, &[], 2, 2, 0).is_err());
}

#[test]
fn transform_split_shards_are_disjoint() {
    let (features, targets) = tiny_base();
    let fd = make_transform_splits(&features, &targets, &[Transform::Identity], 4, 2, 9).unwrap();
    let mut seen: Vec<Vec<u64>> = Vec::new();
    for client in fd.clients() {
        for i in 0..client.n() {
            let row: Vec<u64> = client.features.row(i).iter().map(|v| v.to_bits()).collect();
            assert!(!seen.contains(&row), "row appears in two shards");
            seen.push(row);
        }
    }
    assert_eq!(seen.len(), 8);
}
