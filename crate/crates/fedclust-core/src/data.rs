//! Federated datasets: synthetic mixture-of-linear-regressions generation,
//! transform-based simulated federations over ingested tabular data, and
//! CSV persistence.

use crate::graphclust::Clustering;
use crate::models::{ModelKind, ParamVector};
use crate::rng::{round_seed, stream, Purpose};
use crate::{exec, Error, Result};
use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::Path;

/// Default fraction of each client's samples used for training.
pub const DEFAULT_TRAIN_FRACTION: f64 = 0.8;

/// Targets of a client dataset: real-valued for regression, class indices
/// for classification.
#[derive(Clone, Debug, PartialEq)]
pub enum Targets {
    Real(Vec<f64>),
    Class(Vec<usize>),
}

impl Targets {
    pub fn len(&self) -> usize {
        match self {
            Targets::Real(v) => v.len(),
            Targets::Class(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A borrowed view of one side of a client's train/test partition.
#[derive(Clone, Copy)]
pub struct DataSplit<'a> {
    pub features: &'a Array2<f64>,
    pub targets: &'a Targets,
    pub indices: &'a [usize],
}

impl<'a> DataSplit<'a> {
    pub fn feature_dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Feature row of sample `i` (an index into the client's full dataset).
    #[inline]
    pub fn row(&self, i: usize) -> &'a [f64] {
        self.features
            .row(i)
            .to_slice()
            .expect("feature matrices are standard layout")
    }
}

/// One client's private shard: an `n × d` feature matrix, `n` targets, and a
/// disjoint, covering train/test index partition.
#[derive(Clone, Debug, PartialEq)]
pub struct ClientDataset {
    pub client_id: usize,
    pub features: Array2<f64>,
    pub targets: Targets,
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
}

impl ClientDataset {
    /// Builds a client dataset with the first `train_count` rows as the
    /// train split and the rest as the test split.
    pub fn with_prefix_split(
        client_id: usize,
        features: Array2<f64>,
        targets: Targets,
        train_count: usize,
    ) -> Result<Self> {
        let n = features.nrows();
        let ds = ClientDataset {
            client_id,
            features,
            targets,
            train_indices: (0..train_count.min(n)).collect(),
            test_indices: (train_count.min(n)..n).collect(),
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn n(&self) -> usize {
        self.features.nrows()
    }

    pub fn d(&self) -> usize {
        self.features.ncols()
    }

    pub fn train(&self) -> DataSplit<'_> {
        DataSplit {
            features: &self.features,
            targets: &self.targets,
            indices: &self.train_indices,
        }
    }

    pub fn test(&self) -> DataSplit<'_> {
        DataSplit {
            features: &self.features,
            targets: &self.targets,
            indices: &self.test_indices,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        if n == 0 {
            return Err(Error::invalid(format!("client {} has no samples", self.client_id)));
        }
        if self.targets.len() != n {
            return Err(Error::invalid(format!(
                "client {}: {} targets for {} rows",
                self.client_id,
                self.targets.len(),
                n
            )));
        }
        let mut seen = vec![false; n];
        for &i in self.train_indices.iter().chain(&self.test_indices) {
            if i >= n || seen[i] {
                return Err(Error::invalid(format!(
                    "client {}: train/test indices are not a partition",
                    self.client_id
                )));
            }
            seen[i] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::invalid(format!(
                "client {}: train/test indices do not cover all rows",
                self.client_id
            )));
        }
        if self.features.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "client {}: non-finite feature value",
                self.client_id
            )));
        }
        Ok(())
    }
}

/// Parameters of the synthetic mixture-of-linear-regressions federation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    /// Number of clients `m`, divided equally among the clusters.
    pub m: usize,
    /// Samples per client `n`.
    pub n: usize,
    /// Feature dimension `d`.
    pub d: usize,
    /// Number of clusters.
    pub c: usize,
    /// Standard deviation of the label noise.
    pub sigma: f64,
    /// Fraction of each client's samples used for training.
    #[serde(default = "default_train_fraction")]
    pub train_fraction: f64,
    /// Base seed; the dataset is a pure function of this spec.
    #[serde(default)]
    pub seed: u64,
}

fn default_train_fraction() -> f64 {
    DEFAULT_TRAIN_FRACTION
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.n == 0 || self.d == 0 || self.c == 0 {
            return Err(Error::invalid("m, n, d, c must all be positive"));
        }
        if self.m % self.c != 0 {
            return Err(Error::invalid(format!(
                "m = {} clients cannot be divided equally into c = {} clusters",
                self.m, self.c
            )));
        }
        if !(self.sigma >= 0.0) || !self.sigma.is_finite() {
            return Err(Error::invalid("sigma must be a non-negative finite number"));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction <= 1.0) {
            return Err(Error::invalid("train_fraction must lie in (0, 1]"));
        }
        if self.train_count() == 0 {
            return Err(Error::invalid("train_fraction leaves no training samples"));
        }
        Ok(())
    }

    pub fn train_count(&self) -> usize {
        ((self.n as f64) * self.train_fraction).floor() as usize
    }

    pub fn clients_per_cluster(&self) -> usize {
        self.m / self.c
    }
}

/// How a synthetic dataset was generated; retained so clients can be
/// resampled from the same mixture.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticProvenance {
    pub spec: SyntheticSpec,
    pub cluster_models: Vec<ParamVector>,
}

/// A complete federation: every client's shard, the model family they share,
/// and (when known) the ground-truth clustering.
#[derive(Clone, Debug, PartialEq)]
pub struct FederatedDataset {
    clients: Vec<ClientDataset>,
    pub ground_truth: Option<Clustering>,
    pub model_kind: ModelKind,
    pub synthetic: Option<SyntheticProvenance>,
}

impl FederatedDataset {
    /// Validates and normalizes (clients sorted by id, ids contiguous from 0).
    pub fn new(
        mut clients: Vec<ClientDataset>,
        ground_truth: Option<Clustering>,
        model_kind: ModelKind,
        synthetic: Option<SyntheticProvenance>,
    ) -> Result<Self> {
        model_kind.validate()?;
        if clients.is_empty() {
            return Err(Error::invalid("a federation needs at least one client"));
        }
        clients.sort_by_key(|c| c.client_id);
        for (want, client) in clients.iter().enumerate() {
            if client.client_id != want {
                return Err(Error::invalid(format!(
                    "client ids must be contiguous from 0; missing {want}"
                )));
            }
            client.validate()?;
            if client.d() != model_kind.feature_dim() {
                return Err(Error::DimensionMismatch {
                    expected: model_kind.feature_dim(),
                    got: client.d(),
                });
            }
            let type_ok = matches!(
                (&client.targets, model_kind),
                (Targets::Real(_), ModelKind::LinearRegression { .. })
                    | (Targets::Class(_), ModelKind::MultinomialLogistic { .. })
            );
            if !type_ok {
                return Err(Error::invalid(format!(
                    "client {}: target type does not match the model family",
                    client.client_id
                )));
            }
        }
        if let Some(gt) = &ground_truth {
            if !gt.unassigned().is_empty() || gt.client_ids() != (0..clients.len()).collect::<Vec<_>>()
            {
                return Err(Error::invalid(
                    "ground truth must assign exactly the federation's clients",
                ));
            }
        }
        Ok(FederatedDataset {
            clients,
            ground_truth,
            model_kind,
            synthetic,
        })
    }

    pub fn clients(&self) -> &[ClientDataset] {
        &self.clients
    }

    pub fn client(&self, id: usize) -> &ClientDataset {
        &self.clients[id]
    }

    pub fn len(&self) -> usize {
        self.clients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clients.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.model_kind.feature_dim()
    }
}

/// Generates the synthetic mixture: each cluster draws a ground-truth model
/// with iid Bernoulli(0.5) coordinates in {0, 1} and one shared standard
/// normal design; each client receives a seeded permutation of its cluster's
/// design rows, its own train/test split, and its own iid `N(0, σ²)` label
/// noise on `y = ⟨x, w*⟩ + ε`.
///
/// Sharing the design within a cluster keeps every feature marginal iid
/// standard normal while making the per-client least-squares problems agree
/// on a common row space — which is what lets locally trained models of one
/// cluster concentrate even when `d` far exceeds `n`.
pub fn gen_mixture_linreg(spec: &SyntheticSpec) -> Result<FederatedDataset> {
    spec.validate()?;
    let cluster_models: Vec<ParamVector> = (0..spec.c)
        .map(|c| {
            let mut rng = stream(spec.seed, Purpose::ClusterModel, c as u64);
            ParamVector((0..spec.d).map(|_| f64::from(rng.gen_bool(0.5))).collect())
        })
        .collect();
    gen_with_models(spec, &cluster_models, spec.seed)
}

/// Redraws every client's samples from the same mixture (same cluster
/// models, same ground truth), with randomness derived from
/// `(spec.seed, round)`. Fails on ingested datasets, whose generating
/// distribution is unknown.
pub fn resample_clients(
    fd: &FederatedDataset,
    spec: &SyntheticSpec,
    round: usize,
) -> Result<FederatedDataset> {
    let provenance = fd.synthetic.as_ref().ok_or(Error::NotSynthetic)?;
    spec.validate()?;
    if provenance.cluster_models.len() != spec.c {
        return Err(Error::invalid(format!(
            "spec wants {} clusters but the dataset was generated with {}",
            spec.c,
            provenance.cluster_models.len()
        )));
    }
    if provenance.cluster_models[0].len() != spec.d {
        return Err(Error::DimensionMismatch {
            expected: provenance.cluster_models[0].len(),
            got: spec.d,
        });
    }
    gen_with_models(spec, &provenance.cluster_models, round_seed(spec.seed, round))
}

fn gen_with_models(
    spec: &SyntheticSpec,
    cluster_models: &[ParamVector],
    base_seed: u64,
) -> Result<FederatedDataset> {
    let per = spec.clients_per_cluster();
    // One shared design per cluster.
    let designs: Vec<Array2<f64>> = exec::map_range(spec.c, |c| {
        let mut rng = stream(base_seed, Purpose::Features, c as u64);
        let data: Vec<f64> = (0..spec.n * spec.d)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        Array2::from_shape_vec((spec.n, spec.d), data).expect("shape matches data length")
    });
    let train_count = spec.train_count();
    let clients: Vec<Result<ClientDataset>> = exec::map_range(spec.m, |i| {
        let cluster = i / per;
        let design = &designs[cluster];
        let w = &cluster_models[cluster];
        let mut perm: Vec<usize> = (0..spec.n).collect();
        perm.shuffle(&mut stream(base_seed, Purpose::Permutation, i as u64));
        let mut noise_rng = stream(base_seed, Purpose::Noise, i as u64);
        let mut features = Array2::zeros((spec.n, spec.d));
        let mut ys = Vec::with_capacity(spec.n);
        for (row, &src) in perm.iter().enumerate() {
            let x = design.row(src);
            features.row_mut(row).assign(&x);
            let signal: f64 = x
                .to_slice()
                .expect("standard layout")
                .iter()
                .zip(&w.0)
                .map(|(a, b)| a * b)
                .sum();
            let eps: f64 = noise_rng.sample::<f64, _>(StandardNormal);
            ys.push(signal + spec.sigma * eps);
        }
        ClientDataset::with_prefix_split(i, features, Targets::Real(ys), train_count)
    });
    let clients = clients.into_iter().collect::<Result<Vec<_>>>()?;
    let labels: Vec<usize> = (0..spec.m).map(|i| i / per).collect();
    FederatedDataset::new(
        clients,
        Some(Clustering::from_labels(&labels)),
        ModelKind::LinearRegression { d: spec.d },
        Some(SyntheticProvenance {
            spec: spec.clone(),
            cluster_models: cluster_models.to_vec(),
        }),
    )
}

/// Feature-space transforms used to simulate heterogeneous federations from
/// one base dataset of flattened square images.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transform {
    Identity,
    Rotate90,
    Rotate180,
    Rotate270,
    /// Pixel inversion `x ↦ 1 − x` (an involution on `[0, 1]`-scaled data).
    PixelInvert,
}

impl Transform {
    fn quarter_turns(self) -> usize {
        match self {
            Transform::Rotate90 => 1,
            Transform::Rotate180 => 2,
            Transform::Rotate270 => 3,
            _ => 0,
        }
    }

    /// Applies the transform to one flattened row. `side` is the image side
    /// length (needed for rotations; pass 0 for non-rotations).
    pub fn apply(self, row: &[f64], side: usize) -> Vec<f64> {
        match self {
            Transform::Identity => row.to_vec(),
            Transform::PixelInvert => row.iter().map(|&v| 1.0 - v).collect(),
            _ => {
                let mut out = row.to_vec();
                for _ in 0..self.quarter_turns() {
                    out = rotate90_once(&out, side);
                }
                out
            }
        }
    }
}

/// One clockwise quarter turn of a flattened `side × side` image:
/// `out[r][c] = in[side−1−c][r]`.
fn rotate90_once(row: &[f64], side: usize) -> Vec<f64> {
    let mut out = vec![0.0; row.len()];
    for r in 0..side {
        for c in 0..side {
            out[r * side + c] = row[(side - 1 - c) * side + r];
        }
    }
    out
}

/// Splits an ingested base dataset into `m` disjoint shards of `n` rows
/// (after a seeded shuffle), assigns shards round-robin to `transforms`, and
/// applies each shard's transform to its features. The transform index is
/// the ground-truth cluster.
pub fn make_transform_splits(
    base_features: &Array2<f64>,
    base_targets: &Targets,
    transforms: &[Transform],
    m: usize,
    n: usize,
    seed: u64,
) -> Result<FederatedDataset> {
    if transforms.is_empty() {
        return Err(Error::invalid("at least one transform is required"));
    }
    if m == 0 || n < 2 {
        return Err(Error::invalid("need m >= 1 clients and n >= 2 points per client"));
    }
    let rows = base_features.nrows();
    let d = base_features.ncols();
    if base_targets.len() != rows {
        return Err(Error::invalid("base dataset: target count != row count"));
    }
    if rows < m * n {
        return Err(Error::invalid(format!(
            "base dataset has {rows} rows; need m*n = {}",
            m * n
        )));
    }
    let needs_rotation = transforms.iter().any(|t| t.quarter_turns() > 0);
    let side = (d as f64).sqrt().round() as usize;
    if needs_rotation && side * side != d {
        return Err(Error::invalid(format!(
            "rotations need a square image; {d} features is not a perfect square"
        )));
    }
    let mut order: Vec<usize> = (0..rows).collect();
    order.shuffle(&mut stream(seed, Purpose::Shuffle, 0));
    let train_count = ((n as f64) * DEFAULT_TRAIN_FRACTION).floor().max(1.0) as usize;
    let mut clients = Vec::with_capacity(m);
    let mut labels = Vec::with_capacity(m);
    for i in 0..m {
        let transform = transforms[i % transforms.len()];
        labels.push(i % transforms.len());
        let shard = &order[i * n..(i + 1) * n];
        let mut features = Array2::zeros((n, d));
        for (row, &src) in shard.iter().enumerate() {
            let transformed = transform.apply(
                base_features.row(src).to_slice().expect("standard layout"),
                side,
            );
            features
                .row_mut(row)
                .assign(&ndarray::ArrayView1::from(&transformed[..]));
        }
        let targets = match base_targets {
            Targets::Real(v) => Targets::Real(shard.iter().map(|&s| v[s]).collect()),
            Targets::Class(v) => Targets::Class(shard.iter().map(|&s| v[s]).collect()),
        };
        clients.push(ClientDataset::with_prefix_split(i, features, targets, train_count)?);
    }
    let model_kind = match base_targets {
        Targets::Real(_) => ModelKind::LinearRegression { d },
        Targets::Class(v) => ModelKind::MultinomialLogistic {
            d,
            classes: v.iter().max().map_or(2, |&c| (c + 1).max(2)),
        },
    };
    FederatedDataset::new(
        clients,
        Some(Clustering::from_labels(&labels)),
        model_kind,
        None,
    )
}

/// Formats a float with 17 significant digits — enough for an exact f64
/// round-trip through text.
pub(crate) fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Serialize, Deserialize)]
struct MetaFile {
    m: usize,
    d: usize,
    model: ModelKind,
    has_ground_truth: bool,
    train_counts: Vec<usize>,
}

/// Persists a federation as a directory: `meta.json`, one `client_<id>.csv`
/// per client (d feature columns then the target; train rows first), and
/// `ground_truth.csv` when a ground truth is present. Floats are written
/// with 17 significant digits.
///
/// Row order is normalized to train-rows-then-test-rows; synthetic
/// provenance is not persisted (a re-loaded dataset cannot be resampled).
pub fn save_federated_csv(fd: &FederatedDataset, dir: &Path) -> Result<()> {
    let io = |e: std::io::Error, p: &Path| Error::io(p.display().to_string(), e);
    std::fs::create_dir_all(dir).map_err(|e| io(e, dir))?;
    let meta = MetaFile {
        m: fd.len(),
        d: fd.feature_dim(),
        model: fd.model_kind,
        has_ground_truth: fd.ground_truth.is_some(),
        train_counts: fd.clients.iter().map(|c| c.train_indices.len()).collect(),
    };
    let meta_path = dir.join("meta.json");
    let meta_json = serde_json::to_string_pretty(&meta).map_err(|e| Error::Json {
        path: meta_path.display().to_string(),
        source: e,
    })?;
    std::fs::write(&meta_path, meta_json + "\n").map_err(|e| io(e, &meta_path))?;
    for client in &fd.clients {
        let mut out = String::new();
        for &i in client.train_indices.iter().chain(&client.test_indices) {
            for v in client.features.row(i) {
                write!(out, "{},", fmt_f64(*v)).expect("string write");
            }
            match &client.targets {
                Targets::Real(v) => writeln!(out, "{}", fmt_f64(v[i])).expect("string write"),
                Targets::Class(v) => writeln!(out, "{}", v[i]).expect("string write"),
            }
        }
        let path = dir.join(format!("client_{}.csv", client.client_id));
        std::fs::write(&path, out).map_err(|e| io(e, &path))?;
    }
    if let Some(gt) = &fd.ground_truth {
        let path = dir.join("ground_truth.csv");
        std::fs::write(&path, gt.to_csv_string()).map_err(|e| io(e, &path))?;
    }
    Ok(())
}

/// Loads a federation saved by [`save_federated_csv`]. A missing
/// `ground_truth.csv` yields `ground_truth = None` (load still succeeds).
pub fn load_federated_csv(dir: &Path) -> Result<FederatedDataset> {
    let io = |e: std::io::Error, p: &Path| Error::io(p.display().to_string(), e);
    let meta_path = dir.join("meta.json");
    let meta_text = std::fs::read_to_string(&meta_path).map_err(|e| io(e, &meta_path))?;
    let meta: MetaFile = serde_json::from_str(&meta_text).map_err(|e| Error::Json {
        path: meta_path.display().to_string(),
        source: e,
    })?;
    if meta.train_counts.len() != meta.m {
        return Err(Error::invalid(format!(
            "{}: train_counts has {} entries for m = {}",
            meta_path.display(),
            meta.train_counts.len(),
            meta.m
        )));
    }
    let mut clients = Vec::with_capacity(meta.m);
    for id in 0..meta.m {
        let path = dir.join(format!("client_{id}.csv"));
        let text = std::fs::read_to_string(&path).map_err(|e| io(e, &path))?;
        let path_str = path.display().to_string();
        let mut rows: Vec<f64> = Vec::new();
        let mut targets_real = Vec::new();
        let mut targets_class = Vec::new();
        let mut n = 0usize;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let malformed = |msg: String| Error::Malformed {
                path: path_str.clone(),
                line: lineno + 1,
                msg,
            };
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != meta.d + 1 {
                return Err(malformed(format!(
                    "expected {} columns, found {}",
                    meta.d + 1,
                    fields.len()
                )));
            }
            for f in &fields[..meta.d] {
                rows.push(
                    f.trim()
                        .parse::<f64>()
                        .map_err(|e| malformed(format!("bad feature value {f:?}: {e}")))?,
                );
            }
            let target = fields[meta.d].trim();
            match meta.model {
                ModelKind::LinearRegression { .. } => targets_real.push(
                    target
                        .parse::<f64>()
                        .map_err(|e| malformed(format!("bad target {target:?}: {e}")))?,
                ),
                ModelKind::MultinomialLogistic { .. } => targets_class.push(
                    target
                        .parse::<usize>()
                        .map_err(|e| malformed(format!("bad class label {target:?}: {e}")))?,
                ),
            }
            n += 1;
        }
        let features = Array2::from_shape_vec((n, meta.d), rows)
            .expect("row count and width were validated per line");
        let targets = match meta.model {
            ModelKind::LinearRegression { .. } => Targets::Real(targets_real),
            ModelKind::MultinomialLogistic { .. } => Targets::Class(targets_class),
        };
        clients.push(ClientDataset::with_prefix_split(
            id,
            features,
            targets,
            meta.train_counts[id],
        )?);
    }
    let gt_path = dir.join("ground_truth.csv");
    let ground_truth = match std::fs::read_to_string(&gt_path) {
        Ok(text) => Some(Clustering::from_csv_str(&gt_path.display().to_string(), &text)?),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => None,
        Err(e) => return Err(io(e, &gt_path)),
    };
    FederatedDataset::new(clients, ground_truth, meta.model, None)
}

/// Per-client evaluation splits, used when a distance metric needs data.
pub fn train_splits(fd: &FederatedDataset) -> Vec<DataSplit<'_>> {
    fd.clients().iter().map(|c| c.train()).collect()
}

/// Concatenates the train rows of `members` into one pooled dataset (used to
/// evaluate cross-cluster losses against a whole cluster).
pub fn pooled_train_data(fd: &FederatedDataset, members: &[usize]) -> Result<ClientDataset> {
    if members.is_empty() {
        return Err(Error::EmptySplit);
    }
    let d = fd.feature_dim();
    let mut rows: Vec<f64> = Vec::new();
    let mut n = 0usize;
    let mut real = Vec::new();
    let mut class = Vec::new();
    for &id in members {
        let client = fd.client(id);
        for &i in &client.train_indices {
            rows.extend_from_slice(client.train().row(i));
            match &client.targets {
                Targets::Real(v) => real.push(v[i]),
                Targets::Class(v) => class.push(v[i]),
            }
            n += 1;
        }
    }
    let targets = match fd.client(members[0]).targets {
        Targets::Real(_) => Targets::Real(real),
        Targets::Class(_) => Targets::Class(class),
    };
    let features = Array2::from_shape_vec((n, d), rows).expect("consistent widths");
    // All rows are "train" here; the pooled data acts as an evaluation split.
    ClientDataset::with_prefix_split(usize::MAX, features, targets, n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fmt_f64_round_trips_exactly() {
        for &x in &[0.0, 1.0, -1.5, 3.141592653589793, 1e-300, -2.2250738585072014e-308] {
            assert_eq!(x, fmt_f64(x).parse::<f64>().unwrap());
        }
    }

    #[test]
    fn rotate_quarter_turn_matches_definition() {
        // [a, b; c, d] rotated 90° clockwise is [c, a; d, b].
        let row = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(rotate90_once(&row, 2), vec![3.0, 1.0, 4.0, 2.0]);
    }
}
