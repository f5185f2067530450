//! Experiment harness: declarative configs, a seed × algorithm grid runner
//! with per-cell error isolation, report emission (JSON or CSV), and a
//! validation-loss threshold tuner.

use crate::baselines::{self, Evaluation, IfcaConfig};
use crate::data::{
    self, load_federated_csv, make_transform_splits, FederatedDataset, SyntheticSpec, Targets,
    Transform,
};
use crate::distance::DistanceKind;
use crate::graphclust::misclustering;
use crate::models::{smoothness_estimate, ParamVector, TrainConfig};
use crate::srfca::{self, SrfcaConfig, SrfcaRun};
use crate::{exec, Error, Result};
use ndarray::Array2;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

/// Where the federation comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetSpec {
    /// Generate the synthetic mixture per run seed (the `SyntheticSpec`'s
    /// own `seed` field is overridden by each run's seed).
    Synthetic(SyntheticSpec),
    /// Shard one base CSV (rows of `d` features then a target; integer
    /// targets are read as class labels) into `m` clients of `n` rows and
    /// apply transforms round-robin; the transform index is the ground
    /// truth.
    TransformSplit {
        base: PathBuf,
        transforms: Vec<Transform>,
        m: usize,
        n: usize,
    },
    /// Load a directory previously written by the dataset saver.
    Path { path: PathBuf },
}

/// The algorithms the harness can run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algo {
    Srfca,
    Ifca,
    Local,
    Global,
}

impl Algo {
    pub const ALL: [Algo; 4] = [Algo::Srfca, Algo::Ifca, Algo::Local, Algo::Global];

    pub fn name(&self) -> &'static str {
        match self {
            Algo::Srfca => "srfca",
            Algo::Ifca => "ifca",
            Algo::Local => "local",
            Algo::Global => "global",
        }
    }
}

impl std::fmt::Display for Algo {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Algo {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "srfca" => Ok(Algo::Srfca),
            "ifca" => Ok(Algo::Ifca),
            "local" => Ok(Algo::Local),
            "global" => Ok(Algo::Global),
            other => Err(Error::invalid(format!(
                "unknown algorithm {other:?} (expected srfca, ifca, local, or global)"
            ))),
        }
    }
}

/// A learning rate: a number, or `"auto"` to use `1 / max_i L̂_i` where
/// `L̂_i` estimates the smoothness of client `i`'s training risk.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LearningRate {
    Fixed(f64),
    Named(String),
}

impl LearningRate {
    fn validate(&self) -> Result<()> {
        match self {
            LearningRate::Fixed(v) if *v > 0.0 && v.is_finite() => Ok(()),
            LearningRate::Fixed(v) => {
                Err(Error::invalid(format!("learning_rate {v} must be positive")))
            }
            LearningRate::Named(s) if s == "auto" => Ok(()),
            LearningRate::Named(s) => {
                Err(Error::invalid(format!("unknown learning_rate {s:?} (only \"auto\")")))
            }
        }
    }
}

/// Training hyper-parameters as they appear in a config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainSpec {
    pub steps: usize,
    pub learning_rate: LearningRate,
    #[serde(default)]
    pub projection_diameter: Option<f64>,
    #[serde(default = "one")]
    pub local_steps: usize,
    #[serde(default)]
    pub trim: f64,
}

fn one() -> usize {
    1
}

impl TrainSpec {
    /// Resolves `"auto"` against the dataset at hand.
    pub fn resolve(&self, fd: &FederatedDataset) -> Result<TrainConfig> {
        self.learning_rate.validate()?;
        let learning_rate = match &self.learning_rate {
            LearningRate::Fixed(v) => *v,
            LearningRate::Named(_) => {
                let l: Vec<Result<f64>> = exec::map_range(fd.len(), |i| {
                    smoothness_estimate(fd.model_kind, &fd.client(i).train())
                });
                let l = l.into_iter().collect::<Result<Vec<_>>>()?;
                let max = l.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                1.0 / max
            }
        };
        let cfg = TrainConfig {
            steps: self.steps,
            learning_rate,
            projection_diameter: self.projection_diameter,
            local_steps: self.local_steps,
            trim: self.trim,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// SR-FCA options as they appear in a config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SrfcaSpec {
    #[serde(default)]
    pub lambda: Option<f64>,
    #[serde(default = "two")]
    pub min_cluster_size: usize,
    #[serde(default = "one")]
    pub refine_rounds: usize,
    #[serde(default = "l2")]
    pub metric: DistanceKind,
    #[serde(default)]
    pub resample_per_refine: bool,
    #[serde(default = "full")]
    pub participation: f64,
}

fn two() -> usize {
    2
}

fn l2() -> DistanceKind {
    DistanceKind::L2Params
}

fn full() -> f64 {
    1.0
}

impl Default for SrfcaSpec {
    fn default() -> Self {
        SrfcaSpec {
            lambda: None,
            min_cluster_size: 2,
            refine_rounds: 1,
            metric: DistanceKind::L2Params,
            resample_per_refine: false,
            participation: 1.0,
        }
    }
}

impl SrfcaSpec {
    pub fn build(&self, train: TrainConfig) -> SrfcaConfig {
        SrfcaConfig {
            lambda: self.lambda,
            min_cluster_size: self.min_cluster_size,
            refine_rounds: self.refine_rounds,
            metric: self.metric,
            train,
            resample_per_refine: self.resample_per_refine,
            participation: self.participation,
        }
    }
}

/// IFCA options as they appear in a config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IfcaSpec {
    #[serde(default = "two")]
    pub k: usize,
    /// Outer rounds; defaults to the train block's `steps`.
    #[serde(default)]
    pub rounds: Option<usize>,
    #[serde(default = "full")]
    pub participation: f64,
}

impl Default for IfcaSpec {
    fn default() -> Self {
        IfcaSpec {
            k: 2,
            rounds: None,
            participation: 1.0,
        }
    }
}

/// Global-baseline options.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GlobalSpec {
    #[serde(default = "full")]
    pub participation: f64,
}

impl Default for GlobalSpec {
    fn default() -> Self {
        GlobalSpec { participation: 1.0 }
    }
}

/// Report format.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportFormat {
    Json,
    Csv,
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_algorithms() -> Vec<Algo> {
    Algo::ALL.to_vec()
}

fn default_format() -> ReportFormat {
    ReportFormat::Json
}

/// A complete experiment: dataset, shared training hyper-parameters,
/// per-algorithm options, seeds, and output settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dataset: DatasetSpec,
    pub train: TrainSpec,
    #[serde(default)]
    pub srfca: SrfcaSpec,
    #[serde(default)]
    pub ifca: IfcaSpec,
    #[serde(default)]
    pub global: GlobalSpec,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_algorithms")]
    pub algorithms: Vec<Algo>,
    /// Directory for the report and per-round SR-FCA traces; `None` keeps
    /// everything on stdout.
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default = "default_format")]
    pub format: ReportFormat,
}

impl ExperimentConfig {
    pub fn from_json(path_label: &str, text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::Json {
            path: path_label.to_string(),
            source: e,
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::invalid("seeds must not be empty"));
        }
        if self.algorithms.is_empty() {
            return Err(Error::invalid("algorithms must not be empty"));
        }
        self.learning_rate_named_check()
    }

    fn learning_rate_named_check(&self) -> Result<()> {
        self.train.learning_rate.validate()
    }
}

/// Builds the federation a run cell operates on. Synthetic datasets are a
/// pure function of the run seed; loaded datasets ignore it (the algorithms
/// stay seeded).
pub fn materialize_dataset(spec: &DatasetSpec, seed: u64) -> Result<FederatedDataset> {
    match spec {
        DatasetSpec::Synthetic(s) => {
            let mut s = s.clone();
            s.seed = seed;
            data::gen_mixture_linreg(&s)
        }
        DatasetSpec::TransformSplit {
            base,
            transforms,
            m,
            n,
        } => {
            let (features, targets) = load_base_csv(base)?;
            make_transform_splits(&features, &targets, transforms, *m, *n, seed)
        }
        DatasetSpec::Path { path } => load_federated_csv(path),
    }
}

/// Parses a headerless base CSV of `d` feature columns plus one target
/// column. Targets that all parse as non-negative integers become class
/// labels; anything else is a regression target.
fn load_base_csv(path: &Path) -> Result<(Array2<f64>, Targets)> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    let path_str = path.display().to_string();
    let mut width = None;
    let mut rows: Vec<f64> = Vec::new();
    let mut raw_targets: Vec<String> = Vec::new();
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
        if fields.len() < 2 {
            return Err(malformed("need at least one feature and a target".into()));
        }
        let w = *width.get_or_insert(fields.len());
        if fields.len() != w {
            return Err(malformed(format!("expected {w} columns, found {}", fields.len())));
        }
        for f in &fields[..w - 1] {
            rows.push(
                f.trim()
                    .parse::<f64>()
                    .map_err(|e| malformed(format!("bad feature value {f:?}: {e}")))?,
            );
        }
        raw_targets.push(fields[w - 1].trim().to_string());
    }
    let Some(width) = width else {
        return Err(Error::Malformed {
            path: path_str,
            line: 1,
            msg: "file contains no data rows".into(),
        });
    };
    let n = raw_targets.len();
    let features = Array2::from_shape_vec((n, width - 1), rows).expect("validated widths");
    let as_classes: Option<Vec<usize>> =
        raw_targets.iter().map(|t| t.parse::<usize>().ok()).collect();
    let targets = match as_classes {
        Some(classes) => Targets::Class(classes),
        None => {
            let reals = raw_targets
                .iter()
                .enumerate()
                .map(|(i, t)| {
                    t.parse::<f64>().map_err(|e| Error::Malformed {
                        path: path_str.clone(),
                        line: i + 1,
                        msg: format!("bad target {t:?}: {e}"),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Targets::Real(reals)
        }
    };
    Ok((features, targets))
}

/// One (seed, algorithm) cell of the report. `error` is set — and the
/// metrics are absent — when the cell failed; other cells keep running.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub seed: u64,
    pub algo: Algo,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_test_loss: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub misclustering: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cluster_count: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cluster_sizes: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl CellReport {
    fn empty(seed: u64, algo: Algo) -> Self {
        CellReport {
            seed,
            algo,
            mean_test_loss: None,
            accuracy: None,
            misclustering: None,
            cluster_count: None,
            cluster_sizes: None,
            lambda: None,
            error: None,
        }
    }

    fn metric(&self, name: &str) -> Option<f64> {
        match name {
            "mean_test_loss" => self.mean_test_loss,
            "accuracy" => self.accuracy,
            "misclustering" => self.misclustering,
            _ => None,
        }
    }
}

/// Mean and (unbiased) standard deviation of a metric across seeds; the
/// deviation is absent with fewer than two values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub mean: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub std: Option<f64>,
}

/// Wall-clock timing of one cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellTiming {
    pub seed: u64,
    pub algo: Algo,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub cells: Vec<CellTiming>,
    pub total_seconds: f64,
}

/// The full experiment report. Everything except `timings` is a
/// deterministic function of the config.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub config: ExperimentConfig,
    pub cells: Vec<CellReport>,
    /// `algo → metric → (mean, std)` across the seeds that produced the
    /// metric.
    pub summary: BTreeMap<String, BTreeMap<String, MetricSummary>>,
    pub timings: Timings,
}

const SUMMARY_METRICS: [&str; 3] = ["mean_test_loss", "accuracy", "misclustering"];

/// Runs the whole seed × algorithm grid. Dataset and config problems abort
/// the run; a failure inside one cell is recorded in that cell's `error`
/// and the grid continues.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Report> {
    cfg.validate()?;
    let t0 = Instant::now();
    let mut cells = Vec::new();
    let mut timings = Vec::new();
    for &seed in &cfg.seeds {
        let fd = materialize_dataset(&cfg.dataset, seed)?;
        let train = cfg.train.resolve(&fd)?;
        for &algo in &cfg.algorithms {
            let start = Instant::now();
            let cell = match run_cell(&fd, cfg, &train, algo, seed) {
                Ok(cell) => cell,
                Err(e) => CellReport {
                    error: Some(e.to_string()),
                    ..CellReport::empty(seed, algo)
                },
            };
            timings.push(CellTiming {
                seed,
                algo,
                seconds: start.elapsed().as_secs_f64(),
            });
            cells.push(cell);
        }
    }
    let summary = summarize(&cells);
    Ok(Report {
        config: cfg.clone(),
        cells,
        summary,
        timings: Timings {
            cells: timings,
            total_seconds: t0.elapsed().as_secs_f64(),
        },
    })
}

fn summarize(cells: &[CellReport]) -> BTreeMap<String, BTreeMap<String, MetricSummary>> {
    let mut summary = BTreeMap::new();
    for algo in Algo::ALL {
        let mut per_metric = BTreeMap::new();
        for metric in SUMMARY_METRICS {
            let vals: Vec<f64> = cells
                .iter()
                .filter(|c| c.algo == algo)
                .filter_map(|c| c.metric(metric))
                .collect();
            if vals.is_empty() {
                continue;
            }
            let n = vals.len() as f64;
            let mean = vals.iter().sum::<f64>() / n;
            let std = (vals.len() >= 2).then(|| {
                (vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
            });
            per_metric.insert(metric.to_string(), MetricSummary { mean, std });
        }
        if !per_metric.is_empty() {
            summary.insert(algo.name().to_string(), per_metric);
        }
    }
    summary
}

fn run_cell(
    fd: &FederatedDataset,
    cfg: &ExperimentConfig,
    train: &TrainConfig,
    algo: Algo,
    seed: u64,
) -> Result<CellReport> {
    let mut cell = CellReport::empty(seed, algo);
    let record_eval = |cell: &mut CellReport, eval: Evaluation| {
        cell.mean_test_loss = Some(eval.mean_test_loss);
        cell.accuracy = eval.accuracy;
    };
    match algo {
        Algo::Local => {
            let out = baselines::train_local(fd, train)?;
            record_eval(&mut cell, out.evaluation);
        }
        Algo::Global => {
            let out =
                baselines::fedavg_global(fd, train, cfg.global.participation, seed, None)?;
            record_eval(&mut cell, out.evaluation);
        }
        Algo::Ifca => {
            let icfg = IfcaConfig {
                k: cfg.ifca.k,
                rounds: cfg.ifca.rounds.unwrap_or(train.steps),
                train: train.clone(),
                participation: cfg.ifca.participation,
            };
            let out = baselines::ifca(fd, &icfg, seed)?;
            record_eval(&mut cell, out.evaluation);
            cell.cluster_count = Some(out.clustering.cluster_count());
            cell.cluster_sizes = Some(out.clustering.sizes());
            if let Some(gt) = &fd.ground_truth {
                cell.misclustering = Some(misclustering(&out.clustering, gt)?.error_fraction);
            }
        }
        Algo::Srfca => {
            let scfg = cfg.srfca.build(train.clone());
            let run = srfca::sr_fca(fd, &scfg, seed)?;
            let refs: Vec<&ParamVector> = (0..fd.len())
                .map(|i| match run.state.clustering.cluster_of(i) {
                    Some(c) => &run.state.cluster_models[&c],
                    None => &run.state.node_models[&i],
                })
                .collect();
            record_eval(&mut cell, baselines::evaluate(fd, &refs)?);
            cell.cluster_count = Some(run.state.clustering.cluster_count());
            cell.cluster_sizes = Some(run.state.clustering.sizes());
            cell.lambda = Some(run.lambda);
            if let Some(gt) = &fd.ground_truth {
                cell.misclustering =
                    Some(misclustering(&run.state.clustering, gt)?.error_fraction);
            }
            if let Some(dir) = &cfg.out {
                write_srfca_trace(&run, dir, seed)?;
            }
        }
    }
    Ok(cell)
}

#[derive(Serialize)]
struct SrfcaSummaryFile {
    lambda: f64,
    cluster_count: usize,
    cluster_sizes: Vec<usize>,
}

/// Writes `round_<r>.csv` (the clustering after the one-shot step and each
/// refinement round) and a `summary.json` under `<dir>/srfca_seed<seed>/`.
pub fn write_srfca_trace(run: &SrfcaRun, dir: &Path, seed: u64) -> Result<()> {
    let sub = dir.join(format!("srfca_seed{seed}"));
    let io = |e: std::io::Error, p: &Path| Error::io(p.display().to_string(), e);
    std::fs::create_dir_all(&sub).map_err(|e| io(e, &sub))?;
    for (r, clustering) in run.trace.iter().enumerate() {
        let path = sub.join(format!("round_{r}.csv"));
        std::fs::write(&path, clustering.to_csv_string()).map_err(|e| io(e, &path))?;
    }
    let summary = SrfcaSummaryFile {
        lambda: run.lambda,
        cluster_count: run.state.clustering.cluster_count(),
        cluster_sizes: run.state.clustering.sizes(),
    };
    let path = sub.join("summary.json");
    let text = serde_json::to_string_pretty(&summary).map_err(|e| Error::Json {
        path: path.display().to_string(),
        source: e,
    })?;
    std::fs::write(&path, text + "\n").map_err(|e| io(e, &path))?;
    Ok(())
}

/// Renders a report. JSON is pretty-printed with a stable field order; CSV
/// emits one row per cell (floats to six decimals), a blank line, and a
/// summary table.
pub fn emit_report(report: &Report, format: ReportFormat) -> Result<String> {
    match format {
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(report).map_err(|e| Error::Json {
                path: "<report>".to_string(),
                source: e,
            })?;
            s.push('\n');
            Ok(s)
        }
        ReportFormat::Csv => Ok(report_csv(report)),
    }
}

fn report_csv(report: &Report) -> String {
    fn num(v: Option<f64>) -> String {
        v.map_or(String::new(), |v| format!("{v:.6}"))
    }
    let mut out = String::from(
        "seed,algo,mean_test_loss,accuracy,misclustering,cluster_count,lambda,error\n",
    );
    for c in &report.cells {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            c.seed,
            c.algo,
            num(c.mean_test_loss),
            num(c.accuracy),
            num(c.misclustering),
            c.cluster_count.map_or(String::new(), |v| v.to_string()),
            num(c.lambda),
            c.error.as_deref().unwrap_or("").replace(',', ";"),
        )
        .expect("string write");
    }
    out.push('\n');
    out.push_str("algo,metric,mean,std\n");
    for (algo, metrics) in &report.summary {
        for (metric, s) in metrics {
            writeln!(
                out,
                "{},{},{},{}",
                algo,
                metric,
                format_args!("{:.6}", s.mean),
                s.std.map_or(String::new(), |v| format!("{v:.6}")),
            )
            .expect("string write");
        }
    }
    out
}

/// One grid point of a threshold sweep.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TunePoint {
    pub lambda: f64,
    /// Mean over clients of (own-model validation loss − assigned-cluster
    /// validation loss); higher means clustering at this threshold helps
    /// more. Absent when the threshold produced no valid clustering.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub objective: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cluster_count: Option<usize>,
}

/// A completed threshold sweep.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TuneOutcome {
    pub best_lambda: f64,
    pub points: Vec<TunePoint>,
}

/// Sweeps the one-shot threshold over `grid` without ground truth: node
/// models are trained once; each candidate threshold is scored by how much
/// the resulting cluster models improve each client's validation (test)
/// loss over its own local model. Unassigned clients contribute zero. Ties
/// prefer the smaller threshold; thresholds where every cluster dissolves
/// score as absent. Errors only when every candidate fails.
pub fn tune_lambda(
    fd: &FederatedDataset,
    grid: &[f64],
    cfg: &SrfcaConfig,
    seed: u64,
) -> Result<TuneOutcome> {
    cfg.validate()?;
    if grid.is_empty() {
        return Err(Error::invalid("lambda grid must not be empty"));
    }
    let node_models = srfca::train_node_models(fd, &cfg.train)?;
    let mut sorted = grid.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut points = Vec::with_capacity(sorted.len());
    let mut best: Option<(f64, f64)> = None; // (objective, lambda)
    for &lambda in &sorted {
        let candidate = SrfcaConfig {
            lambda: Some(lambda),
            ..cfg.clone()
        };
        match srfca::one_shot_from_models(fd, &candidate, seed, node_models.clone()) {
            Ok((state, _)) => {
                let per_client: Vec<Result<f64>> = exec::map_range(fd.len(), |i| {
                    let Some(c) = state.clustering.cluster_of(i) else {
                        return Ok(0.0);
                    };
                    let split = fd.client(i).test();
                    let own = crate::models::loss(fd.model_kind, &state.node_models[&i], &split)?;
                    let clustered =
                        crate::models::loss(fd.model_kind, &state.cluster_models[&c], &split)?;
                    Ok(own - clustered)
                });
                let per_client = per_client.into_iter().collect::<Result<Vec<_>>>()?;
                let objective = per_client.iter().sum::<f64>() / fd.len() as f64;
                points.push(TunePoint {
                    lambda,
                    objective: Some(objective),
                    cluster_count: Some(state.clustering.cluster_count()),
                });
                // Strict > keeps the smallest lambda on ties (grid is sorted).
                if best.map_or(true, |(bo, _)| objective > bo) {
                    best = Some((objective, lambda));
                }
            }
            Err(Error::NoClusterMeetsMinSize { .. }) => {
                points.push(TunePoint {
                    lambda,
                    objective: None,
                    cluster_count: None,
                });
            }
            Err(e) => return Err(e),
        }
    }
    let Some((_, best_lambda)) = best else {
        return Err(Error::NoClusterMeetsMinSize {
            min_size: cfg.min_cluster_size,
        });
    };
    Ok(TuneOutcome { best_lambda, points })
}
