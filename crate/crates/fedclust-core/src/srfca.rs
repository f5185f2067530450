//! SR-FCA: successive-refinement federated clustering.
//!
//! The algorithm never guesses the number of clusters. A one-shot step
//! trains one model per client, builds a threshold graph over pairwise model
//! distances, and correlation-clusters it. Each refinement round then (1)
//! re-fits every cluster's model by trimmed-mean gradient descent from
//! zeros, (2) reassigns every client to its nearest cluster model, and (3)
//! merges clusters whose models fall within the threshold — with a minimum
//! cluster size enforced after every step that reshapes the clustering.

use crate::aggregation::{self, Member};
use crate::data::{pooled_train_data, train_splits, ClientDataset, FederatedDataset};
use crate::distance::{dist_cross_loss, dist_l2, pairwise_matrix, DistanceKind};
use crate::graphclust::{correlation_cluster, filter_min_size, threshold_graph, Clustering};
use crate::models::{local_train, ModelKind, ParamVector, TrainConfig};
use crate::rng::round_seed;
use crate::{exec, Error, Result};
use ndarray::Array2;
use std::collections::BTreeMap;

/// SR-FCA hyper-parameters. Randomness is not part of the config: every
/// entry point takes the run seed explicitly.
#[derive(Clone, Debug, PartialEq)]
pub struct SrfcaConfig {
    /// Edge threshold `λ`. `None` lets the one-shot step pick the midpoint
    /// of the largest gap in the observed pairwise distances; refinement
    /// requires a concrete value (supplied by [`sr_fca`] after resolution).
    pub lambda: Option<f64>,
    /// Minimum surviving cluster size `t ≥ 1`.
    pub min_cluster_size: usize,
    /// Number of refinement rounds `R` after the one-shot step.
    pub refine_rounds: usize,
    /// Distance between models.
    pub metric: DistanceKind,
    /// Local/robust training hyper-parameters (steps, rate, projection,
    /// local steps, trim level).
    pub train: TrainConfig,
    /// Redraw every client's samples before each refinement round
    /// (synthetic datasets only).
    pub resample_per_refine: bool,
    /// Fraction of a cluster's members participating in each round of
    /// trimmed-mean gradient descent.
    pub participation: f64,
}

impl SrfcaConfig {
    pub fn new(train: TrainConfig) -> Self {
        SrfcaConfig {
            lambda: None,
            min_cluster_size: 2,
            refine_rounds: 1,
            metric: DistanceKind::L2Params,
            train,
            resample_per_refine: false,
            participation: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        if let Some(l) = self.lambda {
            if !(l >= 0.0) || !l.is_finite() {
                return Err(Error::invalid("lambda must be a non-negative finite number"));
            }
        }
        if self.min_cluster_size < 1 {
            return Err(Error::invalid("min_cluster_size must be >= 1"));
        }
        if !(self.participation > 0.0 && self.participation <= 1.0) {
            return Err(Error::invalid("participation must lie in (0, 1]"));
        }
        Ok(())
    }
}

/// A clustering plus the models attached to it: one per cluster (indexed by
/// cluster id) and the per-client local models the distances are based on.
#[derive(Clone, Debug, PartialEq)]
pub struct ClusterState {
    pub clustering: Clustering,
    pub cluster_models: BTreeMap<usize, ParamVector>,
    pub node_models: BTreeMap<usize, ParamVector>,
}

/// The result of a full SR-FCA run.
#[derive(Clone, Debug)]
pub struct SrfcaRun {
    /// Final clustering and models.
    pub state: ClusterState,
    /// The clustering after the one-shot step and after every refinement
    /// round, in order (`refine_rounds + 1` entries).
    pub trace: Vec<Clustering>,
    /// The threshold actually used (resolved from the gap heuristic when the
    /// config left it unset).
    pub lambda: f64,
}

/// Midpoint of the largest gap between consecutive sorted off-diagonal
/// distances — a serviceable default threshold when the distance histogram
/// is bimodal (within-cluster vs between-cluster).
pub fn lambda_gap_heuristic(matrix: &Array2<f64>) -> Result<f64> {
    let n = matrix.nrows();
    let mut vals = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            vals.push(matrix[[i, j]]);
        }
    }
    if vals.is_empty() {
        return Err(Error::invalid(
            "threshold heuristic needs at least two models",
        ));
    }
    vals.sort_by(f64::total_cmp);
    let mut best = (0.0, vals[0]); // (gap width, midpoint); default λ = min value
    for w in vals.windows(2) {
        let gap = w[1] - w[0];
        if gap > best.0 {
            best = (gap, 0.5 * (w[0] + w[1]));
        }
    }
    Ok(best.1)
}

/// Trains every client's local model from zeros with the config's training
/// hyper-parameters.
pub fn train_node_models(
    fd: &FederatedDataset,
    train: &TrainConfig,
) -> Result<BTreeMap<usize, ParamVector>> {
    let kind = fd.model_kind;
    let w0 = ParamVector::zeros(kind.param_dim());
    let models: Vec<Result<ParamVector>> = exec::map_range(fd.len(), |i| {
        local_train(kind, &w0, &fd.client(i).train(), train)
    });
    models
        .into_iter()
        .enumerate()
        .map(|(i, m)| m.map(|m| (i, m)))
        .collect()
}

/// The one-shot step: local training, pairwise distances, threshold graph,
/// correlation clustering, minimum-size filter, and per-cluster models as
/// the unweighted mean of member node models. Returns the state and the
/// resolved threshold.
pub fn one_shot(fd: &FederatedDataset, cfg: &SrfcaConfig, seed: u64) -> Result<(ClusterState, f64)> {
    cfg.validate()?;
    let node_models = train_node_models(fd, &cfg.train)?;
    one_shot_from_models(fd, cfg, seed, node_models)
}

/// The one-shot step starting from already-trained per-client models (keyed
/// by client id; every client must be present).
pub fn one_shot_from_models(
    fd: &FederatedDataset,
    cfg: &SrfcaConfig,
    seed: u64,
    node_models: BTreeMap<usize, ParamVector>,
) -> Result<(ClusterState, f64)> {
    cfg.validate()?;
    if node_models.len() != fd.len() || node_models.keys().copied().ne(0..fd.len()) {
        return Err(Error::invalid("need exactly one node model per client"));
    }
    let ordered: Vec<ParamVector> = node_models.values().cloned().collect();
    let splits = train_splits(fd);
    let matrix = pairwise_matrix(cfg.metric, fd.model_kind, &ordered, Some(&splits))?;
    let lambda = match cfg.lambda {
        Some(l) => l,
        None => lambda_gap_heuristic(&matrix)?,
    };
    let graph = threshold_graph(&matrix, lambda)?;
    let raw = correlation_cluster(&graph, seed);
    let clustering = filter_min_size(&raw, cfg.min_cluster_size)?;
    let cluster_models = mean_member_models(&clustering, &node_models)?;
    Ok((
        ClusterState {
            clustering,
            cluster_models,
            node_models,
        },
        lambda,
    ))
}

fn mean_member_models(
    clustering: &Clustering,
    node_models: &BTreeMap<usize, ParamVector>,
) -> Result<BTreeMap<usize, ParamVector>> {
    (0..clustering.cluster_count())
        .map(|c| {
            let members: Vec<ParamVector> = clustering
                .members(c)
                .iter()
                .map(|i| node_models[i].clone())
                .collect();
            Ok((c, aggregation::mean(&members)?))
        })
        .collect()
}

/// Distance from one client's local model to one cluster's model under the
/// configured metric. For the cross-evaluation loss the cluster side is the
/// pooled training data of its members.
fn client_cluster_distance(
    metric: DistanceKind,
    kind: ModelKind,
    node_model: &ParamVector,
    client: &ClientDataset,
    cluster_model: &ParamVector,
    cluster_data: Option<&ClientDataset>,
) -> Result<f64> {
    match metric {
        DistanceKind::L2Params => dist_l2(node_model, cluster_model),
        DistanceKind::CrossClusterLoss => dist_cross_loss(
            kind,
            node_model,
            client.train(),
            cluster_model,
            cluster_data.expect("pooled data is materialized for cross-loss").train(),
        ),
    }
}

/// Materializes per-cluster pooled training data when the metric needs it.
fn pooled_per_cluster(
    fd: &FederatedDataset,
    clustering: &Clustering,
    metric: DistanceKind,
) -> Result<Option<Vec<ClientDataset>>> {
    if metric != DistanceKind::CrossClusterLoss {
        return Ok(None);
    }
    (0..clustering.cluster_count())
        .map(|c| pooled_train_data(fd, &clustering.members(c)))
        .collect::<Result<Vec<_>>>()
        .map(Some)
}

/// Reassigns every client to the cluster whose model is nearest to the
/// client's local model (ties break toward the smaller cluster id), then
/// applies the minimum-size filter. Surviving clusters keep their models;
/// cluster ids are recompacted in ascending order of the old ids.
pub fn recluster(
    state: &ClusterState,
    fd: &FederatedDataset,
    cfg: &SrfcaConfig,
) -> Result<ClusterState> {
    cfg.validate()?;
    let k = state.clustering.cluster_count();
    if k == 0 {
        return Err(Error::NoClusterMeetsMinSize {
            min_size: cfg.min_cluster_size,
        });
    }
    let pooled = pooled_per_cluster(fd, &state.clustering, cfg.metric)?;
    let assignments: Vec<Result<usize>> = exec::map_range(fd.len(), |i| {
        let node = &state.node_models[&i];
        let mut best: Option<(usize, f64)> = None;
        for c in 0..k {
            let d = client_cluster_distance(
                cfg.metric,
                fd.model_kind,
                node,
                fd.client(i),
                &state.cluster_models[&c],
                pooled.as_ref().map(|p| &p[c]),
            )?;
            // Strict < keeps the smaller cluster id on ties.
            if best.map_or(true, |(_, bd)| d < bd) {
                best = Some((c, d));
            }
        }
        Ok(best.expect("k >= 1").0)
    });
    let labels = assignments.into_iter().collect::<Result<Vec<_>>>()?;
    // A cluster may lose every member, so compact the label space first and
    // keep the compact-id → old-id correspondence (`from_labels` renumbers
    // ascending by old id, matching the filter's recompaction order).
    let mut occupied: Vec<usize> = labels.clone();
    occupied.sort_unstable();
    occupied.dedup();
    let raw = Clustering::from_labels(&labels);
    let (clustering, survivors) = filter_with_survivors(&raw, cfg.min_cluster_size)?;
    let cluster_models = survivors
        .iter()
        .enumerate()
        .map(|(new, &compact)| (new, state.cluster_models[&occupied[compact]].clone()))
        .collect();
    Ok(ClusterState {
        clustering,
        cluster_models,
        node_models: state.node_models.clone(),
    })
}

/// Applies the minimum-size filter and reports which old cluster ids
/// survived, in the ascending order that becomes the new ids.
fn filter_with_survivors(
    raw: &Clustering,
    min_size: usize,
) -> Result<(Clustering, Vec<usize>)> {
    let filtered = filter_min_size(raw, min_size)?;
    let survivors: Vec<usize> = raw
        .sizes()
        .iter()
        .enumerate()
        .filter_map(|(c, &s)| (s >= min_size).then_some(c))
        .collect();
    debug_assert_eq!(survivors.len(), filtered.cluster_count());
    Ok((filtered, survivors))
}

/// Merges clusters whose models are within the threshold: builds the
/// threshold graph over **cluster** models, correlation-clusters it, unions
/// the member sets of each component, and gives every merged cluster the
/// unweighted mean of its component models. The minimum-size filter runs
/// last. Requires a resolved `cfg.lambda`.
pub fn merge(
    state: &ClusterState,
    fd: &FederatedDataset,
    cfg: &SrfcaConfig,
    seed: u64,
) -> Result<ClusterState> {
    cfg.validate()?;
    let lambda = cfg
        .lambda
        .ok_or_else(|| Error::invalid("merge requires a resolved lambda"))?;
    let k = state.clustering.cluster_count();
    if k == 0 {
        return Err(Error::NoClusterMeetsMinSize {
            min_size: cfg.min_cluster_size,
        });
    }
    let models: Vec<ParamVector> = (0..k).map(|c| state.cluster_models[&c].clone()).collect();
    let pooled = pooled_per_cluster(fd, &state.clustering, cfg.metric)?;
    let splits = pooled.as_ref().map(|p| {
        p.iter().map(|c| c.train()).collect::<Vec<_>>()
    });
    let matrix = pairwise_matrix(cfg.metric, fd.model_kind, &models, splits.as_deref())?;
    let graph = threshold_graph(&matrix, lambda)?;
    let components = correlation_cluster(&graph, seed);
    // Union member sets per component; the merged model is the unweighted
    // mean of the component's cluster models.
    let groups = components.cluster_count();
    let mut member_sets: Vec<Vec<usize>> = vec![Vec::new(); groups];
    let mut model_sets: Vec<Vec<ParamVector>> = vec![Vec::new(); groups];
    for c in 0..k {
        let g = components
            .cluster_of(c)
            .expect("correlation clustering assigns every vertex");
        member_sets[g].extend(state.clustering.members(c));
        model_sets[g].push(state.cluster_models[&c].clone());
    }
    member_sets.iter_mut().for_each(|m| m.sort_unstable());
    let raw = Clustering::from_members(&member_sets, Default::default())?;
    let merged_models: Vec<ParamVector> = model_sets
        .iter()
        .map(|ms| aggregation::mean(ms))
        .collect::<Result<_>>()?;
    let (clustering, survivors) = filter_with_survivors(&raw, cfg.min_cluster_size)?;
    let cluster_models = survivors
        .iter()
        .enumerate()
        .map(|(new, &old)| (new, merged_models[old].clone()))
        .collect();
    Ok(ClusterState {
        clustering,
        cluster_models,
        node_models: state.node_models.clone(),
    })
}

/// One refinement round: re-fit each cluster's model by trimmed-mean
/// gradient descent from zeros, then [`recluster`], then [`merge`].
///
/// `round` must be ≥ 1 (round 0 is the one-shot step); it is folded into the
/// participation and pivot streams and into the resample seed, so distinct
/// rounds draw distinct randomness from the same run seed.
pub fn refine(
    state: &ClusterState,
    fd: &FederatedDataset,
    cfg: &SrfcaConfig,
    round: usize,
    seed: u64,
) -> Result<ClusterState> {
    cfg.validate()?;
    if cfg.lambda.is_none() {
        return Err(Error::invalid("refine requires a resolved lambda"));
    }
    if round == 0 {
        return Err(Error::invalid("refinement rounds are numbered from 1"));
    }
    let resampled;
    let (fd, node_models) = if cfg.resample_per_refine {
        let spec = fd
            .synthetic
            .as_ref()
            .ok_or(Error::NotSynthetic)?
            .spec
            .clone();
        resampled = crate::data::resample_clients(fd, &spec, round)?;
        let node_models = train_node_models(&resampled, &cfg.train)?;
        (&resampled, node_models)
    } else {
        (fd, state.node_models.clone())
    };
    let kind = fd.model_kind;
    let w0 = ParamVector::zeros(kind.param_dim());
    let k = state.clustering.cluster_count();
    let refit: Vec<Result<ParamVector>> = exec::map_range(k, |c| {
        let members: Vec<Member<'_>> = state
            .clustering
            .members(c)
            .iter()
            .map(|&i| Member::Data(fd.client(i)))
            .collect();
        aggregation::trimmed_mean_gd_sampled(
            kind,
            &members,
            &w0,
            &cfg.train,
            cfg.participation,
            seed,
            ((round as u64) << 32) | c as u64,
        )
    });
    let cluster_models: BTreeMap<usize, ParamVector> = refit
        .into_iter()
        .enumerate()
        .map(|(c, m)| m.map(|m| (c, m)))
        .collect::<Result<_>>()?;
    let refitted = ClusterState {
        clustering: state.clustering.clone(),
        cluster_models,
        node_models,
    };
    let reassigned = recluster(&refitted, fd, cfg)?;
    merge(&reassigned, fd, cfg, round_seed(seed, round))
}

/// Runs the full pipeline: one-shot initialization, then `refine_rounds`
/// refinement rounds. The returned trace holds the clustering after each
/// stage.
pub fn sr_fca(fd: &FederatedDataset, cfg: &SrfcaConfig, seed: u64) -> Result<SrfcaRun> {
    cfg.validate()?;
    let (mut state, lambda) = one_shot(fd, cfg, seed)?;
    let resolved = SrfcaConfig {
        lambda: Some(lambda),
        ..cfg.clone()
    };
    let mut trace = vec![state.clustering.clone()];
    for round in 1..=cfg.refine_rounds {
        state = refine(&state, fd, &resolved, round, seed)?;
        trace.push(state.clustering.clone());
    }
    Ok(SrfcaRun { state, trace, lambda })
}
