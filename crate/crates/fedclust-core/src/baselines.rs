//! Baselines: purely local training, one global FedAvg model, and IFCA
//! (iterative federated clustering with a fixed number of clusters).
//!
//! FedAvg here is the standard model-averaging protocol — participants run
//! local gradient steps and the server averages the resulting models. It is
//! deliberately a separate code path from the gradient-aggregating
//! trimmed-mean loop in [`crate::aggregation`]: with one local step, no
//! projection, and no trimming the two routes agree mathematically but not
//! operation-for-operation, which makes them useful cross-checks of each
//! other.

use crate::aggregation::{self, sample_participants};
use crate::data::{DataSplit, FederatedDataset, Targets};
use crate::graphclust::Clustering;
use crate::models::{dot, local_train, loss, ModelKind, ParamVector, TrainConfig};
use crate::rng::{stream, Purpose};
use crate::{exec, Error, Result};
use rand::Rng;

/// Test-split quality of a trained configuration: the unweighted mean over
/// clients of their test loss, plus mean classification accuracy when the
/// model family classifies.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Evaluation {
    pub mean_test_loss: f64,
    pub accuracy: Option<f64>,
}

/// Evaluates one model per client (`models[i]` serves client `i`) on the
/// clients' test splits.
pub fn evaluate(fd: &FederatedDataset, models: &[&ParamVector]) -> Result<Evaluation> {
    if models.len() != fd.len() {
        return Err(Error::invalid(format!(
            "{} models for {} clients",
            models.len(),
            fd.len()
        )));
    }
    let per: Vec<Result<(f64, Option<f64>)>> = exec::map_range(fd.len(), |i| {
        let split = fd.client(i).test();
        let l = loss(fd.model_kind, models[i], &split)?;
        Ok((l, classification_accuracy(fd.model_kind, models[i], &split)))
    });
    let per = per.into_iter().collect::<Result<Vec<_>>>()?;
    let m = per.len() as f64;
    let mean_test_loss = per.iter().map(|(l, _)| l).sum::<f64>() / m;
    let accuracy = per
        .iter()
        .map(|(_, a)| *a)
        .collect::<Option<Vec<f64>>>()
        .map(|accs| accs.iter().sum::<f64>() / m);
    Ok(Evaluation {
        mean_test_loss,
        accuracy,
    })
}

/// Fraction of correctly argmax-classified samples; `None` for regression.
fn classification_accuracy(
    kind: ModelKind,
    params: &ParamVector,
    split: &DataSplit<'_>,
) -> Option<f64> {
    let ModelKind::MultinomialLogistic { d, classes } = kind else {
        return None;
    };
    let Targets::Class(ys) = split.targets else {
        return None;
    };
    let mut correct = 0usize;
    for &i in split.indices {
        let x = split.row(i);
        let mut best = 0usize;
        let mut best_score = f64::NEG_INFINITY;
        for k in 0..classes {
            let s = dot(x, &params.0[k * d..(k + 1) * d]);
            // Strict > keeps the smallest class index on ties.
            if s > best_score {
                best = k;
                best_score = s;
            }
        }
        if best == ys[i] {
            correct += 1;
        }
    }
    Some(correct as f64 / split.indices.len() as f64)
}

/// Every client trains alone from zeros and keeps its own model.
#[derive(Clone, Debug)]
pub struct LocalOutcome {
    pub models: Vec<ParamVector>,
    pub evaluation: Evaluation,
}

pub fn train_local(fd: &FederatedDataset, cfg: &TrainConfig) -> Result<LocalOutcome> {
    cfg.validate()?;
    let kind = fd.model_kind;
    let w0 = ParamVector::zeros(kind.param_dim());
    let models: Vec<Result<ParamVector>> =
        exec::map_range(fd.len(), |i| local_train(kind, &w0, &fd.client(i).train(), cfg));
    let models = models.into_iter().collect::<Result<Vec<_>>>()?;
    let refs: Vec<&ParamVector> = models.iter().collect();
    let evaluation = evaluate(fd, &refs)?;
    Ok(LocalOutcome { models, evaluation })
}

/// One participant's contribution to a FedAvg-style round: `local_steps`
/// projected gradient steps from the current global model. Shared between
/// [`fedavg_global`] and [`ifca`] so a one-cluster IFCA run and FedAvg from
/// the same start produce bitwise-identical iterates.
fn local_round(
    kind: ModelKind,
    w: &ParamVector,
    split: &DataSplit<'_>,
    cfg: &TrainConfig,
) -> Result<ParamVector> {
    let local_cfg = TrainConfig {
        steps: cfg.local_steps,
        learning_rate: cfg.learning_rate,
        projection_diameter: cfg.projection_diameter,
        local_steps: 1,
        trim: 0.0,
    };
    local_train(kind, w, split, &local_cfg)
}

/// One FedAvg model shared by every client.
#[derive(Clone, Debug)]
pub struct GlobalOutcome {
    pub model: ParamVector,
    pub evaluation: Evaluation,
}

/// FedAvg: `cfg.steps` rounds, each sampling a `participation` fraction of
/// clients, running `cfg.local_steps` local gradient steps, and averaging
/// the local models (unweighted). Starts from `w0` (zeros when `None`).
pub fn fedavg_global(
    fd: &FederatedDataset,
    cfg: &TrainConfig,
    participation: f64,
    seed: u64,
    w0: Option<&ParamVector>,
) -> Result<GlobalOutcome> {
    cfg.validate()?;
    if !(participation > 0.0 && participation <= 1.0) {
        return Err(Error::invalid("participation must lie in (0, 1]"));
    }
    let kind = fd.model_kind;
    let mut w = match w0 {
        Some(w) => {
            if w.len() != kind.param_dim() {
                return Err(Error::DimensionMismatch {
                    expected: kind.param_dim(),
                    got: w.len(),
                });
            }
            w.clone()
        }
        None => ParamVector::zeros(kind.param_dim()),
    };
    let mut sampler = (participation < 1.0).then(|| stream(seed, Purpose::Participation, 0));
    for _ in 0..cfg.steps {
        let participants = sample_participants(&mut sampler, fd.len(), participation);
        let locals: Vec<Result<ParamVector>> = exec::map_range(participants.len(), |p| {
            local_round(kind, &w, &fd.client(participants[p]).train(), cfg)
        });
        let locals = locals.into_iter().collect::<Result<Vec<_>>>()?;
        w = aggregation::mean(&locals)?;
    }
    let refs: Vec<&ParamVector> = (0..fd.len()).map(|_| &w).collect();
    let evaluation = evaluate(fd, &refs)?;
    Ok(GlobalOutcome { model: w, evaluation })
}

/// IFCA hyper-parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct IfcaConfig {
    /// Number of clusters `K` — fixed up front, unlike SR-FCA.
    pub k: usize,
    /// Federated rounds.
    pub rounds: usize,
    /// Local-update hyper-parameters. `train.steps` is unused here (`rounds`
    /// drives the outer loop); `local_steps`, `learning_rate`, and
    /// `projection_diameter` shape each participant's update.
    pub train: TrainConfig,
    /// Fraction of clients sampled per round.
    pub participation: f64,
}

impl IfcaConfig {
    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        if self.k < 1 {
            return Err(Error::invalid("ifca needs k >= 1 clusters"));
        }
        if self.rounds < 1 {
            return Err(Error::invalid("ifca needs at least one round"));
        }
        if !(self.participation > 0.0 && self.participation <= 1.0) {
            return Err(Error::invalid("participation must lie in (0, 1]"));
        }
        Ok(())
    }
}

/// The result of an IFCA run.
#[derive(Clone, Debug)]
pub struct IfcaOutcome {
    /// The `K` cluster models (some possibly never updated).
    pub models: Vec<ParamVector>,
    /// Final per-client cluster choice, `labels[i] ∈ 0..K`.
    pub labels: Vec<usize>,
    /// The same assignment with ids compacted over non-empty clusters.
    pub clustering: Clustering,
    pub evaluation: Evaluation,
}

/// Initial model for IFCA cluster `k`: iid uniform `[−1, 1]` coordinates
/// from the `(seed, IfcaInit, k)` stream.
pub fn ifca_init(seed: u64, k: usize, dim: usize) -> ParamVector {
    let mut rng = stream(seed, Purpose::IfcaInit, k as u64);
    ParamVector((0..dim).map(|_| rng.gen_range(-1.0..=1.0)).collect())
}

/// Self-assignment of one client: the cluster whose model has the lowest
/// training loss (ties toward the smaller index).
fn best_cluster(
    kind: ModelKind,
    models: &[ParamVector],
    split: &DataSplit<'_>,
) -> Result<usize> {
    let mut best = 0usize;
    let mut best_loss = f64::INFINITY;
    for (k, m) in models.iter().enumerate() {
        let l = loss(kind, m, split)?;
        if l < best_loss {
            best = k;
            best_loss = l;
        }
    }
    Ok(best)
}

/// IFCA: every round, sampled clients adopt the cluster whose model fits
/// their training data best, run local updates on it, and each cluster's
/// model becomes the unweighted mean of its adopters' local models. A
/// cluster that attracts no one keeps its stale model. After the last round
/// every client self-assigns once more for the final clustering and
/// evaluation.
pub fn ifca(fd: &FederatedDataset, cfg: &IfcaConfig, seed: u64) -> Result<IfcaOutcome> {
    cfg.validate()?;
    let kind = fd.model_kind;
    let dim = kind.param_dim();
    let mut models: Vec<ParamVector> = (0..cfg.k).map(|k| ifca_init(seed, k, dim)).collect();
    let mut sampler =
        (cfg.participation < 1.0).then(|| stream(seed, Purpose::Participation, 0));
    for _ in 0..cfg.rounds {
        let participants = sample_participants(&mut sampler, fd.len(), cfg.participation);
        let updates: Vec<Result<(usize, ParamVector)>> =
            exec::map_range(participants.len(), |p| {
                let split = fd.client(participants[p]).train();
                let label = best_cluster(kind, &models, &split)?;
                let local = local_round(kind, &models[label], &split, &cfg.train)?;
                Ok((label, local))
            });
        let mut per_cluster: Vec<Vec<ParamVector>> = vec![Vec::new(); cfg.k];
        for u in updates {
            let (label, local) = u?;
            per_cluster[label].push(local);
        }
        for (k, locals) in per_cluster.into_iter().enumerate() {
            if !locals.is_empty() {
                models[k] = aggregation::mean(&locals)?;
            }
        }
    }
    let labels: Vec<Result<usize>> = exec::map_range(fd.len(), |i| {
        best_cluster(kind, &models, &fd.client(i).train())
    });
    let labels = labels.into_iter().collect::<Result<Vec<_>>>()?;
    let refs: Vec<&ParamVector> = labels.iter().map(|&l| &models[l]).collect();
    let evaluation = evaluate(fd, &refs)?;
    let clustering = Clustering::from_labels(&labels);
    Ok(IfcaOutcome {
        models,
        labels,
        clustering,
        evaluation,
    })
}
