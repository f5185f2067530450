//! Distances between client (or cluster) models, and the pairwise distance
//! matrix the threshold graph is built from.

use crate::data::DataSplit;
use crate::models::{loss, ModelKind, ParamVector};
use crate::{exec, Error, Result};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

/// Which distance to use between two models.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum DistanceKind {
    /// Euclidean distance between parameter vectors.
    #[serde(rename = "l2")]
    L2Params,
    /// Symmetrized cross-evaluation loss: each model is scored on the other
    /// side's data and the two losses are averaged.
    #[serde(rename = "cross_loss")]
    CrossClusterLoss,
}

/// Euclidean distance `‖a − b‖₂`.
pub fn dist_l2(a: &ParamVector, b: &ParamVector) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    Ok(a.0
        .iter()
        .zip(&b.0)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt())
}

/// Symmetrized cross-evaluation loss
/// `½ · (loss(w_b; data_a) + loss(w_a; data_b))`.
pub fn dist_cross_loss(
    kind: ModelKind,
    w_a: &ParamVector,
    data_a: DataSplit<'_>,
    w_b: &ParamVector,
    data_b: DataSplit<'_>,
) -> Result<f64> {
    Ok(0.5 * (loss(kind, w_b, &data_a)? + loss(kind, w_a, &data_b)?))
}

/// Full pairwise distance matrix over `models`. `CrossClusterLoss` needs one
/// data split per model (`splits`); `L2Params` ignores it. The result is
/// exactly symmetric with an exactly zero diagonal: each distance is computed
/// once for `i < j` and mirrored.
pub fn pairwise_matrix(
    metric: DistanceKind,
    kind: ModelKind,
    models: &[ParamVector],
    splits: Option<&[DataSplit<'_>]>,
) -> Result<Array2<f64>> {
    let n = models.len();
    if metric == DistanceKind::CrossClusterLoss {
        match splits {
            Some(s) if s.len() == n => {}
            Some(s) => {
                return Err(Error::invalid(format!(
                    "cross-loss distance: {} splits for {n} models",
                    s.len()
                )))
            }
            None => {
                return Err(Error::invalid(
                    "cross-loss distance requires one data split per model",
                ))
            }
        }
    }
    // Row i holds d(i, j) for j > i; everything else is filled by mirroring.
    let rows: Vec<Result<Vec<f64>>> = exec::map_range(n, |i| {
        (i + 1..n)
            .map(|j| match metric {
                DistanceKind::L2Params => dist_l2(&models[i], &models[j]),
                DistanceKind::CrossClusterLoss => {
                    let s = splits.expect("checked above");
                    dist_cross_loss(kind, &models[i], s[i], &models[j], s[j])
                }
            })
            .collect()
    });
    let mut m = Array2::zeros((n, n));
    for (i, row) in rows.into_iter().enumerate() {
        for (off, v) in row?.into_iter().enumerate() {
            let j = i + 1 + off;
            m[[i, j]] = v;
            m[[j, i]] = v;
        }
    }
    Ok(m)
}
