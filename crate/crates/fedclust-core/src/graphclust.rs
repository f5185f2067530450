//! Threshold graphs, randomized correlation clustering, size filtering, and
//! misclustering metrics.

use crate::rng::{stream, Purpose};
use crate::{Error, Result};
use ndarray::Array2;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

/// Undirected graph over `0..n` with an edge wherever the pairwise distance
/// is at most the threshold `lambda`.
#[derive(Clone, Debug)]
pub struct ThresholdGraph {
    n: usize,
    lambda: f64,
    adj: Vec<bool>, // n×n, symmetric, false diagonal
}

impl ThresholdGraph {
    pub fn vertex_count(&self) -> usize {
        self.n
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        i != j && self.adj[i * self.n + j]
    }

    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.n).filter(move |&j| self.has_edge(i, j))
    }

    pub fn edge_count(&self) -> usize {
        (0..self.n)
            .map(|i| (i + 1..self.n).filter(|&j| self.has_edge(i, j)).count())
            .sum()
    }
}

/// Builds the threshold graph of a symmetric zero-diagonal distance matrix:
/// edge `(i, j)` present iff `m[i][j] <= lambda`.
pub fn threshold_graph(m: &Array2<f64>, lambda: f64) -> Result<ThresholdGraph> {
    let (rows, cols) = m.dim();
    if rows != cols {
        return Err(Error::invalid(format!(
            "distance matrix must be square, got {rows}x{cols}"
        )));
    }
    if !(lambda >= 0.0) {
        return Err(Error::invalid("lambda must be non-negative"));
    }
    for i in 0..rows {
        if m[[i, i]] != 0.0 {
            return Err(Error::invalid("distance matrix has a non-zero diagonal"));
        }
        for j in i + 1..rows {
            if m[[i, j]] != m[[j, i]] {
                return Err(Error::invalid("distance matrix is not symmetric"));
            }
        }
    }
    let mut adj = vec![false; rows * rows];
    for i in 0..rows {
        for j in 0..rows {
            adj[i * rows + j] = i != j && m[[i, j]] <= lambda;
        }
    }
    Ok(ThresholdGraph {
        n: rows,
        lambda,
        adj,
    })
}

/// A hard clustering: a map from client id to cluster id plus the set of
/// clients left unassigned. Cluster ids are contiguous `0..k` and every
/// cluster is non-empty.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Clustering {
    assignment: BTreeMap<usize, usize>,
    unassigned: BTreeSet<usize>,
}

impl Clustering {
    /// Builds a clustering from an assignment map and an unassigned set,
    /// validating the structural invariants.
    pub fn new(assignment: BTreeMap<usize, usize>, unassigned: BTreeSet<usize>) -> Result<Self> {
        for id in assignment.keys() {
            if unassigned.contains(id) {
                return Err(Error::invalid(format!(
                    "client {id} is both assigned and unassigned"
                )));
            }
        }
        let clusters: BTreeSet<usize> = assignment.values().copied().collect();
        for (want, got) in clusters.iter().enumerate() {
            if want != *got {
                return Err(Error::invalid(format!(
                    "cluster ids are not contiguous: missing {want}"
                )));
            }
        }
        Ok(Clustering {
            assignment,
            unassigned,
        })
    }

    /// Builds a clustering that assigns every client `i` to `labels[i]`,
    /// compacting labels to contiguous ids in order of first appearance of
    /// the sorted label values.
    pub fn from_labels(labels: &[usize]) -> Self {
        let distinct: BTreeSet<usize> = labels.iter().copied().collect();
        let remap: BTreeMap<usize, usize> =
            distinct.into_iter().enumerate().map(|(k, l)| (l, k)).collect();
        Clustering {
            assignment: labels.iter().enumerate().map(|(i, l)| (i, remap[l])).collect(),
            unassigned: BTreeSet::new(),
        }
    }

    /// Builds a clustering from explicit member lists (cluster `k` =
    /// `clusters[k]`), leaving every id in `unassigned` out.
    pub fn from_members(clusters: &[Vec<usize>], unassigned: BTreeSet<usize>) -> Result<Self> {
        let mut assignment = BTreeMap::new();
        for (k, members) in clusters.iter().enumerate() {
            if members.is_empty() {
                return Err(Error::invalid(format!("cluster {k} is empty")));
            }
            for &i in members {
                if assignment.insert(i, k).is_some() {
                    return Err(Error::invalid(format!("client {i} appears in two clusters")));
                }
            }
        }
        Clustering::new(assignment, unassigned)
    }

    /// Total number of clients covered (assigned + unassigned).
    pub fn client_count(&self) -> usize {
        self.assignment.len() + self.unassigned.len()
    }

    /// Number of clusters.
    pub fn cluster_count(&self) -> usize {
        self.assignment.values().max().map_or(0, |m| m + 1)
    }

    /// The cluster of client `i`, if assigned.
    pub fn cluster_of(&self, i: usize) -> Option<usize> {
        self.assignment.get(&i).copied()
    }

    /// Sorted member list of cluster `c`.
    pub fn members(&self, c: usize) -> Vec<usize> {
        self.assignment
            .iter()
            .filter_map(|(&i, &k)| (k == c).then_some(i))
            .collect()
    }

    /// Sorted sizes indexed by cluster id.
    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.cluster_count()];
        for &c in self.assignment.values() {
            sizes[c] += 1;
        }
        sizes
    }

    pub fn unassigned(&self) -> &BTreeSet<usize> {
        &self.unassigned
    }

    pub fn assignment(&self) -> &BTreeMap<usize, usize> {
        &self.assignment
    }

    /// All client ids covered by this clustering, sorted.
    pub fn client_ids(&self) -> Vec<usize> {
        let mut ids: Vec<usize> = self.assignment.keys().copied().collect();
        ids.extend(self.unassigned.iter().copied());
        ids.sort_unstable();
        ids
    }

    /// Serializes as CSV with one `client_id,cluster_id` row per client, in
    /// client order; unassigned clients get cluster id −1.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("client_id,cluster_id\n");
        for id in self.client_ids() {
            match self.cluster_of(id) {
                Some(c) => out.push_str(&format!("{id},{c}\n")),
                None => out.push_str(&format!("{id},-1\n")),
            }
        }
        out
    }

    /// Parses the CSV format produced by [`Clustering::to_csv_string`].
    /// `path` is used for error messages only.
    pub fn from_csv_str(path: &str, content: &str) -> Result<Self> {
        let mut assignment = BTreeMap::new();
        let mut unassigned = BTreeSet::new();
        for (lineno, line) in content.lines().enumerate() {
            if lineno == 0 {
                continue; // header
            }
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let malformed = |msg: String| Error::Malformed {
                path: path.to_string(),
                line: lineno + 1,
                msg,
            };
            let mut parts = line.split(',');
            let (Some(id), Some(cluster), None) = (parts.next(), parts.next(), parts.next())
            else {
                return Err(malformed("expected exactly two columns".into()));
            };
            let id: usize = id
                .trim()
                .parse()
                .map_err(|e| malformed(format!("bad client id: {e}")))?;
            let cluster: i64 = cluster
                .trim()
                .parse()
                .map_err(|e| malformed(format!("bad cluster id: {e}")))?;
            if cluster < 0 {
                unassigned.insert(id);
            } else {
                assignment.insert(id, cluster as usize);
            }
        }
        Clustering::new(assignment, unassigned)
    }
}

/// Randomized pivot correlation clustering.
///
/// Visits vertices in a seeded random order; each still-unclustered vertex
/// becomes a pivot and forms a cluster together with all of its
/// still-unclustered neighbors. This is the classic randomized
/// 3-approximation for correlation clustering on threshold graphs, and it
/// recovers disjoint cliques exactly for every seed.
pub fn correlation_cluster(g: &ThresholdGraph, seed: u64) -> Clustering {
    let n = g.vertex_count();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut stream(seed, Purpose::Pivot, 0));
    let mut cluster_of: Vec<Option<usize>> = vec![None; n];
    let mut next = 0;
    for &pivot in &order {
        if cluster_of[pivot].is_some() {
            continue;
        }
        cluster_of[pivot] = Some(next);
        for j in g.neighbors(pivot) {
            if cluster_of[j].is_none() {
                cluster_of[j] = Some(next);
            }
        }
        next += 1;
    }
    let assignment: BTreeMap<usize, usize> = cluster_of
        .iter()
        .enumerate()
        .map(|(i, c)| (i, c.expect("pivot pass covers every vertex")))
        .collect();
    Clustering {
        assignment,
        unassigned: BTreeSet::new(),
    }
}

/// Disagreement cost of a clustering on a graph: cut edges (same edge,
/// different clusters — or either endpoint unassigned) plus merged non-edges
/// (no edge, same cluster).
pub fn disagreement_cost(g: &ThresholdGraph, c: &Clustering) -> usize {
    let n = g.vertex_count();
    let mut cost = 0;
    for i in 0..n {
        for j in i + 1..n {
            let same = match (c.cluster_of(i), c.cluster_of(j)) {
                (Some(a), Some(b)) => a == b,
                _ => false,
            };
            if g.has_edge(i, j) != same {
                cost += 1;
            }
        }
    }
    cost
}

/// Dissolves clusters with fewer than `min_size` members, moving their
/// members to the unassigned set and recompacting the surviving cluster ids
/// in ascending order of their old ids. Errors when nothing survives.
pub fn filter_min_size(c: &Clustering, min_size: usize) -> Result<Clustering> {
    if min_size < 1 {
        return Err(Error::invalid("min_size must be >= 1"));
    }
    let sizes = c.sizes();
    let survivors: Vec<usize> = (0..sizes.len()).filter(|&k| sizes[k] >= min_size).collect();
    if survivors.is_empty() {
        return Err(Error::NoClusterMeetsMinSize { min_size });
    }
    let remap: BTreeMap<usize, usize> = survivors.iter().enumerate().map(|(n, &o)| (o, n)).collect();
    let mut assignment = BTreeMap::new();
    let mut unassigned = c.unassigned.clone();
    for (&i, &k) in &c.assignment {
        match remap.get(&k) {
            Some(&nk) => {
                assignment.insert(i, nk);
            }
            None => {
                unassigned.insert(i);
            }
        }
    }
    Ok(Clustering {
        assignment,
        unassigned,
    })
}

/// Relabeling-invariant misclustering metrics of an estimated clustering
/// against the ground truth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Misclustering {
    /// Fraction of clients in `[0, 1]` whose estimated cluster's majority
    /// label differs from their true label; unassigned clients count as
    /// errors.
    pub error_fraction: f64,
    /// True iff the error fraction is zero and the cluster counts match.
    pub exact_match: bool,
    /// Majority ground-truth label of each estimated cluster.
    pub label_map: BTreeMap<usize, usize>,
}

/// Scores `c` against `truth`. Each estimated cluster receives the majority
/// ground-truth label among its members (ties broken toward the smaller
/// label id); a client is an error if its cluster's label differs from its
/// own true label, or if it is unassigned.
pub fn misclustering(c: &Clustering, truth: &Clustering) -> Result<Misclustering> {
    if !truth.unassigned.is_empty() {
        return Err(Error::invalid("ground truth must assign every client"));
    }
    if c.client_ids() != truth.client_ids() {
        return Err(Error::invalid(
            "estimated clustering and ground truth cover different clients",
        ));
    }
    let m = truth.client_count();
    if m == 0 {
        return Err(Error::invalid("empty clustering"));
    }
    let mut label_map = BTreeMap::new();
    let mut errors = c.unassigned.len();
    for k in 0..c.cluster_count() {
        let members = c.members(k);
        let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
        for &i in &members {
            *counts.entry(truth.cluster_of(i).unwrap()).or_insert(0) += 1;
        }
        // BTreeMap iterates labels in ascending order, so `>` keeps the
        // smaller label on ties.
        let (&majority, _) = counts
            .iter()
            .fold(None, |best: Option<(&usize, &usize)>, (l, n)| match best {
                Some((_, bn)) if n > bn => Some((l, n)),
                None => Some((l, n)),
                _ => best,
            })
            .expect("clusters are non-empty");
        label_map.insert(k, majority);
        errors += members
            .iter()
            .filter(|&&i| truth.cluster_of(i).unwrap() != majority)
            .count();
    }
    let error_fraction = errors as f64 / m as f64;
    Ok(Misclustering {
        error_fraction,
        exact_match: errors == 0 && c.cluster_count() == truth.cluster_count(),
        label_map,
    })
}
