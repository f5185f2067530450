//! Clustered federated learning simulation core.
//!
//! This crate implements SR-FCA — a bottom-up clustered federated learning
//! algorithm that starts from per-client local models, builds a pairwise
//! distance threshold graph, extracts an initial clustering by randomized
//! correlation clustering, and then successively refines it with robust
//! (coordinate-wise trimmed mean) federated training, nearest-cluster
//! reassignment, and threshold-based cluster merging. Local-only training,
//! a single global FedAvg model, and IFCA are provided as baselines.
//!
//! Everything is simulated in one process: a [`data::FederatedDataset`] holds
//! every client's private shard, and the algorithms in [`srfca`] and
//! [`baselines`] orchestrate the per-round exchanges a real deployment would
//! perform over the network.
//!
//! Determinism is a first-class contract: all randomness flows through
//! [`rng`] streams derived from `(seed, purpose, entity id)`, per-client work
//! is aggregated in fixed order, and the coordinate-wise trimmed mean sorts
//! its inputs, so results never depend on thread scheduling or client
//! enumeration order. The `parallel` feature (on by default) routes the
//! embarrassingly parallel parts — per-client training, pairwise distance
//! matrices, per-coordinate aggregation — through rayon; disabling it yields
//! a bit-identical sequential build.

pub mod aggregation;
pub mod baselines;
pub mod data;
pub mod distance;
mod error;
pub mod exec;
pub mod graphclust;
pub mod harness;
pub mod models;
pub mod rng;
pub mod srfca;

pub use error::{Error, Result};
