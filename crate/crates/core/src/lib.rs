//! Graph classification laboratory for synthetic networks.
//!
//! The crate builds everything needed to study how well graph neural
//! networks recognise the generating model of a featureless network:
//!
//! - [`graph`]: immutable CSR graphs and the eight class labels.
//! - [`generate`]: seeded Erdős-Rényi, Watts-Strogatz, Barabási-Albert and
//!   torus-lattice generators plus balanced dataset assembly.
//! - [`stats`]: transitivity, average path length and per-class summaries.
//! - [`features`]: the five artificial node-feature strategies.
//! - [`autodiff`]: a dense-tensor tape engine with reverse-mode gradients
//!   and the Adam optimizer.
//! - [`batch`]: block-diagonal batching of graphs for the layers.
//! - [`layers`]: GCN, GIN, GATv2 message passing and self-attention pooling.
//! - [`model`]: the four end-to-end architectures and the shared head.
//! - [`train`]: loss, training loop, evaluation and replication protocol.
//! - [`dataset_io`]: the `GDS1` text container for labeled datasets.

pub mod autodiff;
pub mod batch;
pub mod dataset_io;
pub mod features;
pub mod generate;
pub mod graph;
pub mod layers;
pub mod model;
pub mod stats;
pub mod train;

pub use graph::{ClassLabel, Graph, GraphError};

// Re-exported so downstream crates name the same `Array2` the public API uses.
pub use ndarray;
