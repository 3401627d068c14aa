//! Immutable undirected simple graphs in compressed sparse row form.
//!
//! Every other module builds on [`Graph`]: generators produce them, the
//! statistics and feature code query them, and the GNN layers consume them
//! through block-diagonal batches. Graphs are immutable after construction
//! and safe to share across threads; all augmentation lives in separate
//! feature matrices.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors raised while building or querying a graph.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum GraphError {
    /// An edge references a node outside `0..num_nodes`.
    #[error("edge ({0}, {1}) out of range for {2} nodes")]
    EdgeOutOfRange(usize, usize, usize),
    /// A vector argument does not match the node count.
    #[error("vector length {got} does not match node count {expected}")]
    LengthMismatch { got: usize, expected: usize },
}

/// Undirected simple graph stored as a symmetric CSR adjacency.
///
/// `offsets` has length `num_nodes + 1`; the neighbors of node `v` are the
/// sorted slice `neighbors[offsets[v]..offsets[v+1]]`. No self-loops, no
/// duplicate edges, and `u ∈ N(v)` iff `v ∈ N(u)`. Sorted slices keep
/// neighbor iteration cache-friendly and make triangle counting a linear
/// merge.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    num_nodes: usize,
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
    num_edges: usize,
}

impl Graph {
    /// Builds a graph from an edge list over `n` nodes.
    ///
    /// Self-loops and duplicate pairs (in either orientation) are silently
    /// dropped. Fails if any endpoint is `>= n`, naming the offending pair.
    pub fn from_edge_list(n: usize, edges: &[(usize, usize)]) -> Result<Self, GraphError> {
        for &(u, v) in edges {
            if u >= n || v >= n {
                return Err(GraphError::EdgeOutOfRange(u, v, n));
            }
        }
        let mut canon: Vec<(usize, usize)> = edges
            .iter()
            .filter(|&&(u, v)| u != v)
            .map(|&(u, v)| if u < v { (u, v) } else { (v, u) })
            .collect();
        canon.sort_unstable();
        canon.dedup();
        Ok(Self::from_canonical_edges(n, &canon))
    }

    /// Builds from edges already deduplicated, self-loop free and in `u < v`
    /// form. Generators that maintain adjacency sets use this path.
    pub(crate) fn from_canonical_edges(n: usize, canon: &[(usize, usize)]) -> Self {
        let mut degrees = vec![0usize; n];
        for &(u, v) in canon {
            degrees[u] += 1;
            degrees[v] += 1;
        }
        let mut offsets = Vec::with_capacity(n + 1);
        let mut acc = 0;
        offsets.push(0);
        for d in &degrees {
            acc += d;
            offsets.push(acc);
        }
        let mut cursor = offsets[..n].to_vec();
        let mut neighbors = vec![0usize; acc];
        for &(u, v) in canon {
            neighbors[cursor[u]] = v;
            cursor[u] += 1;
            neighbors[cursor[v]] = u;
            cursor[v] += 1;
        }
        // Canonical edges are sorted by (u, v), so each node's slice receives
        // its smaller-endpoint neighbors in order, but the mixed inserts from
        // both orientations still need one sort pass per slice.
        for v in 0..n {
            neighbors[offsets[v]..offsets[v + 1]].sort_unstable();
        }
        Graph {
            num_nodes: n,
            offsets,
            neighbors,
            num_edges: canon.len(),
        }
    }

    /// Number of nodes.
    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    /// Number of undirected edges.
    pub fn num_edges(&self) -> usize {
        self.num_edges
    }

    /// Degree of node `v`.
    pub fn degree(&self, v: usize) -> usize {
        self.offsets[v + 1] - self.offsets[v]
    }

    /// Sorted neighbor slice of node `v`.
    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.neighbors[self.offsets[v]..self.offsets[v + 1]]
    }

    /// Maximum degree over all nodes; 0 for an empty node set.
    pub fn max_degree(&self) -> usize {
        (0..self.num_nodes).map(|v| self.degree(v)).max().unwrap_or(0)
    }

    /// `y[v] = Σ_{u ∈ N(v)} x[u]` — the adjacency-matrix/vector product.
    pub fn adjacency_matvec(&self, x: &[f64]) -> Result<Vec<f64>, GraphError> {
        if x.len() != self.num_nodes {
            return Err(GraphError::LengthMismatch {
                got: x.len(),
                expected: self.num_nodes,
            });
        }
        let mut y = vec![0.0; self.num_nodes];
        for v in 0..self.num_nodes {
            let mut acc = 0.0;
            for &u in self.neighbors(v) {
                acc += x[u];
            }
            y[v] = acc;
        }
        Ok(y)
    }

    /// Edge list in canonical `u < v` order, sorted lexicographically.
    pub fn to_edge_list(&self) -> Vec<(usize, usize)> {
        let mut edges = Vec::with_capacity(self.num_edges);
        for v in 0..self.num_nodes {
            for &u in self.neighbors(v) {
                if v < u {
                    edges.push((v, u));
                }
            }
        }
        edges
    }

    /// Degree sequence as floats, useful for feature construction.
    pub fn degree_vector(&self) -> Vec<f64> {
        (0..self.num_nodes).map(|v| self.degree(v) as f64).collect()
    }

    /// True when `u` and `v` are adjacent (binary search on the shorter slice).
    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        let (a, b) = if self.degree(u) <= self.degree(v) {
            (u, v)
        } else {
            (v, u)
        };
        self.neighbors(a).binary_search(&b).is_ok()
    }
}

/// The eight network classes, with fixed integer codes 0..7.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[allow(non_camel_case_types)]
pub enum ClassLabel {
    ER_low = 0,
    ER_high = 1,
    WS_low = 2,
    WS_high = 3,
    BA_low = 4,
    BA_high = 5,
    GRID_low = 6,
    GRID_high = 7,
}

impl ClassLabel {
    /// All classes in code order.
    pub const ALL: [ClassLabel; 8] = [
        ClassLabel::ER_low,
        ClassLabel::ER_high,
        ClassLabel::WS_low,
        ClassLabel::WS_high,
        ClassLabel::BA_low,
        ClassLabel::BA_high,
        ClassLabel::GRID_low,
        ClassLabel::GRID_high,
    ];

    /// Integer code in `0..8`.
    pub fn code(self) -> usize {
        self as usize
    }

    /// Class for a given code.
    pub fn from_code(code: usize) -> Option<ClassLabel> {
        ClassLabel::ALL.get(code).copied()
    }

    /// Stable name used in files and reports.
    pub fn name(self) -> &'static str {
        match self {
            ClassLabel::ER_low => "ER_low",
            ClassLabel::ER_high => "ER_high",
            ClassLabel::WS_low => "WS_low",
            ClassLabel::WS_high => "WS_high",
            ClassLabel::BA_low => "BA_low",
            ClassLabel::BA_high => "BA_high",
            ClassLabel::GRID_low => "GRID_low",
            ClassLabel::GRID_high => "GRID_high",
        }
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ClassLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ClassLabel::ALL
            .iter()
            .copied()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown class label: {s}"))
    }
}
