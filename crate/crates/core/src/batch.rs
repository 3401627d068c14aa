//! Minibatch assembly: many graphs become one block-diagonal adjacency
//! with a node→graph segment map, so per-graph pooling is a segment
//! reduction.

use std::rc::Rc;

use ndarray::Array2;

use crate::autodiff::SpMat;
use crate::graph::Graph;

/// A batch of graphs fused into one disjoint union.
#[derive(Debug, Clone)]
pub struct GraphBatch {
    pub num_graphs: usize,
    pub num_nodes: usize,
    /// Nodes per member graph, in batch order.
    pub node_counts: Vec<usize>,
    /// Node → owning-graph index; length `num_nodes`.
    pub segments: Rc<Vec<usize>>,
    /// Canonical (u < v) edges in global node ids.
    pub edges: Vec<(usize, usize)>,
    /// Plain adjacency (neighbor-sum operator).
    pub adj: Rc<SpMat>,
    /// Symmetric renormalized adjacency with self-loops:
    /// D̃^(−1/2)(A+I)D̃^(−1/2), where D̃ counts A+I degrees.
    pub norm_adj: Rc<SpMat>,
}

impl GraphBatch {
    pub fn from_graphs(graphs: &[&Graph]) -> Self {
        assert!(!graphs.is_empty(), "batch: no graphs");
        let node_counts: Vec<usize> = graphs.iter().map(|g| g.num_nodes()).collect();
        let num_nodes: usize = node_counts.iter().sum();
        let mut segments = Vec::with_capacity(num_nodes);
        let mut edges = Vec::new();
        let mut offset = 0;
        for (gi, g) in graphs.iter().enumerate() {
            segments.extend(std::iter::repeat(gi).take(g.num_nodes()));
            for (u, v) in g.to_edge_list() {
                edges.push((u + offset, v + offset));
            }
            offset += g.num_nodes();
        }
        Self::from_parts(graphs.len(), node_counts, segments, edges)
    }

    /// Batch over pre-fused parts; `edges` must be canonical (u < v) and
    /// sorted, `segments` grouped by graph in batch order.
    fn from_parts(
        num_graphs: usize,
        node_counts: Vec<usize>,
        segments: Vec<usize>,
        edges: Vec<(usize, usize)>,
    ) -> Self {
        let num_nodes = segments.len();
        let adj = Rc::new(adjacency(num_nodes, &edges));
        let norm_adj = Rc::new(norm_adjacency(num_nodes, &adj));
        GraphBatch {
            num_graphs,
            num_nodes,
            node_counts,
            segments: Rc::new(segments),
            edges,
            adj,
            norm_adj,
        }
    }

    /// Induced sub-batch on `kept` (strictly increasing global node ids):
    /// surviving edges only, no re-wiring. Graph count and order are
    /// preserved even for graphs that keep no nodes.
    pub fn induced(&self, kept: &[usize]) -> GraphBatch {
        debug_assert!(kept.windows(2).all(|w| w[0] < w[1]), "kept ids must increase");
        let mut remap = vec![usize::MAX; self.num_nodes];
        for (new, &old) in kept.iter().enumerate() {
            remap[old] = new;
        }
        let segments: Vec<usize> = kept.iter().map(|&old| self.segments[old]).collect();
        let mut node_counts = vec![0usize; self.num_graphs];
        for &s in &segments {
            node_counts[s] += 1;
        }
        let edges: Vec<(usize, usize)> = self
            .edges
            .iter()
            .filter(|&&(u, v)| remap[u] != usize::MAX && remap[v] != usize::MAX)
            .map(|&(u, v)| (remap[u], remap[v]))
            .collect();
        Self::from_parts(self.num_graphs, node_counts, segments, edges)
    }

    /// Directed closed-neighborhood edge arrays for attention:
    /// for every node i, one (src=j, dst=i) pair per j ∈ N(i) ∪ {i},
    /// grouped by dst with sources ascending.
    pub fn attention_edges(&self) -> (Rc<Vec<usize>>, Rc<Vec<usize>>) {
        let mut src = Vec::with_capacity(2 * self.edges.len() + self.num_nodes);
        let mut dst = Vec::with_capacity(src.capacity());
        for i in 0..self.num_nodes {
            let nbrs = &self.adj.indices[self.adj.indptr[i]..self.adj.indptr[i + 1]];
            let mut self_placed = false;
            for &j in nbrs {
                if !self_placed && i < j {
                    src.push(i);
                    dst.push(i);
                    self_placed = true;
                }
                src.push(j);
                dst.push(i);
            }
            if !self_placed {
                src.push(i);
                dst.push(i);
            }
        }
        (Rc::new(src), Rc::new(dst))
    }
}

fn adjacency(num_nodes: usize, edges: &[(usize, usize)]) -> SpMat {
    let triples: Vec<(usize, usize, f64)> = edges
        .iter()
        .flat_map(|&(u, v)| [(u, v, 1.0), (v, u, 1.0)])
        .collect();
    SpMat::from_triples(num_nodes, num_nodes, &triples)
}

fn norm_adjacency(num_nodes: usize, adj: &SpMat) -> SpMat {
    let mut deg_tilde = vec![1.0f64; num_nodes];
    for r in 0..num_nodes {
        deg_tilde[r] += (adj.indptr[r + 1] - adj.indptr[r]) as f64;
    }
    let inv_sqrt: Vec<f64> = deg_tilde.iter().map(|&d| 1.0 / d.sqrt()).collect();
    let mut triples = Vec::with_capacity(adj.values.len() + num_nodes);
    for r in 0..num_nodes {
        triples.push((r, r, inv_sqrt[r] * inv_sqrt[r]));
        for k in adj.indptr[r]..adj.indptr[r + 1] {
            let c = adj.indices[k];
            triples.push((r, c, inv_sqrt[r] * inv_sqrt[c]));
        }
    }
    SpMat::from_triples(num_nodes, num_nodes, &triples)
}

/// Stacks feature blocks row-wise into one batch matrix.
pub fn stack_rows(parts: &[&Array2<f64>]) -> Array2<f64> {
    assert!(!parts.is_empty(), "stack_rows: no parts");
    let cols = parts[0].ncols();
    let rows: usize = parts.iter().map(|p| p.nrows()).sum();
    let mut out = Array2::zeros((rows, cols));
    let mut at = 0;
    for p in parts {
        assert_eq!(p.ncols(), cols, "stack_rows: widths differ");
        out.slice_mut(ndarray::s![at..at + p.nrows(), ..]).assign(p);
        at += p.nrows();
    }
    out
}
