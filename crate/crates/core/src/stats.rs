//! Structural statistics: transitivity, average path length, per-class
//! summaries, and the small-world predicates.
//!
//! Transitivity is computed as `3 * triangles / connected triples`, a single
//! global ratio (not an average of local clustering coefficients). Average
//! path length is the mean BFS distance over ordered pairs inside the
//! largest connected component.

use thiserror::Error;

use crate::generate::LabeledDataset;
use crate::graph::{ClassLabel, Graph};

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    /// Every component is a single node, so no finite distance exists.
    #[error("average path length undefined: largest component has one node")]
    NoPaths,
}

/// Structural summary of one graph.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct GraphStats {
    pub num_nodes: usize,
    pub num_edges: usize,
    pub avg_degree: f64,
    pub density: f64,
    pub transitivity: f64,
    /// None when the graph has no path between two distinct nodes.
    pub avg_path_length: Option<f64>,
    pub max_degree: usize,
}

/// Global transitivity: `3 * triangles / connected triples`, or 0 when the
/// graph has no connected triple.
///
/// Implemented as a single pass over edges: for each edge (u, v) the size
/// of N(u) ∩ N(v) counts the triangles through that edge, and each triangle
/// has three edges, so the edge sum is exactly `3 * triangles`. The triple
/// count is `Σ_v deg(v) * (deg(v) - 1) / 2`. Both sides are exact integers,
/// so the ratio is bit-identical to a brute-force triple enumeration.
pub fn transitivity(g: &Graph) -> f64 {
    let mut three_triangles: u64 = 0;
    for u in 0..g.num_nodes() {
        for &v in g.neighbors(u) {
            if v <= u {
                continue;
            }
            three_triangles += sorted_intersection_size(g.neighbors(u), g.neighbors(v)) as u64;
        }
    }
    let mut triples: u64 = 0;
    for v in 0..g.num_nodes() {
        let d = g.degree(v) as u64;
        triples += d * d.saturating_sub(1) / 2;
    }
    if triples == 0 {
        0.0
    } else {
        three_triangles as f64 / triples as f64
    }
}

fn sorted_intersection_size(a: &[usize], b: &[usize]) -> usize {
    let (mut i, mut j, mut count) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                count += 1;
                i += 1;
                j += 1;
            }
        }
    }
    count
}

/// Connected components as node lists, by BFS.
fn components(g: &Graph) -> Vec<Vec<usize>> {
    let n = g.num_nodes();
    let mut seen = vec![false; n];
    let mut comps = Vec::new();
    let mut queue = std::collections::VecDeque::new();
    for start in 0..n {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        queue.push_back(start);
        let mut comp = vec![start];
        while let Some(u) = queue.pop_front() {
            for &v in g.neighbors(u) {
                if !seen[v] {
                    seen[v] = true;
                    comp.push(v);
                    queue.push_back(v);
                }
            }
        }
        comps.push(comp);
    }
    comps
}

/// Average shortest-path length over ordered pairs of distinct nodes in the
/// largest connected component (ties broken toward the component found
/// first, i.e. the one containing the lowest node id). Errors when the
/// largest component is a single node.
pub fn avg_path_length(g: &Graph) -> Result<f64, StatsError> {
    let comps = components(g);
    let comp = comps
        .iter()
        .max_by(|a, b| a.len().cmp(&b.len()).then(b[0].cmp(&a[0])))
        .cloned()
        .unwrap_or_default();
    let c = comp.len();
    if c < 2 {
        return Err(StatsError::NoPaths);
    }
    let in_comp = {
        let mut mask = vec![false; g.num_nodes()];
        for &v in &comp {
            mask[v] = true;
        }
        mask
    };
    let mut total: u64 = 0;
    let mut dist = vec![usize::MAX; g.num_nodes()];
    let mut queue = std::collections::VecDeque::new();
    for &src in &comp {
        for &v in &comp {
            dist[v] = usize::MAX;
        }
        dist[src] = 0;
        queue.push_back(src);
        while let Some(u) = queue.pop_front() {
            for &v in g.neighbors(u) {
                if in_comp[v] && dist[v] == usize::MAX {
                    dist[v] = dist[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        total += comp.iter().map(|&v| dist[v] as u64).sum::<u64>();
    }
    Ok(total as f64 / (c as f64 * (c as f64 - 1.0)))
}

/// Full structural summary (the path length of an all-isolates graph maps
/// to `None`).
pub fn stats(g: &Graph) -> GraphStats {
    let n = g.num_nodes();
    let m = g.num_edges();
    let density = if n < 2 {
        0.0
    } else {
        2.0 * m as f64 / (n as f64 * (n as f64 - 1.0))
    };
    GraphStats {
        num_nodes: n,
        num_edges: m,
        avg_degree: if n == 0 { 0.0 } else { 2.0 * m as f64 / n as f64 },
        density,
        transitivity: transitivity(g),
        avg_path_length: avg_path_length(g).ok(),
        max_degree: g.max_degree(),
    }
}

/// Mean / min / max triple over a sample.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Band {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

fn band(values: &[f64]) -> Band {
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Band { mean, min, max }
}

/// Per-class aggregate over a dataset.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PerClassSummary {
    pub label: ClassLabel,
    pub count: usize,
    pub nodes: Band,
    pub edges: Band,
    pub avg_degree: Band,
    pub transitivity: Band,
    /// Band over the graphs where the value is defined; `None` if nowhere.
    pub avg_path_length: Option<Band>,
}

/// Summarizes every class present in the dataset, in class-code order.
/// `with_paths = false` skips the (quadratic) path-length computation.
pub fn summarize_dataset(ds: &LabeledDataset, with_paths: bool) -> Vec<PerClassSummary> {
    use rayon::prelude::*;
    ClassLabel::ALL
        .iter()
        .filter_map(|&label| {
            let idxs = ds.class_indices(label);
            if idxs.is_empty() {
                return None;
            }
            let per_graph: Vec<(GraphStats, Option<f64>)> = idxs
                .par_iter()
                .map(|&i| {
                    let g = &ds.entries[i].graph;
                    let mut s = stats_without_paths(g);
                    let apl = if with_paths { avg_path_length(g).ok() } else { None };
                    s.avg_path_length = apl;
                    (s, apl)
                })
                .collect();
            let nodes: Vec<f64> = per_graph.iter().map(|(s, _)| s.num_nodes as f64).collect();
            let edges: Vec<f64> = per_graph.iter().map(|(s, _)| s.num_edges as f64).collect();
            let degs: Vec<f64> = per_graph.iter().map(|(s, _)| s.avg_degree).collect();
            let trans: Vec<f64> = per_graph.iter().map(|(s, _)| s.transitivity).collect();
            let apls: Vec<f64> = per_graph.iter().filter_map(|(_, a)| *a).collect();
            Some(PerClassSummary {
                label,
                count: idxs.len(),
                nodes: band(&nodes),
                edges: band(&edges),
                avg_degree: band(&degs),
                transitivity: band(&trans),
                avg_path_length: if apls.is_empty() { None } else { Some(band(&apls)) },
            })
        })
        .collect()
}

fn stats_without_paths(g: &Graph) -> GraphStats {
    let n = g.num_nodes();
    let m = g.num_edges();
    GraphStats {
        num_nodes: n,
        num_edges: m,
        avg_degree: if n == 0 { 0.0 } else { 2.0 * m as f64 / n as f64 },
        density: if n < 2 { 0.0 } else { 2.0 * m as f64 / (n as f64 * (n as f64 - 1.0)) },
        transitivity: transitivity(g),
        avg_path_length: None,
        max_degree: g.max_degree(),
    }
}

/// True when the average path length is below `log(n)` in the given base —
/// the "short paths" half of the small-world property. Natural log by
/// default elsewhere in the crate.
pub fn has_short_paths(avg_path_length: f64, n: usize, log_base: f64) -> bool {
    avg_path_length < (n as f64).ln() / log_base.ln()
}

/// True when transitivity clears the graph's density — the "clustered"
/// half of the small-world property.
pub fn has_high_transitivity(transitivity: f64, density: f64) -> bool {
    transitivity >= density
}
