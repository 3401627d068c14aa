//! Seeded generators for the eight network classes and dataset assembly.
//!
//! Four generative families, each at two average-degree levels:
//! Erdős-Rényi (`p = 4/N`, `8/N`), Watts-Strogatz (`k = 4`, `8`, rewiring
//! probability drawn from `[0.1, 0.11]`), Barabási-Albert (`m = 2`, `4`) and
//! wrapped regular lattices (von Neumann / Moore neighborhoods).
//!
//! Determinism: every graph is produced by a ChaCha8 stream seeded with a
//! [`mix_seed`] of `(master_seed, class_code, index)`, so generation order
//! (including parallel generation) never changes the result. Draws per graph
//! happen in a fixed order: node count first, then class parameters, then
//! the graph itself.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::graph::{ClassLabel, Graph};

/// Generator and dataset-assembly errors.
#[derive(Debug, Error, PartialEq)]
pub enum GenError {
    #[error("node count must be at least 2, got {0}")]
    TooFewNodes(usize),
    #[error("edge probability must be a finite value in [0, 1], got {0}")]
    BadProbability(f64),
    #[error("watts-strogatz k must be even and smaller than n (k={k}, n={n})")]
    BadWsK { k: usize, n: usize },
    #[error("barabasi-albert m must satisfy 1 <= m < n (m={m}, n={n})")]
    BadBaM { m: usize, n: usize },
    #[error("grid dimensions must both be at least 4, got {rows}x{cols}")]
    BadGridDims { rows: usize, cols: usize },
    #[error("n range [{lo}, {hi}] admits no grid with both factors >= 4")]
    NoGridDims { lo: usize, hi: usize },
    #[error("n range [{lo}, {hi}] invalid: {reason}")]
    BadNRange { lo: usize, hi: usize, reason: String },
    #[error("split ratios must be nonnegative and sum to 1")]
    BadSplitRatios,
    #[error("per-class count must be positive")]
    EmptyClass,
}

/// SplitMix64 finalizer; the documented 64-bit mixing step behind all
/// derived seeds in this crate.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds the parts through SplitMix64 into one derived seed.
///
/// `mix_seed(&[master, class_code, index])` gives every graph its own
/// stream, independent of generation order.
pub fn mix_seed(parts: &[u64]) -> u64 {
    let mut h = 0x243F_6A88_85A3_08D3; // arbitrary nonzero start
    for &p in parts {
        h = splitmix64(h ^ p);
    }
    h
}

/// Erdős-Rényi G(n, p): every unordered pair is an edge independently with
/// probability `p`. Pairs are visited in lexicographic order.
pub fn gen_er(n: usize, p: f64, seed: u64) -> Result<Graph, GenError> {
    if n < 2 {
        return Err(GenError::TooFewNodes(n));
    }
    if !p.is_finite() || !(0.0..=1.0).contains(&p) {
        return Err(GenError::BadProbability(p));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            if rng.gen::<f64>() < p {
                edges.push((u, v));
            }
        }
    }
    Ok(Graph::from_canonical_edges(n, &edges))
}

/// Watts-Strogatz ring lattice with per-edge rewiring.
///
/// Starts from the lattice where each node is joined to its `k/2` nearest
/// neighbors on each side, then visits every lattice edge once (ring by
/// ring) and, with probability `rewire_p`, replaces the far endpoint by a
/// uniformly drawn node that is neither the source nor already adjacent to
/// it. Rewiring keeps the edge count at exactly `n*k/2`.
pub fn gen_ws(n: usize, k: usize, rewire_p: f64, seed: u64) -> Result<Graph, GenError> {
    if n < 2 {
        return Err(GenError::TooFewNodes(n));
    }
    if k % 2 != 0 || k >= n {
        return Err(GenError::BadWsK { k, n });
    }
    if !rewire_p.is_finite() || !(0.0..=1.0).contains(&rewire_p) {
        return Err(GenError::BadProbability(rewire_p));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut adj: Vec<std::collections::BTreeSet<usize>> = vec![Default::default(); n];
    for j in 1..=(k / 2) {
        for u in 0..n {
            let v = (u + j) % n;
            adj[u].insert(v);
            adj[v].insert(u);
        }
    }
    for j in 1..=(k / 2) {
        for u in 0..n {
            let v = (u + j) % n;
            if rng.gen::<f64>() >= rewire_p {
                continue;
            }
            if adj[u].len() >= n - 1 {
                continue; // no valid target left
            }
            let w = loop {
                let cand = rng.gen_range(0..n);
                if cand != u && !adj[u].contains(&cand) {
                    break cand;
                }
            };
            adj[u].remove(&v);
            adj[v].remove(&u);
            adj[u].insert(w);
            adj[w].insert(u);
        }
    }
    let mut edges = Vec::with_capacity(n * k / 2);
    for (u, nbrs) in adj.iter().enumerate() {
        for &v in nbrs {
            if u < v {
                edges.push((u, v));
            }
        }
    }
    edges.sort_unstable();
    Ok(Graph::from_canonical_edges(n, &edges))
}

/// Barabási-Albert preferential attachment.
///
/// Starts from `m` isolated nodes; each arriving node attaches `m` edges to
/// distinct existing nodes chosen proportionally to current degree. The
/// first arrival sees only zero-degree nodes and attaches to all `m` of
/// them. Produces exactly `m*(n-m)` edges.
pub fn gen_ba(n: usize, m: usize, seed: u64) -> Result<Graph, GenError> {
    if n < 2 {
        return Err(GenError::TooFewNodes(n));
    }
    if m == 0 || m >= n {
        return Err(GenError::BadBaM { m, n });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // One entry per unit of degree; sampling an index uniformly is
    // degree-proportional sampling.
    let mut repeated: Vec<usize> = Vec::with_capacity(2 * m * (n - m));
    let mut edges: Vec<(usize, usize)> = Vec::with_capacity(m * (n - m));
    let mut targets: Vec<usize> = (0..m).collect();
    for arrival in m..n {
        for &t in &targets {
            edges.push((t, arrival));
            repeated.push(t);
        }
        repeated.extend(std::iter::repeat(arrival).take(m));
        if arrival + 1 == n {
            break;
        }
        targets.clear();
        while targets.len() < m {
            let cand = repeated[rng.gen_range(0..repeated.len())];
            if !targets.contains(&cand) {
                targets.push(cand);
            }
        }
    }
    edges.sort_unstable();
    Ok(Graph::from_canonical_edges(n, &edges))
}

/// Lattice neighborhood kind: 4 axis neighbors, or 8 including diagonals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Neighborhood {
    VonNeumann,
    Moore,
}

/// Regular lattice on a torus (the matrix is wrapped around in both
/// directions), so every node has the same degree: 4 for von Neumann,
/// 8 for Moore. Both dimensions must be at least 4, which keeps the graph
/// simple and the von Neumann transitivity exactly zero.
///
/// `seed` is accepted for interface uniformity but unused; the generator is
/// deterministic.
pub fn gen_grid(
    rows: usize,
    cols: usize,
    neighborhood: Neighborhood,
    _seed: u64,
) -> Result<Graph, GenError> {
    if rows < 4 || cols < 4 {
        return Err(GenError::BadGridDims { rows, cols });
    }
    let n = rows * cols;
    let at = |r: usize, c: usize| (r % rows) * cols + (c % cols);
    let mut edges = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            let u = at(r, c);
            // Forward wraps cover each undirected edge exactly once.
            edges.push(order(u, at(r + 1, c)));
            edges.push(order(u, at(r, c + 1)));
            if neighborhood == Neighborhood::Moore {
                edges.push(order(u, at(r + 1, c + 1)));
                edges.push(order(u, at(r + 1, c + cols - 1)));
            }
        }
    }
    edges.sort_unstable();
    Ok(Graph::from_canonical_edges(n, &edges))
}

fn order(u: usize, v: usize) -> (usize, usize) {
    if u < v {
        (u, v)
    } else {
        (v, u)
    }
}

/// Class-specific generator parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum ClassParams {
    Er { p: f64 },
    Ws { k: usize, rewire_p: f64 },
    Ba { m: usize },
    Grid { neighborhood: Neighborhood, rows: usize, cols: usize },
}

/// A fully resolved recipe for one graph.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorSpec {
    pub class_label: ClassLabel,
    pub n: usize,
    pub seed: u64,
    pub params: ClassParams,
}

impl GeneratorSpec {
    /// Runs the generator the spec describes.
    pub fn generate(&self) -> Result<Graph, GenError> {
        match &self.params {
            ClassParams::Er { p } => gen_er(self.n, *p, self.seed),
            ClassParams::Ws { k, rewire_p } => gen_ws(self.n, *k, *rewire_p, self.seed),
            ClassParams::Ba { m } => gen_ba(self.n, *m, self.seed),
            ClassParams::Grid { neighborhood, rows, cols } => {
                debug_assert_eq!(rows * cols, self.n);
                gen_grid(*rows, *cols, *neighborhood, self.seed)
            }
        }
    }
}

/// Recipe for a whole balanced dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSpec {
    /// Graphs per class; all eight classes are always generated.
    pub per_class_count: usize,
    /// Inclusive node-count range each graph draws from.
    pub n_range: (usize, usize),
    pub master_seed: u64,
    /// (train, val, test) fractions; must sum to 1.
    pub split_ratios: (f64, f64, f64),
}

impl DatasetSpec {
    /// The small-graphs recipe: 250 per class, N in [250, 1024], 80/10/10.
    pub fn small(master_seed: u64) -> Self {
        DatasetSpec {
            per_class_count: 250,
            n_range: (250, 1024),
            master_seed,
            split_ratios: (0.8, 0.1, 0.1),
        }
    }

    /// The medium-graphs recipe: 250 per class, N in [1024, 2048], all test.
    pub fn medium(master_seed: u64) -> Self {
        DatasetSpec {
            per_class_count: 250,
            n_range: (1024, 2048),
            master_seed,
            split_ratios: (0.0, 0.0, 1.0),
        }
    }
}

/// Which split a graph belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl std::str::FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split: {other}")),
        }
    }
}

/// One labeled, split-assigned graph.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetEntry {
    pub graph: Graph,
    pub label: ClassLabel,
    pub split: Split,
}

/// Generation metadata carried with a dataset (and echoed into its file).
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DatasetMeta {
    pub master_seed: u64,
    pub per_class_count: usize,
    pub n_range: (usize, usize),
    pub split_ratios: (f64, f64, f64),
    /// Maximum degree across every member graph; the normalized-degree
    /// feature divides by this.
    pub max_degree_over_dataset: usize,
}

/// A balanced set of labeled graphs with a stratified split.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub entries: Vec<DatasetEntry>,
    pub meta: DatasetMeta,
}

impl LabeledDataset {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Indices of the entries in the given split, in dataset order.
    pub fn split_indices(&self, split: Split) -> Vec<usize> {
        self.entries
            .iter()
            .enumerate()
            .filter(|(_, e)| e.split == split)
            .map(|(i, _)| i)
            .collect()
    }

    /// Entries of a single class, in dataset order.
    pub fn class_indices(&self, label: ClassLabel) -> Vec<usize> {
        self.entries
            .iter()
            .enumerate()
            .filter(|(_, e)| e.label == label)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Per-class split counts by largest remainder; exact at .8/.1/.1 ratios.
fn split_counts(count: usize, ratios: (f64, f64, f64)) -> [usize; 3] {
    let parts = [ratios.0, ratios.1, ratios.2];
    let mut base = [0usize; 3];
    let mut frac = [0f64; 3];
    let mut used = 0;
    for i in 0..3 {
        let exact = count as f64 * parts[i];
        base[i] = exact.floor() as usize;
        frac[i] = exact - base[i] as f64;
        used += base[i];
    }
    let mut order = [0usize, 1, 2];
    // Largest fractional part first; ties favor the earlier split.
    order.sort_by(|&a, &b| frac[b].partial_cmp(&frac[a]).unwrap().then(a.cmp(&b)));
    for &i in order.iter().take(count - used) {
        base[i] += 1;
    }
    base
}

/// All n in `[lo, hi]` that factor as rows*cols with both sides >= 4.
fn grid_sizes(lo: usize, hi: usize) -> Vec<usize> {
    (lo..=hi).filter(|&n| best_grid_dims(n).is_some()).collect()
}

/// Factor pair (rows <= cols, both >= 4) minimizing cols - rows.
fn best_grid_dims(n: usize) -> Option<(usize, usize)> {
    let mut best: Option<(usize, usize)> = None;
    let mut d = 4;
    while d * d <= n {
        if n % d == 0 && n / d >= 4 {
            best = Some((d, n / d)); // increasing d shrinks the gap
        }
        d += 1;
    }
    best
}

/// Resolves one graph recipe: node count, class parameters, seed.
fn resolve_spec(
    class: ClassLabel,
    index: usize,
    spec: &DatasetSpec,
    grid_ns: &[usize],
) -> GeneratorSpec {
    let seed = mix_seed(&[spec.master_seed, class.code() as u64, index as u64]);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = spec.n_range;
    let (n, params) = match class {
        ClassLabel::ER_low | ClassLabel::ER_high => {
            let n = rng.gen_range(lo..=hi);
            let target = if class == ClassLabel::ER_low { 4.0 } else { 8.0 };
            (n, ClassParams::Er { p: target / n as f64 })
        }
        ClassLabel::WS_low | ClassLabel::WS_high => {
            let n = rng.gen_range(lo..=hi);
            let k = if class == ClassLabel::WS_low { 4 } else { 8 };
            let rewire_p = rng.gen_range(0.1..0.11);
            (n, ClassParams::Ws { k, rewire_p })
        }
        ClassLabel::BA_low | ClassLabel::BA_high => {
            let n = rng.gen_range(lo..=hi);
            let m = if class == ClassLabel::BA_low { 2 } else { 4 };
            (n, ClassParams::Ba { m })
        }
        ClassLabel::GRID_low | ClassLabel::GRID_high => {
            let n = grid_ns[rng.gen_range(0..grid_ns.len())];
            let (rows, cols) = best_grid_dims(n).expect("grid_ns entries factor");
            let neighborhood = if class == ClassLabel::GRID_low {
                Neighborhood::VonNeumann
            } else {
                Neighborhood::Moore
            };
            (n, ClassParams::Grid { neighborhood, rows, cols })
        }
    };
    GeneratorSpec { class_label: class, n, seed, params }
}

/// Generates the full balanced dataset the spec describes.
///
/// Per class: `per_class_count` graphs with node counts drawn uniformly
/// from the range (grid classes draw from the factorable values), each from
/// its own derived seed. The split is stratified per class by largest
/// remainder, assigned in index order. Identical specs produce identical
/// datasets, regardless of thread scheduling.
pub fn build_dataset(spec: &DatasetSpec) -> Result<LabeledDataset, GenError> {
    if spec.per_class_count == 0 {
        return Err(GenError::EmptyClass);
    }
    let (lo, hi) = spec.n_range;
    if lo > hi {
        return Err(GenError::BadNRange { lo, hi, reason: "empty range".into() });
    }
    if lo < 9 {
        // k=8 Watts-Strogatz needs n > 8; everything else needs less.
        return Err(GenError::BadNRange {
            lo,
            hi,
            reason: "minimum node count is 9 (WS with k=8 needs n > 8)".into(),
        });
    }
    let r = spec.split_ratios;
    let ok = r.0 >= 0.0 && r.1 >= 0.0 && r.2 >= 0.0 && (r.0 + r.1 + r.2 - 1.0).abs() < 1e-9;
    if !ok {
        return Err(GenError::BadSplitRatios);
    }
    let grid_ns = grid_sizes(lo, hi);
    if grid_ns.is_empty() {
        return Err(GenError::NoGridDims { lo, hi });
    }

    let recipes: Vec<GeneratorSpec> = ClassLabel::ALL
        .iter()
        .flat_map(|&class| {
            (0..spec.per_class_count).map(move |i| (class, i))
        })
        .map(|(class, i)| resolve_spec(class, i, spec, &grid_ns))
        .collect();

    let graphs: Result<Vec<Graph>, GenError> =
        recipes.par_iter().map(|r| r.generate()).collect();
    let graphs = graphs?;

    let counts = split_counts(spec.per_class_count, spec.split_ratios);
    let mut entries = Vec::with_capacity(graphs.len());
    for (recipe, graph) in recipes.iter().zip(graphs) {
        let index = entries.len() % spec.per_class_count;
        let split = if index < counts[0] {
            Split::Train
        } else if index < counts[0] + counts[1] {
            Split::Val
        } else {
            Split::Test
        };
        entries.push(DatasetEntry { graph, label: recipe.class_label, split });
    }
    let max_degree = entries.iter().map(|e| e.graph.max_degree()).max().unwrap_or(0);
    Ok(LabeledDataset {
        entries,
        meta: DatasetMeta {
            master_seed: spec.master_seed,
            per_class_count: spec.per_class_count,
            n_range: spec.n_range,
            split_ratios: spec.split_ratios,
            max_degree_over_dataset: max_degree,
        },
    })
}
