//! Artificial node features for featureless graphs.
//!
//! Five strategies: a constant one, uniform noise, raw degree, degree
//! normalized by the dataset-wide maximum, and the "identity" vector — per
//! node, its degree followed by its closed-walk counts of lengths 2..k
//! (diagonals of adjacency powers). Closed walks, not simple cycles: exact
//! simple-cycle counting is #P-hard, while adjacency-power diagonals are the
//! standard cheap stand-in and what repeated sparse products compute.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::generate::mix_seed;
use crate::graph::Graph;

#[derive(Debug, Error, PartialEq)]
pub enum FeatureError {
    #[error("normalized degree needs a dataset-wide max degree > 0")]
    MissingMaxDegree,
    #[error("identity feature depth must be at least 1")]
    ZeroIdentityDepth,
}

/// Node-feature matrix: one row per node, row-major, dim >= 1.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub values: Array2<f64>,
}

impl FeatureMatrix {
    pub fn num_nodes(&self) -> usize {
        self.values.nrows()
    }

    pub fn dim(&self) -> usize {
        self.values.ncols()
    }
}

/// The five augmentation strategies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub enum FeatureKind {
    Ones,
    Noise,
    Degree,
    NormDegree,
    Identity(usize),
}

impl FeatureKind {
    /// Columns the strategy produces.
    pub fn dim(self) -> usize {
        match self {
            FeatureKind::Identity(k) => k,
            _ => 1,
        }
    }

    /// Short name used in configs, result rows and file names. The identity
    /// depth is carried separately (`identity_k`), not in the name.
    pub fn name(self) -> &'static str {
        match self {
            FeatureKind::Ones => "ones",
            FeatureKind::Noise => "noise",
            FeatureKind::Degree => "degree",
            FeatureKind::NormDegree => "normdegree",
            FeatureKind::Identity(_) => "identity",
        }
    }

    /// Resolves a strategy name; `identity` picks up the given depth.
    pub fn from_name(name: &str, identity_k: usize) -> Result<Self, String> {
        match name {
            "ones" => Ok(FeatureKind::Ones),
            "noise" => Ok(FeatureKind::Noise),
            "degree" => Ok(FeatureKind::Degree),
            "normdegree" => Ok(FeatureKind::NormDegree),
            "identity" => Ok(FeatureKind::Identity(identity_k)),
            other => Err(format!("unknown feature kind: {other}")),
        }
    }
}

/// Dataset-level inputs some strategies need.
#[derive(Debug, Clone, Copy, Default)]
pub struct FeatureContext {
    /// Maximum degree across the whole dataset (all splits); the
    /// normalized-degree denominator.
    pub max_degree_over_dataset: Option<usize>,
}

/// Seed for one graph's feature draw, derived from the dataset seed and the
/// graph's index so augmentation is reproducible and independent of order.
pub fn feature_seed(dataset_seed: u64, graph_index: usize) -> u64 {
    mix_seed(&[dataset_seed, graph_index as u64])
}

/// Salt folded into the noise stream so different strategies sharing a
/// graph seed would not alias.
const NOISE_SALT: u64 = 0x6e6f_6973_65; // "noise"

/// Builds the feature matrix for one graph.
///
/// Noise is drawn once here — augmentation time — from `(seed, strategy)`,
/// so repeated training runs over the same dataset see identical features.
pub fn augment(
    g: &Graph,
    kind: FeatureKind,
    ctx: &FeatureContext,
    seed: u64,
) -> Result<FeatureMatrix, FeatureError> {
    let n = g.num_nodes();
    let values = match kind {
        FeatureKind::Ones => Array2::ones((n, 1)),
        FeatureKind::Noise => {
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(&[seed, NOISE_SALT]));
            Array2::from_shape_fn((n, 1), |_| rng.gen::<f64>())
        }
        FeatureKind::Degree => {
            Array2::from_shape_fn((n, 1), |(v, _)| g.degree(v) as f64)
        }
        FeatureKind::NormDegree => {
            let max = ctx
                .max_degree_over_dataset
                .filter(|&m| m > 0)
                .ok_or(FeatureError::MissingMaxDegree)?;
            Array2::from_shape_fn((n, 1), |(v, _)| g.degree(v) as f64 / max as f64)
        }
        FeatureKind::Identity(k) => return identity_features(g, k),
    };
    Ok(FeatureMatrix { values })
}

/// Identity features: column 1 is the degree; column l (2 <= l <= k) is the
/// number of closed walks of length l at the node, i.e. `diag(A^l)`.
///
/// Computed per node by propagating a unit indicator through the adjacency
/// structure l times and reading back the source entry — the sparse
/// equivalent of taking diagonals of repeated adjacency products.
pub fn identity_features(g: &Graph, k: usize) -> Result<FeatureMatrix, FeatureError> {
    if k == 0 {
        return Err(FeatureError::ZeroIdentityDepth);
    }
    let n = g.num_nodes();
    let mut values = Array2::zeros((n, k));
    for v in 0..n {
        values[(v, 0)] = g.degree(v) as f64;
    }
    if k == 1 {
        return Ok(FeatureMatrix { values });
    }
    // Dense scratch, reset via the touched list so the per-node cost tracks
    // the frontier size rather than n.
    let mut curr = vec![0.0f64; n];
    let mut next = vec![0.0f64; n];
    let mut curr_touched: Vec<usize> = Vec::new();
    let mut next_touched: Vec<usize> = Vec::new();
    for v in 0..n {
        curr[v] = 1.0;
        curr_touched.push(v);
        for l in 1..=k {
            for &u in &curr_touched {
                let amount = curr[u];
                for &w in g.neighbors(u) {
                    if next[w] == 0.0 {
                        next_touched.push(w);
                    }
                    next[w] += amount;
                }
            }
            if l >= 2 {
                values[(v, l - 1)] = next[v];
            }
            for &u in &curr_touched {
                curr[u] = 0.0;
            }
            curr_touched.clear();
            std::mem::swap(&mut curr, &mut next);
            std::mem::swap(&mut curr_touched, &mut next_touched);
        }
        for &u in &curr_touched {
            curr[u] = 0.0;
        }
        curr_touched.clear();
    }
    Ok(FeatureMatrix { values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::{gen_er, gen_grid, Neighborhood};

    fn graph(n: usize, edges: &[(usize, usize)]) -> Graph {
        Graph::from_edge_list(n, edges).unwrap()
    }

    /// Brute-force closed-walk counter: enumerate every walk of length l
    /// starting and ending at v.
    fn closed_walks(g: &Graph, v: usize, l: usize) -> u64 {
        fn go(g: &Graph, target: usize, here: usize, left: usize) -> u64 {
            if left == 0 {
                return (here == target) as u64;
            }
            g.neighbors(here).iter().map(|&w| go(g, target, w, left - 1)).sum()
        }
        go(g, v, v, l)
    }

    fn identity_by_enumeration(g: &Graph, k: usize) -> Array2<f64> {
        Array2::from_shape_fn((g.num_nodes(), k), |(v, col)| {
            if col == 0 {
                g.degree(v) as f64
            } else {
                closed_walks(g, v, col + 1) as f64
            }
        })
    }

    #[test]
    fn triangle_identity() {
        let g = graph(3, &[(0, 1), (1, 2), (0, 2)]);
        let f = identity_features(&g, 3).unwrap();
        for v in 0..3 {
            assert_eq!(f.values.row(v).to_vec(), vec![2.0, 2.0, 2.0]);
        }
    }

    #[test]
    fn path_identity() {
        let g = graph(3, &[(0, 1), (1, 2)]);
        let f = identity_features(&g, 2).unwrap();
        assert_eq!(f.values.row(1).to_vec(), vec![2.0, 2.0]);
        assert_eq!(f.values.row(0).to_vec(), vec![1.0, 1.0]);
        assert_eq!(f.values.row(2).to_vec(), vec![1.0, 1.0]);
    }

    #[test]
    fn single_edge_identity_depth_four() {
        let g = graph(2, &[(0, 1)]);
        let f = identity_features(&g, 4).unwrap();
        for v in 0..2 {
            assert_eq!(f.values.row(v).to_vec(), vec![1.0, 1.0, 0.0, 1.0]);
        }
    }

    #[test]
    fn torus_has_no_closed_three_walks() {
        let g = gen_grid(16, 16, Neighborhood::VonNeumann, 0).unwrap();
        let f = identity_features(&g, 3).unwrap();
        assert!(f.values.column(2).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn identity_column_two_is_degree() {
        for seed in 0..5 {
            let g = gen_er(30, 0.15, seed).unwrap();
            let f = identity_features(&g, 3).unwrap();
            for v in 0..30 {
                assert_eq!(f.values[(v, 1)], g.degree(v) as f64);
            }
        }
    }

    #[test]
    fn odd_columns_vanish_on_bipartite_graphs() {
        // Even-dimension von Neumann torus is bipartite.
        let g = gen_grid(4, 6, Neighborhood::VonNeumann, 0).unwrap();
        let f = identity_features(&g, 5).unwrap();
        assert!(f.values.column(2).iter().all(|&x| x == 0.0));
        assert!(f.values.column(4).iter().all(|&x| x == 0.0));
        assert!(f.values.column(3).iter().any(|&x| x > 0.0));
    }

    #[test]
    fn identity_matches_walk_enumeration() {
        for seed in 0..20 {
            let g = gen_er(8, 0.4, seed).unwrap();
            let f = identity_features(&g, 5).unwrap();
            assert_eq!(f.values, identity_by_enumeration(&g, 5), "seed {seed}");
        }
    }

    #[test]
    fn identity_rejects_depth_zero() {
        let g = graph(2, &[(0, 1)]);
        assert_eq!(identity_features(&g, 0), Err(FeatureError::ZeroIdentityDepth));
        assert_eq!(
            augment(&g, FeatureKind::Identity(0), &FeatureContext::default(), 0),
            Err(FeatureError::ZeroIdentityDepth)
        );
    }

    #[test]
    fn ones_and_degree() {
        let g = graph(4, &[(0, 1), (0, 2), (0, 3)]);
        let ones = augment(&g, FeatureKind::Ones, &FeatureContext::default(), 0).unwrap();
        assert!(ones.values.iter().all(|&x| x == 1.0));
        assert_eq!(ones.dim(), 1);
        let deg = augment(&g, FeatureKind::Degree, &FeatureContext::default(), 0).unwrap();
        assert_eq!(deg.values.column(0).to_vec(), vec![3.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn norm_degree_ratio() {
        // Star center has degree 4; with a dataset max of 10 that is 0.4.
        let g = graph(5, &[(0, 1), (0, 2), (0, 3), (0, 4)]);
        let ctx = FeatureContext { max_degree_over_dataset: Some(10) };
        let f = augment(&g, FeatureKind::NormDegree, &ctx, 0).unwrap();
        assert_eq!(f.values[(0, 0)], 0.4);
        assert_eq!(f.values[(1, 0)], 0.1);
        assert!(f.values.iter().all(|&x| (0.0..=1.0).contains(&x)));
    }

    #[test]
    fn norm_degree_requires_context() {
        let g = graph(2, &[(0, 1)]);
        assert_eq!(
            augment(&g, FeatureKind::NormDegree, &FeatureContext::default(), 0),
            Err(FeatureError::MissingMaxDegree)
        );
        let zero = FeatureContext { max_degree_over_dataset: Some(0) };
        assert_eq!(
            augment(&g, FeatureKind::NormDegree, &zero, 0),
            Err(FeatureError::MissingMaxDegree)
        );
    }

    #[test]
    fn noise_is_seeded_and_bounded() {
        let g = gen_er(50, 0.1, 3).unwrap();
        let ctx = FeatureContext::default();
        let a = augment(&g, FeatureKind::Noise, &ctx, feature_seed(9, 0)).unwrap();
        let b = augment(&g, FeatureKind::Noise, &ctx, feature_seed(9, 0)).unwrap();
        let c = augment(&g, FeatureKind::Noise, &ctx, feature_seed(9, 1)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.values.iter().all(|&x| (0.0..1.0).contains(&x)));
    }

    #[test]
    fn degree_features_are_permutation_equivariant() {
        use rand::seq::SliceRandom;
        let g = gen_er(20, 0.2, 8).unwrap();
        let mut perm: Vec<usize> = (0..20).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        perm.shuffle(&mut rng);
        let edges: Vec<(usize, usize)> =
            g.to_edge_list().iter().map(|&(u, v)| (perm[u], perm[v])).collect();
        let h = Graph::from_edge_list(20, &edges).unwrap();
        let fg = identity_features(&g, 4).unwrap();
        let fh = identity_features(&h, 4).unwrap();
        for v in 0..20 {
            assert_eq!(fg.values.row(v), fh.values.row(perm[v]));
        }
    }

    #[test]
    fn kind_names_round_trip() {
        for kind in [
            FeatureKind::Ones,
            FeatureKind::Noise,
            FeatureKind::Degree,
            FeatureKind::NormDegree,
            FeatureKind::Identity(4),
        ] {
            assert_eq!(FeatureKind::from_name(kind.name(), 4).unwrap(), kind);
        }
        assert!(FeatureKind::from_name("spectral", 4).is_err());
    }
}
