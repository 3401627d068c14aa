//! Message-passing and pooling primitives: GCN, GIN, GATv2 layers,
//! self-attention graph pooling, and the readouts.
//!
//! Layers are free functions over tape handles; parameter ownership and
//! wiring live in [`crate::model`]. All of them work on a fused
//! [`GraphBatch`], so "per graph" always means "per segment".

use std::rc::Rc;

use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Tape, TId};
use crate::batch::GraphBatch;

/// Glorot-uniform sample: U(−a, a) with a = √(6 / (fan_in + fan_out)).
pub fn glorot_uniform(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let a = (6.0 / (rows + cols) as f64).sqrt();
    Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-a..a))
}

/// Semi-orthogonal sample: a Gaussian matrix orthonormalized along its
/// smaller dimension (Gram–Schmidt), times `gain`. Unlike an i.i.d. draw,
/// the result can never be near-singular, which matters for very narrow
/// layers: a nearly rank-deficient 2×2 weight squeezes a 2-dimensional
/// signal down to the single highest-variance direction before training
/// has taken a step.
pub fn orthogonal(rows: usize, cols: usize, gain: f64, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let transpose = rows < cols;
    let (n, m) = if transpose { (cols, rows) } else { (rows, cols) };
    // n ≥ m: draw n×m Gaussian, orthonormalize the m columns.
    let mut a = Array2::from_shape_fn((n, m), |_| {
        // Box–Muller from two uniforms.
        let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
        let u2: f64 = rng.gen_range(0.0..1.0);
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    });
    for j in 0..m {
        for p in 0..j {
            let dot: f64 = (0..n).map(|i| a[[i, j]] * a[[i, p]]).sum();
            for i in 0..n {
                a[[i, j]] -= dot * a[[i, p]];
            }
        }
        let norm: f64 = (0..n).map(|i| a[[i, j]] * a[[i, j]]).sum::<f64>().sqrt();
        assert!(norm > 1e-12, "orthogonal init: degenerate draw");
        for i in 0..n {
            a[[i, j]] /= norm;
        }
    }
    let q = if transpose { a.t().to_owned() } else { a };
    q * gain
}

/// x·W + b.
pub fn linear(t: &mut Tape, x: TId, w: TId, b: TId) -> TId {
    let h = t.matmul(x, w);
    t.add_bias_row(h, b)
}

/// GCN propagation: Â·x·W + b with Â the batch's renormalized adjacency.
pub fn gcn_layer(t: &mut Tape, batch: &GraphBatch, x: TId, w: TId, b: TId) -> TId {
    let prop = t.spmm(&batch.norm_adj, x);
    linear(t, prop, w, b)
}

/// GIN update with ε = 0: MLP₂((1+ε)·x + Σ_{j∈N(i)} x_j), the MLP being
/// Linear → ReLU → Linear.
pub fn gin_layer(
    t: &mut Tape,
    batch: &GraphBatch,
    x: TId,
    w1: TId,
    b1: TId,
    w2: TId,
    b2: TId,
) -> TId {
    let agg = t.spmm(&batch.adj, x);
    let comb = t.add(x, agg);
    let h = linear(t, comb, w1, b1);
    let h = t.relu(h);
    linear(t, h, w2, b2)
}

/// Single-head GATv2 over closed neighborhoods N(i) ∪ {i}:
/// e_ij = aᵀ·LeakyReLU(W_l x_i + W_r x_j), α = softmax_j(e_ij),
/// out_i = Σ_j α_ij W_r x_j + b (the value transform is the right block).
///
/// `src`/`dst` are the batch's attention edge arrays
/// ([`GraphBatch::attention_edges`]); `a` is (H×1), `bias` (1×H).
#[allow(clippy::too_many_arguments)]
pub fn gatv2_layer(
    t: &mut Tape,
    src: &Rc<Vec<usize>>,
    dst: &Rc<Vec<usize>>,
    num_nodes: usize,
    x: TId,
    w_l: TId,
    w_r: TId,
    a: TId,
    bias: TId,
    slope: f64,
) -> TId {
    gatv2_layer_with_attention(t, src, dst, num_nodes, x, w_l, w_r, a, bias, slope).0
}

/// Like [`gatv2_layer`] but also hands back the attention coefficients,
/// one per (src, dst) edge; per-destination groups sum to 1.
#[allow(clippy::too_many_arguments)]
pub fn gatv2_layer_with_attention(
    t: &mut Tape,
    src: &Rc<Vec<usize>>,
    dst: &Rc<Vec<usize>>,
    num_nodes: usize,
    x: TId,
    w_l: TId,
    w_r: TId,
    a: TId,
    bias: TId,
    slope: f64,
) -> (TId, TId) {
    let left = t.matmul(x, w_l);
    let right = t.matmul(x, w_r);
    let li = t.gather_rows(left, dst);
    let rj = t.gather_rows(right, src);
    let pre = t.add(li, rj);
    let act = t.leaky_relu(pre, slope);
    let scores = t.matmul(act, a);
    let alpha = t.segment_softmax(scores, dst);
    let weighted = t.mul_col_broadcast(rj, alpha);
    let agg = t.sum_segments(weighted, dst, num_nodes);
    (t.add_bias_row(agg, bias), alpha)
}

/// Self-attention pooling output.
pub struct SagPoolOut {
    /// Induced sub-batch over the kept nodes.
    pub batch: GraphBatch,
    /// Gated kept features (kept-node count × dim).
    pub gated: TId,
    /// Per-graph [mean ‖ max] of the gated features (num_graphs × 2·dim).
    pub readout: TId,
    /// Kept global node ids, ascending.
    pub kept: Vec<usize>,
}

/// SAGPool: scores s = tanh(gcn(x → 1 column)); each graph keeps its
/// ⌈r·n_g⌉ top-scoring nodes (ties → lower node index), features are gated
/// by the scores, and the readout concatenates per-graph mean and max.
///
/// The top-k routing itself is a non-differentiable selection; gradients
/// flow through the gate and the kept features.
pub fn sagpool(
    t: &mut Tape,
    batch: &GraphBatch,
    x: TId,
    w: TId,
    b: TId,
    r: f64,
) -> SagPoolOut {
    assert!(r > 0.0 && r <= 1.0, "sagpool: ratio must be in (0, 1], got {r}");
    let raw = gcn_layer(t, batch, x, w, b);
    let scores = t.tanh(raw);
    let s = t.value(scores);
    let mut per_graph: Vec<Vec<usize>> = vec![Vec::new(); batch.num_graphs];
    for node in 0..batch.num_nodes {
        per_graph[batch.segments[node]].push(node);
    }
    let mut kept = Vec::new();
    for nodes in &per_graph {
        let k = ((r * nodes.len() as f64).ceil() as usize).min(nodes.len());
        let mut order = nodes.clone();
        order.sort_by(|&p, &q| s[(q, 0)].partial_cmp(&s[(p, 0)]).unwrap().then(p.cmp(&q)));
        kept.extend(order.into_iter().take(k));
    }
    kept.sort_unstable();
    let kept_rc = Rc::new(kept.clone());
    let xk = t.gather_rows(x, &kept_rc);
    let sk = t.gather_rows(scores, &kept_rc);
    let gated = t.mul_col_broadcast(xk, sk);
    let sub = batch.induced(&kept);
    let mean = t.mean_segments(gated, &sub.segments, sub.num_graphs);
    let max = t.max_segments(gated, &sub.segments, sub.num_graphs);
    let readout = t.concat_cols(&[mean, max]);
    SagPoolOut { batch: sub, gated, readout, kept }
}

/// Per-graph feature sum followed by one linear map.
pub fn readout_sum_linear(
    t: &mut Tape,
    x: TId,
    segments: &Rc<Vec<usize>>,
    num_graphs: usize,
    w: TId,
    b: TId,
) -> TId {
    let summed = t.sum_segments(x, segments, num_graphs);
    linear(t, summed, w, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::check::{max_rel_err, numeric_grad};
    use crate::generate::gen_er;
    use crate::graph::Graph;
    use ndarray::array;
    use rand::SeedableRng;

    fn rand_mat(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
        Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-1.0..1.0))
    }

    fn batch_of(edges: &[(usize, usize)], n: usize) -> GraphBatch {
        let g = Graph::from_edge_list(n, edges).unwrap();
        GraphBatch::from_graphs(&[&g])
    }

    /// Dense Â for a single graph.
    fn dense_norm_adj(g: &Graph) -> Array2<f64> {
        let n = g.num_nodes();
        let mut a = Array2::zeros((n, n));
        for (u, v) in g.to_edge_list() {
            a[(u, v)] = 1.0;
            a[(v, u)] = 1.0;
        }
        for i in 0..n {
            a[(i, i)] = 1.0;
        }
        let deg: Vec<f64> = (0..n).map(|i| a.row(i).sum()).collect();
        for i in 0..n {
            for j in 0..n {
                if a[(i, j)] != 0.0 {
                    a[(i, j)] /= (deg[i] * deg[j]).sqrt();
                }
            }
        }
        a
    }

    #[test]
    fn gcn_isolated_node_is_plain_linear() {
        let b = batch_of(&[], 1);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let xv = rand_mat(1, 3, &mut rng);
        let wv = rand_mat(3, 4, &mut rng);
        let bv = rand_mat(1, 4, &mut rng);
        let mut t = Tape::new(0);
        let x = t.leaf(xv.clone(), false);
        let w = t.leaf(wv.clone(), false);
        let bias = t.leaf(bv.clone(), false);
        let y = gcn_layer(&mut t, &b, x, w, bias);
        let expect = xv.dot(&wv) + &bv.row(0);
        assert!(max_rel_err(t.value(y), &expect) < 1e-12);
    }

    #[test]
    fn gcn_symmetric_nodes_get_equal_outputs() {
        // C4 is vertex-transitive; equal inputs give equal outputs.
        let b = batch_of(&[(0, 1), (1, 2), (2, 3), (0, 3)], 4);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let wv = rand_mat(2, 3, &mut rng);
        let bv = rand_mat(1, 3, &mut rng);
        let mut t = Tape::new(0);
        let x = t.leaf(Array2::from_elem((4, 2), 0.7), false);
        let w = t.leaf(wv, false);
        let bias = t.leaf(bv, false);
        let y = gcn_layer(&mut t, &b, x, w, bias);
        let v = t.value(y);
        for node in 1..4 {
            for c in 0..3 {
                assert!((v[(node, c)] - v[(0, c)]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn gcn_matches_dense_oracle() {
        let g = gen_er(9, 0.35, 11).unwrap();
        let b = GraphBatch::from_graphs(&[&g]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let xv = rand_mat(9, 4, &mut rng);
        let wv = rand_mat(4, 5, &mut rng);
        let bv = rand_mat(1, 5, &mut rng);
        let mut t = Tape::new(0);
        let x = t.leaf(xv.clone(), false);
        let w = t.leaf(wv.clone(), false);
        let bias = t.leaf(bv.clone(), false);
        let y = gcn_layer(&mut t, &b, x, w, bias);
        let expect = dense_norm_adj(&g).dot(&xv).dot(&wv) + &bv.row(0);
        assert!(max_rel_err(t.value(y), &expect) < 1e-12);
    }

    #[test]
    fn gin_no_edges_is_pure_mlp() {
        let b = batch_of(&[], 3);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let xv = rand_mat(3, 2, &mut rng);
        let w1v = rand_mat(2, 4, &mut rng);
        let b1v = rand_mat(1, 4, &mut rng);
        let w2v = rand_mat(4, 4, &mut rng);
        let b2v = rand_mat(1, 4, &mut rng);
        let mut t = Tape::new(0);
        let x = t.leaf(xv.clone(), false);
        let w1 = t.leaf(w1v.clone(), false);
        let b1 = t.leaf(b1v.clone(), false);
        let w2 = t.leaf(w2v.clone(), false);
        let b2 = t.leaf(b2v.clone(), false);
        let y = gin_layer(&mut t, &b, x, w1, b1, w2, b2);
        let expect = (xv.dot(&w1v) + &b1v.row(0)).mapv(|v| v.max(0.0)).dot(&w2v) + &b2v.row(0);
        assert!(max_rel_err(t.value(y), &expect) < 1e-12);
    }

    #[test]
    fn gin_triangle_with_equal_features_sees_3x() {
        let b = batch_of(&[(0, 1), (1, 2), (0, 2)], 3);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let xrow = rand_mat(1, 2, &mut rng);
        let xv = stack3(&xrow);
        let w1v = rand_mat(2, 3, &mut rng);
        let b1v = rand_mat(1, 3, &mut rng);
        let w2v = rand_mat(3, 3, &mut rng);
        let b2v = rand_mat(1, 3, &mut rng);
        let mut t = Tape::new(0);
        let x = t.leaf(xv, false);
        let w1 = t.leaf(w1v.clone(), false);
        let b1 = t.leaf(b1v.clone(), false);
        let w2 = t.leaf(w2v.clone(), false);
        let b2 = t.leaf(b2v.clone(), false);
        let y = gin_layer(&mut t, &b, x, w1, b1, w2, b2);
        // (1+0)x + 2x = 3x through the MLP.
        let expect =
            ((&xrow * 3.0).dot(&w1v) + &b1v.row(0)).mapv(|v| v.max(0.0)).dot(&w2v) + &b2v.row(0);
        for node in 0..3 {
            for c in 0..3 {
                assert!((t.value(y)[(node, c)] - expect[(0, c)]).abs() < 1e-12);
            }
        }
    }

    fn stack3(row: &Array2<f64>) -> Array2<f64> {
        crate::batch::stack_rows(&[row, row, row])
    }

    #[test]
    fn gin_is_permutation_equivariant() {
        use rand::seq::SliceRandom;
        let g = gen_er(12, 0.3, 6).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut perm: Vec<usize> = (0..12).collect();
        perm.shuffle(&mut rng);
        let edges: Vec<(usize, usize)> =
            g.to_edge_list().iter().map(|&(u, v)| (perm[u], perm[v])).collect();
        let h = Graph::from_edge_list(12, &edges).unwrap();
        let xv = rand_mat(12, 3, &mut rng);
        let mut xp = Array2::zeros((12, 3));
        for v in 0..12 {
            xp.row_mut(perm[v]).assign(&xv.row(v));
        }
        let w1v = rand_mat(3, 4, &mut rng);
        let b1v = rand_mat(1, 4, &mut rng);
        let w2v = rand_mat(4, 4, &mut rng);
        let b2v = rand_mat(1, 4, &mut rng);
        let run = |g: &Graph, x: &Array2<f64>| {
            let b = GraphBatch::from_graphs(&[g]);
            let mut t = Tape::new(0);
            let x = t.leaf(x.clone(), false);
            let w1 = t.leaf(w1v.clone(), false);
            let b1 = t.leaf(b1v.clone(), false);
            let w2 = t.leaf(w2v.clone(), false);
            let b2 = t.leaf(b2v.clone(), false);
            let y = gin_layer(&mut t, &b, x, w1, b1, w2, b2);
            t.value(y).clone()
        };
        let ya = run(&g, &xv);
        let yb = run(&h, &xp);
        for v in 0..12 {
            for c in 0..4 {
                assert!((ya[(v, c)] - yb[(perm[v], c)]).abs() < 1e-12);
            }
        }
    }

    /// Dense per-pair GATv2 oracle.
    fn gatv2_oracle(
        g: &Graph,
        x: &Array2<f64>,
        w_l: &Array2<f64>,
        w_r: &Array2<f64>,
        a: &Array2<f64>,
        bias: &Array2<f64>,
        slope: f64,
    ) -> Array2<f64> {
        let n = g.num_nodes();
        let h = w_l.ncols();
        let left = x.dot(w_l);
        let right = x.dot(w_r);
        let mut out = Array2::zeros((n, h));
        for i in 0..n {
            let mut nbhd: Vec<usize> = g.neighbors(i).to_vec();
            nbhd.push(i);
            let scores: Vec<f64> = nbhd
                .iter()
                .map(|&j| {
                    let pre = &left.row(i) + &right.row(j);
                    let act = pre.mapv(|v| if v > 0.0 { v } else { slope * v });
                    act.dot(&a.column(0))
                })
                .collect();
            let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = scores.iter().map(|&s| (s - max).exp()).collect();
            let denom: f64 = exps.iter().sum();
            for (idx, &j) in nbhd.iter().enumerate() {
                let alpha = exps[idx] / denom;
                let mut row = out.row_mut(i);
                row += &(&right.row(j) * alpha);
            }
            let mut row = out.row_mut(i);
            row += &bias.row(0);
        }
        out
    }

    #[test]
    fn gatv2_matches_dense_oracle() {
        let g = gen_er(5, 0.5, 21).unwrap();
        let b = GraphBatch::from_graphs(&[&g]);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let xv = rand_mat(5, 3, &mut rng);
        let wlv = rand_mat(3, 4, &mut rng);
        let wrv = rand_mat(3, 4, &mut rng);
        let av = rand_mat(4, 1, &mut rng);
        let bv = rand_mat(1, 4, &mut rng);
        let (src, dst) = b.attention_edges();
        let mut t = Tape::new(0);
        let x = t.leaf(xv.clone(), false);
        let w_l = t.leaf(wlv.clone(), false);
        let w_r = t.leaf(wrv.clone(), false);
        let a = t.leaf(av.clone(), false);
        let bias = t.leaf(bv.clone(), false);
        let y = gatv2_layer(&mut t, &src, &dst, 5, x, w_l, w_r, a, bias, 0.2);
        let expect = gatv2_oracle(&g, &xv, &wlv, &wrv, &av, &bv, 0.2);
        assert!(max_rel_err(t.value(y), &expect) < 1e-12);
    }

    #[test]
    fn gatv2_identical_features_average_uniformly() {
        // With identical inputs, every score ties, attention is uniform,
        // and out_i = W_r·x + b for every node regardless of degree.
        let g = Graph::from_edge_list(4, &[(0, 1), (0, 2), (0, 3)]).unwrap();
        let b = GraphBatch::from_graphs(&[&g]);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let row = rand_mat(1, 3, &mut rng);
        let xv = crate::batch::stack_rows(&[&row, &row, &row, &row]);
        let wlv = rand_mat(3, 2, &mut rng);
        let wrv = rand_mat(3, 2, &mut rng);
        let av = rand_mat(2, 1, &mut rng);
        let bv = rand_mat(1, 2, &mut rng);
        let (src, dst) = b.attention_edges();
        let mut t = Tape::new(0);
        let x = t.leaf(xv, false);
        let w_l = t.leaf(wlv.clone(), false);
        let w_r = t.leaf(wrv.clone(), false);
        let a = t.leaf(av, false);
        let bias = t.leaf(bv.clone(), false);
        let y = gatv2_layer(&mut t, &src, &dst, 4, x, w_l, w_r, a, bias, 0.2);
        let expect = row.dot(&wrv) + &bv.row(0);
        for node in 0..4 {
            for c in 0..2 {
                assert!((t.value(y)[(node, c)] - expect[(0, c)]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn gatv2_isolated_node_attends_to_itself() {
        let g = Graph::from_edge_list(3, &[(0, 1)]).unwrap();
        let b = GraphBatch::from_graphs(&[&g]);
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let xv = rand_mat(3, 2, &mut rng);
        let wlv = rand_mat(2, 2, &mut rng);
        let wrv = rand_mat(2, 2, &mut rng);
        let av = rand_mat(2, 1, &mut rng);
        let bv = rand_mat(1, 2, &mut rng);
        let (src, dst) = b.attention_edges();
        let mut t = Tape::new(0);
        let x = t.leaf(xv.clone(), false);
        let w_l = t.leaf(wlv.clone(), false);
        let w_r = t.leaf(wrv.clone(), false);
        let a = t.leaf(av, false);
        let bias = t.leaf(bv.clone(), false);
        let y = gatv2_layer(&mut t, &src, &dst, 3, x, w_l, w_r, a, bias, 0.2);
        let expect = xv.row(2).dot(&wrv) + &bv.row(0);
        for c in 0..2 {
            assert!((t.value(y)[(2, c)] - expect[c]).abs() < 1e-12);
        }
    }

    #[test]
    fn sagpool_keeps_ceil_ratio_per_graph() {
        let g4 = gen_er(4, 0.6, 1).unwrap();
        let g5 = gen_er(5, 0.6, 2).unwrap();
        let b = GraphBatch::from_graphs(&[&g4, &g5]);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut t = Tape::new(0);
        let x = t.leaf(rand_mat(9, 3, &mut rng), false);
        let w = t.leaf(rand_mat(3, 1, &mut rng), false);
        let bias = t.leaf(rand_mat(1, 1, &mut rng), false);
        let out = sagpool(&mut t, &b, x, w, bias, 0.5);
        // ⌈0.5·4⌉ + ⌈0.5·5⌉ = 2 + 3.
        assert_eq!(out.kept.len(), 5);
        assert_eq!(out.batch.node_counts, vec![2, 3]);
        assert_eq!(t.value(out.readout).dim(), (2, 6));
    }

    #[test]
    fn sagpool_ratio_one_keeps_everything() {
        let g = gen_er(6, 0.4, 3).unwrap();
        let b = GraphBatch::from_graphs(&[&g]);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let xv = rand_mat(6, 2, &mut rng);
        let wv = rand_mat(2, 1, &mut rng);
        let bv = rand_mat(1, 1, &mut rng);
        let mut t = Tape::new(0);
        let x = t.leaf(xv.clone(), false);
        let w = t.leaf(wv.clone(), false);
        let bias = t.leaf(bv.clone(), false);
        let out = sagpool(&mut t, &b, x, w, bias, 1.0);
        assert_eq!(out.kept, (0..6).collect::<Vec<_>>());
        // Readout equals [mean ‖ max] of the gated features directly.
        let gated = t.value(out.gated).clone();
        let readout = t.value(out.readout).clone();
        for c in 0..2 {
            let col = gated.column(c);
            let mean: f64 = col.iter().sum::<f64>() / 6.0;
            let max: f64 = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            assert!((readout[(0, c)] - mean).abs() < 1e-12);
            assert!((readout[(0, 2 + c)] - max).abs() < 1e-12);
        }
    }

    #[test]
    fn sagpool_selects_top_scores() {
        // One graph, features engineered so scores are strictly ordered by
        // node index via a path structure; check top-2 of 4 kept.
        let g = Graph::from_edge_list(4, &[(0, 1), (1, 2), (2, 3)]).unwrap();
        let b = GraphBatch::from_graphs(&[&g]);
        let mut t = Tape::new(0);
        // With w = [1], b = 0: scores = tanh(Â·x); feed increasing x.
        let x = t.leaf(array![[0.0], [1.0], [2.0], [10.0]], false);
        let w = t.leaf(array![[1.0]], false);
        let bias = t.leaf(array![[0.0]], false);
        let out = sagpool(&mut t, &b, x, w, bias, 0.5);
        // Â·x is increasing along the path, so nodes 2 and 3 win.
        assert_eq!(out.kept, vec![2, 3]);
    }

    #[test]
    fn readout_sum_linear_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let wv = rand_mat(3, 2, &mut rng);
        let bv = rand_mat(1, 2, &mut rng);
        // Single graph with rows r1, r2 → Linear(r1 + r2).
        let seg = Rc::new(vec![0usize, 0]);
        let xv = rand_mat(2, 3, &mut rng);
        let mut t = Tape::new(0);
        let x = t.leaf(xv.clone(), false);
        let w = t.leaf(wv.clone(), false);
        let bias = t.leaf(bv.clone(), false);
        let y = readout_sum_linear(&mut t, x, &seg, 1, w, bias);
        let summed = &xv.row(0) + &xv.row(1);
        let expect = summed.dot(&wv) + &bv.row(0);
        for c in 0..2 {
            assert!((t.value(y)[(0, c)] - expect[c]).abs() < 1e-12);
        }
        // Zero features → bias.
        let mut t = Tape::new(0);
        let x = t.leaf(Array2::zeros((2, 3)), false);
        let w = t.leaf(wv.clone(), false);
        let bias = t.leaf(bv.clone(), false);
        let y = readout_sum_linear(&mut t, x, &seg, 1, w, bias);
        assert!(max_rel_err(t.value(y), &bv) < 1e-12);
        // Two-graph batch matches per-graph computation.
        let seg2 = Rc::new(vec![0usize, 0, 1]);
        let xv2 = rand_mat(3, 3, &mut rng);
        let mut t = Tape::new(0);
        let x = t.leaf(xv2.clone(), false);
        let w = t.leaf(wv.clone(), false);
        let bias = t.leaf(bv.clone(), false);
        let y = readout_sum_linear(&mut t, x, &seg2, 2, w, bias);
        let row0 = (&xv2.row(0) + &xv2.row(1)).dot(&wv) + &bv.row(0);
        let row1 = xv2.row(2).dot(&wv) + &bv.row(0);
        for c in 0..2 {
            assert!((t.value(y)[(0, c)] - row0[c]).abs() < 1e-12);
            assert!((t.value(y)[(1, c)] - row1[c]).abs() < 1e-12);
        }
    }

    #[test]
    fn layer_stack_gradients_match_finite_differences() {
        // gcn → relu → sagpool → sum of readout, differentiated through
        // gather/gate/segment reductions.
        let g = gen_er(7, 0.4, 31).unwrap();
        let b = GraphBatch::from_graphs(&[&g]);
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let xv = rand_mat(7, 3, &mut rng);
        let params = vec![
            rand_mat(3, 4, &mut rng), // gcn w
            rand_mat(1, 4, &mut rng), // gcn b
            rand_mat(4, 1, &mut rng), // pool w
            rand_mat(1, 1, &mut rng), // pool b
        ];
        let f = |p: &[Array2<f64>]| -> f64 {
            let mut t = Tape::new(0);
            let x = t.leaf(xv.clone(), false);
            let w = t.leaf(p[0].clone(), true);
            let bias = t.leaf(p[1].clone(), true);
            let pw = t.leaf(p[2].clone(), true);
            let pb = t.leaf(p[3].clone(), true);
            let h = gcn_layer(&mut t, &b, x, w, bias);
            let h = t.relu(h);
            let out = sagpool(&mut t, &b, h, pw, pb, 0.5);
            let loss = t.sum_all(out.readout);
            t.scalar(loss)
        };
        let numeric = numeric_grad(&f, &params, 1e-6);
        let mut t = Tape::new(0);
        let x = t.leaf(xv.clone(), false);
        let w = t.leaf(params[0].clone(), true);
        let bias = t.leaf(params[1].clone(), true);
        let pw = t.leaf(params[2].clone(), true);
        let pb = t.leaf(params[3].clone(), true);
        let h = gcn_layer(&mut t, &b, x, w, bias);
        let h = t.relu(h);
        let out = sagpool(&mut t, &b, h, pw, pb, 0.5);
        let loss = t.sum_all(out.readout);
        t.backward(loss).unwrap();
        for (i, id) in [w, bias, pw, pb].iter().enumerate() {
            let err = max_rel_err(t.grad(*id).unwrap(), &numeric[i]);
            assert!(err < 1e-5, "param {i}: rel err {err}");
        }
    }
}
