//! Training, evaluation, and replication for graph classification.
//!
//! One run = fresh Glorot init → Adam over shuffled mini-batches of the
//! train split → per-epoch validation accuracy → model selection (best
//! validation epoch by default, later epoch winning ties) → accuracy on the
//! held-out test split, plus optionally on a second larger-graph dataset.
//! Everything is seeded: replication r of a config uses
//! `mix_seed(&[config.seed, r])` for init, shuffling, and dropout, so any
//! run can be reproduced bit-for-bit.

use std::rc::Rc;
use std::time::Instant;

use ndarray::{Array2, ArrayView1};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::autodiff::{AdamState, Tape};
use crate::batch::{stack_rows, GraphBatch};
use crate::features::{augment, feature_seed, FeatureContext, FeatureError, FeatureKind};
use crate::generate::{mix_seed, LabeledDataset, Split};
use crate::graph::Graph;
use crate::model::{Model, ModelConfig};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("feature augmentation: {0}")]
    Feature(#[from] FeatureError),
    #[error("dataset has no training graphs")]
    EmptyTrainSplit,
}

/// How the reported model is chosen from the epochs of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectionRule {
    /// Highest validation accuracy; ties go to the later epoch.
    BestVal,
    LastEpoch,
}

/// Hyper-parameters for one training configuration.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TrainConfig {
    pub model: ModelConfig,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub replications: usize,
    pub selection: SelectionRule,
}

impl TrainConfig {
    pub fn new(model: ModelConfig) -> Self {
        TrainConfig {
            model,
            epochs: 100,
            batch_size: 100,
            lr: 0.01,
            weight_decay: 1e-3,
            replications: 5,
            selection: SelectionRule::BestVal,
        }
    }
}

/// Metrics from one replication.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct RunResult {
    pub run_seed: u64,
    /// Epoch whose weights were kept (1-based; 0 = untrained).
    pub epoch_best: usize,
    /// Mean train NLL per epoch.
    pub train_losses: Vec<f64>,
    /// Validation accuracy per epoch (NaN when the val split is empty).
    pub val_accs: Vec<f64>,
    /// Accuracy on the test split of the training dataset.
    pub test_acc_small: f64,
    /// Accuracy on the optional second dataset (all of its graphs).
    pub acc_medium: Option<f64>,
    pub wall_s: f64,
    /// True when a non-finite loss aborted the run; metrics are then NaN
    /// and the run is excluded from cross-replication averages.
    pub failed: bool,
}

/// All replications of a configuration plus their averages.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub runs: Vec<RunResult>,
    /// Mean over non-failed runs; `None` if every run failed.
    pub mean_test_acc_small: Option<f64>,
    pub mean_acc_medium: Option<f64>,
}

/// Builds every graph's feature matrix up front. Noise features draw from
/// `feature_seed(master_seed, index)`; normalized degree divides by the
/// dataset's own recorded maximum.
pub fn precompute_features(
    ds: &LabeledDataset,
    kind: FeatureKind,
) -> Result<Vec<Array2<f64>>, FeatureError> {
    let ctx = FeatureContext {
        max_degree_over_dataset: Some(ds.meta.max_degree_over_dataset),
    };
    ds.entries
        .iter()
        .enumerate()
        .map(|(i, e)| {
            augment(&e.graph, kind, &ctx, feature_seed(ds.meta.master_seed, i)).map(|f| f.values)
        })
        .collect()
}

/// Per-column standardization plus decorrelation, fitted on the training
/// split's nodes.
///
/// Readouts sum node features over whole graphs, so raw per-column scales —
/// a closed-walk count can reach 10⁵ where a normalized degree stays ≤ 1 —
/// would make one learning rate serve gradient magnitudes that differ by
/// orders of magnitude. Count-like columns (every fitted value ≥ 0) are
/// heavy-tailed on top of that: a hub's walk count sits hundreds of standard
/// deviations above a lattice node's, and after plain standardization those
/// outlier rows dominate every sum-readout. Such columns go through
/// `ln(1 + x)` first; then each column is mapped to mean 0 / variance 1 as
/// measured over all nodes of the training graphs.
///
/// Multi-column inputs are then ZCA-whitened: walk counts of different
/// lengths are strongly correlated (length 1 and 2 are the same column on a
/// simple graph), so without decorrelation the shared "density" direction
/// carries several times the gradient weight of the structural directions
/// that actually distinguish classes of equal average degree. Directions
/// with negligible variance — exact duplicates — are projected out rather
/// than amplified. (Near-)constant columns pass through unchanged, so a
/// constant feature keeps its value. The same map is applied to every split
/// and to any transfer dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureScaler {
    log1p: Vec<bool>,
    center: Vec<f64>,
    scale: Vec<f64>,
    /// Applied after the per-column map as `row · zca`; identity when absent.
    zca: Option<Array2<f64>>,
}

impl FeatureScaler {
    /// Fits on the nodes of `feats[i]` for each `i` in `idxs`;
    /// no rows at all yields the identity map.
    pub fn fit(feats: &[Array2<f64>], idxs: &[usize]) -> Self {
        let dim = feats.first().map_or(0, |f| f.ncols());
        let mut scaler = FeatureScaler {
            log1p: vec![false; dim],
            center: vec![0.0; dim],
            scale: vec![1.0; dim],
            zca: None,
        };
        let mut count = 0usize;
        let mut min = vec![f64::INFINITY; dim];
        let mut max = vec![f64::NEG_INFINITY; dim];
        for &i in idxs {
            count += feats[i].nrows();
            for row in feats[i].rows() {
                for j in 0..dim {
                    min[j] = min[j].min(row[j]);
                    max[j] = max[j].max(row[j]);
                }
            }
        }
        if count == 0 {
            return scaler;
        }
        for j in 0..dim {
            // Constant columns are exempt so that they pass through unchanged.
            scaler.log1p[j] = min[j] >= 0.0 && max[j] - min[j] > 1e-12;
        }
        let mut sum = vec![0.0; dim];
        let mut sumsq = vec![0.0; dim];
        for &i in idxs {
            for row in feats[i].rows() {
                for j in 0..dim {
                    let v = scaler.compress(j, row[j]);
                    sum[j] += v;
                    sumsq[j] += v * v;
                }
            }
        }
        let mut live = Vec::new();
        for j in 0..dim {
            let mean = sum[j] / count as f64;
            let var = (sumsq[j] / count as f64 - mean * mean).max(0.0);
            let sd = var.sqrt();
            if sd > 1e-12 {
                scaler.center[j] = mean;
                scaler.scale[j] = sd;
                live.push(j);
            }
        }
        if live.len() >= 2 {
            // Correlation of the standardized live columns.
            let m = live.len();
            let mut corr = Array2::zeros((m, m));
            for &i in idxs {
                for row in feats[i].rows() {
                    let z: Vec<f64> = live
                        .iter()
                        .map(|&j| (scaler.compress(j, row[j]) - scaler.center[j]) / scaler.scale[j])
                        .collect();
                    for a in 0..m {
                        for b in 0..m {
                            corr[[a, b]] += z[a] * z[b];
                        }
                    }
                }
            }
            corr /= count as f64;
            let (eigvals, eigvecs) = jacobi_eigh(&corr);
            let lmax = eigvals.iter().cloned().fold(0.0_f64, f64::max);
            // ZCA = V · diag(λ^-1/2) · Vᵀ; duplicate-column directions
            // (λ ≈ 0) are projected out instead of blown up.
            let mut small = Array2::zeros((m, m));
            for a in 0..m {
                for b in 0..m {
                    let mut v = 0.0;
                    for e in 0..m {
                        let w = if eigvals[e] > 1e-9 * lmax { eigvals[e].sqrt().recip() } else { 0.0 };
                        v += eigvecs[[a, e]] * w * eigvecs[[b, e]];
                    }
                    small[[a, b]] = v;
                }
            }
            // Constant columns keep their identity row and column.
            let mut zca = Array2::eye(dim);
            for (a, &ja) in live.iter().enumerate() {
                for (b, &jb) in live.iter().enumerate() {
                    zca[[ja, jb]] = small[[a, b]];
                }
            }
            scaler.zca = if std::env::var("NO_ZCA").is_ok() { None } else { Some(zca) };
        }
        scaler
    }

    /// The pre-standardization compression for column `j`. Clamping at 0
    /// keeps the map defined even if unseen data dips slightly negative in a
    /// column that was nonnegative throughout the fit.
    fn compress(&self, j: usize, v: f64) -> f64 {
        if self.log1p[j] {
            v.max(0.0).ln_1p()
        } else {
            v
        }
    }

    /// Returns a standardized copy of one feature matrix.
    pub fn transform(&self, f: &Array2<f64>) -> Array2<f64> {
        assert_eq!(f.ncols(), self.center.len(), "transform: width differs from fit");
        let mut out = f.clone();
        for mut row in out.rows_mut() {
            for j in 0..row.len() {
                row[j] = (self.compress(j, row[j]) - self.center[j]) / self.scale[j];
            }
        }
        match &self.zca {
            Some(zca) => out.dot(zca),
            None => out,
        }
    }

    pub fn transform_all(&self, feats: &[Array2<f64>]) -> Vec<Array2<f64>> {
        feats.iter().map(|f| self.transform(f)).collect()
    }
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns (eigenvalues, eigenvectors-as-columns). Sizes here are feature
/// dimensions (tiny), so the O(n³)-per-sweep cost is irrelevant.
fn jacobi_eigh(a: &Array2<f64>) -> (Vec<f64>, Array2<f64>) {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "jacobi_eigh: square matrix required");
    let mut m = a.clone();
    let mut v: Array2<f64> = Array2::eye(n);
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[[i, j]] * m[[i, j]])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if m[[p, q]].abs() < 1e-300 {
                    continue;
                }
                let theta = 0.5 * (m[[q, q]] - m[[p, p]]) / m[[p, q]];
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for i in 0..n {
                    let (mip, miq) = (m[[i, p]], m[[i, q]]);
                    m[[i, p]] = c * mip - s * miq;
                    m[[i, q]] = s * mip + c * miq;
                }
                for i in 0..n {
                    let (mpi, mqi) = (m[[p, i]], m[[q, i]]);
                    m[[p, i]] = c * mpi - s * mqi;
                    m[[q, i]] = s * mpi + c * mqi;
                }
                for i in 0..n {
                    let (vip, viq) = (v[[i, p]], v[[i, q]]);
                    v[[i, p]] = c * vip - s * viq;
                    v[[i, q]] = s * vip + c * viq;
                }
            }
        }
    }
    ((0..n).map(|i| m[[i, i]]).collect(), v)
}

fn batch_of(
    ds: &LabeledDataset,
    feats: &[Array2<f64>],
    idxs: &[usize],
) -> (GraphBatch, Array2<f64>, Rc<Vec<usize>>) {
    let graphs: Vec<&Graph> = idxs.iter().map(|&i| &ds.entries[i].graph).collect();
    let batch = GraphBatch::from_graphs(&graphs);
    let refs: Vec<&Array2<f64>> = idxs.iter().map(|&i| &feats[i]).collect();
    let x = stack_rows(&refs);
    let labels = Rc::new(idxs.iter().map(|&i| ds.entries[i].label.code()).collect());
    (batch, x, labels)
}

/// Ceiling on the global L2 norm of each batch gradient. Sum-readout inputs
/// grow with graph size, so an unlucky batch can produce a gradient spike
/// that poisons Adam's moment estimates for many steps; rescaling the whole
/// gradient keeps its direction while bounding the damage.
const GRAD_CLIP_NORM: f64 = 10.0;

/// Rescales `grads` in place so their joint L2 norm is at most `max_norm`.
fn clip_global_norm(grads: &mut [Array2<f64>], max_norm: f64) {
    let sq: f64 = grads.iter().map(|g| g.iter().map(|v| v * v).sum::<f64>()).sum();
    let norm = sq.sqrt();
    if norm > max_norm {
        let s = max_norm / norm;
        for g in grads.iter_mut() {
            g.mapv_inplace(|v| v * s);
        }
    }
}

/// Index of the row maximum; ties go to the lower index.
pub fn argmax_row(row: ArrayView1<f64>) -> usize {
    let mut best = 0usize;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Eval-mode accuracy of `model` over the given dataset indices.
pub fn evaluate(
    model: &mut Model,
    ds: &LabeledDataset,
    feats: &[Array2<f64>],
    idxs: &[usize],
    batch_size: usize,
) -> f64 {
    if idxs.is_empty() {
        return f64::NAN;
    }
    let mut correct = 0usize;
    for chunk in idxs.chunks(batch_size.max(1)) {
        let (batch, x, labels) = batch_of(ds, feats, chunk);
        let mut t = Tape::new(0);
        let fw = model
            .forward(&mut t, &batch, &x, false)
            .expect("precomputed features match the model width");
        let logp = t.value(fw.logp);
        for (row, &want) in logp.rows().into_iter().zip(labels.iter()) {
            if argmax_row(row) == want {
                correct += 1;
            }
        }
    }
    correct as f64 / idxs.len() as f64
}

/// Trains one replication and returns its metrics with the selected model.
///
/// Inputs are standardized internally with a [`FeatureScaler`] fitted on the
/// training split, so the returned model expects features transformed the
/// same way (refit the scaler on the train split to reproduce the map).
pub fn train_single(
    cfg: &TrainConfig,
    run_seed: u64,
    small: &LabeledDataset,
    feats_small: &[Array2<f64>],
    medium: Option<(&LabeledDataset, &[Array2<f64>])>,
) -> Result<(RunResult, Model), TrainError> {
    let start = Instant::now();
    let train_idx = small.split_indices(Split::Train);
    let val_idx = small.split_indices(Split::Val);
    let test_idx = small.split_indices(Split::Test);
    if train_idx.is_empty() && cfg.epochs > 0 {
        return Err(TrainError::EmptyTrainSplit);
    }
    // Inputs are standardized with statistics from the training split only.
    let scaler = FeatureScaler::fit(feats_small, &train_idx);
    let feats_small = scaler.transform_all(feats_small);
    let medium = medium.map(|(ds, f)| (ds, scaler.transform_all(f)));
    let mut model = Model::new(
        ModelConfig { seed: run_seed, ..cfg.model.clone() },
        cfg.model.feature_kind.dim(),
    );
    let mut adam = AdamState::new(&model.param_shapes(), cfg.lr, cfg.weight_decay);
    // Decay weight matrices only: biases and batch-norm affine parameters
    // would otherwise be sign-decayed to zero whenever their gradients are
    // small (see AdamState::decay_mask).
    adam.set_decay_mask(
        model.param_names().iter().map(|n| n.contains(".w") || n.ends_with(".a")).collect(),
    );
    let mut train_losses = Vec::with_capacity(cfg.epochs);
    let mut val_accs = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, usize, (Vec<Array2<f64>>, Vec<crate::autodiff::BnState>))> = None;
    let mut failed = false;
    let mut last_epoch = 0usize;
    'epochs: for epoch in 1..=cfg.epochs {
        let mut order = train_idx.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(&[run_seed, epoch as u64]));
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut seen = 0usize;
        for (bi, chunk) in order.chunks(cfg.batch_size.max(1)).enumerate() {
            let (batch, x, labels) = batch_of(small, &feats_small, chunk);
            let mut t = Tape::new(mix_seed(&[run_seed, epoch as u64, bi as u64]));
            let fw = model
                .forward(&mut t, &batch, &x, true)
                .expect("precomputed features match the model width");
            let loss = t.nll_mean(fw.logp, &labels);
            let loss_v = t.scalar(loss);
            if !loss_v.is_finite() {
                failed = true;
                break 'epochs;
            }
            epoch_loss += loss_v * chunk.len() as f64;
            seen += chunk.len();
            t.backward(loss).expect("nll is scalar");
            let mut grads: Vec<Array2<f64>> = fw
                .param_ids
                .iter()
                .map(|&id| t.grad(id).expect("every parameter is used").clone())
                .collect();
            clip_global_norm(&mut grads, GRAD_CLIP_NORM);
            let grad_refs: Vec<&Array2<f64>> = grads.iter().collect();
            let mut param_refs = model.params_mut();
            adam.step(&mut param_refs, &grad_refs);
        }
        last_epoch = epoch;
        train_losses.push(epoch_loss / seen.max(1) as f64);
        let vacc = evaluate(&mut model, small, &feats_small, &val_idx, cfg.batch_size);
        val_accs.push(vacc);
        if cfg.selection == SelectionRule::BestVal && !val_idx.is_empty() {
            let better = match &best {
                None => true,
                Some((best_acc, _, _)) => vacc >= *best_acc,
            };
            if better {
                best = Some((vacc, epoch, model.snapshot()));
            }
        }
    }
    let epoch_best;
    if failed {
        epoch_best = 0;
    } else if let Some((_, at, snapshot)) = &best {
        model.restore(snapshot);
        epoch_best = *at;
    } else {
        epoch_best = last_epoch;
    }
    let (test_acc_small, acc_medium) = if failed {
        (f64::NAN, None)
    } else {
        let small_acc = evaluate(&mut model, small, &feats_small, &test_idx, cfg.batch_size);
        let med = medium.map(|(ds, feats)| {
            let all: Vec<usize> = (0..ds.len()).collect();
            evaluate(&mut model, ds, &feats, &all, cfg.batch_size)
        });
        (small_acc, med)
    };
    let result = RunResult {
        run_seed,
        epoch_best,
        train_losses,
        val_accs,
        test_acc_small,
        acc_medium,
        wall_s: start.elapsed().as_secs_f64(),
        failed,
    };
    Ok((result, model))
}

/// Runs every replication of `cfg`; failed runs are kept in `runs` but
/// excluded from the means.
pub fn train(
    cfg: &TrainConfig,
    small: &LabeledDataset,
    medium: Option<&LabeledDataset>,
) -> Result<TrainOutcome, TrainError> {
    let feats_small = precompute_features(small, cfg.model.feature_kind)?;
    let feats_medium = match medium {
        Some(ds) => Some(precompute_features(ds, cfg.model.feature_kind)?),
        None => None,
    };
    let mut runs = Vec::with_capacity(cfg.replications);
    for rep in 0..cfg.replications {
        let run_seed = mix_seed(&[cfg.model.seed, rep as u64]);
        let med = match (&medium, &feats_medium) {
            (Some(ds), Some(f)) => Some((*ds, f.as_slice())),
            _ => None,
        };
        let (result, _) = train_single(cfg, run_seed, small, &feats_small, med)?;
        runs.push(result);
    }
    let ok: Vec<&RunResult> = runs.iter().filter(|r| !r.failed).collect();
    let mean = |xs: Vec<f64>| {
        if xs.is_empty() {
            None
        } else {
            Some(xs.iter().sum::<f64>() / xs.len() as f64)
        }
    };
    let mean_test_acc_small = mean(ok.iter().map(|r| r.test_acc_small).collect());
    let mean_acc_medium = mean(ok.iter().filter_map(|r| r.acc_medium).collect());
    Ok(TrainOutcome { runs, mean_test_acc_small, mean_acc_medium })
}
