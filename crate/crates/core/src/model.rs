//! The four end-to-end architectures and the shared classification head.
//!
//! Every model is: K message-passing blocks, a pooling/readout scheme that
//! produces one embedding row per graph, then a head of three hidden linear
//! layers (ReLU + dropout after each) and a final 8-way log-softmax.
//!
//! Initialization is Glorot-uniform with zero biases, except the final
//! output layer, which starts at exactly zero: readouts are unnormalized
//! sums over nodes, so a Glorot-scaled output layer would start with huge
//! logits, while a zero output layer makes the untrained model exactly the
//! uniform predictor (loss ln 8) without affecting training afterwards.

use std::collections::HashMap;
use std::rc::Rc;

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::autodiff::{BnState, Tape, TId};
use crate::batch::GraphBatch;
use crate::features::FeatureKind;
use crate::generate::mix_seed;
use crate::layers;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("feature dim {got} does not match model input width {expected}")]
    FeatureDimMismatch { got: usize, expected: usize },
    #[error("checkpoint io: {0}")]
    Io(#[from] std::io::Error),
    #[error("checkpoint parse: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("checkpoint format: {0}")]
    Format(String),
}

/// The four embedding architectures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arch {
    Gin,
    Gatv2,
    Hierarchical,
    Global,
}

impl Arch {
    pub const ALL: [Arch; 4] = [Arch::Gin, Arch::Gatv2, Arch::Hierarchical, Arch::Global];

    pub fn name(self) -> &'static str {
        match self {
            Arch::Gin => "gin",
            Arch::Gatv2 => "gatv2",
            Arch::Hierarchical => "hierarchical",
            Arch::Global => "global",
        }
    }
}

impl std::str::FromStr for Arch {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "gin" => Ok(Arch::Gin),
            "gatv2" => Ok(Arch::Gatv2),
            "hierarchical" => Ok(Arch::Hierarchical),
            "global" => Ok(Arch::Global),
            other => Err(format!("unknown architecture: {other}")),
        }
    }
}

/// Everything that determines a model's shape and initialization.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ModelConfig {
    pub arch: Arch,
    pub feature_kind: FeatureKind,
    /// Hidden width H.
    pub h: usize,
    /// Message-passing layer count K.
    pub k: usize,
    /// SAGPool keep ratio.
    pub r: f64,
    pub dropout_p: f64,
    /// Initialization seed.
    pub seed: u64,
}

impl ModelConfig {
    pub fn new(arch: Arch, feature_kind: FeatureKind, h: usize, k: usize, seed: u64) -> Self {
        ModelConfig { arch, feature_kind, h, k, r: 0.5, dropout_p: 0.5, seed }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
struct Param {
    name: String,
    #[serde(with = "array2_serde")]
    value: Array2<f64>,
}

/// A built model: named parameters plus batch-norm running state.
#[derive(Debug, Clone)]
pub struct Model {
    pub config: ModelConfig,
    pub in_dim: usize,
    params: Vec<Param>,
    index: HashMap<String, usize>,
    bns: Vec<BnState>,
}

pub const NUM_CLASSES: usize = 8;
const GATV2_SLOPE: f64 = 0.2;
const INIT_SALT: u64 = 0x696e_6974; // "init"

/// Initial value of the classification head's hidden biases (weights are
/// Glorot-uniform, all other biases zero). See the note at the head build.
const HEAD_BIAS_INIT: f64 = 0.01;

/// The output layer starts at a small multiple of Glorot so that the first
/// logits stay near zero (sum-readouts make upstream activations large, and
/// a full-scale output layer would turn them into enormous initial losses)
/// while every class direction still feeds a distinct gradient back into the
/// trunk from the first step.
const OUT_INIT_SCALE: f64 = 1e-2;

/// Readout taps off the message-passing layers start near zero, so the
/// embedding is initially dominated by the input tap — a nearly linear model
/// that learns quickly — and each deeper branch only grows into the sum as
/// its layer becomes useful. Same idea as zero-initializing residual
/// branches; a full-scale random trunk contribution would swamp the input
/// tap with noise several times its size.
const TRUNK_TAP_INIT_SCALE: f64 = 0.0;

/// One forward pass's handles.
#[derive(Debug)]
pub struct Forward {
    /// Per-graph log-probabilities, (num_graphs × 8).
    pub logp: TId,
    /// Tape handles of the parameters, aligned with the model's order.
    pub param_ids: Vec<TId>,
}

impl Model {
    /// Builds and initializes a model for inputs of width `in_dim`
    /// (normally `config.feature_kind.dim()`).
    pub fn new(config: ModelConfig, in_dim: usize) -> Model {
        assert!(config.h > 0 && config.k > 0 && in_dim > 0, "model: zero dimension");
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(&[config.seed, INIT_SALT]));
        let h = config.h;
        let k = config.k;
        let mut params: Vec<Param> = Vec::new();
        let mut bns = Vec::new();
        let weight = |params: &mut Vec<Param>, name: String, rows, cols, rng: &mut ChaCha8Rng| {
            params.push(Param { name, value: layers::orthogonal(rows, cols, 1.0, rng) });
        };
        let zeros = |params: &mut Vec<Param>, name: String, rows, cols| {
            params.push(Param { name, value: Array2::zeros((rows, cols)) });
        };
        let ones = |params: &mut Vec<Param>, name: String, cols| {
            params.push(Param { name, value: Array2::ones((1, cols)) });
        };
        match config.arch {
            Arch::Gin => {
                let hid = gin_mlp_hidden(h);
                for l in 1..=k {
                    let ind = if l == 1 { in_dim } else { h };
                    weight(&mut params, format!("gin{l}.w1"), ind, hid, &mut rng);
                    zeros(&mut params, format!("gin{l}.b1"), 1, hid);
                    weight(&mut params, format!("gin{l}.w2"), hid, h, &mut rng);
                    zeros(&mut params, format!("gin{l}.b2"), 1, h);
                    ones(&mut params, format!("gin{l}.gamma"), h);
                    zeros(&mut params, format!("gin{l}.beta"), 1, h);
                    bns.push(BnState::new(h));
                }
                for l in 0..=k {
                    let ind = if l == 0 { in_dim } else { h };
                    let scale = if l == 0 { 1.0 } else { TRUNK_TAP_INIT_SCALE };
                    params.push(Param {
                        name: format!("tap{l}.w"),
                        value: layers::orthogonal(ind, h, scale, &mut rng),
                    });
                    zeros(&mut params, format!("tap{l}.b"), 1, h);
                }
            }
            Arch::Gatv2 => {
                for l in 1..=k {
                    let ind = if l == 1 { in_dim } else { h };
                    weight(&mut params, format!("gat{l}.wl"), ind, h, &mut rng);
                    weight(&mut params, format!("gat{l}.wr"), ind, h, &mut rng);
                    weight(&mut params, format!("gat{l}.a"), h, 1, &mut rng);
                    zeros(&mut params, format!("gat{l}.b"), 1, h);
                    ones(&mut params, format!("gat{l}.gamma"), h);
                    zeros(&mut params, format!("gat{l}.beta"), 1, h);
                    bns.push(BnState::new(h));
                }
                for l in 0..=k {
                    let ind = if l == 0 { in_dim } else { h };
                    weight(&mut params, format!("tap{l}.w"), ind, h, &mut rng);
                    zeros(&mut params, format!("tap{l}.b"), 1, h);
                }
            }
            Arch::Hierarchical => {
                for l in 1..=k {
                    let ind = if l == 1 { in_dim } else { h };
                    weight(&mut params, format!("gcn{l}.w"), ind, h, &mut rng);
                    zeros(&mut params, format!("gcn{l}.b"), 1, h);
                    weight(&mut params, format!("pool{l}.w"), h, 1, &mut rng);
                    zeros(&mut params, format!("pool{l}.b"), 1, 1);
                }
            }
            Arch::Global => {
                for l in 1..=k {
                    let ind = if l == 1 { in_dim } else { h };
                    weight(&mut params, format!("gcn{l}.w"), ind, h, &mut rng);
                    zeros(&mut params, format!("gcn{l}.b"), 1, h);
                }
                weight(&mut params, "pool.w".into(), k * h, 1, &mut rng);
                zeros(&mut params, "pool.b".into(), 1, 1);
            }
        }
        let emb = embedding_width(config.arch, h, k);
        for (i, ind) in [(1, emb), (2, h), (3, h)] {
            weight(&mut params, format!("head{i}.w"), ind, h, &mut rng);
            // Small positive bias: the head is the one all-ReLU choke point
            // (the readout taps bypass everything else), and at narrow H a
            // zero-bias layer can start with every unit dead across the whole
            // input distribution, freezing the run at chance forever.
            params.push(Param {
                name: format!("head{i}.b"),
                value: Array2::from_elem((1, h), HEAD_BIAS_INIT),
            });
        }
        params.push(Param {
            name: "out.w".into(),
            value: layers::orthogonal(h, NUM_CLASSES, OUT_INIT_SCALE, &mut rng),
        });
        zeros(&mut params, "out.b".into(), 1, NUM_CLASSES);
        let index = params
            .iter()
            .enumerate()
            .map(|(i, p)| (p.name.clone(), i))
            .collect();
        Model { config, in_dim, params, index, bns }
    }

    pub fn num_params(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    pub fn param_shapes(&self) -> Vec<(usize, usize)> {
        self.params.iter().map(|p| p.value.dim()).collect()
    }

    pub fn param_names(&self) -> Vec<&str> {
        self.params.iter().map(|p| p.name.as_str()).collect()
    }

    /// Mutable views in stable order, for the optimizer.
    pub fn params_mut(&mut self) -> Vec<&mut Array2<f64>> {
        self.params.iter_mut().map(|p| &mut p.value).collect()
    }

    /// Copies of all parameter values plus batch-norm state.
    pub fn snapshot(&self) -> (Vec<Array2<f64>>, Vec<BnState>) {
        (self.params.iter().map(|p| p.value.clone()).collect(), self.bns.clone())
    }

    pub fn restore(&mut self, snapshot: &(Vec<Array2<f64>>, Vec<BnState>)) {
        assert_eq!(snapshot.0.len(), self.params.len(), "restore: param count differs");
        for (p, v) in self.params.iter_mut().zip(&snapshot.0) {
            assert_eq!(p.value.dim(), v.dim(), "restore: shape differs for {}", p.name);
            p.value = v.clone();
        }
        assert_eq!(snapshot.1.len(), self.bns.len(), "restore: bn count differs");
        self.bns = snapshot.1.clone();
    }

    /// Overwrites all parameters in order (shapes must match).
    pub fn set_params(&mut self, values: &[Array2<f64>]) {
        assert_eq!(values.len(), self.params.len(), "set_params: count differs");
        for (p, v) in self.params.iter_mut().zip(values) {
            assert_eq!(p.value.dim(), v.dim(), "set_params: shape differs for {}", p.name);
            p.value = v.clone();
        }
    }

    /// Runs the architecture on one batch. `features` rows must cover the
    /// batch's nodes; `train` toggles batch-norm statistics and dropout.
    pub fn forward(
        &mut self,
        t: &mut Tape,
        batch: &GraphBatch,
        features: &Array2<f64>,
        train: bool,
    ) -> Result<Forward, ModelError> {
        if features.ncols() != self.in_dim {
            return Err(ModelError::FeatureDimMismatch {
                got: features.ncols(),
                expected: self.in_dim,
            });
        }
        assert_eq!(
            features.nrows(),
            batch.num_nodes,
            "forward: feature rows must match batch nodes"
        );
        let param_ids: Vec<TId> =
            self.params.iter().map(|p| t.leaf(p.value.clone(), true)).collect();
        let index = &self.index;
        let bns = &mut self.bns;
        let id = |name: &str| -> TId {
            param_ids[*index.get(name).unwrap_or_else(|| panic!("no param named {name}"))]
        };
        let (arch, k, r, p_drop) =
            (self.config.arch, self.config.k, self.config.r, self.config.dropout_p);
        let x0 = t.leaf(features.clone(), false);
        let segments = Rc::clone(&batch.segments);
        let num_graphs = batch.num_graphs;
        let tap = |t: &mut Tape, x: TId, l: usize| {
            // The dropout rate applies per node on the branch entering each
            // sum-readout: the noise averages out over a graph's nodes, which
            // regularizes without starving the narrow head the way masking
            // half of an H-wide embedding would.
            let xd = t.dropout(x, p_drop, train);
            layers::readout_sum_linear(
                t,
                xd,
                &segments,
                num_graphs,
                id(&format!("tap{l}.w")),
                id(&format!("tap{l}.b")),
            )
        };
        let embedding = match arch {
            Arch::Gin => {
                let mut x = x0;
                let mut acc = tap(t, x, 0);
                for l in 1..=k {
                    x = layers::gin_layer(
                        t,
                        batch,
                        x,
                        id(&format!("gin{l}.w1")),
                        id(&format!("gin{l}.b1")),
                        id(&format!("gin{l}.w2")),
                        id(&format!("gin{l}.b2")),
                    );
                    x = t.batch_norm(
                        x,
                        id(&format!("gin{l}.gamma")),
                        id(&format!("gin{l}.beta")),
                        &mut bns[l - 1],
                        train,
                    );
                    x = t.relu(x);
                    let tl = tap(t, x, l);
                    acc = t.add(acc, tl);
                }
                acc
            }
            Arch::Gatv2 => {
                let (src, dst) = batch.attention_edges();
                let mut x = x0;
                let mut taps = vec![tap(t, x, 0)];
                for l in 1..=k {
                    x = layers::gatv2_layer(
                        t,
                        &src,
                        &dst,
                        batch.num_nodes,
                        x,
                        id(&format!("gat{l}.wl")),
                        id(&format!("gat{l}.wr")),
                        id(&format!("gat{l}.a")),
                        id(&format!("gat{l}.b")),
                        GATV2_SLOPE,
                    );
                    x = t.batch_norm(
                        x,
                        id(&format!("gat{l}.gamma")),
                        id(&format!("gat{l}.beta")),
                        &mut bns[l - 1],
                        train,
                    );
                    taps.push(tap(t, x, l));
                }
                t.concat_cols(&taps)
            }
            Arch::Hierarchical => {
                let mut cur = batch.clone();
                let mut x = x0;
                let mut acc: Option<TId> = None;
                for l in 1..=k {
                    let xh =
                        layers::gcn_layer(t, &cur, x, id(&format!("gcn{l}.w")), id(&format!("gcn{l}.b")));
                    let xh = t.relu(xh);
                    let out = layers::sagpool(
                        t,
                        &cur,
                        xh,
                        id(&format!("pool{l}.w")),
                        id(&format!("pool{l}.b")),
                        r,
                    );
                    acc = Some(match acc {
                        None => out.readout,
                        Some(prev) => t.add(prev, out.readout),
                    });
                    cur = out.batch;
                    x = out.gated;
                }
                acc.expect("k >= 1")
            }
            Arch::Global => {
                let mut x = x0;
                let mut outs = Vec::with_capacity(k);
                for l in 1..=k {
                    x = layers::gcn_layer(
                        t,
                        batch,
                        x,
                        id(&format!("gcn{l}.w")),
                        id(&format!("gcn{l}.b")),
                    );
                    x = t.relu(x);
                    outs.push(x);
                }
                let cat = t.concat_cols(&outs);
                let out = layers::sagpool(t, batch, cat, id("pool.w"), id("pool.b"), r);
                out.readout
            }
        };
        // The SAGPool architectures take their single dropout application on
        // the pooled embedding instead: their readout's max-pool half is not
        // expectation-preserved under node-level masking.
        let mut hid = match arch {
            Arch::Gin | Arch::Gatv2 => embedding,
            Arch::Hierarchical | Arch::Global => t.dropout(embedding, p_drop, train),
        };
        for i in 1..=3 {
            hid = layers::linear(t, hid, id(&format!("head{i}.w")), id(&format!("head{i}.b")));
            hid = t.relu(hid);
        }
        let logits = layers::linear(t, hid, id("out.w"), id("out.b"));
        let logp = t.log_softmax_rows(logits);
        Ok(Forward { logp, param_ids })
    }

    /// Writes the model as a versioned JSON container ("GNM1").
    pub fn save(&self, path: &std::path::Path) -> Result<(), ModelError> {
        let file = CheckpointFile {
            format: "GNM1".to_string(),
            config: self.config.clone(),
            in_dim: self.in_dim,
            params: self.params.clone(),
            bn: self.bns.clone().into_iter().map(BnRecord::from).collect(),
        };
        let out = std::fs::File::create(path)?;
        serde_json::to_writer(std::io::BufWriter::new(out), &file)?;
        Ok(())
    }

    /// Loads a "GNM1" checkpoint, validating names and shapes against a
    /// freshly built model of the stored config.
    pub fn load(path: &std::path::Path) -> Result<Model, ModelError> {
        let file = std::fs::File::open(path)?;
        let ckpt: CheckpointFile = serde_json::from_reader(std::io::BufReader::new(file))?;
        if ckpt.format != "GNM1" {
            return Err(ModelError::Format(format!("unknown format {}", ckpt.format)));
        }
        let mut model = Model::new(ckpt.config, ckpt.in_dim);
        if ckpt.params.len() != model.params.len() {
            return Err(ModelError::Format("parameter count mismatch".into()));
        }
        for (slot, stored) in model.params.iter_mut().zip(ckpt.params) {
            if slot.name != stored.name || slot.value.dim() != stored.value.dim() {
                return Err(ModelError::Format(format!(
                    "parameter {} does not match the config layout",
                    stored.name
                )));
            }
            slot.value = stored.value;
        }
        if ckpt.bn.len() != model.bns.len() {
            return Err(ModelError::Format("batch-norm state count mismatch".into()));
        }
        for (slot, stored) in model.bns.iter_mut().zip(ckpt.bn) {
            if stored.running_mean.len() != slot.running_mean.len() {
                return Err(ModelError::Format("batch-norm width mismatch".into()));
            }
            slot.running_mean = ndarray::Array1::from_vec(stored.running_mean);
            slot.running_var = ndarray::Array1::from_vec(stored.running_var);
            slot.momentum = stored.momentum;
            slot.eps = stored.eps;
        }
        Ok(model)
    }
}

/// Hidden width of the two-layer MLP inside each GIN block. The block's
/// output width is H, but its internal computation keeps a floor so very
/// narrow embedding widths don't also starve the per-block transform.
pub fn gin_mlp_hidden(h: usize) -> usize {
    h
}

/// Width of the per-graph embedding row handed to the head.
pub fn embedding_width(arch: Arch, h: usize, k: usize) -> usize {
    match arch {
        Arch::Gin => h,
        Arch::Gatv2 => (k + 1) * h,
        Arch::Hierarchical => 2 * h,
        Arch::Global => 2 * k * h,
    }
}

/// Closed-form trainable-parameter count (weights, biases, BN affine).
pub fn param_count(arch: Arch, in_dim: usize, h: usize, k: usize) -> usize {
    let lin = |ind: usize, out: usize| ind * out + out;
    let per_layer_in = |l: usize| if l == 1 { in_dim } else { h };
    let body: usize = match arch {
        Arch::Gin => {
            let layers: usize = (1..=k)
                .map(|l| lin(per_layer_in(l), gin_mlp_hidden(h)) + lin(gin_mlp_hidden(h), h) + 2 * h)
                .sum();
            let taps: usize = lin(in_dim, h) + k * lin(h, h);
            layers + taps
        }
        Arch::Gatv2 => {
            let layers: usize = (1..=k)
                .map(|l| 2 * per_layer_in(l) * h + h + h + 2 * h)
                .sum();
            let taps: usize = lin(in_dim, h) + k * lin(h, h);
            layers + taps
        }
        Arch::Hierarchical => (1..=k)
            .map(|l| lin(per_layer_in(l), h) + lin(h, 1))
            .sum(),
        Arch::Global => {
            let layers: usize = (1..=k).map(|l| lin(per_layer_in(l), h)).sum();
            layers + lin(k * h, 1)
        }
    };
    let emb = embedding_width(arch, h, k);
    body + lin(emb, h) + 2 * lin(h, h) + lin(h, NUM_CLASSES)
}

#[derive(serde::Serialize, serde::Deserialize)]
struct CheckpointFile {
    format: String,
    config: ModelConfig,
    in_dim: usize,
    params: Vec<Param>,
    bn: Vec<BnRecord>,
}

#[derive(serde::Serialize, serde::Deserialize)]
struct BnRecord {
    running_mean: Vec<f64>,
    running_var: Vec<f64>,
    momentum: f64,
    eps: f64,
}

impl From<BnState> for BnRecord {
    fn from(b: BnState) -> Self {
        BnRecord {
            running_mean: b.running_mean.to_vec(),
            running_var: b.running_var.to_vec(),
            momentum: b.momentum,
            eps: b.eps,
        }
    }
}

mod array2_serde {
    use ndarray::Array2;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Flat {
        rows: usize,
        cols: usize,
        data: Vec<f64>,
    }

    pub fn serialize<S: Serializer>(v: &Array2<f64>, s: S) -> Result<S::Ok, S::Error> {
        Flat {
            rows: v.nrows(),
            cols: v.ncols(),
            data: v.iter().cloned().collect(),
        }
        .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Array2<f64>, D::Error> {
        let flat = Flat::deserialize(d)?;
        Array2::from_shape_vec((flat.rows, flat.cols), flat.data)
            .map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::check::{max_rel_err, numeric_grad};
    use crate::batch::stack_rows;
    use crate::features::identity_features;
    use crate::generate::gen_er;
    use crate::graph::Graph;

    fn config(arch: Arch, h: usize, k: usize) -> ModelConfig {
        ModelConfig::new(arch, FeatureKind::Identity(4), h, k, 7)
    }

    #[test]
    fn embedding_widths_match_spec_arithmetic() {
        assert_eq!(embedding_width(Arch::Gin, 8, 4), 8);
        assert_eq!(embedding_width(Arch::Gatv2, 8, 4), 40);
        assert_eq!(embedding_width(Arch::Global, 16, 4), 128);
        assert_eq!(embedding_width(Arch::Hierarchical, 8, 4), 16);
    }

    #[test]
    fn param_count_formula_matches_built_models() {
        for arch in Arch::ALL {
            for (h, k, d) in [(4, 2, 4), (8, 4, 1), (3, 1, 5)] {
                let mut cfg = config(arch, h, k);
                cfg.feature_kind = FeatureKind::Identity(d);
                let model = Model::new(cfg, d);
                assert_eq!(
                    model.num_params(),
                    param_count(arch, d, h, k),
                    "{arch:?} h={h} k={k} d={d}"
                );
            }
        }
    }

    fn forward_once(model: &mut Model, graphs: &[&Graph], train: bool) -> Array2<f64> {
        let batch = GraphBatch::from_graphs(graphs);
        let feats: Vec<Array2<f64>> = graphs
            .iter()
            .map(|g| identity_features(g, 4).unwrap().values)
            .collect();
        let refs: Vec<&Array2<f64>> = feats.iter().collect();
        let x = stack_rows(&refs);
        let mut t = Tape::new(3);
        let fw = model.forward(&mut t, &batch, &x, train).unwrap();
        t.value(fw.logp).clone()
    }

    #[test]
    fn untrained_model_is_the_uniform_predictor() {
        // Zero-initialized output layer: logits are exactly 0, log-probs
        // exactly −ln 8, for every architecture.
        let g = gen_er(10, 0.3, 1).unwrap();
        for arch in Arch::ALL {
            let mut model = Model::new(config(arch, 4, 2), 4);
            let logp = forward_once(&mut model, &[&g], false);
            for &v in &logp {
                assert!((v - -(8f64).ln()).abs() < 1e-12, "{arch:?}");
            }
        }
    }

    #[test]
    fn log_probs_normalize_for_all_archs() {
        let g1 = gen_er(8, 0.4, 2).unwrap();
        let g2 = gen_er(6, 0.5, 3).unwrap();
        for arch in Arch::ALL {
            let mut model = Model::new(config(arch, 4, 2), 4);
            // Make the head non-trivial so logits differ from zero.
            let mut snap = model.snapshot();
            let names = model.param_names().iter().map(|s| s.to_string()).collect::<Vec<_>>();
            let mut rng = ChaCha8Rng::seed_from_u64(5);
            for (i, name) in names.iter().enumerate() {
                if name == "out.w" {
                    snap.0[i] = layers::glorot_uniform(snap.0[i].nrows(), snap.0[i].ncols(), &mut rng);
                }
            }
            model.restore(&snap);
            let logp = forward_once(&mut model, &[&g1, &g2], false);
            assert_eq!(logp.dim(), (2, 8));
            for row in logp.rows() {
                let sum: f64 = row.iter().map(|&v| v.exp()).sum();
                assert!((sum - 1.0).abs() < 1e-12, "{arch:?}");
            }
        }
    }

    #[test]
    fn forward_rejects_wrong_feature_width() {
        let g = gen_er(5, 0.5, 4).unwrap();
        let batch = GraphBatch::from_graphs(&[&g]);
        let mut model = Model::new(config(Arch::Gin, 4, 2), 4);
        let x = Array2::zeros((5, 3));
        let mut t = Tape::new(0);
        let err = model.forward(&mut t, &batch, &x, false).unwrap_err();
        assert!(matches!(err, ModelError::FeatureDimMismatch { got: 3, expected: 4 }));
    }

    /// Randomize parameters, one quick train-mode pass to move BN running
    /// stats off their init, so eval-mode tests exercise real statistics.
    fn warmed_model(arch: Arch, seed: u64) -> Model {
        let mut model = Model::new(
            ModelConfig { seed, ..config(arch, 4, 2) },
            4,
        );
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
        let shapes = model.param_shapes();
        let values: Vec<Array2<f64>> = shapes
            .iter()
            .map(|&(r, c)| layers::glorot_uniform(r, c, &mut rng))
            .collect();
        model.set_params(&values);
        let g = gen_er(12, 0.3, seed).unwrap();
        forward_once(&mut model, &[&g], true);
        model
    }

    #[test]
    fn eval_forward_is_permutation_invariant() {
        use rand::seq::SliceRandom;
        let g = gen_er(14, 0.3, 9).unwrap();
        let mut perm: Vec<usize> = (0..14).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        perm.shuffle(&mut rng);
        let edges: Vec<(usize, usize)> =
            g.to_edge_list().iter().map(|&(u, v)| (perm[u], perm[v])).collect();
        let h = Graph::from_edge_list(14, &edges).unwrap();
        for arch in Arch::ALL {
            let mut model = warmed_model(arch, 31);
            let a = forward_once(&mut model, &[&g], false);
            let b = forward_once(&mut model, &[&h], false);
            assert!(max_rel_err(&a, &b) < 1e-9, "{arch:?}");
        }
    }

    #[test]
    fn batched_eval_equals_per_graph_eval() {
        let g1 = gen_er(9, 0.35, 11).unwrap();
        let g2 = gen_er(7, 0.45, 12).unwrap();
        for arch in Arch::ALL {
            let mut model = warmed_model(arch, 77);
            let both = forward_once(&mut model, &[&g1, &g2], false);
            let a = forward_once(&mut model, &[&g1], false);
            let b = forward_once(&mut model, &[&g2], false);
            let stacked = stack_rows(&[&a, &b]);
            assert!(max_rel_err(&both, &stacked) < 1e-10, "{arch:?}");
        }
    }

    #[test]
    fn end_to_end_gradients_match_finite_differences() {
        let g = gen_er(6, 0.5, 13).unwrap();
        let feats = identity_features(&g, 3).unwrap().values;
        let labels = Rc::new(vec![2usize]);
        for arch in Arch::ALL {
            let mut cfg = config(arch, 3, 2);
            cfg.feature_kind = FeatureKind::Identity(3);
            cfg.dropout_p = 0.3;
            let mut base = Model::new(cfg.clone(), 3);
            // Random output layer so the loss actually depends on the body.
            let mut rng = ChaCha8Rng::seed_from_u64(99);
            let shapes = base.param_shapes();
            let values: Vec<Array2<f64>> = shapes
                .iter()
                .map(|&(r, c)| layers::glorot_uniform(r, c, &mut rng))
                .collect();
            base.set_params(&values);
            let batch = GraphBatch::from_graphs(&[&g]);
            let f = |p: &[Array2<f64>]| -> f64 {
                let mut model = base.clone();
                model.set_params(p);
                let mut t = Tape::new(42);
                let fw = model.forward(&mut t, &batch, &feats, true).unwrap();
                let loss = t.nll_mean(fw.logp, &labels);
                t.scalar(loss)
            };
            let numeric = numeric_grad(&f, &values, 1e-5);
            let mut model = base.clone();
            let mut t = Tape::new(42);
            let fw = model.forward(&mut t, &batch, &feats, true).unwrap();
            let loss = t.nll_mean(fw.logp, &labels);
            t.backward(loss).unwrap();
            for (i, id) in fw.param_ids.iter().enumerate() {
                let err = max_rel_err(t.grad(*id).unwrap(), &numeric[i]);
                assert!(err < 1e-4, "{arch:?} param {i}: rel err {err}");
            }
        }
    }

    #[test]
    fn checkpoint_round_trips() {
        let dir = std::env::temp_dir().join("gnnlab-model-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("ckpt.json");
        let g = gen_er(10, 0.3, 14).unwrap();
        let mut model = warmed_model(Arch::Gin, 55);
        let before = forward_once(&mut model, &[&g], false);
        model.save(&path).unwrap();
        let mut loaded = Model::load(&path).unwrap();
        assert_eq!(loaded.config, model.config);
        assert_eq!(loaded.snapshot().0, model.snapshot().0);
        let after = forward_once(&mut loaded, &[&g], false);
        assert_eq!(before, after);
        std::fs::remove_file(&path).ok();
    }

    #[test]
    fn arch_names_round_trip() {
        for arch in Arch::ALL {
            assert_eq!(arch.name().parse::<Arch>().unwrap(), arch);
        }
        assert!("transformer".parse::<Arch>().is_err());
    }
}
