use gnnlab_core::features::FeatureKind;
use gnnlab_core::generate::{build_dataset, mix_seed, DatasetSpec, Split};
use gnnlab_core::model::{Arch, ModelConfig};
use gnnlab_core::train::{evaluate, precompute_features, train_single, TrainConfig};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let h: usize = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(8);
    let k: usize = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(2);
    let epochs: usize = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(150);
    let lr: f64 = args.get(4).map(|s| s.parse().unwrap()).unwrap_or(0.01);
    let wd: f64 = args.get(5).map(|s| s.parse().unwrap()).unwrap_or(1e-3);
    let ds = build_dataset(&DatasetSpec {
        per_class_count: 1,
        n_range: (9, 32),
        master_seed: 105,
        split_ratios: (1.0, 0.0, 0.0),
    })
    .unwrap();
    let mut cfg = TrainConfig::new(ModelConfig::new(Arch::Gin, FeatureKind::Degree, h, k, 10));
    cfg.epochs = epochs;
    cfg.replications = 1;
    cfg.lr = lr;
    cfg.weight_decay = wd;
    cfg.model.dropout_p = 0.0;
    let feats = precompute_features(&ds, cfg.model.feature_kind).unwrap();
    let run_seed = mix_seed(&[cfg.model.seed, 0]);
    let (res, mut model) = train_single(&cfg, run_seed, &ds, &feats, None).unwrap();
    let train_idx = ds.split_indices(Split::Train);
    let acc = evaluate(&mut model, &ds, &feats, &train_idx, cfg.batch_size);
    let l = &res.train_losses;
    println!(
        "H={h} K={k} epochs={epochs} lr={lr} wd={wd}: acc={acc:.3} losses[0]={:.4} [mid]={:.4} [last]={:.4}",
        l[0], l[l.len() / 2], l[l.len() - 1]
    );
}
