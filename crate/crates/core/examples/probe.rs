//! Scratch probe: train one replication on a stored dataset and print the
//! loss/validation curves plus the selected model's test accuracy.
//!
//! Usage: probe <dataset.gds> <arch> <feature> <h> <k> <epochs>
//!              [lr] [wd] [dropout] [rep] [medium.gds]

use gnnlab_core::dataset_io::load_dataset;
use gnnlab_core::features::FeatureKind;
use gnnlab_core::generate::mix_seed;
use gnnlab_core::model::{Arch, ModelConfig};
use gnnlab_core::train::{precompute_features, train_single, TrainConfig};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let ds = load_dataset(args[1].as_ref()).unwrap();
    let arch: Arch = args[2].parse().unwrap();
    let feature = FeatureKind::from_name(&args[3], 4).unwrap();
    let h: usize = args[4].parse().unwrap();
    let k: usize = args[5].parse().unwrap();
    let epochs: usize = args[6].parse().unwrap();
    let lr: f64 = args.get(7).map(|s| s.parse().unwrap()).unwrap_or(0.01);
    let wd: f64 = args.get(8).map(|s| s.parse().unwrap()).unwrap_or(1e-3);
    let dropout: f64 = args.get(9).map(|s| s.parse().unwrap()).unwrap_or(0.5);
    let rep: u64 = args.get(10).and_then(|s| s.parse().ok()).unwrap_or(0);

    let mut model_cfg = ModelConfig::new(arch, feature, h, k, 7);
    model_cfg.dropout_p = dropout;
    let mut cfg = TrainConfig::new(model_cfg);
    cfg.epochs = epochs;
    cfg.lr = lr;
    cfg.weight_decay = wd;
    let feats = precompute_features(&ds, feature).unwrap();

    let medium = args.get(11).map(|p| {
        let md = load_dataset(p.as_ref()).unwrap();
        let mf = precompute_features(&md, feature).unwrap();
        (md, mf)
    });
    let med_ref = medium.as_ref().map(|(md, mf)| (md, mf.as_slice()));

    let run_seed = mix_seed(&[7, rep]);
    let (run, _model) = train_single(&cfg, run_seed, &ds, &feats, med_ref).unwrap();
    for (i, (loss, vacc)) in run.train_losses.iter().zip(&run.val_accs).enumerate() {
        println!("epoch {:3}  loss {:10.4}  val {:.3}", i + 1, loss, vacc);
    }
    println!(
        "best epoch {}  test {:.3}  medium {:?}  failed {}",
        run.epoch_best, run.test_acc_small, run.acc_medium, run.failed
    );
}
