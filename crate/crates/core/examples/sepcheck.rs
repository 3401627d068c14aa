//! Throwaway: how separable are the classes from per-graph sums of
//! preprocessed input features alone (the tap-0 view), using
//! nearest-class-mean in that space?

use gnnlab_core::dataset_io::load_dataset;
use gnnlab_core::features::FeatureKind;
use gnnlab_core::generate::Split;
use gnnlab_core::train::{precompute_features, FeatureScaler};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let path = &args[1];
    let k: usize = args[2].parse().unwrap();
    let ds = load_dataset(std::path::Path::new(path)).unwrap();
    let feats = precompute_features(&ds, FeatureKind::Identity(k)).unwrap();
    let train_idx: Vec<usize> = (0..ds.entries.len())
        .filter(|&i| ds.entries[i].split == Split::Train)
        .collect();
    let scaler = FeatureScaler::fit(&feats, &train_idx);
    let feats = scaler.transform_all(&feats);

    // Per-graph summary: sum over nodes of each column, plus the node count.
    let dim = k;
    let sums: Vec<(usize, Vec<f64>)> = (0..ds.entries.len())
        .map(|i| {
            let mut s = vec![0.0; dim];
            for row in feats[i].rows() {
                for j in 0..dim {
                    s[j] += row[j];
                }
            }
            (ds.entries[i].label.code(), s)
        })
        .collect();

    // Class means on the train split (z-scored per column first, over train).
    let mut mu = vec![0.0; dim];
    let mut sd = vec![0.0; dim];
    for &i in &train_idx {
        for j in 0..dim {
            mu[j] += sums[i].1[j];
        }
    }
    for j in 0..dim {
        mu[j] /= train_idx.len() as f64;
    }
    for &i in &train_idx {
        for j in 0..dim {
            sd[j] += (sums[i].1[j] - mu[j]).powi(2);
        }
    }
    for j in 0..dim {
        sd[j] = (sd[j] / train_idx.len() as f64).sqrt().max(1e-12);
    }
    let norm = |v: &[f64]| -> Vec<f64> {
        (0..dim).map(|j| (v[j] - mu[j]) / sd[j]).collect()
    };

    let mut means = vec![vec![0.0; dim]; 8];
    let mut counts = vec![0usize; 8];
    for &i in &train_idx {
        let z = norm(&sums[i].1);
        counts[sums[i].0] += 1;
        for j in 0..dim {
            means[sums[i].0][j] += z[j];
        }
    }
    for c in 0..8 {
        for j in 0..dim {
            means[c][j] /= counts[c] as f64;
        }
    }
    println!("class means in normalized sum space (cols = identity cols 1..={k}):");
    for c in 0..8 {
        let m: Vec<String> = means[c].iter().map(|v| format!("{v:7.2}")).collect();
        println!("  class {c}: {}", m.join(" "));
    }

    // Nearest-class-mean accuracy on the test split.
    let mut hit = 0usize;
    let mut tot = 0usize;
    for i in 0..ds.entries.len() {
        if ds.entries[i].split != Split::Test {
            continue;
        }
        let z = norm(&sums[i].1);
        let mut best = 0;
        let mut bestd = f64::INFINITY;
        for c in 0..8 {
            let d: f64 = (0..dim).map(|j| (z[j] - means[c][j]).powi(2)).sum();
            if d < bestd {
                bestd = d;
                best = c;
            }
        }
        tot += 1;
        if best == sums[i].0 {
            hit += 1;
        }
    }
    println!("nearest-class-mean test accuracy (k={k}): {:.3}", hit as f64 / tot as f64);
}
