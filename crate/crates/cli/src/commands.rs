//! Subcommand implementations.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use gnnlab_core::dataset_io::{load_dataset, save_dataset};
use gnnlab_core::features::FeatureKind;
use gnnlab_core::generate::{build_dataset, mix_seed, DatasetSpec, LabeledDataset};
use gnnlab_core::model::{Arch, ModelConfig};
use gnnlab_core::stats::{summarize_dataset, Band, PerClassSummary};
use gnnlab_core::train::{
    precompute_features, train_single, RunResult, SelectionRule, TrainConfig,
};
use gnnlab_core::ndarray::Array2;

use crate::config::{load_config, pick, pick_optional, pick_required, ConfigMap};
use crate::report::{group_rows, render_table, write_series_files};
use crate::results::{append_result, completed_keys, read_results, ResultRow, RunKey};
use crate::{
    GenerateArgs, GridArgs, ReportArgs, StatsArgs, TrainArgs,
};

// ---------------------------------------------------------------- generate

pub fn cmd_generate(args: GenerateArgs) -> Result<(), String> {
    let mut spec = match args.preset.as_deref() {
        None | Some("small") => DatasetSpec::small(7),
        Some("medium") => DatasetSpec::medium(7),
        Some(other) => return Err(format!("unknown preset: {other} (small|medium)")),
    };
    if let Some(seed) = args.seed {
        spec.master_seed = seed;
    }
    if let Some(pc) = args.per_class {
        spec.per_class_count = pc;
    }
    if let Some(range) = &args.n_range {
        spec.n_range = (range[0], range[1]);
    }
    if let Some(ratios) = &args.ratios {
        spec.split_ratios = (ratios[0], ratios[1], ratios[2]);
    }
    let ds = build_dataset(&spec).map_err(|e| format!("generate: {e}"))?;
    save_dataset(&ds, &args.out).map_err(|e| format!("generate: {e}"))?;
    println!(
        "wrote {} graphs ({} per class, N in [{}, {}], master seed {}) to {}",
        ds.len(),
        spec.per_class_count,
        spec.n_range.0,
        spec.n_range.1,
        spec.master_seed,
        args.out.display()
    );
    print!("{}", render_stats_table(&summarize_dataset(&ds, false)));
    Ok(())
}

// ------------------------------------------------------------------- stats

pub fn cmd_stats(args: StatsArgs) -> Result<(), String> {
    let ds = load_dataset(&args.dataset).map_err(|e| format!("stats: {e}"))?;
    let summaries = summarize_dataset(&ds, !args.no_paths);
    print!("{}", render_stats_table(&summaries));
    if let Some(csv) = &args.csv {
        std::fs::write(csv, stats_csv(&summaries))
            .map_err(|e| format!("stats: cannot write {}: {e}", csv.display()))?;
        println!("wrote {}", csv.display());
    }
    Ok(())
}

fn band_str(b: &Band, decimals: usize) -> String {
    format!(
        "{:.d$} ({:.d$}-{:.d$})",
        b.mean,
        b.min,
        b.max,
        d = decimals
    )
}

fn render_stats_table(summaries: &[PerClassSummary]) -> String {
    let mut rows = vec![vec![
        "class".to_string(),
        "count".to_string(),
        "nodes".to_string(),
        "edges".to_string(),
        "avg degree".to_string(),
        "transitivity".to_string(),
        "path length".to_string(),
    ]];
    for s in summaries {
        rows.push(vec![
            s.label.name().to_string(),
            s.count.to_string(),
            band_str(&s.nodes, 0),
            band_str(&s.edges, 0),
            band_str(&s.avg_degree, 2),
            band_str(&s.transitivity, 3),
            match &s.avg_path_length {
                Some(b) => band_str(b, 2),
                None => "-".to_string(),
            },
        ]);
    }
    let widths: Vec<usize> = (0..rows[0].len())
        .map(|i| rows.iter().map(|r| r[i].len()).max().unwrap())
        .collect();
    rows.iter()
        .map(|r| {
            r.iter()
                .enumerate()
                .map(|(i, c)| format!("{:<width$}", c, width = widths[i]))
                .collect::<Vec<_>>()
                .join("  ")
                .trim_end()
                .to_string()
                + "\n"
        })
        .collect()
}

fn stats_csv(summaries: &[PerClassSummary]) -> String {
    let mut out = String::from(
        "class,count,n_mean,n_min,n_max,e_mean,e_min,e_max,deg_mean,deg_min,deg_max,t_mean,t_min,t_max,apl_mean,apl_min,apl_max\n",
    );
    for s in summaries {
        let apl = match &s.avg_path_length {
            Some(b) => format!("{:.6},{:.6},{:.6}", b.mean, b.min, b.max),
            None => ",,".to_string(),
        };
        out.push_str(&format!(
            "{},{},{:.2},{:.0},{:.0},{:.2},{:.0},{:.0},{:.4},{:.4},{:.4},{:.6},{:.6},{:.6},{}\n",
            s.label.name(),
            s.count,
            s.nodes.mean,
            s.nodes.min,
            s.nodes.max,
            s.edges.mean,
            s.edges.min,
            s.edges.max,
            s.avg_degree.mean,
            s.avg_degree.min,
            s.avg_degree.max,
            s.transitivity.mean,
            s.transitivity.min,
            s.transitivity.max,
            apl
        ));
    }
    out
}

// ------------------------------------------------------------------- train

/// Everything the train subcommand needs, resolved from flags + config file.
struct RunPlan {
    train_cfg: TrainConfig,
    results: PathBuf,
    dataset: PathBuf,
    medium: Option<PathBuf>,
    identity_k: usize,
}

fn resolve_train(args: &TrainArgs) -> Result<RunPlan, String> {
    let cfg: ConfigMap = match &args.config {
        Some(path) => load_config(path)?,
        None => ConfigMap::new(),
    };
    let arch: Arch = pick_required(args.arch, &cfg, "arch")?;
    let feature_name: String = pick_required(args.feature.clone(), &cfg, "feature")?;
    let identity_k = pick(args.identity_k, &cfg, "identity_k", 4usize)?;
    let feature = FeatureKind::from_name(&feature_name, identity_k)?;
    let h = pick(args.h, &cfg, "h", 8usize)?;
    let k = pick(args.k, &cfg, "k", 4usize)?;
    let mut model = ModelConfig::new(arch, feature, h, k, pick(args.seed, &cfg, "seed", 7u64)?);
    model.r = pick(args.r, &cfg, "r", 0.5f64)?;
    model.dropout_p = pick(args.dropout, &cfg, "dropout", 0.5f64)?;
    let mut train_cfg = TrainConfig::new(model);
    train_cfg.epochs = pick(args.epochs, &cfg, "epochs", 100usize)?;
    train_cfg.batch_size = pick(args.batch_size, &cfg, "batch_size", 100usize)?;
    train_cfg.lr = pick(args.lr, &cfg, "lr", 0.01f64)?;
    train_cfg.weight_decay = pick(args.weight_decay, &cfg, "weight_decay", 1e-3f64)?;
    train_cfg.replications = pick(args.replications, &cfg, "replications", 5usize)?;
    let selection: String = pick(
        args.selection.clone(),
        &cfg,
        "selection",
        "best-val".to_string(),
    )?;
    train_cfg.selection = match selection.as_str() {
        "best-val" => SelectionRule::BestVal,
        "last-epoch" => SelectionRule::LastEpoch,
        other => return Err(format!("unknown selection rule: {other} (best-val|last-epoch)")),
    };
    let results: PathBuf = pick_required(args.results.clone(), &cfg, "results")?;
    let dataset: PathBuf = pick_required(args.dataset.clone(), &cfg, "dataset")?;
    let medium: Option<PathBuf> = pick_optional(args.medium.clone(), &cfg, "medium")?;
    Ok(RunPlan {
        train_cfg,
        results,
        dataset,
        medium,
        identity_k,
    })
}

fn load_datasets(
    dataset: &Path,
    medium: &Option<PathBuf>,
) -> Result<(LabeledDataset, Option<LabeledDataset>), String> {
    let small = load_dataset(dataset).map_err(|e| format!("dataset {}: {e}", dataset.display()))?;
    let medium = match medium {
        Some(p) => Some(load_dataset(p).map_err(|e| format!("dataset {}: {e}", p.display()))?),
        None => None,
    };
    Ok((small, medium))
}

fn result_row(cfg: &TrainConfig, identity_k: usize, run_seed: u64, run: &RunResult) -> ResultRow {
    ResultRow {
        arch: cfg.model.arch.name().to_string(),
        feature: cfg.model.feature_kind.name().to_string(),
        h: cfg.model.h,
        k: cfg.model.k,
        r: cfg.model.r,
        identity_k,
        seed: run_seed,
        epoch_best: run.epoch_best,
        acc_small_test: run.test_acc_small,
        acc_medium: run.acc_medium,
        wall_s: run.wall_s,
    }
}

pub fn cmd_train(args: TrainArgs) -> Result<(), String> {
    let plan = resolve_train(&args)?;
    let identity_k = plan.identity_k;
    let (small, medium) = load_datasets(&plan.dataset, &plan.medium)?;
    let feats_small = precompute_features(&small, plan.train_cfg.model.feature_kind)
        .map_err(|e| format!("features: {e}"))?;
    let feats_medium = match &medium {
        Some(ds) => Some(
            precompute_features(ds, plan.train_cfg.model.feature_kind)
                .map_err(|e| format!("features: {e}"))?,
        ),
        None => None,
    };
    let done = completed_keys(&read_results(&plan.results)?);
    let mut fresh = Vec::new();
    for rep in 0..plan.train_cfg.replications {
        let run_seed = mix_seed(&[plan.train_cfg.model.seed, rep as u64]);
        let probe = result_row(
            &plan.train_cfg,
            identity_k,
            run_seed,
            &RunResult {
                run_seed,
                epoch_best: 0,
                train_losses: vec![],
                val_accs: vec![],
                test_acc_small: 0.0,
                acc_medium: None,
                wall_s: 0.0,
                failed: false,
            },
        );
        if done.contains(&probe.key()) {
            println!("skip rep {rep} (seed {run_seed}): already in {}", plan.results.display());
            continue;
        }
        let med = match (&medium, &feats_medium) {
            (Some(ds), Some(f)) => Some((ds, f.as_slice())),
            _ => None,
        };
        let (run, _model) = train_single(&plan.train_cfg, run_seed, &small, &feats_small, med)
            .map_err(|e| format!("train: {e}"))?;
        let row = result_row(&plan.train_cfg, identity_k, run_seed, &run);
        append_result(&plan.results, &row)?;
        let med_str = run
            .acc_medium
            .map(|a| format!(" medium {a:.3}"))
            .unwrap_or_default();
        println!(
            "rep {rep} (seed {run_seed}): test {:.3}{med_str} best epoch {} in {:.1}s{}",
            run.test_acc_small,
            run.epoch_best,
            run.wall_s,
            if run.failed { " [FAILED: non-finite loss]" } else { "" }
        );
        fresh.push(run);
    }
    let ok: Vec<&RunResult> = fresh.iter().filter(|r| !r.failed).collect();
    if !ok.is_empty() {
        let mean =
            ok.iter().map(|r| r.test_acc_small).sum::<f64>() / ok.len() as f64;
        println!("mean test accuracy over {} new run(s): {mean:.4}", ok.len());
    }
    Ok(())
}

// -------------------------------------------------------------------- grid

pub fn cmd_grid(args: GridArgs) -> Result<(), String> {
    let cfg: ConfigMap = match &args.config {
        Some(path) => load_config(path)?,
        None => ConfigMap::new(),
    };
    let dataset: PathBuf = pick_required(args.dataset.clone(), &cfg, "dataset")?;
    let medium_path: Option<PathBuf> = pick_optional(args.medium.clone(), &cfg, "medium")?;
    let results: PathBuf = pick_required(args.results.clone(), &cfg, "results")?;
    let out_dir: PathBuf = pick(args.out_dir.clone(), &cfg, "out_dir", PathBuf::from("."))?;
    let archs_raw: String = pick(
        args.archs.clone(),
        &cfg,
        "archs",
        "gin,gatv2,hierarchical,global".to_string(),
    )?;
    let features_raw: String = pick(
        args.features.clone(),
        &cfg,
        "features",
        "ones,noise,degree,normdegree,identity".to_string(),
    )?;
    let h_raw: String = pick(args.h_values.clone(), &cfg, "h_values", "1,2,3,8,16,32".to_string())?;
    let k = pick(args.k, &cfg, "k", 4usize)?;
    let r = pick(args.r, &cfg, "r", 0.5f64)?;
    let dropout = pick(args.dropout, &cfg, "dropout", 0.5f64)?;
    let identity_k = pick(args.identity_k, &cfg, "identity_k", 4usize)?;
    let replications = pick(args.replications, &cfg, "replications", 5usize)?;
    let seed = pick(args.seed, &cfg, "seed", 7u64)?;
    let epochs = pick(args.epochs, &cfg, "epochs", 100usize)?;
    let batch_size = pick(args.batch_size, &cfg, "batch_size", 100usize)?;
    let lr = pick(args.lr, &cfg, "lr", 0.01f64)?;
    let weight_decay = pick(args.weight_decay, &cfg, "weight_decay", 1e-3f64)?;
    let workers = resolve_workers(args.workers)?;

    let archs: Vec<Arch> = parse_list(&archs_raw)?;
    let feature_names: Vec<String> = archs_list_strings(&features_raw);
    let features: Vec<FeatureKind> = feature_names
        .iter()
        .map(|n| FeatureKind::from_name(n, identity_k))
        .collect::<Result<_, _>>()?;
    let h_values: Vec<usize> = parse_list(&h_raw)?;
    if archs.is_empty() || features.is_empty() || h_values.is_empty() {
        return Err("grid: empty axis (archs, features, or h_values)".into());
    }

    let (small, medium) = load_datasets(&dataset, &medium_path)?;
    let mut feats_by_kind: HashMap<String, (Vec<Array2<f64>>, Option<Vec<Array2<f64>>>)> =
        HashMap::new();
    for kind in &features {
        let fs = precompute_features(&small, *kind).map_err(|e| format!("features: {e}"))?;
        let fm = match &medium {
            Some(ds) => Some(precompute_features(ds, *kind).map_err(|e| format!("features: {e}"))?),
            None => None,
        };
        feats_by_kind.insert(kind.name().to_string(), (fs, fm));
    }

    let done = completed_keys(&read_results(&results)?);
    let mut jobs: Vec<(Arch, FeatureKind, usize, u64)> = Vec::new();
    let mut skipped = 0usize;
    for &arch in &archs {
        for &feature in &features {
            for &h in &h_values {
                for rep in 0..replications {
                    let run_seed = mix_seed(&[seed, rep as u64]);
                    let key: RunKey = (
                        arch.name().to_string(),
                        feature.name().to_string(),
                        h,
                        k,
                        r.to_bits(),
                        identity_k,
                        run_seed,
                    );
                    if done.contains(&key) {
                        skipped += 1;
                    } else {
                        jobs.push((arch, feature, h, run_seed));
                    }
                }
            }
        }
    }
    let total = archs.len() * features.len() * h_values.len() * replications;
    println!(
        "grid: {} cells x {replications} reps = {total} runs; {skipped} already done, {} to run, {workers} worker(s)",
        archs.len() * features.len() * h_values.len(),
        jobs.len()
    );

    let writer = Mutex::new(());
    let next = std::sync::atomic::AtomicUsize::new(0);
    let error: Mutex<Option<String>> = Mutex::new(None);
    std::thread::scope(|scope| {
        for _ in 0..workers.max(1) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                if i >= jobs.len() {
                    break;
                }
                if error.lock().unwrap().is_some() {
                    break;
                }
                let (arch, feature, h, run_seed) = jobs[i];
                let mut model = ModelConfig::new(arch, feature, h, k, seed);
                model.r = r;
                model.dropout_p = dropout;
                let mut tc = TrainConfig::new(model);
                tc.epochs = epochs;
                tc.batch_size = batch_size;
                tc.lr = lr;
                tc.weight_decay = weight_decay;
                tc.replications = replications;
                let (fs, fm) = &feats_by_kind[feature.name()];
                let med = match (&medium, fm) {
                    (Some(ds), Some(f)) => Some((ds, f.as_slice())),
                    _ => None,
                };
                match train_single(&tc, run_seed, &small, fs, med) {
                    Ok((run, _)) => {
                        let row = result_row(&tc, identity_k, run_seed, &run);
                        let guard = writer.lock().unwrap();
                        if let Err(e) = append_result(&results, &row) {
                            *error.lock().unwrap() = Some(e);
                            break;
                        }
                        println!(
                            "[{}/{}] {} {} H={h} seed={run_seed}: test {:.3}{}{}",
                            i + 1,
                            jobs.len(),
                            arch.name(),
                            feature.name(),
                            run.test_acc_small,
                            run.acc_medium
                                .map(|a| format!(" medium {a:.3}"))
                                .unwrap_or_default(),
                            if run.failed { " [FAILED]" } else { "" }
                        );
                        drop(guard);
                    }
                    Err(e) => {
                        *error.lock().unwrap() = Some(format!("train: {e}"));
                        break;
                    }
                }
            });
        }
    });
    if let Some(e) = error.into_inner().unwrap() {
        return Err(e);
    }

    // Derive the table from everything recorded for this grid's key space.
    let all_rows = read_results(&results)?;
    let expected_seeds: Vec<u64> = (0..replications)
        .map(|rep| mix_seed(&[seed, rep as u64]))
        .collect();
    let rows: Vec<ResultRow> = all_rows
        .into_iter()
        .filter(|row| {
            row.k == k
                && row.r.to_bits() == r.to_bits()
                && row.identity_k == identity_k
                && expected_seeds.contains(&row.seed)
                && archs.iter().any(|a| a.name() == row.arch)
                && features.iter().any(|f| f.name() == row.feature)
                && h_values.contains(&row.h)
        })
        .collect();
    emit_report(&rows, &out_dir)
}

fn resolve_workers(flag: Option<usize>) -> Result<usize, String> {
    if let Some(w) = flag {
        return Ok(w.max(1));
    }
    match std::env::var("GNNLAB_WORKERS") {
        Ok(raw) => raw
            .parse::<usize>()
            .map(|w| w.max(1))
            .map_err(|_| format!("GNNLAB_WORKERS: cannot parse {raw:?}")),
        Err(_) => Ok(1),
    }
}

fn parse_list<T: std::str::FromStr>(raw: &str) -> Result<Vec<T>, String>
where
    T::Err: std::fmt::Display,
{
    raw.split(',')
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<T>().map_err(|e| format!("bad list entry {s:?}: {e}")))
        .collect()
}

fn archs_list_strings(raw: &str) -> Vec<String> {
    raw.split(',')
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect()
}

// ------------------------------------------------------------------ report

pub fn cmd_report(args: ReportArgs) -> Result<(), String> {
    let rows = read_results(&args.results)?;
    if rows.is_empty() {
        return Err(format!("no results in {}", args.results.display()));
    }
    emit_report(&rows, &args.out_dir)
}

fn emit_report(rows: &[ResultRow], out_dir: &Path) -> Result<(), String> {
    if rows.is_empty() {
        return Err("no rows to report".into());
    }
    let groups = group_rows(rows);
    let (paths, warnings) = write_series_files(&groups, out_dir)?;
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    let table = render_table(&groups);
    let table_path = out_dir.join("table4.txt");
    std::fs::write(&table_path, &table)
        .map_err(|e| format!("cannot write {}: {e}", table_path.display()))?;
    print!("{table}");
    println!(
        "\nwrote {} series file(s) and {} under {}",
        paths.len(),
        table_path.file_name().unwrap().to_string_lossy(),
        out_dir.display()
    );
    Ok(())
}
