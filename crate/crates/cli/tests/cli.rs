//! End-to-end tests that drive the compiled `gnnlab` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gnnlab"))
}

fn work_dir(name: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join(name);
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("spawn gnnlab");
    assert!(
        out.status.success(),
        "command failed\nstdout:\n{}\nstderr:\n{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

/// Tiny dataset: 10 graphs/class so the stratified 80/10/10 split leaves
/// one val and one test graph per class.
fn generate_tiny(dir: &Path) -> PathBuf {
    let ds = dir.join("tiny.gds");
    run(bin().args(["generate", "--per-class", "10", "--n-range", "16", "32", "--seed", "11"])
        .arg("--out")
        .arg(&ds));
    ds
}

#[test]
fn generate_then_stats_reports_all_classes() {
    let dir = work_dir("cli_generate_stats");
    let ds = generate_tiny(&dir);
    let csv = dir.join("stats.csv");
    let out = run(bin()
        .args(["stats", "--dataset"])
        .arg(&ds)
        .arg("--csv")
        .arg(&csv));
    let text = stdout_of(&out);
    for class in [
        "ER_low", "ER_high", "WS_low", "WS_high", "BA_low", "BA_high", "GRID_low", "GRID_high",
    ] {
        assert!(text.contains(class), "stats output missing {class}:\n{text}");
    }
    // The torus at degree 8 has a size-independent clustering signature.
    assert!(text.contains("0.429"), "GRID_high transitivity missing:\n{text}");
    let csv_text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(csv_text.lines().count(), 9, "header + 8 class rows");
}

#[test]
fn train_appends_rows_and_resume_skips_them() {
    let dir = work_dir("cli_train_resume");
    let ds = generate_tiny(&dir);
    let results = dir.join("results.csv");
    let args = |cmd: &mut Command| {
        cmd.args(["train", "--dataset"])
            .arg(&ds)
            .arg("--results")
            .arg(&results)
            .args([
                "--arch", "gin", "--feature", "degree", "--h", "2", "--k", "2", "--epochs", "2",
                "--replications", "2", "--seed", "5",
            ]);
    };
    let mut first = bin();
    args(&mut first);
    run(&mut first);
    let after_first = std::fs::read_to_string(&results).unwrap();
    assert_eq!(after_first.lines().count(), 3, "header + 2 runs:\n{after_first}");
    assert!(after_first.starts_with("arch,feature,H,K,r,identity_k,seed,epoch_best,"));

    let mut second = bin();
    args(&mut second);
    let out = run(&mut second);
    assert!(
        stdout_of(&out).contains("skip rep 0"),
        "second run should skip completed reps:\n{}",
        stdout_of(&out)
    );
    let after_second = std::fs::read_to_string(&results).unwrap();
    assert_eq!(after_first, after_second, "resume must not append duplicates");
}

#[test]
fn grid_is_resumable_and_writes_report_outputs() {
    let dir = work_dir("cli_grid");
    let ds = generate_tiny(&dir);
    let results = dir.join("results.csv");
    let report = dir.join("report");
    let args = |cmd: &mut Command| {
        cmd.args(["grid", "--dataset"])
            .arg(&ds)
            .arg("--results")
            .arg(&results)
            .arg("--out-dir")
            .arg(&report)
            .args([
                "--archs", "gin,global", "--features", "degree", "--h-values", "2,4", "--k",
                "2", "--epochs", "1", "--replications", "1", "--seed", "5", "--workers", "2",
            ]);
    };
    let mut first = bin();
    args(&mut first);
    let out = run(&mut first);
    assert!(stdout_of(&out).contains("4 runs"), "{}", stdout_of(&out));
    for file in [
        "series_gin_degree_small.csv",
        "series_global_degree_small.csv",
        "table4.txt",
    ] {
        assert!(report.join(file).is_file(), "missing {file}");
    }
    let series = std::fs::read_to_string(report.join("series_gin_degree_small.csv")).unwrap();
    assert!(series.starts_with("H,mean_acc,std_acc,runs\n"));
    assert_eq!(series.lines().count(), 3, "header + H=2 + H=4:\n{series}");

    let mut second = bin();
    args(&mut second);
    let out = run(&mut second);
    assert!(
        stdout_of(&out).contains("4 already done, 0 to run"),
        "grid should resume: {}",
        stdout_of(&out)
    );
}

#[test]
fn report_summarizes_a_results_file() {
    let dir = work_dir("cli_report");
    let results = dir.join("results.csv");
    let mut text = String::from("arch,feature,H,K,r,identity_k,seed,epoch_best,acc_small_test,acc_medium,wall_s\n");
    // Two seeds at each of two widths: H=8 reaches 0.95 mean, H=16 reaches 1.0.
    for (h, a1, a2, m1, m2) in [
        (8, 0.95, 0.95, 0.90, 0.90),
        (16, 1.00, 1.00, 0.95, 0.85),
    ] {
        text.push_str(&format!("gin,degree,{h},4,0.5,4,1,10,{a1:.6},{m1:.6},1.0\n"));
        text.push_str(&format!("gin,degree,{h},4,0.5,4,2,10,{a2:.6},{m2:.6},1.0\n"));
    }
    std::fs::write(&results, text).unwrap();
    let out_dir = dir.join("out");
    let out = run(bin()
        .args(["report", "--results"])
        .arg(&results)
        .arg("--out-dir")
        .arg(&out_dir));
    let table = std::fs::read_to_string(out_dir.join("table4.txt")).unwrap();
    // min H: 100% -> 16/-, 95% -> 8/-, 90% -> 8/8; generalization 1 of 2 -> 50%.
    assert!(table.contains("16/- 8/- 8/8 50%"), "unexpected table:\n{table}");
    assert!(stdout_of(&out).contains("16/- 8/- 8/8 50%"));
    assert!(out_dir.join("series_gin_degree_small.csv").is_file());
    assert!(out_dir.join("series_gin_degree_medium.csv").is_file());
}

#[test]
fn config_file_supplies_values_and_flags_override() {
    let dir = work_dir("cli_config");
    let ds = generate_tiny(&dir);
    let results = dir.join("results.csv");
    let cfg = dir.join("train.cfg");
    std::fs::write(
        &cfg,
        format!(
            "# minimal training recipe\narch = gin\nfeature = degree\nh = 2\nk = 2\n\
             epochs = 2\nreplications = 1\nseed = 9\ndataset = {}\nresults = {}\n",
            ds.display(),
            results.display()
        ),
    )
    .unwrap();
    run(bin().args(["train", "--config"]).arg(&cfg).args(["--epochs", "1"]));
    let rows = std::fs::read_to_string(&results).unwrap();
    assert_eq!(rows.lines().count(), 2, "header + 1 run:\n{rows}");
    assert!(rows.lines().nth(1).unwrap().starts_with("gin,degree,2,2,0.5,4,"));
}

#[test]
fn bad_inputs_exit_nonzero() {
    let dir = work_dir("cli_bad_inputs");
    let ds = generate_tiny(&dir);
    let cases: Vec<Vec<String>> = vec![
        // Unknown architecture.
        vec![
            "train".into(),
            "--dataset".into(),
            ds.display().to_string(),
            "--results".into(),
            dir.join("r.csv").display().to_string(),
            "--arch".into(),
            "transformer".into(),
            "--feature".into(),
            "degree".into(),
        ],
        // Unknown feature.
        vec![
            "train".into(),
            "--dataset".into(),
            ds.display().to_string(),
            "--results".into(),
            dir.join("r.csv").display().to_string(),
            "--arch".into(),
            "gin".into(),
            "--feature".into(),
            "laplacian".into(),
        ],
        // Missing required --results.
        vec![
            "train".into(),
            "--dataset".into(),
            ds.display().to_string(),
            "--arch".into(),
            "gin".into(),
            "--feature".into(),
            "degree".into(),
        ],
        // Unknown preset.
        vec![
            "generate".into(),
            "--preset".into(),
            "huge".into(),
            "--out".into(),
            dir.join("x.gds").display().to_string(),
        ],
        // Missing dataset file.
        vec![
            "stats".into(),
            "--dataset".into(),
            dir.join("nope.gds").display().to_string(),
        ],
    ];
    for case in cases {
        let out = bin().args(&case).output().unwrap();
        assert!(
            !out.status.success(),
            "expected failure for {case:?}\nstdout: {}",
            String::from_utf8_lossy(&out.stdout)
        );
    }
}

#[test]
fn medium_dataset_adds_the_acc_medium_column() {
    let dir = work_dir("cli_medium");
    let ds = generate_tiny(&dir);
    let medium = dir.join("medium.gds");
    run(bin()
        .args(["generate", "--per-class", "3", "--n-range", "16", "24", "--seed", "3"])
        .args(["--ratios", "0", "0", "1"])
        .arg("--out")
        .arg(&medium));
    let results = dir.join("results.csv");
    run(bin()
        .args(["train", "--dataset"])
        .arg(&ds)
        .arg("--medium")
        .arg(&medium)
        .arg("--results")
        .arg(&results)
        .args([
            "--arch", "gin", "--feature", "degree", "--h", "2", "--k", "2", "--epochs", "1",
            "--replications", "1", "--seed", "5",
        ]));
    let rows = std::fs::read_to_string(&results).unwrap();
    let data = rows.lines().nth(1).unwrap();
    let fields: Vec<&str> = data.split(',').collect();
    assert!(
        !fields[9].is_empty(),
        "acc_medium should be recorded when --medium is given: {data}"
    );
    fields[9].parse::<f64>().unwrap();
}
