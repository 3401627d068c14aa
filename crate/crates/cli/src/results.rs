//! Append-only results CSV.
//!
//! Fixed header; one row per training replication. The file is the single
//! source of truth for reports, and the (arch, feature, H, K, r,
//! identity_k, seed) key makes grid runs resumable: completed rows are
//! skipped on re-run.

use std::collections::HashSet;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

pub const RESULTS_HEADER: &str =
    "arch,feature,H,K,r,identity_k,seed,epoch_best,acc_small_test,acc_medium,wall_s";

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub arch: String,
    pub feature: String,
    pub h: usize,
    pub k: usize,
    pub r: f64,
    pub identity_k: usize,
    pub seed: u64,
    pub epoch_best: usize,
    pub acc_small_test: f64,
    /// None when no second dataset was evaluated (empty CSV field).
    pub acc_medium: Option<f64>,
    pub wall_s: f64,
}

/// The resume key: everything that identifies a run except its outcome.
pub type RunKey = (String, String, usize, usize, u64, usize, u64);

impl ResultRow {
    pub fn key(&self) -> RunKey {
        (
            self.arch.clone(),
            self.feature.clone(),
            self.h,
            self.k,
            self.r.to_bits(),
            self.identity_k,
            self.seed,
        )
    }

    pub fn to_csv_line(&self) -> String {
        let medium = match self.acc_medium {
            Some(v) => format!("{v:.6}"),
            None => String::new(),
        };
        format!(
            "{},{},{},{},{},{},{},{},{:.6},{},{:.3}",
            self.arch,
            self.feature,
            self.h,
            self.k,
            self.r,
            self.identity_k,
            self.seed,
            self.epoch_best,
            self.acc_small_test,
            medium,
            self.wall_s
        )
    }

    pub fn from_csv_line(line: &str, lineno: usize) -> Result<ResultRow, String> {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 11 {
            return Err(format!("results line {lineno}: expected 11 fields, got {}", f.len()));
        }
        let err = |name: &str, raw: &str| format!("results line {lineno}: bad {name}: {raw:?}");
        Ok(ResultRow {
            arch: f[0].to_string(),
            feature: f[1].to_string(),
            h: f[2].parse().map_err(|_| err("H", f[2]))?,
            k: f[3].parse().map_err(|_| err("K", f[3]))?,
            r: f[4].parse().map_err(|_| err("r", f[4]))?,
            identity_k: f[5].parse().map_err(|_| err("identity_k", f[5]))?,
            seed: f[6].parse().map_err(|_| err("seed", f[6]))?,
            epoch_best: f[7].parse().map_err(|_| err("epoch_best", f[7]))?,
            acc_small_test: f[8].parse().map_err(|_| err("acc_small_test", f[8]))?,
            acc_medium: if f[9].is_empty() {
                None
            } else {
                Some(f[9].parse().map_err(|_| err("acc_medium", f[9]))?)
            },
            wall_s: f[10].parse().map_err(|_| err("wall_s", f[10]))?,
        })
    }
}

/// Reads all rows; a missing file is an empty result set.
pub fn read_results(path: &Path) -> Result<Vec<ResultRow>, String> {
    let file = match std::fs::File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(format!("cannot read {}: {e}", path.display())),
    };
    let mut lines = BufReader::new(file).lines();
    match lines.next() {
        None => return Ok(Vec::new()),
        Some(Ok(h)) if h == RESULTS_HEADER => {}
        Some(Ok(h)) => return Err(format!("{}: unexpected header: {h}", path.display())),
        Some(Err(e)) => return Err(format!("cannot read {}: {e}", path.display())),
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line.map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        if line.is_empty() {
            continue;
        }
        rows.push(ResultRow::from_csv_line(&line, i + 2)?);
    }
    Ok(rows)
}

pub fn completed_keys(rows: &[ResultRow]) -> HashSet<RunKey> {
    rows.iter().map(|r| r.key()).collect()
}

/// Appends one row, writing the header first on a fresh/empty file.
pub fn append_result(path: &Path, row: &ResultRow) -> Result<(), String> {
    let fresh = std::fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    let mut file = std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| format!("cannot open {}: {e}", path.display()))?;
    let mut text = String::new();
    if fresh {
        text.push_str(RESULTS_HEADER);
        text.push('\n');
    }
    text.push_str(&row.to_csv_line());
    text.push('\n');
    file.write_all(text.as_bytes())
        .map_err(|e| format!("cannot append to {}: {e}", path.display()))
}
