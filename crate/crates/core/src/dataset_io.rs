//! Plain-text dataset persistence ("GDS1").
//!
//! Layout:
//!
//! ```text
//! GDS1 {"master_seed":1,...}          header: format tag + metadata JSON
//! G 0 ER_low train 250 503            one line per graph: id class split n m
//! 0 17                                then m edge lines "u v", u < v, sorted
//! ...
//! ```
//!
//! Saving a loaded dataset reproduces the original file byte for byte.

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use thiserror::Error;

use crate::generate::{DatasetEntry, DatasetMeta, LabeledDataset, Split};
use crate::graph::{ClassLabel, Graph};

#[derive(Debug, Error)]
pub enum DatasetIoError {
    #[error("dataset io: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

fn parse_err<T>(line: usize, msg: impl Into<String>) -> Result<T, DatasetIoError> {
    Err(DatasetIoError::Parse { line, msg: msg.into() })
}

pub fn write_dataset<W: Write>(ds: &LabeledDataset, mut w: W) -> Result<(), DatasetIoError> {
    let meta = serde_json::to_string(&ds.meta)
        .map_err(|e| DatasetIoError::Parse { line: 1, msg: e.to_string() })?;
    writeln!(w, "GDS1 {meta}")?;
    for (id, entry) in ds.entries.iter().enumerate() {
        let g = &entry.graph;
        writeln!(
            w,
            "G {id} {} {} {} {}",
            entry.label.name(),
            entry.split.name(),
            g.num_nodes(),
            g.num_edges()
        )?;
        for (u, v) in g.to_edge_list() {
            writeln!(w, "{u} {v}")?;
        }
    }
    Ok(())
}

pub fn save_dataset(ds: &LabeledDataset, path: &Path) -> Result<(), DatasetIoError> {
    let file = std::fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    write_dataset(ds, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn read_dataset<R: BufRead>(r: R) -> Result<LabeledDataset, DatasetIoError> {
    let mut lines = r.lines().enumerate();
    let (_, header) = match lines.next() {
        Some((i, line)) => (i, line?),
        None => return parse_err(1, "empty file; expected GDS1 header"),
    };
    let meta_json = match header.strip_prefix("GDS1 ") {
        Some(rest) => rest,
        None => return parse_err(1, "expected header starting with 'GDS1 '"),
    };
    let meta: DatasetMeta = serde_json::from_str(meta_json)
        .map_err(|e| DatasetIoError::Parse { line: 1, msg: format!("bad metadata: {e}") })?;
    let mut entries = Vec::new();
    loop {
        let (idx, line) = match lines.next() {
            Some((i, line)) => (i + 1, line?),
            None => break,
        };
        if line.is_empty() {
            return parse_err(idx, "unexpected blank line");
        }
        let fields: Vec<&str> = line.split(' ').collect();
        if fields.len() != 6 || fields[0] != "G" {
            return parse_err(idx, format!("expected 'G <id> <class> <split> <n> <m>', got: {line}"));
        }
        let id: usize = match fields[1].parse() {
            Ok(v) => v,
            Err(_) => return parse_err(idx, format!("bad graph id: {}", fields[1])),
        };
        if id != entries.len() {
            return parse_err(idx, format!("graph id {id} out of order; expected {}", entries.len()));
        }
        let label: ClassLabel = match fields[2].parse() {
            Ok(v) => v,
            Err(e) => return parse_err(idx, e),
        };
        let split: Split = match fields[3].parse() {
            Ok(v) => v,
            Err(e) => return parse_err(idx, e),
        };
        let n: usize = match fields[4].parse() {
            Ok(v) => v,
            Err(_) => return parse_err(idx, format!("bad node count: {}", fields[4])),
        };
        let m: usize = match fields[5].parse() {
            Ok(v) => v,
            Err(_) => return parse_err(idx, format!("bad edge count: {}", fields[5])),
        };
        let mut edges = Vec::with_capacity(m);
        let mut last = (0usize, 0usize);
        for k in 0..m {
            let (eidx, eline) = match lines.next() {
                Some((i, line)) => (i + 1, line?),
                None => return parse_err(idx, format!("graph {id}: file ends inside edge list")),
            };
            let mut it = eline.split(' ');
            let (u, v) = match (it.next(), it.next(), it.next()) {
                (Some(a), Some(b), None) => {
                    match (a.parse::<usize>(), b.parse::<usize>()) {
                        (Ok(u), Ok(v)) => (u, v),
                        _ => return parse_err(eidx, format!("bad edge: {eline}")),
                    }
                }
                _ => return parse_err(eidx, format!("expected 'u v', got: {eline}")),
            };
            if u >= v {
                return parse_err(eidx, format!("edge {u} {v} not in u < v form"));
            }
            if v >= n {
                return parse_err(eidx, format!("edge {u} {v} outside 0..{n}"));
            }
            if k > 0 && (u, v) <= last {
                return parse_err(eidx, format!("edge {u} {v} out of sorted order"));
            }
            last = (u, v);
            edges.push((u, v));
        }
        let graph = match Graph::from_edge_list(n, &edges) {
            Ok(g) => g,
            Err(e) => return parse_err(idx, format!("graph {id}: {e}")),
        };
        if graph.num_edges() != m {
            return parse_err(idx, format!("graph {id}: edge count mismatch"));
        }
        entries.push(DatasetEntry { graph, label, split });
    }
    if entries.is_empty() {
        return parse_err(2, "dataset holds no graphs");
    }
    Ok(LabeledDataset { entries, meta })
}

pub fn load_dataset(path: &Path) -> Result<LabeledDataset, DatasetIoError> {
    let file = std::fs::File::open(path)?;
    read_dataset(BufReader::new(file))
}
