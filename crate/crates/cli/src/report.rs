//! Report generation from the results CSV.
//!
//! Produces per-(architecture, feature, dataset) series files of H versus
//! mean accuracy, and an aligned text table whose cells hold the minimum H
//! reaching 100%/95%/90% accuracy on each dataset (small/medium pairs)
//! plus the 90%-level generalization percentage: the number of H values
//! scoring ≥ 0.9 on the medium dataset over the number scoring ≥ 0.9 on
//! the small one ('-' when the small count is zero).

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use crate::results::ResultRow;

pub const FEATURE_ORDER: [&str; 5] = ["ones", "noise", "degree", "normdegree", "identity"];
pub const ARCH_ORDER: [&str; 4] = ["gin", "gatv2", "hierarchical", "global"];

/// Replication accuracies for one (arch, feature, H) cell; failed runs
/// (NaN accuracy) are dropped at ingestion.
#[derive(Debug, Default, Clone)]
pub struct Cell {
    pub small: Vec<f64>,
    pub medium: Vec<f64>,
}

pub type Groups = BTreeMap<(String, String, usize), Cell>;

pub fn group_rows(rows: &[ResultRow]) -> Groups {
    let mut groups: Groups = BTreeMap::new();
    for row in rows {
        let cell = groups
            .entry((row.arch.clone(), row.feature.clone(), row.h))
            .or_default();
        if row.acc_small_test.is_finite() {
            cell.small.push(row.acc_small_test);
        }
        if let Some(m) = row.acc_medium {
            if m.is_finite() {
                cell.medium.push(m);
            }
        }
    }
    groups
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation; 0 for fewer than two points.
pub fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

/// (H, mean accuracy) points for one (arch, feature) on one dataset,
/// ascending in H.
pub fn series_points(groups: &Groups, arch: &str, feature: &str, medium: bool) -> Vec<(usize, f64)> {
    groups
        .iter()
        .filter(|((a, f, _), _)| a == arch && f == feature)
        .filter_map(|((_, _, h), cell)| {
            let accs = if medium { &cell.medium } else { &cell.small };
            if accs.is_empty() {
                None
            } else {
                Some((*h, mean(accs)))
            }
        })
        .collect()
}

/// Smallest H whose mean accuracy reaches `level`.
pub fn min_h(points: &[(usize, f64)], level: f64) -> Option<usize> {
    points
        .iter()
        .filter(|(_, acc)| *acc >= level)
        .map(|(h, _)| *h)
        .min()
}

/// Generalization percentage at the 0.9 level, rendered ("50%" / "-").
pub fn generalization_pct(small: &[(usize, f64)], medium: &[(usize, f64)]) -> String {
    let denom = small.iter().filter(|(_, a)| *a >= 0.9).count();
    if denom == 0 {
        return "-".to_string();
    }
    let num = medium.iter().filter(|(_, a)| *a >= 0.9).count();
    format!("{}%", (100.0 * num as f64 / denom as f64).round() as u64)
}

fn fmt_min_h(v: Option<usize>) -> String {
    match v {
        Some(h) => h.to_string(),
        None => "-".to_string(),
    }
}

/// One table cell: "s/m s/m s/m p" at levels 100%, 95%, 90%.
pub fn render_cell(small: &[(usize, f64)], medium: &[(usize, f64)]) -> String {
    let mut parts: Vec<String> = [1.0, 0.95, 0.9]
        .iter()
        .map(|&level| {
            format!(
                "{}/{}",
                fmt_min_h(min_h(small, level)),
                fmt_min_h(min_h(medium, level))
            )
        })
        .collect();
    parts.push(generalization_pct(small, medium));
    parts.join(" ")
}

/// Architectures × features table, aligned columns, canonical order first
/// and any unknown names after, alphabetically.
pub fn render_table(groups: &Groups) -> String {
    let archs = present_in_order(groups, &ARCH_ORDER, |k| &k.0);
    let features = present_in_order(groups, &FEATURE_ORDER, |k| &k.1);
    let mut cells: Vec<Vec<String>> = Vec::new();
    for arch in &archs {
        let mut row = vec![arch.clone()];
        for feature in &features {
            let small = series_points(groups, arch, feature, false);
            let medium = series_points(groups, arch, feature, true);
            if small.is_empty() && medium.is_empty() {
                row.push("(no data)".to_string());
            } else {
                row.push(render_cell(&small, &medium));
            }
        }
        cells.push(row);
    }
    let mut header = vec!["arch".to_string()];
    header.extend(features.iter().cloned());
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in &cells {
        for (i, cell) in row.iter().enumerate() {
            widths[i] = widths[i].max(cell.len());
        }
    }
    let fmt_row = |row: &[String]| {
        row.iter()
            .enumerate()
            .map(|(i, c)| format!("{:<width$}", c, width = widths[i]))
            .collect::<Vec<_>>()
            .join("  ")
            .trim_end()
            .to_string()
    };
    let mut out = String::new();
    out.push_str("min H at accuracy 100%/95%/90% as small/medium pairs, then the\n");
    out.push_str("90%-level generalization ratio (medium hits over small hits).\n\n");
    out.push_str(&fmt_row(&header));
    out.push('\n');
    for row in &cells {
        out.push_str(&fmt_row(row));
        out.push('\n');
    }
    out
}

fn present_in_order<F: Fn(&(String, String, usize)) -> &String>(
    groups: &Groups,
    canonical: &[&str],
    pick: F,
) -> Vec<String> {
    let present: BTreeSet<&String> = groups.keys().map(|k| pick(k)).collect();
    let mut out: Vec<String> = canonical
        .iter()
        .filter(|c| present.iter().any(|p| p.as_str() == **c))
        .map(|c| c.to_string())
        .collect();
    let mut extra: Vec<String> = present
        .into_iter()
        .filter(|p| !canonical.contains(&p.as_str()))
        .cloned()
        .collect();
    extra.sort();
    out.extend(extra);
    out
}

/// Writes every nonempty series file; returns (paths, warnings). Warnings
/// name (arch, feature, dataset) series missing some H present elsewhere.
pub fn write_series_files(
    groups: &Groups,
    out_dir: &Path,
) -> Result<(Vec<PathBuf>, Vec<String>), String> {
    std::fs::create_dir_all(out_dir)
        .map_err(|e| format!("cannot create {}: {e}", out_dir.display()))?;
    let all_h: BTreeSet<usize> = groups.keys().map(|k| k.2).collect();
    let archs = present_in_order(groups, &ARCH_ORDER, |k| &k.0);
    let features = present_in_order(groups, &FEATURE_ORDER, |k| &k.1);
    let mut paths = Vec::new();
    let mut warnings = Vec::new();
    for arch in &archs {
        for feature in &features {
            for medium in [false, true] {
                let dataset = if medium { "medium" } else { "small" };
                let mut lines = vec!["H,mean_acc,std_acc,runs".to_string()];
                let mut present_h = BTreeSet::new();
                for ((a, f, h), cell) in groups {
                    if a != arch || f != feature {
                        continue;
                    }
                    let accs = if medium { &cell.medium } else { &cell.small };
                    if accs.is_empty() {
                        continue;
                    }
                    present_h.insert(*h);
                    lines.push(format!(
                        "{h},{:.6},{:.6},{}",
                        mean(accs),
                        std_dev(accs),
                        accs.len()
                    ));
                }
                if present_h.is_empty() {
                    continue;
                }
                let missing: Vec<String> = all_h
                    .difference(&present_h)
                    .map(|h| h.to_string())
                    .collect();
                if !missing.is_empty() {
                    warnings.push(format!(
                        "series {arch}/{feature}/{dataset}: no data at H = {}",
                        missing.join(", ")
                    ));
                }
                let path = out_dir.join(format!("series_{arch}_{feature}_{dataset}.csv"));
                std::fs::write(&path, lines.join("\n") + "\n")
                    .map_err(|e| format!("cannot write {}: {e}", path.display()))?;
                paths.push(path);
            }
        }
    }
    Ok((paths, warnings))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(arch: &str, feature: &str, h: usize, seed: u64, small: f64, medium: Option<f64>) -> ResultRow {
        ResultRow {
            arch: arch.into(),
            feature: feature.into(),
            h,
            k: 4,
            r: 0.5,
            identity_k: 4,
            seed,
            epoch_best: 10,
            acc_small_test: small,
            acc_medium: medium,
            wall_s: 1.0,
        }
    }

    #[test]
    fn min_h_thresholds_match_definition() {
        // Injected accuracies {H=8: 0.92, H=16: 0.96}.
        let points = vec![(8, 0.92), (16, 0.96)];
        assert_eq!(min_h(&points, 0.90), Some(8));
        assert_eq!(min_h(&points, 0.95), Some(16));
        assert_eq!(min_h(&points, 1.0), None);
    }

    #[test]
    fn generalization_ratio_definition() {
        // 4 H values at ≥0.9 on small, 2 of them ≥0.9 on medium → 50%.
        let small = vec![(1, 0.5), (2, 0.91), (8, 0.95), (16, 0.99), (32, 0.93)];
        let medium = vec![(1, 0.2), (2, 0.7), (8, 0.91), (16, 0.92), (32, 0.8)];
        assert_eq!(generalization_pct(&small, &medium), "50%");
        let never = vec![(1, 0.5), (2, 0.6)];
        assert_eq!(generalization_pct(&never, &medium), "-");
    }

    #[test]
    fn grouping_averages_and_drops_failures() {
        let rows = vec![
            row("gin", "degree", 8, 1, 0.9, Some(0.8)),
            row("gin", "degree", 8, 2, 1.0, Some(0.9)),
            row("gin", "degree", 8, 3, f64::NAN, None),
        ];
        let groups = group_rows(&rows);
        let cell = &groups[&("gin".into(), "degree".into(), 8)];
        assert_eq!(cell.small.len(), 2);
        assert!((mean(&cell.small) - 0.95).abs() < 1e-12);
        assert!((mean(&cell.medium) - 0.85).abs() < 1e-12);
    }

    #[test]
    fn std_dev_is_sample_flavored() {
        assert_eq!(std_dev(&[0.5]), 0.0);
        assert!((std_dev(&[1.0, 3.0]) - (2.0f64).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn table_renders_cells_and_placeholders() {
        let rows = vec![
            row("gin", "degree", 8, 1, 0.92, Some(0.91)),
            row("gin", "degree", 16, 1, 0.96, Some(0.89)),
            row("gin", "identity", 2, 1, 1.0, Some(1.0)),
        ];
        let table = render_table(&group_rows(&rows));
        // GIN/degree: 100% never; 95% at 16 small, never medium; 90% at 8/8.
        assert!(table.contains("-/- 16/- 8/8 50%"), "{table}");
        // GIN/identity: everything at H=2.
        assert!(table.contains("2/2 2/2 2/2 100%"), "{table}");
        assert!(table.contains("arch"), "{table}");
    }

    #[test]
    fn series_files_and_gap_warnings() {
        let dir = std::env::temp_dir().join("gnnlab-report-test");
        std::fs::remove_dir_all(&dir).ok();
        let rows = vec![
            row("gin", "degree", 8, 1, 0.92, Some(0.9)),
            row("gin", "degree", 16, 1, 0.96, None),
            row("gatv2", "ones", 16, 1, 0.5, None),
        ];
        let (paths, warnings) = write_series_files(&group_rows(&rows), &dir).unwrap();
        // gin/degree small+medium, gatv2/ones small only.
        assert_eq!(paths.len(), 3);
        let medium_series = dir.join("series_gin_degree_medium.csv");
        assert!(paths.contains(&medium_series));
        let text = std::fs::read_to_string(&medium_series).unwrap();
        assert_eq!(text.lines().count(), 2, "{text}");
        assert!(text.lines().nth(1).unwrap().starts_with("8,0.900000"));
        // gin/degree medium misses H=16; gatv2/ones misses H=8 on small.
        assert!(warnings.iter().any(|w| w.contains("gin/degree/medium") && w.contains("16")), "{warnings:?}");
        assert!(warnings.iter().any(|w| w.contains("gatv2/ones/small") && w.contains("8")), "{warnings:?}");
        std::fs::remove_dir_all(&dir).ok();
    }
}
