//! Cross-run agreement and report emission.
//!
//! The overlap metric is set overlap between two equal-size selections:
//! `|A intersect B| / |A|`. Reports are plain CSV and text files with
//! stable column order, emitted deterministically (identical inputs give
//! identical bytes).

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::datamodel::{RankedSelection, ScoreReport};
use crate::error::{Error, Result};

/// Share of identical ids between two equal-size selections.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapReport {
    pub label_a: String,
    pub label_b: String,
    pub fraction: f64,
    pub set_size: usize,
}

/// Overlap between two selections of the same size. Symmetric in its
/// arguments (up to label order).
pub fn overlap(
    label_a: &str,
    selection_a: &RankedSelection,
    label_b: &str,
    selection_b: &RankedSelection,
) -> Result<OverlapReport> {
    let a = &selection_a.example_ids;
    let b = &selection_b.example_ids;
    if a.len() != b.len() {
        return Err(Error::InvalidInput(format!(
            "selections have different sizes: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Err(Error::InvalidInput("selections are empty".into()));
    }
    let set_a: HashSet<_> = a.iter().collect();
    let shared = b.iter().filter(|id| set_a.contains(id)).count();
    Ok(OverlapReport {
        label_a: label_a.to_string(),
        label_b: label_b.to_string(),
        fraction: shared as f64 / a.len() as f64,
        set_size: a.len(),
    })
}

/// Everything `emit_report` writes about.
pub struct ReportInputs<'a> {
    pub reports: &'a [ScoreReport],
    /// Labelled selections, summarized in `selections.csv`.
    pub selections: &'a [(String, RankedSelection)],
    /// Pairwise overlaps; when empty the matrix file is omitted.
    pub overlaps: &'a [OverlapReport],
}

/// Emitted report files.
///
/// * `gs_histogram.csv` — columns `golden_score,count`, one row per grid
///   value `k/m` for `k = 0..=m`.
/// * `selections.csv` — columns `label,fraction,direction,size,min_gs,max_gs`.
/// * `overlap_matrix.csv` — header `label,<labels...>`, unit diagonal;
///   omitted when no overlaps were supplied.
/// * `summary.txt` — human-readable digest of the above.
pub fn emit_report(inputs: &ReportInputs<'_>, out_dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();

    let mut summary = String::new();
    summary.push_str("golden score report\n===================\n\n");

    if !inputs.reports.is_empty() {
        let m = consistent_m(inputs.reports)?;
        let histogram = histogram_counts(inputs.reports, m);
        let mut csv = String::from("golden_score,count\n");
        for (wins, count) in histogram.iter().enumerate() {
            csv.push_str(&format!("{},{}\n", wins as f64 / m as f64, count));
        }
        let path = out_dir.join("gs_histogram.csv");
        fs::write(&path, csv)?;
        written.push(path);

        let n = inputs.reports.len();
        let mean: f64 = inputs.reports.iter().map(|r| r.golden_score).sum::<f64>() / n as f64;
        let zero = histogram.first().copied().unwrap_or(0);
        summary.push_str(&format!(
            "scored examples: {n}\ntasks (m): {m}\nmean golden score: {mean:.6}\n\
             examples with no wins: {zero}\n\n"
        ));
    } else {
        summary.push_str("no score reports supplied\n\n");
    }

    if !inputs.selections.is_empty() {
        let mut csv = String::from("label,fraction,direction,size,min_gs,max_gs\n");
        for (label, selection) in inputs.selections {
            let (min_gs, max_gs) = selection_gs_range(selection, inputs.reports);
            csv.push_str(&format!(
                "{},{},{},{},{},{}\n",
                label,
                selection.fraction,
                selection.direction,
                selection.example_ids.len(),
                min_gs,
                max_gs
            ));
        }
        let path = out_dir.join("selections.csv");
        fs::write(&path, csv)?;
        written.push(path);
        summary.push_str(&format!("selections: {}\n", inputs.selections.len()));
        for (label, selection) in inputs.selections {
            summary.push_str(&format!(
                "  {label}: {} of ranking ({}), {} ids\n",
                selection.fraction,
                selection.direction,
                selection.example_ids.len()
            ));
        }
        summary.push('\n');
    }

    if inputs.overlaps.is_empty() {
        summary.push_str("overlap matrix: not computed (no overlap pairs supplied)\n");
    } else {
        let csv = overlap_matrix_csv(inputs.overlaps)?;
        let label_count = csv.lines().count() - 1;
        let path = out_dir.join("overlap_matrix.csv");
        fs::write(&path, csv)?;
        written.push(path);
        summary.push_str(&format!(
            "overlap matrix: {label_count}x{label_count} over {} pairs\n",
            inputs.overlaps.len()
        ));
        for report in inputs.overlaps {
            summary.push_str(&format!(
                "  {} vs {}: {:.4} (size {})\n",
                report.label_a, report.label_b, report.fraction, report.set_size
            ));
        }
    }

    let path = out_dir.join("summary.txt");
    fs::write(&path, summary)?;
    written.push(path);
    Ok(written)
}

fn consistent_m(reports: &[ScoreReport]) -> Result<u32> {
    let m = reports[0].m;
    if let Some(bad) = reports.iter().find(|r| r.m != m) {
        return Err(Error::InvalidInput(format!(
            "inconsistent m across reports: {} vs {m}",
            bad.m
        )));
    }
    Ok(m)
}

/// Counts per golden-score grid value: index k holds the number of reports
/// with exactly k wins.
fn histogram_counts(reports: &[ScoreReport], m: u32) -> Vec<usize> {
    let mut counts = vec![0usize; m as usize + 1];
    for report in reports {
        counts[report.wins as usize] += 1;
    }
    counts
}

fn selection_gs_range(selection: &RankedSelection, reports: &[ScoreReport]) -> (f64, f64) {
    let ids: HashSet<_> = selection.example_ids.iter().collect();
    let mut min_gs = f64::INFINITY;
    let mut max_gs = f64::NEG_INFINITY;
    for report in reports {
        if ids.contains(&report.example_id) {
            min_gs = min_gs.min(report.golden_score);
            max_gs = max_gs.max(report.golden_score);
        }
    }
    if min_gs.is_finite() {
        (min_gs, max_gs)
    } else {
        (0.0, 0.0)
    }
}

/// Render pairwise overlaps as a square CSV matrix: header row of labels,
/// unit diagonal, symmetric cells, empty cells for unsupplied pairs.
pub fn overlap_matrix_csv(overlaps: &[OverlapReport]) -> Result<String> {
    let (labels, matrix) = overlap_matrix(overlaps)?;
    let mut csv = String::from("label");
    for label in &labels {
        csv.push(',');
        csv.push_str(label);
    }
    csv.push('\n');
    for (label, row) in labels.iter().zip(&matrix) {
        csv.push_str(label);
        for cell in row {
            csv.push(',');
            if let Some(value) = cell {
                csv.push_str(&format!("{value}"));
            }
        }
        csv.push('\n');
    }
    Ok(csv)
}

type OverlapCells = Vec<Vec<Option<f64>>>;

/// Assemble a square matrix from pairwise overlaps. Labels appear in first
/// encounter order; the diagonal is 1, unsupplied pairs stay empty.
fn overlap_matrix(overlaps: &[OverlapReport]) -> Result<(Vec<String>, OverlapCells)> {
    let mut labels: Vec<String> = Vec::new();
    let index_of = |label: &str, labels: &mut Vec<String>| -> usize {
        match labels.iter().position(|l| l == label) {
            Some(i) => i,
            None => {
                labels.push(label.to_string());
                labels.len() - 1
            }
        }
    };
    let mut cells: Vec<(usize, usize, f64)> = Vec::new();
    for report in overlaps {
        let a = index_of(&report.label_a, &mut labels);
        let b = index_of(&report.label_b, &mut labels);
        cells.push((a, b, report.fraction));
    }
    let n = labels.len();
    let mut matrix = vec![vec![None; n]; n];
    for (i, row) in matrix.iter_mut().enumerate() {
        row[i] = Some(1.0);
    }
    for (a, b, fraction) in cells {
        if a == b && (fraction - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInput(format!(
                "self overlap for {} is {fraction}, expected 1",
                labels[a]
            )));
        }
        matrix[a][b] = Some(fraction);
        matrix[b][a] = Some(fraction);
    }
    Ok((labels, matrix))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datamodel::{Direction, ExampleId};

    fn selection(ids: &[u64]) -> RankedSelection {
        RankedSelection {
            fraction: 0.3,
            direction: Direction::Top,
            example_ids: ids.iter().map(|i| ExampleId(*i)).collect(),
        }
    }

    fn report(id: u64, wins: u32, m: u32) -> ScoreReport {
        ScoreReport {
            example_id: ExampleId(id),
            golden_score: wins as f64 / m as f64,
            wins,
            m,
            one_shot_scores: vec![0.0; m as usize],
        }
    }

    #[test]
    fn overlap_of_hand_case_is_two_thirds() {
        let a = selection(&[1, 2, 3]);
        let b = selection(&[2, 3, 4]);
        let result = overlap("a", &a, "b", &b).unwrap();
        assert!((result.fraction - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(result.set_size, 3);
    }

    #[test]
    fn overlap_with_itself_is_one() {
        let a = selection(&[5, 9, 11]);
        let result = overlap("a", &a, "a", &a).unwrap();
        assert_eq!(result.fraction, 1.0);
    }

    #[test]
    fn overlap_is_symmetric() {
        let a = selection(&[1, 2, 3, 4]);
        let b = selection(&[3, 4, 5, 6]);
        let ab = overlap("a", &a, "b", &b).unwrap();
        let ba = overlap("b", &b, "a", &a).unwrap();
        assert_eq!(ab.fraction, ba.fraction);
    }

    #[test]
    fn overlap_rejects_size_mismatch() {
        let a = selection(&[1, 2]);
        let b = selection(&[1, 2, 3]);
        assert!(matches!(
            overlap("a", &a, "b", &b),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn report_emission_is_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let reports: Vec<ScoreReport> = (0..10).map(|i| report(i, (i % 3) as u32, 2)).collect();
        let selections = vec![("run".to_string(), selection(&[0, 1, 2]))];
        let overlaps = vec![overlap("x", &selection(&[1, 2, 3]), "y", &selection(&[2, 3, 4])).unwrap()];
        let inputs = ReportInputs {
            reports: &reports,
            selections: &selections,
            overlaps: &overlaps,
        };
        let out_a = dir.path().join("a");
        let out_b = dir.path().join("b");
        emit_report(&inputs, &out_a).unwrap();
        emit_report(&inputs, &out_b).unwrap();
        for name in ["gs_histogram.csv", "selections.csv", "overlap_matrix.csv", "summary.txt"] {
            let a = fs::read(out_a.join(name)).unwrap();
            let b = fs::read(out_b.join(name)).unwrap();
            assert_eq!(a, b, "{name} differs between identical runs");
        }
    }

    #[test]
    fn histogram_buckets_sit_on_the_grid() {
        let dir = tempfile::tempdir().unwrap();
        let reports: Vec<ScoreReport> = (0..6).map(|i| report(i, (i % 3) as u32, 4)).collect();
        let inputs = ReportInputs {
            reports: &reports,
            selections: &[],
            overlaps: &[],
        };
        emit_report(&inputs, dir.path()).unwrap();
        let csv = fs::read_to_string(dir.path().join("gs_histogram.csv")).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "golden_score,count");
        assert_eq!(lines.len(), 1 + 5); // k = 0..=4
        assert!(lines[1].starts_with("0,"));
        assert!(lines[2].starts_with("0.25,"));
        assert!(lines[5].starts_with("1,"));
    }

    #[test]
    fn hundred_task_histogram_covers_the_percent_grid() {
        let dir = tempfile::tempdir().unwrap();
        let reports: Vec<ScoreReport> = (0..250).map(|i| report(i, (i % 101) as u32, 100)).collect();
        let inputs = ReportInputs {
            reports: &reports,
            selections: &[],
            overlaps: &[],
        };
        emit_report(&inputs, dir.path()).unwrap();
        let csv = fs::read_to_string(dir.path().join("gs_histogram.csv")).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 1 + 101); // header + k/100 for k = 0..=100
        assert!(lines[2].starts_with("0.01,"));
        assert!(lines[51].starts_with("0.5,"));
        assert!(lines[101].starts_with("1,"));
    }

    #[test]
    fn three_way_overlap_matrix_has_unit_diagonal() {
        let dir = tempfile::tempdir().unwrap();
        let sels = [
            selection(&[1, 2, 3]),
            selection(&[2, 3, 4]),
            selection(&[3, 4, 5]),
        ];
        let labels = ["first", "second", "third"];
        let mut overlaps = Vec::new();
        for i in 0..3 {
            for j in (i + 1)..3 {
                overlaps.push(overlap(labels[i], &sels[i], labels[j], &sels[j]).unwrap());
            }
        }
        let inputs = ReportInputs {
            reports: &[],
            selections: &[],
            overlaps: &overlaps,
        };
        emit_report(&inputs, dir.path()).unwrap();
        let csv = fs::read_to_string(dir.path().join("overlap_matrix.csv")).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 4); // header + 3 rows
        assert_eq!(lines[0], "label,first,second,third");
        let row: Vec<&str> = lines[1].split(',').collect();
        assert_eq!(row[1], "1"); // diagonal
        let row2: Vec<&str> = lines[2].split(',').collect();
        assert_eq!(row2[2], "1");
    }

    #[test]
    fn empty_overlaps_omit_the_matrix_file() {
        let dir = tempfile::tempdir().unwrap();
        let inputs = ReportInputs {
            reports: &[],
            selections: &[],
            overlaps: &[],
        };
        let written = emit_report(&inputs, dir.path()).unwrap();
        assert!(!dir.path().join("overlap_matrix.csv").exists());
        assert!(dir.path().join("summary.txt").exists());
        let summary = fs::read_to_string(dir.path().join("summary.txt")).unwrap();
        assert!(summary.contains("not computed"));
        assert_eq!(written.len(), 1);
    }
}
