//! Cross-sample statistics and CSV output.
//!
//! Intervals are `mean ± 1.96·s/√S` with the sample standard deviation `s`
//! (divisor `S − 1`); a single sample has zero spread.

use std::fs::File;
use std::path::Path;

use crate::error::{QsnnError, Result};
use crate::training::Record;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SampleStats {
    pub mean: f64,
    pub variance: f64,
    pub ci95_half_width: f64,
}

impl SampleStats {
    pub fn ci95(&self) -> (f64, f64) {
        (self.mean - self.ci95_half_width, self.mean + self.ci95_half_width)
    }
}

pub fn sample_stats(values: &[f64]) -> Result<SampleStats> {
    if values.is_empty() {
        return Err(QsnnError::InvalidConfig("statistics need at least one sample".into()));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let variance = if values.len() > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    Ok(SampleStats {
        mean,
        variance,
        ci95_half_width: 1.96 * variance.sqrt() / n.sqrt(),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub iteration: usize,
    pub loss: SampleStats,
    pub robustness: Option<SampleStats>,
}

fn check_aligned(histories: &[&[Record]]) -> Result<usize> {
    let first = histories
        .first()
        .ok_or_else(|| QsnnError::InvalidConfig("no histories to summarize".into()))?;
    for h in histories {
        if h.len() != first.len() || h.iter().zip(first.iter()).any(|(a, b)| a.iteration != b.iteration) {
            return Err(QsnnError::InvalidConfig("histories cover different iterations".into()));
        }
    }
    Ok(first.len())
}

/// Per-iteration statistics over samples; robustness is summarized only
/// when every sample records it.
pub fn summarize(histories: &[&[Record]]) -> Result<Vec<SummaryRow>> {
    let len = check_aligned(histories)?;
    (0..len)
        .map(|t| {
            let losses: Vec<f64> = histories.iter().map(|h| h[t].loss).collect();
            let robustness: Option<Vec<f64>> = histories.iter().map(|h| h[t].robustness).collect();
            Ok(SummaryRow {
                iteration: histories[0][t].iteration,
                loss: sample_stats(&losses)?,
                robustness: robustness.map(|r| sample_stats(&r)).transpose()?,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrackedRow {
    pub iteration: usize,
    pub p_yes: Vec<SampleStats>,
}

pub fn summarize_tracked(histories: &[&[Record]]) -> Result<Vec<TrackedRow>> {
    let len = check_aligned(histories)?;
    let width = histories[0].first().map_or(0, |r| r.tracked_p_yes.len());
    if histories.iter().flat_map(|h| h.iter()).any(|r| r.tracked_p_yes.len() != width) {
        return Err(QsnnError::InvalidConfig("histories track different sequences".into()));
    }
    (0..len)
        .map(|t| {
            let p_yes = (0..width)
                .map(|j| sample_stats(&histories.iter().map(|h| h[t].tracked_p_yes[j]).collect::<Vec<_>>()))
                .collect::<Result<Vec<_>>>()?;
            Ok(TrackedRow {
                iteration: histories[0][t].iteration,
                p_yes,
            })
        })
        .collect()
}

fn create(path: &Path) -> Result<csv::Writer<File>> {
    let file = File::create(path).map_err(|e| QsnnError::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

fn write_rows(path: &Path, header: Vec<String>, rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let mut w = create(path)?;
    let wrap = |e: csv::Error| QsnnError::io(path, e.into());
    w.write_record(&header).map_err(wrap)?;
    for row in rows {
        w.write_record(&row).map_err(wrap)?;
    }
    w.flush().map_err(|e| QsnnError::io(path, e))
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

/// Columns: `iteration, loss, robustness, p_yes_<id>...`.
pub fn write_history(records: &[Record], tracked_ids: &[String], path: impl AsRef<Path>) -> Result<()> {
    if records.iter().any(|r| r.tracked_p_yes.len() != tracked_ids.len()) {
        return Err(QsnnError::InvalidConfig("tracked ids do not match the history".into()));
    }
    let mut header = vec!["iteration".to_string(), "loss".into(), "robustness".into()];
    header.extend(tracked_ids.iter().map(|id| format!("p_yes_{id}")));
    let rows = records.iter().map(|r| {
        let mut row = vec![r.iteration.to_string(), r.loss.to_string(), opt(r.robustness)];
        row.extend(r.tracked_p_yes.iter().map(|p| p.to_string()));
        row
    });
    write_rows(path.as_ref(), header, rows)
}

/// Columns: `iteration, mean_loss, ci95_lo, ci95_hi, var_loss,
/// mean_robustness, ci95_rob_lo, ci95_rob_hi`; robustness cells are empty
/// for models without it.
pub fn write_summary(rows: &[SummaryRow], path: impl AsRef<Path>) -> Result<()> {
    let header = [
        "iteration",
        "mean_loss",
        "ci95_lo",
        "ci95_hi",
        "var_loss",
        "mean_robustness",
        "ci95_rob_lo",
        "ci95_rob_hi",
    ]
    .map(String::from)
    .to_vec();
    let lines = rows.iter().map(|r| {
        let (lo, hi) = r.loss.ci95();
        let rob = r.robustness.map(|s| (s.mean, s.ci95()));
        vec![
            r.iteration.to_string(),
            r.loss.mean.to_string(),
            lo.to_string(),
            hi.to_string(),
            r.loss.variance.to_string(),
            opt(rob.map(|x| x.0)),
            opt(rob.map(|x| x.1 .0)),
            opt(rob.map(|x| x.1 .1)),
        ]
    });
    write_rows(path.as_ref(), header, lines)
}

/// Columns: `iteration, mean_robustness, ci95_lo, ci95_hi, var_robustness`.
pub fn write_robustness_summary(rows: &[SummaryRow], path: impl AsRef<Path>) -> Result<()> {
    let stats = rows
        .iter()
        .map(|r| r.robustness.map(|s| (r.iteration, s)))
        .collect::<Option<Vec<_>>>()
        .ok_or_else(|| QsnnError::InvalidConfig("model records no robustness".into()))?;
    let header = ["iteration", "mean_robustness", "ci95_lo", "ci95_hi", "var_robustness"]
        .map(String::from)
        .to_vec();
    let lines = stats.iter().map(|(iteration, s)| {
        let (lo, hi) = s.ci95();
        vec![
            iteration.to_string(),
            s.mean.to_string(),
            lo.to_string(),
            hi.to_string(),
            s.variance.to_string(),
        ]
    });
    write_rows(path.as_ref(), header, lines)
}

/// Columns: `iteration`, then `mean_p_yes_<id>, var_p_yes_<id>` per sequence.
pub fn write_tracked_summary(rows: &[TrackedRow], ids: &[String], path: impl AsRef<Path>) -> Result<()> {
    if rows.iter().any(|r| r.p_yes.len() != ids.len()) {
        return Err(QsnnError::InvalidConfig("tracked ids do not match the summary".into()));
    }
    let mut header = vec!["iteration".to_string()];
    for id in ids {
        header.push(format!("mean_p_yes_{id}"));
        header.push(format!("var_p_yes_{id}"));
    }
    let lines = rows.iter().map(|r| {
        let mut row = vec![r.iteration.to_string()];
        for s in &r.p_yes {
            row.push(s.mean.to_string());
            row.push(s.variance.to_string());
        }
        row
    });
    write_rows(path.as_ref(), header, lines)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::test_util::rng;
    use rand::Rng;

    fn history(losses: &[f64], rob: Option<f64>) -> Vec<Record> {
        losses
            .iter()
            .enumerate()
            .map(|(i, &loss)| Record {
                iteration: i,
                loss,
                robustness: rob,
                tracked_p_yes: vec![1.0 - loss],
            })
            .collect()
    }

    #[test]
    fn history_csv_has_a_row_per_iteration() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("h.csv");
        let h = history(&[0.5, 0.4, 0.3, 0.2], Some(0.9));
        write_history(&h, &["verse1".to_string()], &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 5);
        assert_eq!(lines[0], "iteration,loss,robustness,p_yes_verse1");
        assert_eq!(lines[1], "0,0.5,0.9,0.5");
    }

    #[test]
    fn missing_robustness_leaves_blank_cells() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        let a = history(&[0.5, 0.4], None);
        let rows = summarize(&[&a, &a]).unwrap();
        write_summary(&rows, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.lines().nth(1).unwrap().ends_with(",,,"));
        assert!(write_robustness_summary(&rows, &path).is_err());
    }

    #[test]
    fn robustness_summary_columns() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        let a = history(&[0.5, 0.4], Some(0.75));
        write_robustness_summary(&summarize(&[&a]).unwrap(), &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "iteration,mean_robustness,ci95_lo,ci95_hi,var_robustness");
        assert_eq!(lines[2], "1,0.75,0.75,0.75,0");
    }

    #[test]
    fn identical_histories_have_zero_width() {
        let a = history(&[0.5, 0.4, 0.3], Some(0.8));
        let rows = summarize(&[&a, &a]).unwrap();
        for r in rows {
            assert_eq!(r.loss.ci95_half_width, 0.0);
            assert_eq!(r.loss.variance, 0.0);
            assert_eq!(r.robustness.unwrap().ci95(), (0.8, 0.8));
        }
    }

    #[test]
    fn single_sample_has_zero_spread() {
        let s = sample_stats(&[0.3]).unwrap();
        assert_eq!((s.mean, s.variance, s.ci95_half_width), (0.3, 0.0, 0.0));
        assert!(sample_stats(&[]).is_err());
    }

    #[test]
    fn statistics_match_two_pass_recomputation() {
        let mut r = rng(5);
        let hs: Vec<Vec<Record>> = (0..100)
            .map(|_| history(&(0..6).map(|_| r.random_range(0.0..1.0)).collect::<Vec<_>>(), Some(r.random_range(0.5..1.0))))
            .collect();
        let refs: Vec<&[Record]> = hs.iter().map(|h| h.as_slice()).collect();
        let rows = summarize(&refs).unwrap();
        for (t, row) in rows.iter().enumerate() {
            // spreadsheet-style: sum, then squared deviations, then STDEV.S
            let xs: Vec<f64> = hs.iter().map(|h| h[t].loss).collect();
            let mut total = 0.0;
            for x in &xs {
                total += x;
            }
            let mean = total / 100.0;
            let mut ss = 0.0;
            for x in &xs {
                ss += (x - mean) * (x - mean);
            }
            let var = ss / 99.0;
            let half = 1.96 * var.sqrt() / 10.0;
            assert!((row.loss.mean - mean).abs() < 1e-12);
            assert!((row.loss.variance - var).abs() < 1e-12);
            assert!((row.loss.ci95().0 - (mean - half)).abs() < 1e-12);
            assert!((row.loss.ci95().1 - (mean + half)).abs() < 1e-12);
        }
        let tracked = summarize_tracked(&refs).unwrap();
        assert!((tracked[2].p_yes[0].mean - (1.0 - rows[2].loss.mean)).abs() < 1e-12);
    }

    #[test]
    fn misaligned_histories_rejected() {
        let a = history(&[0.5, 0.4], None);
        let b = history(&[0.5], None);
        assert!(summarize(&[&a, &b]).is_err());
        assert!(summarize(&[]).is_err());
    }

    #[test]
    fn unwritable_path_reports_io_error() {
        let err = write_history(&history(&[0.1], None), &["x".into()], "/no/such/dir/h.csv").unwrap_err();
        assert!(matches!(err, QsnnError::Io { .. }));
    }

    #[test]
    fn tracked_summary_columns() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let a = history(&[0.5, 0.4], None);
        let rows = summarize_tracked(&[&a]).unwrap();
        write_tracked_summary(&rows, &["n1".into()], &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().next().unwrap(), "iteration,mean_p_yes_n1,var_p_yes_n1");
        assert!(write_tracked_summary(&rows, &[], &path).is_err());
    }
}
