use std::fmt::Write;

use crate::error::{Error, Result};
use crate::fusion::ConfusionMatrix;

/// Accuracy summary of one system on a labelled test set.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    pub system_id: String,
    pub class_names: Vec<String>,
    pub confusion: ConfusionMatrix,
    /// `confusion[c][c] / row_sum(c)`, or 0 for a class with no test clips.
    pub per_class_accuracy: Vec<f64>,
    /// Unweighted mean of `per_class_accuracy`.
    pub average_accuracy: f64,
    /// Classes that had no test clips.
    pub empty_classes: Vec<usize>,
}

impl EvaluationReport {
    pub fn n_clips(&self) -> u64 {
        self.confusion.total()
    }
}

pub fn evaluate(
    system_id: impl Into<String>,
    predictions: &[usize],
    truths: &[usize],
    class_names: &[String],
) -> Result<EvaluationReport> {
    if predictions.is_empty() {
        return Err(Error::invalid("nothing to evaluate"));
    }
    let confusion = ConfusionMatrix::from_predictions(truths, predictions, class_names.len())?;
    let mut empty_classes = Vec::new();
    let per_class_accuracy: Vec<f64> = confusion
        .class_accuracies()
        .into_iter()
        .enumerate()
        .map(|(c, a)| {
            a.unwrap_or_else(|| {
                empty_classes.push(c);
                0.0
            })
        })
        .collect();
    let average_accuracy = per_class_accuracy.iter().sum::<f64>() / per_class_accuracy.len() as f64;
    Ok(EvaluationReport {
        system_id: system_id.into(),
        class_names: class_names.to_vec(),
        confusion,
        per_class_accuracy,
        average_accuracy,
        empty_classes,
    })
}

/// Row percentages in hundredths, rounded by largest remainder so every
/// non-empty row sums to exactly 100.00.
fn row_hundredths(row: &[u64]) -> Vec<u64> {
    let total: u64 = row.iter().sum();
    if total == 0 {
        return vec![0; row.len()];
    }
    let exact: Vec<(u64, u64)> = row
        .iter()
        .map(|&n| ((n * 10_000) / total, (n * 10_000) % total))
        .collect();
    let mut out: Vec<u64> = exact.iter().map(|&(q, _)| q).collect();
    let missing = 10_000 - out.iter().sum::<u64>();
    let mut order: Vec<usize> = (0..row.len()).collect();
    order.sort_by(|&a, &b| exact[b].1.cmp(&exact[a].1).then(a.cmp(&b)));
    for &i in order.iter().take(missing as usize) {
        out[i] += 1;
    }
    out
}

fn hundredths(v: u64) -> String {
    format!("{}.{:02}", v / 100, v % 100)
}

fn pct(x: f64) -> String {
    format!("{:.2}", 100.0 * x)
}

/// Class-labelled confusion matrix as row percentages.
pub fn render_confusion(report: &EvaluationReport) -> String {
    let label_w = report.class_names.iter().map(String::len).max().unwrap_or(0).max(5);
    let col_w = report.class_names.iter().map(String::len).max().unwrap_or(0).max(6) + 2;
    let mut out = String::new();
    let _ = write!(out, "{:label_w$}", "truth");
    for name in &report.class_names {
        let _ = write!(out, "{name:>col_w$}");
    }
    out.push('\n');
    for (c, name) in report.class_names.iter().enumerate() {
        let row: Vec<u64> = report.confusion.counts.row(c).to_vec();
        let _ = write!(out, "{name:label_w$}");
        for v in row_hundredths(&row) {
            let _ = write!(out, "{:>col_w$}", hundredths(v));
        }
        out.push('\n');
    }
    out
}

/// Full text report: average, per-class accuracies and the confusion matrix.
pub fn render_report(report: &EvaluationReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "system: {}", report.system_id);
    let _ = writeln!(out, "clips: {}", report.n_clips());
    let _ = writeln!(
        out,
        "average accuracy: {} % (unweighted mean over {} classes)",
        pct(report.average_accuracy),
        report.class_names.len()
    );
    let width = report.class_names.iter().map(String::len).max().unwrap_or(0);
    out.push_str("per-class accuracy (%):\n");
    for (c, name) in report.class_names.iter().enumerate() {
        let flag = if report.empty_classes.contains(&c) { "  (no test clips)" } else { "" };
        let _ = writeln!(out, "  {name:width$}  {:>6}{flag}", pct(report.per_class_accuracy[c]));
    }
    out.push_str("confusion (% of truth row; rows truth, columns output):\n");
    out.push_str(&render_confusion(report));
    out
}

/// One row per system: average then per-class accuracies, in percent.
pub fn render_table(reports: &[EvaluationReport]) -> String {
    let Some(first) = reports.first() else {
        return String::new();
    };
    let sys_w = reports.iter().map(|r| r.system_id.len()).max().unwrap_or(0).max(6);
    let col_w = first.class_names.iter().map(String::len).max().unwrap_or(0).max(6) + 2;
    let mut out = String::new();
    let _ = write!(out, "{:sys_w$}{:>col_w$}", "system", "Avg.");
    for name in &first.class_names {
        let _ = write!(out, "{name:>col_w$}");
    }
    out.push('\n');
    for r in reports {
        let _ = write!(out, "{:sys_w$}{:>col_w$}", r.system_id, pct(r.average_accuracy));
        for a in &r.per_class_accuracy {
            let _ = write!(out, "{:>col_w$}", pct(*a));
        }
        out.push('\n');
    }
    out
}
