//! Confusion matrices, accuracy and support-weighted precision, recall and
//! F1, plus JSON / fixed-width text reports.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rows are gold classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn classes(&self) -> usize {
        self.counts.len()
    }

    pub fn get(&self, gold: usize, predicted: usize) -> u64 {
        self.counts[gold][predicted]
    }

    pub fn rows(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes()).map(|c| self.counts[c][c]).sum()
    }
}

pub fn confusion(gold: &[usize], predicted: &[usize], classes: usize) -> Result<ConfusionMatrix> {
    if gold.len() != predicted.len() {
        return Err(Error::Contract(format!(
            "{} gold labels but {} predictions",
            gold.len(),
            predicted.len()
        )));
    }
    let mut counts = vec![vec![0; classes]; classes];
    for (&g, &p) in gold.iter().zip(predicted) {
        if g >= classes || p >= classes {
            return Err(Error::Contract(format!(
                "label pair ({g}, {p}) out of range for {classes} classes"
            )));
        }
        counts[g][p] += 1;
    }
    Ok(ConfusionMatrix { counts })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
    /// Set when the class was never predicted, so precision is 0 by convention.
    pub precision_undefined: bool,
    /// Set when the class never occurs in the gold labels.
    pub recall_undefined: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub per_class: Vec<ClassMetrics>,
}

fn ratio(num: u64, den: u64) -> (f64, bool) {
    if den == 0 {
        (0.0, true)
    } else {
        (num as f64 / den as f64, false)
    }
}

pub fn weighted_metrics(cm: &ConfusionMatrix) -> Result<Metrics> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::Contract("no evaluated documents".into()));
    }
    let c = cm.classes();
    let per_class: Vec<ClassMetrics> = (0..c)
        .map(|k| {
            let tp = cm.get(k, k);
            let predicted: u64 = (0..c).map(|g| cm.get(g, k)).sum();
            let support: u64 = cm.rows()[k].iter().sum();
            let (precision, precision_undefined) = ratio(tp, predicted);
            let (recall, recall_undefined) = ratio(tp, support);
            let f1 = if precision + recall > 0.0 {
                2.0 * precision * recall / (precision + recall)
            } else {
                0.0
            };
            ClassMetrics {
                precision,
                recall,
                f1,
                support,
                precision_undefined,
                recall_undefined,
            }
        })
        .collect();
    let n = total as f64;
    let weighted = |f: fn(&ClassMetrics) -> f64| {
        per_class
            .iter()
            .map(|m| m.support as f64 / n * f(m))
            .sum::<f64>()
    };
    Ok(Metrics {
        accuracy: cm.trace() as f64 / n,
        precision: weighted(|m| m.precision),
        recall: weighted(|m| m.recall),
        f1: weighted(|m| m.f1),
        per_class,
    })
}

/// What was evaluated.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunInfo {
    pub dataset: String,
    pub features: String,
    pub model: String,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub run: RunInfo,
    pub class_names: Vec<String>,
    pub metrics: Metrics,
    pub confusion: ConfusionMatrix,
}

/// Evaluate predictions against gold labels; every document must be labeled.
pub fn report(
    run: RunInfo,
    class_names: &[String],
    gold: &[Option<usize>],
    predicted: &[usize],
) -> Result<EvalReport> {
    let gold = gold
        .iter()
        .enumerate()
        .map(|(i, g)| g.ok_or_else(|| Error::Contract(format!("document {i} has no gold label"))))
        .collect::<Result<Vec<_>>>()?;
    let confusion = confusion(&gold, predicted, class_names.len())?;
    let metrics = weighted_metrics(&confusion)?;
    Ok(EvalReport {
        run,
        class_names: class_names.to_vec(),
        metrics,
        confusion,
    })
}

/// One table row per (features, model) pair and four columns A/P/R/F per
/// dataset, both in order of first appearance. Values shown with two
/// decimals; missing cells show `-`.
pub fn render_table(reports: &[EvalReport]) -> String {
    let mut datasets: Vec<&str> = Vec::new();
    let mut rows: Vec<(&str, &str)> = Vec::new();
    for r in reports {
        if !datasets.contains(&r.run.dataset.as_str()) {
            datasets.push(&r.run.dataset);
        }
        let key = (r.run.features.as_str(), r.run.model.as_str());
        if !rows.contains(&key) {
            rows.push(key);
        }
    }
    let labels: Vec<String> = rows
        .iter()
        .map(|(f, m)| if f.is_empty() { m.to_string() } else { format!("{m} ({f})") })
        .collect();
    let first = labels.iter().map(String::len).max().unwrap_or(0).max(5);
    const CELL: usize = 6;
    let group = 4 * CELL;

    let mut out = String::new();
    let _ = write!(out, "{:first$}", "");
    for d in &datasets {
        let _ = write!(out, " |{:^group$}", d);
    }
    out.push('\n');
    let _ = write!(out, "{:first$}", "Model");
    for _ in &datasets {
        out.push_str(" |");
        for h in ["A", "P", "R", "F"] {
            let _ = write!(out, "{h:>CELL$}");
        }
    }
    out.push('\n');
    out.push_str(&"-".repeat(first));
    for _ in &datasets {
        out.push_str(&format!("-+{}", "-".repeat(group)));
    }
    out.push('\n');
    for ((f, m), label) in rows.iter().zip(&labels) {
        let _ = write!(out, "{label:first$}");
        for d in &datasets {
            out.push_str(" |");
            let hit = reports
                .iter()
                .find(|r| r.run.dataset == *d && r.run.features == *f && r.run.model == *m);
            match hit {
                Some(r) => {
                    let m = &r.metrics;
                    for v in [m.accuracy, m.precision, m.recall, m.f1] {
                        let _ = write!(out, "{v:>CELL$.2}");
                    }
                }
                None => {
                    for _ in 0..4 {
                        let _ = write!(out, "{:>CELL$}", "-");
                    }
                }
            }
        }
        out.push('\n');
    }
    out
}

/// Write `<stem>.json` (all reports, full precision) and `<stem>.txt` (the
/// text table). Returns both paths.
pub fn write_reports(reports: &[EvalReport], dir: impl AsRef<Path>, stem: &str) -> Result<(PathBuf, PathBuf)> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let json_path = dir.join(format!("{stem}.json"));
    let text_path = dir.join(format!("{stem}.txt"));
    let mut json = serde_json::to_string_pretty(reports)?;
    json.push('\n');
    fs::write(&json_path, json).map_err(|e| Error::io(&json_path, e))?;
    fs::write(&text_path, render_table(reports)).map_err(|e| Error::io(&text_path, e))?;
    Ok((json_path, text_path))
}
