//! Horizon-wise position RMSE and per-class intention precision/recall/F1.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scenario::{GroundTruth, Intention, PredictionResult, HORIZON_LEN};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("no parsed predictions to score")]
    EmptyInput,
    #[error("confusion matrix is empty")]
    EmptyMatrix,
}

/// RMSE in meters per horizon second. Lateral is the `y` axis, longitudinal `x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PositionErrorTable {
    pub lateral: [f64; HORIZON_LEN],
    pub longitudinal: [f64; HORIZON_LEN],
    pub avg: [f64; HORIZON_LEN],
    pub samples: usize,
}

/// Running sums of squared errors; shards can be merged before finishing.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SquaredErrorSums {
    pub lateral: [f64; HORIZON_LEN],
    pub longitudinal: [f64; HORIZON_LEN],
    pub samples: usize,
}

impl SquaredErrorSums {
    pub fn add(&mut self, prediction: &PredictionResult, truth: &GroundTruth) {
        for t in 0..HORIZON_LEN {
            let (px, py) = prediction.trajectory[t];
            let (tx, ty) = truth.trajectory[t];
            self.longitudinal[t] += (px - tx).powi(2);
            self.lateral[t] += (py - ty).powi(2);
        }
        self.samples += 1;
    }

    pub fn merge(&mut self, other: &SquaredErrorSums) {
        for t in 0..HORIZON_LEN {
            self.lateral[t] += other.lateral[t];
            self.longitudinal[t] += other.longitudinal[t];
        }
        self.samples += other.samples;
    }

    pub fn finish(&self) -> Result<PositionErrorTable, MetricsError> {
        if self.samples == 0 {
            return Err(MetricsError::EmptyInput);
        }
        let n = self.samples as f64;
        let lateral = self.lateral.map(|s| (s / n).sqrt());
        let longitudinal = self.longitudinal.map(|s| (s / n).sqrt());
        let avg = std::array::from_fn(|t| (lateral[t] + longitudinal[t]) / 2.0);
        Ok(PositionErrorTable { lateral, longitudinal, avg, samples: self.samples })
    }
}

pub fn rmse_table<'a, I>(pairs: I) -> Result<PositionErrorTable, MetricsError>
where
    I: IntoIterator<Item = (&'a PredictionResult, &'a GroundTruth)>,
{
    let mut sums = SquaredErrorSums::default();
    for (p, t) in pairs {
        sums.add(p, t);
    }
    sums.finish()
}

/// Counts indexed `[truth][prediction]` over KL, LC, RC. Unparseable
/// responses are kept out of the matrix and counted on their own.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; 3]; 3],
    pub parse_failures: u64,
}

impl ConfusionMatrix {
    pub fn add(&mut self, truth: Intention, prediction: Option<Intention>) {
        match prediction {
            Some(p) => self.counts[truth.index()][p.index()] += 1,
            None => self.parse_failures += 1,
        }
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) {
        for i in 0..3 {
            for j in 0..3 {
                self.counts[i][j] += other.counts[i][j];
            }
        }
        self.parse_failures += other.parse_failures;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }
}

/// Percentages in `[0, 100]`, unrounded. An undefined ratio is reported as 0
/// with the matching flag set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntentionReport {
    pub precision: [f64; 3],
    pub recall: [f64; 3],
    pub f1: [f64; 3],
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub precision_undefined: [bool; 3],
    pub recall_undefined: [bool; 3],
    pub parse_failures: u64,
}

fn ratio(num: u64, den: u64) -> (f64, bool) {
    if den == 0 {
        (0.0, true)
    } else {
        (100.0 * num as f64 / den as f64, false)
    }
}

pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Unweighted mean over the three classes.
pub fn macro_average(per_class: &[f64; 3]) -> f64 {
    per_class.iter().sum::<f64>() / 3.0
}

pub fn intention_report(m: &ConfusionMatrix) -> Result<IntentionReport, MetricsError> {
    if m.total() == 0 {
        return Err(MetricsError::EmptyMatrix);
    }
    let mut r = IntentionReport {
        precision: [0.0; 3],
        recall: [0.0; 3],
        f1: [0.0; 3],
        macro_precision: 0.0,
        macro_recall: 0.0,
        macro_f1: 0.0,
        precision_undefined: [false; 3],
        recall_undefined: [false; 3],
        parse_failures: m.parse_failures,
    };
    for c in 0..3 {
        let tp = m.counts[c][c];
        let predicted: u64 = (0..3).map(|t| m.counts[t][c]).sum();
        let actual: u64 = m.counts[c].iter().sum();
        (r.precision[c], r.precision_undefined[c]) = ratio(tp, predicted);
        (r.recall[c], r.recall_undefined[c]) = ratio(tp, actual);
        r.f1[c] = f1_score(r.precision[c], r.recall[c]);
    }
    r.macro_precision = macro_average(&r.precision);
    r.macro_recall = macro_average(&r.recall);
    r.macro_f1 = macro_average(&r.f1);
    Ok(r)
}

/// Relative change `100 (attacked − clean) / clean`; `None` when clean is 0.
pub fn degradation(clean: f64, attacked: f64) -> Option<f64> {
    if clean == 0.0 {
        None
    } else {
        Some(100.0 * (attacked - clean) / clean)
    }
}

/// Integer percent with an explicit sign, e.g. `+29%`, `-12%`, `0%`, `n/a`.
pub fn format_degradation(pct: Option<f64>) -> String {
    match pct {
        None => "n/a".to_string(),
        Some(p) => {
            let r = p.round() as i64;
            match r.signum() {
                1 => format!("+{r}%"),
                -1 => format!("-{}%", r.unsigned_abs()),
                _ => "0%".to_string(),
            }
        }
    }
}

/// Per-cell relative change between two position tables.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PositionDegradation {
    pub lateral: [Option<f64>; HORIZON_LEN],
    pub longitudinal: [Option<f64>; HORIZON_LEN],
    pub avg: [Option<f64>; HORIZON_LEN],
}

impl PositionErrorTable {
    pub fn degradation(&self, attacked: &PositionErrorTable) -> PositionDegradation {
        let d = |c: &[f64; HORIZON_LEN], a: &[f64; HORIZON_LEN]| std::array::from_fn(|t| degradation(c[t], a[t]));
        PositionDegradation {
            lateral: d(&self.lateral, &attacked.lateral),
            longitudinal: d(&self.longitudinal, &attacked.longitudinal),
            avg: d(&self.avg, &attacked.avg),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntentionDegradation {
    pub precision: [Option<f64>; 3],
    pub recall: [Option<f64>; 3],
    pub f1: [Option<f64>; 3],
    pub macro_precision: Option<f64>,
    pub macro_recall: Option<f64>,
    pub macro_f1: Option<f64>,
}

impl IntentionReport {
    pub fn degradation(&self, attacked: &IntentionReport) -> IntentionDegradation {
        let d = |c: &[f64; 3], a: &[f64; 3]| std::array::from_fn(|i| degradation(c[i], a[i]));
        IntentionDegradation {
            precision: d(&self.precision, &attacked.precision),
            recall: d(&self.recall, &attacked.recall),
            f1: d(&self.f1, &attacked.f1),
            macro_precision: degradation(self.macro_precision, attacked.macro_precision),
            macro_recall: degradation(self.macro_recall, attacked.macro_recall),
            macro_f1: degradation(self.macro_f1, attacked.macro_f1),
        }
    }
}

/// One labelled row group of a report table, e.g. "No attack".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionMetrics {
    pub label: String,
    pub position: Option<PositionErrorTable>,
    pub intention: Option<IntentionReport>,
    pub confusion: ConfusionMatrix,
}

/// Renders the position and intention tables. Rows after the first are
/// annotated with their change relative to the first at the 4 s average and
/// the macro F1.
pub fn render_tables(rows: &[ConditionMetrics]) -> String {
    let width = rows.iter().map(|r| r.label.len()).max().unwrap_or(0).max(9);
    let mut out = String::new();
    let clean = rows.first();

    let _ = writeln!(out, "RMSE of predicted positions (m)");
    let _ = writeln!(out, "{:width$}  {:12}  {:>6}  {:>6}  {:>6}  {:>6}", "", "", "1s", "2s", "3s", "4s");
    for row in rows {
        let Some(p) = &row.position else {
            let _ = writeln!(out, "{:width$}  (no parsed predictions)", row.label);
            continue;
        };
        let note = match (clean.and_then(|c| c.position.as_ref()), std::ptr::eq(row, &rows[0])) {
            (Some(c), false) => format!(" ({})", format_degradation(degradation(c.avg[3], p.avg[3]))),
            _ => String::new(),
        };
        for (i, (name, vals)) in
            [("Lateral", &p.lateral), ("Longitudinal", &p.longitudinal), ("Avg.", &p.avg)].into_iter().enumerate()
        {
            let label = if i == 0 { row.label.as_str() } else { "" };
            let _ = write!(out, "{label:width$}  {name:12}");
            for v in vals {
                let _ = write!(out, "  {v:>6.2}");
            }
            if i == 2 {
                out.push_str(&note);
            }
            out.push('\n');
        }
    }

    out.push('\n');
    let _ = writeln!(out, "Intention accuracy (%)");
    let _ = writeln!(out, "{:width$}  {:9}  {:>4}  {:>4}  {:>4}  {:>10}", "", "", "KL", "LC", "RC", "Macro avg.");
    for row in rows {
        let Some(r) = &row.intention else {
            let _ = writeln!(out, "{:width$}  (no parsed predictions)", row.label);
            continue;
        };
        let note = match (clean.and_then(|c| c.intention.as_ref()), std::ptr::eq(row, &rows[0])) {
            (Some(c), false) => format!(" ({})", format_degradation(degradation(c.macro_f1, r.macro_f1))),
            _ => String::new(),
        };
        for (i, (name, vals, m)) in [
            ("Precision", &r.precision, r.macro_precision),
            ("Recall", &r.recall, r.macro_recall),
            ("F1", &r.f1, r.macro_f1),
        ]
        .into_iter()
        .enumerate()
        {
            let label = if i == 0 { row.label.as_str() } else { "" };
            let _ = write!(out, "{label:width$}  {name:9}");
            for v in vals {
                let _ = write!(out, "  {:>4.0}", v);
            }
            let _ = write!(out, "  {m:>10.0}");
            if i == 2 {
                out.push_str(&note);
            }
            out.push('\n');
        }
        if r.parse_failures > 0 {
            let _ = writeln!(out, "{:width$}  unparseable responses: {}", "", r.parse_failures);
        }
    }
    out
}
