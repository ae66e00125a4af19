use serde::{Deserialize, Serialize};

use crate::corpus::Label;

/// Scores at or above this are classified positive.
pub const THRESHOLD: f64 = 0.5;

/// Binary classification metrics with the positive class as reference.
///
/// Ratios with an empty denominator are reported as 0. Kappa and AUC are
/// `None` when the gold labels contain a single class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub cohen_kappa: Option<f64>,
    pub auc: Option<f64>,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl MetricsReport {
    /// Metrics derivable from the confusion matrix; `auc` is left unset.
    pub fn from_counts(tp: u64, tn: u64, fp: u64, fn_: u64) -> Self {
        let n = tp + tn + fp + fn_;
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        let accuracy = ratio(tp + tn, n);
        let single_class = tp + fn_ == 0 || tn + fp == 0;
        let cohen_kappa = (!single_class).then(|| {
            let nf = n as f64;
            let expected = ((tp + fp) as f64 * (tp + fn_) as f64 + (tn + fn_) as f64 * (tn + fp) as f64)
                / (nf * nf);
            if expected == 1.0 {
                0.0
            } else {
                (accuracy - expected) / (1.0 - expected)
            }
        });
        Self { tp, tn, fp, fn_, accuracy, precision, recall, f1, cohen_kappa, auc: None }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }
}

pub fn classify(score: f64) -> Label {
    if score >= THRESHOLD {
        Label::Positive
    } else {
        Label::Negative
    }
}

/// Confusion-matrix metrics at [`THRESHOLD`] plus ROC AUC over the raw scores.
pub fn evaluate(scored: &[(f64, Label)]) -> MetricsReport {
    let (mut tp, mut tn, mut fp, mut fn_) = (0, 0, 0, 0);
    for &(score, gold) in scored {
        match (classify(score).is_positive(), gold.is_positive()) {
            (true, true) => tp += 1,
            (false, false) => tn += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
        }
    }
    let mut report = MetricsReport::from_counts(tp, tn, fp, fn_);
    report.auc = roc_auc(scored);
    report
}

/// Trapezoidal area under the ROC curve; tied scores form one step, which
/// counts each tied positive/negative pair as one half.
pub fn roc_auc(scored: &[(f64, Label)]) -> Option<f64> {
    let pos = scored.iter().filter(|(_, l)| l.is_positive()).count() as f64;
    let neg = scored.len() as f64 - pos;
    if pos == 0.0 || neg == 0.0 {
        return None;
    }
    let mut sorted: Vec<(f64, bool)> = scored.iter().map(|&(s, l)| (s, l.is_positive())).collect();
    sorted.sort_by(|a, b| b.0.total_cmp(&a.0));
    let (mut tp, mut fp) = (0.0, 0.0);
    let mut area = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let (prev_tp, prev_fp) = (tp, fp);
        let score = sorted[i].0;
        while i < sorted.len() && sorted[i].0 == score {
            if sorted[i].1 {
                tp += 1.0;
            } else {
                fp += 1.0;
            }
            i += 1;
        }
        area += (fp - prev_fp) * (tp + prev_tp) / 2.0;
    }
    Some(area / (pos * neg))
}
