use super::EvalError;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    #[default]
    Accuracy,
    MicroF1,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::Accuracy => "accuracy",
            Metric::MicroF1 => "micro_f1",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "accuracy" | "acc" => Ok(Metric::Accuracy),
            "micro_f1" | "microf1" => Ok(Metric::MicroF1),
            _ => Err(EvalError::UnknownMetric(s.to_string())),
        }
    }
}

/// Single-label metric. Pooled micro-F1 over single-label multiclass
/// predictions has TP = correct and FP = FN = wrong, so it equals accuracy.
pub fn metrics(preds: &[usize], labels: &[usize], kind: Metric) -> Result<f64, EvalError> {
    if preds.len() != labels.len() {
        return Err(EvalError::LengthMismatch {
            left: preds.len(),
            right: labels.len(),
        });
    }
    if preds.is_empty() {
        return Err(EvalError::Empty);
    }
    let correct = preds.iter().zip(labels).filter(|(p, l)| p == l).count();
    let acc = correct as f64 / preds.len() as f64;
    Ok(match kind {
        Metric::Accuracy | Metric::MicroF1 => acc,
    })
}

/// Micro-F1 with TP/FP/FN pooled over every (node, label) pair.
pub fn multilabel_micro_f1(preds: &[Vec<bool>], truth: &[Vec<bool>]) -> Result<f64, EvalError> {
    if preds.len() != truth.len() {
        return Err(EvalError::LengthMismatch {
            left: preds.len(),
            right: truth.len(),
        });
    }
    let (mut tp, mut fp, mut fneg) = (0usize, 0usize, 0usize);
    for (p, t) in preds.iter().zip(truth) {
        if p.len() != t.len() {
            return Err(EvalError::LengthMismatch {
                left: p.len(),
                right: t.len(),
            });
        }
        for (&a, &b) in p.iter().zip(t) {
            match (a, b) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fneg += 1,
                (false, false) => {}
            }
        }
    }
    let denom = 2 * tp + fp + fneg;
    Ok(if denom == 0 { 1.0 } else { 2.0 * tp as f64 / denom as f64 })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub class: usize,
    pub support: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Precision, recall and F1 per class; undefined ratios are reported as 0.
pub fn per_class_report(preds: &[usize], labels: &[usize], n_classes: usize) -> Vec<ClassReport> {
    (0..n_classes)
        .map(|c| {
            let tp = preds.iter().zip(labels).filter(|&(&p, &l)| p == c && l == c).count() as f64;
            let predicted = preds.iter().filter(|&&p| p == c).count() as f64;
            let support = labels.iter().filter(|&&l| l == c).count();
            let ratio = |a: f64, b: f64| if b > 0.0 { a / b } else { 0.0 };
            let precision = ratio(tp, predicted);
            let recall = ratio(tp, support as f64);
            ClassReport {
                class: c,
                support,
                precision,
                recall,
                f1: ratio(2.0 * precision * recall, precision + recall),
            }
        })
        .collect()
}
