//! Confusion matrices, class-wise precision/recall/F1 and the macro/weighted
//! aggregates. Undefined ratios (0/0) evaluate to 0 so aggregates stay total.

use serde::{Deserialize, Serialize};

use crate::corpus::Sentiment;
use crate::error::{Error, Result};

pub const NUM_CLASSES: usize = 3;

/// 3x3 counts; rows are gold classes, columns predictions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    counts: [[usize; NUM_CLASSES]; NUM_CLASSES],
}

impl ConfusionMatrix {
    pub fn new() -> ConfusionMatrix {
        ConfusionMatrix {
            counts: [[0; NUM_CLASSES]; NUM_CLASSES],
        }
    }

    /// Count (gold, predicted) pairs. Lengths must match and be non-empty.
    pub fn from_pairs(preds: &[Sentiment], golds: &[Sentiment]) -> Result<ConfusionMatrix> {
        if preds.len() != golds.len() {
            return Err(Error::InvalidInput(format!(
                "{} predictions against {} gold labels",
                preds.len(),
                golds.len()
            )));
        }
        if preds.is_empty() {
            return Err(Error::InvalidInput("nothing to evaluate".into()));
        }
        let mut cm = ConfusionMatrix::new();
        for (p, g) in preds.iter().zip(golds) {
            cm.add(*g, *p);
        }
        Ok(cm)
    }

    pub fn add(&mut self, gold: Sentiment, predicted: Sentiment) {
        self.counts[gold.index()][predicted.index()] += 1;
    }

    pub fn count(&self, gold: Sentiment, predicted: Sentiment) -> usize {
        self.counts[gold.index()][predicted.index()]
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    /// Gold instances of a class (row sum).
    pub fn support(&self, class: Sentiment) -> usize {
        self.counts[class.index()].iter().sum()
    }

    /// Predictions of a class (column sum).
    pub fn predicted(&self, class: Sentiment) -> usize {
        self.counts.iter().map(|row| row[class.index()]).sum()
    }

    pub fn correct(&self) -> usize {
        (0..NUM_CLASSES).map(|i| self.counts[i][i]).sum()
    }
}

impl Default for ConfusionMatrix {
    fn default() -> Self {
        Self::new()
    }
}

/// Precision, recall and F1 for one class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// tp/(tp+fp), tp/(tp+fn) and their harmonic mean; any 0/0 is 0.
pub fn class_prf(cm: &ConfusionMatrix, class: Sentiment) -> ClassMetrics {
    let tp = cm.count(class, class);
    let precision = ratio(tp, cm.predicted(class));
    let recall = ratio(tp, cm.support(class));
    ClassMetrics {
        precision,
        recall,
        f1: f1_from_pr(precision, recall),
    }
}

/// Harmonic mean of precision and recall; 0 when both are 0.
pub fn f1_from_pr(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Full evaluation: confusion matrix, per-class metrics and aggregates.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub confusion: ConfusionMatrix,
    pub negative: ClassMetrics,
    pub neutral: ClassMetrics,
    pub positive: ClassMetrics,
    pub macro_f1: f64,
    pub weighted_f1: f64,
    pub accuracy: f64,
}

impl EvalReport {
    pub fn from_pairs(preds: &[Sentiment], golds: &[Sentiment]) -> Result<EvalReport> {
        Ok(EvalReport::from_confusion(ConfusionMatrix::from_pairs(
            preds, golds,
        )?))
    }

    pub fn from_confusion(cm: ConfusionMatrix) -> EvalReport {
        let per_class: Vec<ClassMetrics> =
            Sentiment::ALL.iter().map(|&s| class_prf(&cm, s)).collect();
        let macro_f1 = per_class.iter().map(|m| m.f1).sum::<f64>() / NUM_CLASSES as f64;
        let total = cm.total();
        let weighted_f1 = if total == 0 {
            0.0
        } else {
            Sentiment::ALL
                .iter()
                .zip(&per_class)
                .map(|(&s, m)| cm.support(s) as f64 * m.f1)
                .sum::<f64>()
                / total as f64
        };
        let accuracy = ratio(cm.correct(), total);
        EvalReport {
            confusion: cm,
            negative: per_class[0],
            neutral: per_class[1],
            positive: per_class[2],
            macro_f1,
            weighted_f1,
            accuracy,
        }
    }

    pub fn class(&self, s: Sentiment) -> ClassMetrics {
        match s {
            Sentiment::Negative => self.negative,
            Sentiment::Neutral => self.neutral,
            Sentiment::Positive => self.positive,
        }
    }

    /// Class-wise table: rows Positive/Negative/Neutral, columns
    /// Precision/Recall/F1, plus the aggregate lines.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<10} {:>10} {:>10} {:>10}\n",
            "", "Precision", "Recall", "F1-score"
        ));
        for s in [Sentiment::Positive, Sentiment::Negative, Sentiment::Neutral] {
            let m = self.class(s);
            out.push_str(&format!(
                "{:<10} {:>10.3} {:>10.3} {:>10.3}\n",
                capitalize(s.as_str()),
                m.precision,
                m.recall,
                m.f1
            ));
        }
        out.push_str(&format!("\nmacro-F1    {:.4}\n", self.macro_f1));
        out.push_str(&format!("weighted-F1 {:.4}\n", self.weighted_f1));
        out.push_str(&format!("accuracy    {:.4}\n", self.accuracy));
        out
    }
}

fn capitalize(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().collect::<String>() + chars.as_str(),
        None => String::new(),
    }
}
