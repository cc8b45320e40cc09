//! The normalization-ablation harness and the error-analysis sampling and
//! reporting workflow.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::checkpoint::Pipeline;
use crate::corpus::{Corpus, Sentiment};
use crate::embeddings::PretrainedTable;
use crate::error::{Error, Result};
use crate::evaluation::ConfusionMatrix;
use crate::training::{train_loop, TrainConfig, TrainReport};

/// The five manual error categories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCategory {
    Difficult,
    NegativeTendency,
    Advertising,
    AmbiguousLabel,
    DoubtfulLabel,
}

impl ErrorCategory {
    pub const ALL: [ErrorCategory; 5] = [
        ErrorCategory::Difficult,
        ErrorCategory::NegativeTendency,
        ErrorCategory::Advertising,
        ErrorCategory::AmbiguousLabel,
        ErrorCategory::DoubtfulLabel,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ErrorCategory::Difficult => "difficult",
            ErrorCategory::NegativeTendency => "negative_tendency",
            ErrorCategory::Advertising => "advertising",
            ErrorCategory::AmbiguousLabel => "ambiguous_label",
            ErrorCategory::DoubtfulLabel => "doubtful_label",
        }
    }

    pub fn parse(s: &str) -> Option<ErrorCategory> {
        ErrorCategory::ALL.iter().copied().find(|c| c.as_str() == s)
    }
}

/// One row of the annotation TSV. The category is filled in by hand.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotationRecord {
    pub uid: String,
    pub text: String,
    pub gold: Sentiment,
    pub predicted: Sentiment,
    pub category: Option<ErrorCategory>,
    pub note: String,
}

const TSV_HEADER: &str = "uid\ttext\tgold\tpredicted\tcategory\tnote";

/// Stratified sample of `n` tweets with model predictions filled in and
/// empty category fields, ready for manual annotation.
pub fn sample_for_annotation(
    dev: &Corpus,
    pipeline: &mut Pipeline,
    n: usize,
    seed: u64,
) -> Result<Vec<AnnotationRecord>> {
    let sample = dev.stratified_sample(n, seed)?;
    let preds = pipeline.predict_corpus(&sample.tweets)?;
    Ok(sample
        .tweets
        .iter()
        .zip(preds)
        .map(|(tweet, predicted)| AnnotationRecord {
            uid: tweet.uid.clone(),
            text: tweet.text(),
            gold: tweet.sentiment,
            predicted,
            category: None,
            note: String::new(),
        })
        .collect())
}

/// Tab-separated serialization with a header line.
pub fn serialize_annotations(records: &[AnnotationRecord]) -> String {
    let mut out = String::from(TSV_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\n",
            r.uid,
            r.text,
            r.gold,
            r.predicted,
            r.category.map(|c| c.as_str()).unwrap_or(""),
            r.note
        ));
    }
    out
}

/// Parse the annotation TSV; errors carry 1-based line numbers.
pub fn parse_annotations(text: &str) -> Result<Vec<AnnotationRecord>> {
    let mut records = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        if line.trim().is_empty() || (lineno == 1 && line == TSV_HEADER) {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 6 {
            return Err(Error::annotation(
                lineno,
                format!("expected 6 tab-separated fields, found {}", fields.len()),
            ));
        }
        let gold = Sentiment::parse(fields[2])
            .ok_or_else(|| Error::annotation(lineno, format!("bad gold label {:?}", fields[2])))?;
        let predicted = Sentiment::parse(fields[3]).ok_or_else(|| {
            Error::annotation(lineno, format!("bad predicted label {:?}", fields[3]))
        })?;
        let category = match fields[4].trim() {
            "" => None,
            s => Some(ErrorCategory::parse(s).ok_or_else(|| {
                Error::annotation(lineno, format!("unknown error category {:?}", s))
            })?),
        };
        records.push(AnnotationRecord {
            uid: fields[0].to_string(),
            text: fields[1].to_string(),
            gold,
            predicted,
            category,
            note: fields[5].to_string(),
        });
    }
    Ok(records)
}

/// Aggregates of one annotated category.
#[derive(Debug, Clone, Serialize)]
pub struct CategoryBreakdown {
    pub count: usize,
    pub accuracy: f64,
    pub confusion: ConfusionMatrix,
}

/// Counts, accuracies and restricted confusion matrices per category.
#[derive(Debug, Clone, Serialize)]
pub struct CategoryReport {
    pub total: usize,
    pub uncategorized: usize,
    pub categories: Vec<(ErrorCategory, CategoryBreakdown)>,
}

pub fn category_report(records: &[AnnotationRecord]) -> CategoryReport {
    let mut categories = Vec::new();
    for category in ErrorCategory::ALL {
        let members: Vec<&AnnotationRecord> = records
            .iter()
            .filter(|r| r.category == Some(category))
            .collect();
        let mut confusion = ConfusionMatrix::new();
        let mut correct = 0usize;
        for r in &members {
            confusion.add(r.gold, r.predicted);
            if r.gold == r.predicted {
                correct += 1;
            }
        }
        let accuracy = if members.is_empty() {
            0.0
        } else {
            correct as f64 / members.len() as f64
        };
        categories.push((
            category,
            CategoryBreakdown {
                count: members.len(),
                accuracy,
                confusion,
            },
        ));
    }
    CategoryReport {
        total: records.len(),
        uncategorized: records.iter().filter(|r| r.category.is_none()).count(),
        categories,
    }
}

impl CategoryReport {
    pub fn render(&self) -> String {
        let mut out = format!(
            "{} annotated records, {} uncategorized\n",
            self.total, self.uncategorized
        );
        for (category, breakdown) in &self.categories {
            out.push_str(&format!(
                "{:<18} count {:>4}   accuracy {:.3}\n",
                category.as_str(),
                breakdown.count,
                breakdown.accuracy
            ));
        }
        out
    }
}

/// Paired ablation result: identical runs except for the normalization flag.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AblationReport {
    pub with_normalization: TrainReport,
    pub without_normalization: TrainReport,
    pub dev_macro_f1_with: f64,
    pub dev_macro_f1_without: f64,
    pub delta: f64,
}

/// Train twice with the same seed, toggling only normalization, and report
/// both dev macro-F1 scores plus their difference.
pub fn run_ablation(
    train: &Corpus,
    dev: &Corpus,
    config: &TrainConfig,
    pretrained: &PretrainedTable,
    out_dir: &Path,
) -> Result<AblationReport> {
    let mut with_config = config.clone();
    with_config.normalize = true;
    let mut without_config = config.clone();
    without_config.normalize = false;

    let with_path = out_dir.join("with-normalization.ckpt");
    let without_path = out_dir.join("without-normalization.ckpt");
    let with_report = train_loop(train, dev, &with_config, pretrained, &with_path)?;
    let without_report = train_loop(train, dev, &without_config, pretrained, &without_path)?;

    let dev_macro_f1_with = with_report.best_dev_macro_f1;
    let dev_macro_f1_without = without_report.best_dev_macro_f1;
    Ok(AblationReport {
        with_normalization: with_report,
        without_normalization: without_report,
        dev_macro_f1_with,
        dev_macro_f1_without,
        delta: dev_macro_f1_with - dev_macro_f1_without,
    })
}
