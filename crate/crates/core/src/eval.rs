//! Gold annotations, confusion matrices and precision/recall/F1.
//!
//! Evaluation is per sentence. Gold sentences labelled opinionated that get
//! no polar prediction are extraction misses: they stay out of the matrix and
//! only count against the detection-recall variant.

use std::collections::{BTreeMap, HashSet};
use std::fmt::{self, Write as _};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classify::{fuse, Label, SentenceResult};
use crate::extract::SentenceType;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("line {line}: ({review_id}, {sentence_index}) is already annotated")]
    DuplicateKey {
        line: usize,
        review_id: String,
        sentence_index: usize,
    },
    #[error("unknown report format {0:?} (expected text or structured)")]
    UnknownFormat(String),
}

/// The matrix classes, in display order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Polarity {
    Neutral,
    Positive,
    Negative,
}

impl Polarity {
    pub const ALL: [Polarity; 3] = [Polarity::Neutral, Polarity::Positive, Polarity::Negative];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn of(label: Label) -> Option<Polarity> {
        match label {
            Label::Neutral => Some(Polarity::Neutral),
            Label::Positive => Some(Polarity::Positive),
            Label::Negative => Some(Polarity::Negative),
            Label::Unclassified | Label::NonOpinionated => None,
        }
    }
}

impl fmt::Display for Polarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GoldLabel {
    Positive,
    Neutral,
    Negative,
    NonOpinionated,
}

impl GoldLabel {
    pub fn polarity(self) -> Option<Polarity> {
        match self {
            GoldLabel::Positive => Some(Polarity::Positive),
            GoldLabel::Neutral => Some(Polarity::Neutral),
            GoldLabel::Negative => Some(Polarity::Negative),
            GoldLabel::NonOpinionated => None,
        }
    }
}

impl From<Polarity> for GoldLabel {
    fn from(p: Polarity) -> Self {
        match p {
            Polarity::Neutral => GoldLabel::Neutral,
            Polarity::Positive => GoldLabel::Positive,
            Polarity::Negative => GoldLabel::Negative,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldAnnotation {
    pub review_id: String,
    pub sentence_index: usize,
    pub gold_label: GoldLabel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_type: Option<SentenceType>,
    #[serde(default)]
    pub annotator: String,
}

/// Parses line-delimited gold records. Blank lines are skipped.
pub fn parse_gold(src: &str) -> Result<Vec<GoldAnnotation>, EvalError> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (i, line) in src.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let gold: GoldAnnotation = serde_json::from_str(line)
            .map_err(|e| EvalError::Parse { line: i + 1, reason: e.to_string() })?;
        if !seen.insert((gold.review_id.clone(), gold.sentence_index)) {
            return Err(EvalError::DuplicateKey {
                line: i + 1,
                review_id: gold.review_id,
                sentence_index: gold.sentence_index,
            });
        }
        out.push(gold);
    }
    Ok(out)
}

pub fn load_gold(path: impl AsRef<Path>) -> Result<Vec<GoldAnnotation>, EvalError> {
    let path = path.as_ref();
    let src = std::fs::read_to_string(path)
        .map_err(|source| EvalError::Io { path: path.display().to_string(), source })?;
    parse_gold(&src)
}

/// A sentence-level prediction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub review_id: String,
    pub sentence_index: usize,
    pub label: Label,
}

/// One prediction per sentence, multi-event sentences reduced by [`fuse`].
pub fn predictions_from_results(results: &[SentenceResult]) -> Vec<Prediction> {
    results
        .iter()
        .map(|s| Prediction {
            review_id: s.review_id.clone(),
            sentence_index: s.sentence_index,
            label: s.fused(),
        })
        .collect()
}

/// An exact fraction. A zero denominator means the metric is undefined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ratio {
    pub num: u64,
    pub den: u64,
}

impl Ratio {
    pub fn new(num: u64, den: u64) -> Self {
        Ratio { num, den }
    }

    pub fn value(self) -> Option<f64> {
        (self.den > 0).then(|| self.num as f64 / self.den as f64)
    }
}

impl fmt::Display for Ratio {
    /// Two decimals by default, or `undefined`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.value() {
            Some(v) => write!(f, "{:.*}", f.precision().unwrap_or(2), v),
            None => f.write_str("undefined"),
        }
    }
}

/// Harmonic mean, undefined if either side is undefined or both are zero.
pub fn f1(p: Option<f64>, r: Option<f64>) -> Option<f64> {
    let (p, r) = (p?, r?);
    (p + r > 0.0).then(|| 2.0 * p * r / (p + r))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: Polarity,
    pub precision: Ratio,
    pub classification_recall: Ratio,
    pub detection_recall: Ratio,
    pub f1: Option<f64>,
    pub detection_f1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Averages {
    pub precision: Option<f64>,
    pub classification_recall: Option<f64>,
    pub detection_recall: Option<f64>,
    pub f1: Option<f64>,
    pub detection_f1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MicroMetrics {
    pub precision: Ratio,
    pub classification_recall: Ratio,
    pub detection_recall: Ratio,
    pub f1: Option<f64>,
    pub detection_f1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// `confusion[predicted][actual]`, indexed by [`Polarity::index`].
    pub confusion: [[u64; 3]; 3],
    /// Gold-opinionated sentences without a polar prediction, per gold class.
    pub extraction_misses: [u64; 3],
    /// The part of `extraction_misses` where events were found but no rule fired.
    pub unclassified: u64,
    pub gold_total: u64,
    pub gold_opinionated: u64,
    pub gold_non_opinionated: u64,
    /// Gold non-opinionated sentences that received a polar prediction.
    pub spurious: u64,
    /// Sentences predicted opinionated (or unclassified) with no gold annotation.
    pub unmatched_predictions: u64,
    pub per_class: Vec<ClassMetrics>,
    pub micro: MicroMetrics,
    pub macro_avg: Averages,
}

impl EvalReport {
    pub fn matrix_total(&self) -> u64 {
        self.confusion.iter().flatten().sum()
    }

    pub fn total_misses(&self) -> u64 {
        self.extraction_misses.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..3).map(|i| self.confusion[i][i]).sum()
    }

    /// Correct over matched polar sentences.
    pub fn accuracy(&self) -> Ratio {
        Ratio::new(self.trace(), self.matrix_total())
    }

    pub fn from_counts(
        confusion: [[u64; 3]; 3],
        extraction_misses: [u64; 3],
        unclassified: u64,
        gold_non_opinionated: u64,
        spurious: u64,
        unmatched_predictions: u64,
    ) -> Self {
        let col = |a: usize| (0..3).map(|p| confusion[p][a]).sum::<u64>();
        let row = |p: usize| confusion[p].iter().sum::<u64>();
        let per_class: Vec<ClassMetrics> = Polarity::ALL
            .iter()
            .map(|&class| {
                let i = class.index();
                let hit = confusion[i][i];
                let precision = Ratio::new(hit, row(i));
                let classification_recall = Ratio::new(hit, col(i));
                let detection_recall = Ratio::new(hit, col(i) + extraction_misses[i]);
                ClassMetrics {
                    class,
                    precision,
                    classification_recall,
                    detection_recall,
                    f1: f1(precision.value(), classification_recall.value()),
                    detection_f1: f1(precision.value(), detection_recall.value()),
                }
            })
            .collect();

        let total: u64 = confusion.iter().flatten().sum();
        let trace: u64 = (0..3).map(|i| confusion[i][i]).sum();
        let misses: u64 = extraction_misses.iter().sum();
        let precision = Ratio::new(trace, total);
        let classification_recall = Ratio::new(trace, total);
        let detection_recall = Ratio::new(trace, total + misses);
        let micro = MicroMetrics {
            precision,
            classification_recall,
            detection_recall,
            f1: f1(precision.value(), classification_recall.value()),
            detection_f1: f1(precision.value(), detection_recall.value()),
        };

        let mean = |get: &dyn Fn(&ClassMetrics) -> Option<f64>| {
            let vals: Vec<f64> = per_class.iter().filter_map(get).collect();
            (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
        };
        let macro_avg = Averages {
            precision: mean(&|m| m.precision.value()),
            classification_recall: mean(&|m| m.classification_recall.value()),
            detection_recall: mean(&|m| m.detection_recall.value()),
            f1: mean(&|m| m.f1),
            detection_f1: mean(&|m| m.detection_f1),
        };

        let gold_opinionated = total + misses;
        EvalReport {
            confusion,
            extraction_misses,
            unclassified,
            gold_total: gold_opinionated + gold_non_opinionated,
            gold_opinionated,
            gold_non_opinionated,
            spurious,
            unmatched_predictions,
            per_class,
            micro,
            macro_avg,
        }
    }
}

/// Scores sentence predictions against gold. Several predictions for one
/// sentence are fused first, so input order never matters.
pub fn evaluate(predictions: &[Prediction], gold: &[GoldAnnotation]) -> EvalReport {
    let mut by_key: BTreeMap<(&str, usize), Vec<Label>> = BTreeMap::new();
    for p in predictions {
        by_key.entry((p.review_id.as_str(), p.sentence_index)).or_default().push(p.label);
    }
    let predicted: BTreeMap<(&str, usize), Label> = by_key
        .into_iter()
        .map(|(k, labels)| {
            // fuse() would turn an all-NonOpinionated group into Unclassified.
            let label = if labels.iter().all(|l| *l == Label::NonOpinionated) {
                Label::NonOpinionated
            } else {
                fuse(labels.into_iter().filter(|l| *l != Label::NonOpinionated))
            };
            (k, label)
        })
        .collect();

    let mut confusion = [[0u64; 3]; 3];
    let mut misses = [0u64; 3];
    let mut unclassified = 0;
    let mut non_op = 0;
    let mut spurious = 0;
    let mut matched = HashSet::new();
    for g in gold {
        let key = (g.review_id.as_str(), g.sentence_index);
        let label = predicted.get(&key).copied();
        if label.is_some() {
            matched.insert(key);
        }
        let pred = label.and_then(Polarity::of);
        match (g.gold_label.polarity(), pred) {
            (Some(actual), Some(p)) => confusion[p.index()][actual.index()] += 1,
            (Some(actual), None) => {
                misses[actual.index()] += 1;
                if label == Some(Label::Unclassified) {
                    unclassified += 1;
                }
            }
            (None, p) => {
                non_op += 1;
                if p.is_some() {
                    spurious += 1;
                }
            }
        }
    }
    let unmatched = predicted
        .iter()
        .filter(|(k, l)| !matched.contains(*k) && **l != Label::NonOpinionated)
        .count() as u64;
    EvalReport::from_counts(confusion, misses, unclassified, non_op, spurious, unmatched)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Text,
    Structured,
}

impl FromStr for ReportFormat {
    type Err = EvalError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "text" => Ok(ReportFormat::Text),
            "structured" | "json" | "jsonl" => Ok(ReportFormat::Structured),
            _ => Err(EvalError::UnknownFormat(s.to_string())),
        }
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "undefined".to_string(), |v| format!("{v:.2}"))
}

pub fn render(report: &EvalReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Structured => {
            let mut s = serde_json::to_string(report).expect("report serializes");
            s.push('\n');
            s
        }
        ReportFormat::Text => render_text(report),
    }
}

fn render_text(r: &EvalReport) -> String {
    let mut out = String::new();
    let names = Polarity::ALL.map(|p| p.to_string());
    let _ = writeln!(out, "{:<18}{:>10}{:>10}{:>10}", "Predicted \\ Actual", names[0], names[1], names[2]);
    for p in Polarity::ALL {
        let row = r.confusion[p.index()];
        let _ = writeln!(out, "{:<18}{:>10}{:>10}{:>10}", names[p.index()], row[0], row[1], row[2]);
    }
    let m = r.extraction_misses;
    let _ = writeln!(out, "{:<18}{:>10}{:>10}{:>10}", "(missed)", m[0], m[1], m[2]);
    out.push('\n');
    let _ = writeln!(
        out,
        "gold sentences: {} ({} opinionated, {} non-opinionated); in matrix: {}",
        r.gold_total,
        r.gold_opinionated,
        r.gold_non_opinionated,
        r.matrix_total()
    );
    let _ = writeln!(
        out,
        "extraction misses: {} ({} unclassified); spurious: {}; unmatched predictions: {}",
        r.total_misses(),
        r.unclassified,
        r.spurious,
        r.unmatched_predictions
    );
    out.push('\n');
    let _ = writeln!(out, "{:<10}{:>10}{:>10}{:>10}{:>10}{:>10}", "class", "P", "R", "F1", "R(det)", "F1(det)");
    for c in &r.per_class {
        let _ = writeln!(
            out,
            "{:<10}{:>10}{:>10}{:>10}{:>10}{:>10}",
            c.class.to_string(),
            c.precision.to_string(),
            c.classification_recall.to_string(),
            opt(c.f1),
            c.detection_recall.to_string(),
            opt(c.detection_f1)
        );
    }
    let u = &r.micro;
    let _ = writeln!(
        out,
        "{:<10}{:>10}{:>10}{:>10}{:>10}{:>10}",
        "micro",
        u.precision.to_string(),
        u.classification_recall.to_string(),
        opt(u.f1),
        u.detection_recall.to_string(),
        opt(u.detection_f1)
    );
    let a = &r.macro_avg;
    let _ = writeln!(
        out,
        "{:<10}{:>10}{:>10}{:>10}{:>10}{:>10}",
        "macro",
        opt(a.precision),
        opt(a.classification_recall),
        opt(a.f1),
        opt(a.detection_recall),
        opt(a.detection_f1)
    );
    let _ = writeln!(out, "\naccuracy: {} ({}/{})", r.accuracy(), r.accuracy().num, r.accuracy().den);
    out
}
