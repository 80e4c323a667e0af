//! From change events to sentiment labels.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::extract::{analyze_review, ChangeEvent, Direction, Pattern, Review, SentenceType};
use crate::fuzzy::{infer, InferError, InferenceTrace};
use crate::kb::{term_prefix, KnowledgeBase, FAMILY_DRUGS};
use crate::lexicon::{DesirableDirection, Lexicons};

/// Crisp scores strictly beyond these bounds are Positive or Negative.
pub const NEGATIVE_BELOW: f64 = -0.15;
pub const POSITIVE_ABOVE: f64 = 0.15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    Positive,
    Neutral,
    Negative,
    /// An event was found but no rule fired for it.
    Unclassified,
    /// The sentence holds no change event.
    NonOpinionated,
}

impl Label {
    pub fn from_score(score: f64) -> Label {
        if score < NEGATIVE_BELOW {
            Label::Negative
        } else if score > POSITIVE_ABOVE {
            Label::Positive
        } else {
            Label::Neutral
        }
    }

    pub fn is_polar(self) -> bool {
        matches!(self, Label::Positive | Label::Neutral | Label::Negative)
    }
}

/// One crisp input with the event field it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputEntry {
    pub value: f64,
    pub source: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FuzzyInputAssignment {
    pub entries: BTreeMap<String, InputEntry>,
    pub notes: Vec<String>,
}

impl FuzzyInputAssignment {
    /// Records `value` under `variable` when the knowledge base declares it.
    /// A variable is never assigned twice; the first value stays.
    fn assert(&mut self, kb: &KnowledgeBase, variable: &str, value: f64, source: &str) {
        let Some(var) = kb.variable(variable) else { return };
        if self.entries.contains_key(&var.name) {
            self.notes.push(format!("{} already set, ignoring {source}", var.name));
            return;
        }
        self.entries.insert(var.name.clone(), InputEntry { value, source: source.to_string() });
    }

    pub fn crisp(&self) -> BTreeMap<String, f64> {
        self.entries.iter().map(|(k, e)| (k.clone(), e.value)).collect()
    }

    pub fn get(&self, variable: &str) -> Option<f64> {
        self.entries.iter().find(|(k, _)| k.eq_ignore_ascii_case(variable)).map(|(_, e)| e.value)
    }
}

/// True when the event moves its term toward the desirable side; None when
/// the term or the direction gives no answer.
pub fn is_improving(event: &ChangeEvent) -> Option<bool> {
    let wanted = match event.term.desirable_direction() {
        DesirableDirection::Down => Direction::Decrease,
        DesirableDirection::Up => Direction::Increase,
        DesirableDirection::ContextDependent => return None,
    };
    match event.direction {
        Direction::Unknown => None,
        d => Some(d == wanted),
    }
}

/// Maps an event and its context onto the knowledge base's input variables.
pub fn features_to_inputs(event: &ChangeEvent, kb: &KnowledgeBase) -> FuzzyInputAssignment {
    let mut inputs = FuzzyInputAssignment::default();
    let Some(prefix) = term_prefix(event.term) else {
        inputs.notes.push(format!("no variables for {}", event.term));
        return inputs;
    };
    let improving = is_improving(event);
    let family_drug = event.drug.filter(|d| FAMILY_DRUGS.contains(d));

    let change = |inputs: &mut FuzzyInputAssignment, suffix: &str, value: f64, source: &str| {
        inputs.assert(kb, &format!("{prefix}_{suffix}"), value, source);
        // Drug-specific efficacy scales describe how far a drug brought a
        // value the right way.
        if let (Some(drug), Some(true)) = (family_drug, improving) {
            inputs.assert(kb, &format!("{prefix}_{}_{suffix}", drug.id()), value, source);
        }
    };

    match event.sentence_type {
        SentenceType::FromTo => {
            let first = event.first_value.as_ref().expect("two-value event").magnitude;
            let second = event.second_value.as_ref().expect("two-value event").magnitude;
            inputs.assert(kb, &format!("{prefix}_firstValue"), first, "first_value");
            inputs.assert(kb, &format!("{prefix}_secondValue"), second, "second_value");
            inputs.assert(kb, &format!("{prefix}_finalValue"), second, "second_value");
            let delta = (second - first).abs();
            change(&mut inputs, "Change", delta, "|second - first|");
            if first == 0.0 {
                inputs.notes.push("first value is 0, percent change omitted".into());
            } else {
                change(&mut inputs, "Percent_Change", 100.0 * delta / first, "100 |second - first| / first");
            }
        }
        // "were 871, now down": a bare value followed by a direction is where
        // the change started, not where it ended.
        SentenceType::ToFinal if event.pattern == Pattern::Implicit && event.direction != Direction::Unknown => {
            let value = event.second_value.as_ref().expect("value").magnitude;
            inputs.assert(kb, &format!("{prefix}_firstValue"), value, "value before a trailing change");
        }
        SentenceType::ToFinal => {
            let value = event.second_value.as_ref().expect("final value").magnitude;
            inputs.assert(kb, &format!("{prefix}_finalValue"), value, "second_value");
        }
        SentenceType::ChangeByAmount => {
            let value = event.delta.as_ref().expect("amount").magnitude;
            change(&mut inputs, "Change", value, "delta");
        }
        SentenceType::ChangeByPercent => {
            let value = event.percent.as_ref().expect("percent").magnitude;
            change(&mut inputs, "Percent_Change", value, "percent");
        }
    }

    if let Some(improving) = improving {
        let value = if improving { 1.0 } else { 0.0 };
        inputs.assert(kb, "Direction", value, "direction against the desirable direction");
    }
    if let Some(drug) = family_drug {
        let var = format!("{prefix}_DRUG");
        if let Some(set) = kb.variable(&var).and_then(|v| v.set(drug.id())) {
            inputs.assert(kb, &var, set.mf.plateau_midpoint(), "drug");
        }
    }
    if let Some(mg) = event.dosage_mg {
        inputs.assert(kb, "Drug_Dosage", mg, "dosage_mg");
    }
    if let Some(days) = event.duration_days {
        inputs.assert(kb, "Duration", days, "duration_days");
    }
    inputs
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentimentResult {
    pub label: Label,
    pub crisp_score: Option<f64>,
    pub event: ChangeEvent,
    pub inputs: FuzzyInputAssignment,
    pub trace: InferenceTrace,
}

pub fn classify_event(kb: &KnowledgeBase, event: &ChangeEvent, grid_points: usize) -> SentimentResult {
    let inputs = features_to_inputs(event, kb);
    let (label, crisp_score, trace) = match infer(kb, &inputs.crisp(), grid_points) {
        Ok((score, trace)) => (Label::from_score(score), Some(score), trace),
        Err(InferError::EmptyOutput { trace }) => (Label::Unclassified, None, *trace),
        Err(InferError::Fuzzy(e)) => {
            // Inputs only name declared variables, so this means a bad grid.
            let trace = InferenceTrace {
                activations: Vec::new(),
                notes: vec![e.to_string()],
                grid_points,
                curve: Vec::new(),
                crisp: None,
            };
            (Label::Unclassified, None, trace)
        }
    };
    SentimentResult { label, crisp_score, event: event.clone(), inputs, trace }
}

/// Majority label over the polar results; ties go to Positive, then
/// Negative, then Neutral. Unclassified results do not vote.
pub fn fuse(labels: impl IntoIterator<Item = Label>) -> Label {
    let mut counts = [0usize; 3];
    let mut any = false;
    for label in labels {
        any = true;
        match label {
            Label::Positive => counts[0] += 1,
            Label::Negative => counts[1] += 1,
            Label::Neutral => counts[2] += 1,
            _ => {}
        }
    }
    if !any {
        return Label::NonOpinionated;
    }
    let order = [Label::Positive, Label::Negative, Label::Neutral];
    let best = counts.iter().copied().max().unwrap_or(0);
    if best == 0 {
        return Label::Unclassified;
    }
    order[counts.iter().position(|&c| c == best).expect("max exists")]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentenceResult {
    pub review_id: String,
    pub sentence_index: usize,
    pub sentence_text: String,
    pub results: Vec<SentimentResult>,
}

impl SentenceResult {
    pub fn fused(&self) -> Label {
        fuse(self.results.iter().map(|r| r.label))
    }
}

/// Runs extraction and classification over a review, sentence by sentence.
pub fn classify_review(kb: &KnowledgeBase, lex: &Lexicons, review: &Review, grid_points: usize) -> Vec<SentenceResult> {
    analyze_review(review, lex)
        .into_iter()
        .map(|analysis| SentenceResult {
            review_id: analysis.sentence.review_id.clone(),
            sentence_index: analysis.sentence.index,
            sentence_text: analysis.sentence.text.clone(),
            results: analysis.events.iter().map(|e| classify_event(kb, e, grid_points)).collect(),
        })
        .collect()
}
