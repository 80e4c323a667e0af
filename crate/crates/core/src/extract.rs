//! Term-value extraction.
//!
//! A sentence goes through four steps: gazetteer and number recognition,
//! pairing of medical terms with their values through an ordered pattern
//! cascade, factual filtering (dosages, clock times, desires and so on), and
//! attachment of drug, dosage and duration context.
//!
//! The cascade runs pattern by pattern over all terms of the sentence, so a
//! two-value reading of one term always gets the first pick of the numbers
//! before any single-value reading of another term is tried.

use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lexicon::{
    CanonicalTerm, DesirableDirection, Drug, Gazetteer, Lexicons, Modality, TimeUnit, Unit, VerbDirection,
};
use crate::textproc::{split_sentences, tokenize, Sentence, Token, TokenKind};

/// Number of tokens after a term that may hold its values.
pub const TERM_WINDOW: usize = 6;

#[derive(Debug, Error)]
pub enum ExtractError {
    #[error("expected a number, found {0:?}")]
    NotANumber(String),
    #[error("line {line}: {source}")]
    BadRecord {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NumericValue {
    pub magnitude: f64,
    pub unit: Unit,
    pub raw: String,
}

fn magnitude_of(literal: &str) -> f64 {
    if let Some((h, m)) = literal.split_once(':') {
        let hours: f64 = h.parse().unwrap_or(0.0);
        let minutes: f64 = m.parse().unwrap_or(0.0);
        return hours + minutes / 60.0;
    }
    literal.replace(',', "").parse().unwrap_or(0.0)
}

/// Reads the number at the head of `window` together with any unit words
/// right after it. Returns the value and how many tokens it covers.
pub fn parse_number(window: &[Token], units: &Gazetteer<Unit>) -> Result<(NumericValue, usize), ExtractError> {
    let head = window.first().ok_or_else(|| ExtractError::NotANumber(String::new()))?;
    if head.kind != TokenKind::Number {
        return Err(ExtractError::NotANumber(head.text.clone()));
    }
    let rest: Vec<&str> = window[1..].iter().take(4).map(|t| t.text.as_str()).collect();
    let (mut unit, used) = match units.lookup_longest(&rest) {
        Some((unit, n)) => (unit.clone(), 1 + n),
        None => (Unit::None, 1),
    };
    if head.text.contains(':') {
        unit = Unit::Clock;
    }
    let mut raw = head.text.clone();
    for pair in window[..used].windows(2) {
        if pair[0].span.end != pair[1].span.start {
            raw.push(' ');
        }
        raw.push_str(&pair[1].text);
    }
    Ok((NumericValue { magnitude: magnitude_of(&head.text), unit, raw }, used))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "canonical")]
pub enum MentionKind {
    MedicalTerm(CanonicalTerm),
    Number(NumericValue),
    ChangeVerb(VerbDirection),
    DrugName(Drug),
    Unit(Unit),
    Modality(Modality),
    ArrowSymbol,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityMention {
    #[serde(flatten)]
    pub kind: MentionKind,
    pub text: String,
    /// Token indices within the sentence.
    pub token_range: Range<usize>,
    /// Byte offsets within the review text.
    pub span: Range<usize>,
}

impl EntityMention {
    fn new(kind: MentionKind, tokens: &[Token], range: Range<usize>) -> Self {
        let span = tokens[range.start].span.start..tokens[range.end - 1].span.end;
        let text = tokens[range.clone()].iter().map(|t| t.text.as_str()).collect::<Vec<_>>().join(" ");
        EntityMention { kind, text, token_range: range, span }
    }

    pub fn term(&self) -> Option<CanonicalTerm> {
        match self.kind {
            MentionKind::MedicalTerm(t) => Some(t),
            _ => None,
        }
    }

    pub fn number(&self) -> Option<&NumericValue> {
        match &self.kind {
            MentionKind::Number(v) => Some(v),
            _ => None,
        }
    }
}

/// Longest gazetteer match starting at token `i`, looking through quote
/// marks. Returns the canonical id and the exclusive end token index.
fn match_at<'g, C: std::str::FromStr>(g: &'g Gazetteer<C>, tokens: &[Token], i: usize) -> Option<(&'g C, usize)> {
    let idx: Vec<usize> = (i..tokens.len()).filter(|&j| !tokens[j].is_quote()).take(8).collect();
    let texts: Vec<&str> = idx.iter().map(|&j| tokens[j].text.as_str()).collect();
    g.lookup_longest(&texts).map(|(c, n)| (c, idx[n - 1] + 1))
}

fn previous_word(tokens: &[Token], i: usize) -> Option<&Token> {
    tokens[..i].iter().rev().find(|t| !t.is_quote())
}

/// Every maximal gazetteer match, number and arrow in the sentence, in
/// token order and without overlaps.
pub fn recognize_entities(sentence: &Sentence, lex: &Lexicons) -> Vec<EntityMention> {
    let tokens = &sentence.tokens;
    let mut mentions: Vec<EntityMention> = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        let tok = &tokens[i];
        if tok.is_quote() {
            i += 1;
            continue;
        }
        if tok.kind == TokenKind::Number {
            let (value, used) = parse_number(&tokens[i..], &lex.units).expect("head is a number");
            let unit = value.unit.clone();
            mentions.push(EntityMention::new(MentionKind::Number(value), tokens, i..i + 1));
            if used > 1 {
                mentions.push(EntityMention::new(MentionKind::Unit(unit), tokens, i + 1..i + used));
            }
            i += used;
            continue;
        }
        if tok.is_arrow() {
            mentions.push(EntityMention::new(MentionKind::ArrowSymbol, tokens, i..i + 1));
            i += 1;
            continue;
        }

        let mut best: Option<(MentionKind, usize)> = None;
        let mut consider = |kind: MentionKind, end: usize| {
            if best.as_ref().is_none_or(|(_, e)| end > *e) {
                best = Some((kind, end));
            }
        };
        if let Some((term, end)) = match_at(&lex.terms, tokens, i) {
            // "a total of 70 lbs" is not a cholesterol mention.
            let bare_total = end == i + 1 && tok.is_word("total");
            let after_article = previous_word(tokens, i).is_some_and(|p| p.is_word("a"));
            if !(bare_total && after_article) {
                consider(MentionKind::MedicalTerm(*term), end);
            }
        }
        if let Some((drug, end)) = match_at(&lex.drugs, tokens, i) {
            consider(MentionKind::DrugName(*drug), end);
        }
        if let Some((modality, end)) = match_at(&lex.modality, tokens, i) {
            consider(MentionKind::Modality(*modality), end);
        }
        if let Some((verb, end)) = match_at(&lex.verbs, tokens, i) {
            consider(MentionKind::ChangeVerb(*verb), end);
        }
        match best {
            Some((kind, end)) => {
                // "Cholesterol total", "LDL "bad cholesterol"": one mention.
                let merged = match (&kind, mentions.last_mut()) {
                    (MentionKind::MedicalTerm(t), Some(prev))
                        if prev.term() == Some(*t)
                            && tokens[prev.token_range.end..i].iter().all(Token::is_quote) =>
                    {
                        *prev = EntityMention::new(kind.clone(), tokens, prev.token_range.start..end);
                        true
                    }
                    _ => false,
                };
                if !merged {
                    mentions.push(EntityMention::new(kind, tokens, i..end));
                }
                i = end;
            }
            None => i += 1,
        }
    }
    mentions
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SentenceType {
    FromTo,
    ToFinal,
    ChangeByAmount,
    ChangeByPercent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    Increase,
    Decrease,
    Unknown,
}

/// Which rule of the cascade produced an event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pattern {
    BeforeAfter,
    FromTo,
    Arrow,
    PairWithVerb,
    WasNow,
    Percent,
    Amount,
    WeightAmount,
    ToFinal,
    Implicit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChangeEvent {
    pub term: CanonicalTerm,
    pub sentence_type: SentenceType,
    pub first_value: Option<NumericValue>,
    pub second_value: Option<NumericValue>,
    pub delta: Option<NumericValue>,
    pub percent: Option<NumericValue>,
    pub direction: Direction,
    pub drug: Option<Drug>,
    pub dosage_mg: Option<f64>,
    pub duration_days: Option<f64>,
    pub pattern: Pattern,
    /// The anchoring mention (the term, or the verb for a weight change)
    /// comes first, then the governing verb if any, then the bound numbers.
    pub evidence: Vec<EntityMention>,
}

impl ChangeEvent {
    pub fn anchor(&self) -> &EntityMention {
        &self.evidence[0]
    }

    pub fn values(&self) -> impl Iterator<Item = &NumericValue> {
        [&self.first_value, &self.second_value, &self.delta, &self.percent].into_iter().flatten()
    }

    /// Checks that the fields required by the event's type are present.
    pub fn check_shape(&self) -> Result<(), String> {
        let ok = match self.sentence_type {
            SentenceType::FromTo => match (&self.first_value, &self.second_value) {
                (Some(a), Some(b)) => {
                    let expected = direction_between(a.magnitude, b.magnitude);
                    expected == self.direction && expected != Direction::Unknown
                }
                _ => false,
            },
            SentenceType::ToFinal => self.second_value.is_some() && self.first_value.is_none(),
            SentenceType::ChangeByAmount => self.delta.is_some() && self.direction != Direction::Unknown,
            SentenceType::ChangeByPercent => self.percent.is_some() && self.direction != Direction::Unknown,
        };
        if ok {
            Ok(())
        } else {
            Err(format!("{:?} event has the wrong shape: {self:?}", self.sentence_type))
        }
    }
}

pub fn direction_between(first: f64, second: f64) -> Direction {
    if second > first {
        Direction::Increase
    } else if second < first {
        Direction::Decrease
    } else {
        Direction::Unknown
    }
}

/// Direction a verb implies for a given term.
pub fn resolve_verb(verb: VerbDirection, term: CanonicalTerm) -> Direction {
    let toward_good = match term.desirable_direction() {
        DesirableDirection::Down => Direction::Decrease,
        DesirableDirection::Up => Direction::Increase,
        DesirableDirection::ContextDependent => Direction::Unknown,
    };
    match verb {
        VerbDirection::Increase => Direction::Increase,
        VerbDirection::Decrease => Direction::Decrease,
        VerbDirection::Neutral => Direction::Unknown,
        VerbDirection::Improve => toward_good,
        VerbDirection::Worsen => match toward_good {
            Direction::Increase => Direction::Decrease,
            Direction::Decrease => Direction::Increase,
            Direction::Unknown => Direction::Unknown,
        },
    }
}

const FILLERS: &[&str] = &[
    "by", "about", "approx", "approximately", "around", "nearly", "almost", "roughly", "over", "level", "levels",
    "total", "has", "have", "had", "been", "went", "go", "goes", "going", "gone", "got", "get", "gets", "getting",
    "is", "was", "were", "are", "be", "being", "finally", "all", "the", "way", "'s", "’s", ".", "also", "just",
    "only", "still", "even", "then", "number", "numbers", "count", "reading", "readings", "came", "come",
];

const VALUE_FILLERS: &[&str] = &[
    "is", "was", "were", "are", "of", "at", ":", "=", "now", "level", "levels", "about", "around", "approx",
    "approximately", "only", "just", "still", "~", "'s", "’s", "a", "reading", "count", "number", "came",
];

const HEDGES: &[&str] =
    &["about", "approx", "approximately", "around", "almost", "nearly", "roughly", "~", "only", "just", "a", "mere"];

const NOW_FILLERS: &[&str] = &["its", "it's", "it’s", "is", "it", "at", "to", "about", "around", "approx", "only", "just"];

const WEIGHT_FILLERS: &[&str] =
    &["a", "an", "about", "around", "over", "nearly", "almost", "total", "of", "another", "additional", "roughly"];

fn in_set(word: &str, set: &[&str]) -> bool {
    set.iter().any(|w| w.eq_ignore_ascii_case(word))
}

#[derive(Debug, Clone, Copy)]
enum Elem<'t> {
    Num(usize),
    Verb(usize, VerbDirection),
    Arrow,
    Word(&'t str),
    Other,
}

impl Elem<'_> {
    fn word_in(&self, set: &[&str]) -> bool {
        matches!(self, Elem::Word(w) if in_set(w, set))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Slot {
    Level,
    Amount,
    Percent,
}

#[derive(Debug, Clone)]
struct Draft {
    term_mention: Option<usize>,
    anchor: usize,
    term: CanonicalTerm,
    sentence_type: SentenceType,
    first: Option<usize>,
    second: Option<usize>,
    delta: Option<usize>,
    percent: Option<usize>,
    verb: Option<usize>,
    direction: Direction,
    pattern: Pattern,
}

impl Draft {
    fn new(term_mention: usize, term: CanonicalTerm, sentence_type: SentenceType, pattern: Pattern) -> Self {
        Draft {
            term_mention: Some(term_mention),
            anchor: term_mention,
            term,
            sentence_type,
            first: None,
            second: None,
            delta: None,
            percent: None,
            verb: None,
            direction: Direction::Unknown,
            pattern,
        }
    }

    fn numbers(&self) -> impl Iterator<Item = usize> {
        [self.first, self.second, self.delta, self.percent].into_iter().flatten()
    }
}

/// Counters describing what the cascade could not use.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairingDiagnostics {
    pub unmatched_terms: usize,
    pub unmatched_numbers: usize,
    /// Two-value readings with identical values, discarded as no change.
    pub no_change: usize,
}

struct Pairing<'a> {
    tokens: &'a [Token],
    mentions: &'a [EntityMention],
    owner: Vec<Option<usize>>,
    terms: Vec<usize>,
    consumed: Vec<bool>,
    done: Vec<bool>,
    drafts: Vec<Draft>,
    no_change: usize,
}

impl<'a> Pairing<'a> {
    fn new(sentence: &'a Sentence, mentions: &'a [EntityMention]) -> Self {
        let mut owner = vec![None; sentence.tokens.len()];
        for (m, mention) in mentions.iter().enumerate() {
            for slot in &mut owner[mention.token_range.clone()] {
                *slot = Some(m);
            }
        }
        let terms = mentions.iter().enumerate().filter(|(_, m)| m.term().is_some()).map(|(i, _)| i).collect();
        Pairing {
            tokens: &sentence.tokens,
            mentions,
            owner,
            terms,
            consumed: vec![false; mentions.len()],
            done: vec![false; mentions.len()],
            drafts: Vec::new(),
            no_change: 0,
        }
    }

    fn term_of(&self, m: usize) -> CanonicalTerm {
        self.mentions[m].term().expect("term mention")
    }

    /// Elements of tokens `from..to`, with units and quote marks dropped.
    fn elems(&self, from: usize, to: usize) -> Vec<Elem<'a>> {
        let mut out = Vec::new();
        let mut j = from;
        while j < to {
            match self.owner[j] {
                Some(m) => {
                    let mention = &self.mentions[m];
                    match &mention.kind {
                        MentionKind::Number(_) => out.push(Elem::Num(m)),
                        MentionKind::ChangeVerb(d) => out.push(Elem::Verb(m, *d)),
                        MentionKind::ArrowSymbol => out.push(Elem::Arrow),
                        MentionKind::Unit(_) => {}
                        _ => out.push(Elem::Other),
                    }
                    j = mention.token_range.end.max(j + 1);
                }
                None => {
                    let tok = &self.tokens[j];
                    if !tok.is_quote() {
                        out.push(Elem::Word(tok.text.as_str()));
                    }
                    j += 1;
                }
            }
        }
        out
    }

    fn next_term_start(&self, after: usize) -> usize {
        self.terms
            .iter()
            .map(|&t| self.mentions[t].token_range.start)
            .filter(|&s| s >= after)
            .min()
            .unwrap_or(self.tokens.len())
    }

    fn window(&self, m: usize) -> Vec<Elem<'a>> {
        let start = self.mentions[m].token_range.end;
        let end = (start + TERM_WINDOW).min(self.next_term_start(start)).min(self.tokens.len());
        self.elems(start, end)
    }

    fn eligible(&self, elem: Option<&Elem>, term: CanonicalTerm, slot: Slot) -> Option<usize> {
        let Some(Elem::Num(m)) = elem else { return None };
        if self.consumed[*m] {
            return None;
        }
        let unit = &self.mentions[*m].number()?.unit;
        let weight_lbs = term == CanonicalTerm::Weight && *unit == Unit::Lbs;
        let ok = match slot {
            Slot::Level => matches!(unit, Unit::None | Unit::MgDl) || weight_lbs,
            Slot::Amount => matches!(unit, Unit::None | Unit::MgDl | Unit::Points) || weight_lbs,
            Slot::Percent => *unit == Unit::Percent,
        };
        ok.then_some(*m)
    }

    fn unit_of(&self, m: usize) -> &Unit {
        &self.mentions[m].number().expect("number mention").unit
    }

    /// Skips fillers and change verbs at the head of a window. Returns the
    /// index of the first other element, the verbs seen, and the fillers.
    fn skip_prefix<'w>(&self, w: &'w [Elem<'a>]) -> (usize, Vec<(usize, VerbDirection)>, Vec<&'a str>) {
        let mut verbs = Vec::new();
        let mut words = Vec::new();
        let mut i = 0;
        while i < w.len() {
            match w[i] {
                Elem::Verb(m, d) => verbs.push((m, d)),
                Elem::Word(s) if in_set(s, FILLERS) => words.push(s),
                _ => break,
            }
            i += 1;
        }
        (i, verbs, words)
    }

    fn preceding_verbs(&self, m: usize) -> impl Iterator<Item = (usize, VerbDirection)> + '_ {
        let start = self.mentions[m].token_range.start;
        self.mentions[..m].iter().enumerate().rev().filter_map(move |(i, mention)| match mention.kind {
            MentionKind::ChangeVerb(d) if mention.token_range.end <= start => Some((i, d)),
            _ => None,
        })
    }

    /// The verb that sets the direction for term mention `m`: a verb right
    /// after the term wins over one before it.
    fn governing(&self, m: usize, post: &[(usize, VerbDirection)]) -> Option<(usize, Direction)> {
        let term = self.term_of(m);
        post.iter()
            .copied()
            .chain(self.preceding_verbs(m))
            .map(|(v, d)| (v, resolve_verb(d, term)))
            .find(|(_, d)| *d != Direction::Unknown)
    }

    fn skip_hedges(w: &[Elem], mut i: usize) -> usize {
        while w.get(i).is_some_and(|e| e.word_in(HEDGES)) {
            i += 1;
        }
        i
    }

    fn two_values(&self, mut d: Draft, first: usize, second: usize) -> Draft {
        d.first = Some(first);
        d.second = Some(second);
        d.direction = direction_between(self.magnitude(first), self.magnitude(second));
        d
    }

    fn magnitude(&self, m: usize) -> f64 {
        self.mentions[m].number().expect("number mention").magnitude
    }

    fn two_value_change(&self, m: usize) -> Option<Draft> {
        let term = self.term_of(m);
        let w = self.window(m);
        let (mut i, post, _) = self.skip_prefix(&w);
        let base = |pattern| Draft::new(m, term, SentenceType::FromTo, pattern);

        if w.get(i).is_some_and(|e| e.word_in(&["from", "form"])) {
            i = Self::skip_hedges(&w, i + 1);
            let a = self.eligible(w.get(i), term, Slot::Level)?;
            i += 1;
            match w.get(i) {
                Some(Elem::Arrow) => i += 1,
                Some(e) if e.word_in(&["to", "into", "-", "–"]) => i += 1,
                Some(Elem::Verb(_, _)) if w.get(i + 1).is_some_and(|e| e.word_in(&["to"])) => i += 2,
                _ => return None,
            }
            i = Self::skip_hedges(&w, i);
            let b = self.eligible(w.get(i), term, Slot::Level)?;
            let mut d = self.two_values(base(Pattern::FromTo), a, b);
            d.verb = self.governing(m, &post).map(|(v, _)| v);
            return Some(d);
        }

        let a = self.eligible(w.get(i), term, Slot::Level)?;
        i += 1;
        match w.get(i) {
            Some(Elem::Arrow) => {
                let b = self.eligible(w.get(i + 1), term, Slot::Level)?;
                Some(self.two_values(base(Pattern::Arrow), a, b))
            }
            Some(e) if e.word_in(&["to", "into"]) => {
                let (verb, _) = self.governing(m, &post)?;
                let j = Self::skip_hedges(&w, i + 1);
                let b = self.eligible(w.get(j), term, Slot::Level)?;
                let mut d = self.two_values(base(Pattern::PairWithVerb), a, b);
                d.verb = Some(verb);
                Some(d)
            }
            _ => {
                // "HDL was 33 and now its 47"
                while w.get(i).is_some_and(|e| e.word_in(&["and", ",", ";", "but"])) {
                    i += 1;
                }
                if !w.get(i).is_some_and(|e| e.word_in(&["now"])) {
                    return None;
                }
                i += 1;
                while let Some(e) = w.get(i) {
                    if e.word_in(NOW_FILLERS) || matches!(e, Elem::Verb(_, _)) {
                        i += 1;
                    } else {
                        break;
                    }
                }
                let b = self.eligible(w.get(i), term, Slot::Level)?;
                Some(self.two_values(base(Pattern::WasNow), a, b))
            }
        }
    }

    fn change(&self, m: usize, slot: Slot) -> Option<Draft> {
        let term = self.term_of(m);
        let w = self.window(m);
        let (i, post, fillers) = self.skip_prefix(&w);
        let n = self.eligible(w.get(i), term, slot)?;
        if slot == Slot::Amount && *self.unit_of(n) != Unit::Points {
            // A bare number reads as an amount only with "TERM VERB NUM" or "by NUM".
            let post_dir = post.iter().any(|(_, d)| resolve_verb(*d, term) != Direction::Unknown);
            if !post_dir && !fillers.iter().any(|f| f.eq_ignore_ascii_case("by")) {
                return None;
            }
        }
        // "LDL dropped 200 to 100" is a pair, not an amount.
        if w.get(i + 1).is_some_and(|e| e.word_in(&["to", "into", "-"]) || matches!(e, Elem::Arrow)) {
            return None;
        }
        let (verb, direction) = self.governing(m, &post)?;
        let (ty, pattern) = match slot {
            Slot::Percent => (SentenceType::ChangeByPercent, Pattern::Percent),
            _ => (SentenceType::ChangeByAmount, Pattern::Amount),
        };
        let mut d = Draft::new(m, term, ty, pattern);
        if slot == Slot::Percent {
            d.percent = Some(n);
        } else {
            d.delta = Some(n);
        }
        d.verb = Some(verb);
        d.direction = direction;
        Some(d)
    }

    fn to_final(&self, m: usize) -> Option<Draft> {
        let term = self.term_of(m);
        let w = self.window(m);
        let (i, post, _) = self.skip_prefix(&w);
        let connector = match w.get(i) {
            Some(Elem::Word(s)) if in_set(s, &["to", "into"]) => s.to_ascii_lowercase(),
            _ => return None,
        };
        let j = Self::skip_hedges(&w, i + 1);
        let n = self.eligible(w.get(j), term, Slot::Level)?;
        let has_verb = !post.is_empty() || self.preceding_verbs(m).next().is_some();
        if !has_verb && connector != "into" {
            return None;
        }
        let mut d = Draft::new(m, term, SentenceType::ToFinal, Pattern::ToFinal);
        d.second = Some(n);
        if let Some((verb, direction)) = self.governing(m, &post) {
            d.verb = Some(verb);
            d.direction = direction;
        } else {
            d.verb = post.first().map(|(v, _)| *v).or_else(|| self.preceding_verbs(m).next().map(|(v, _)| v));
        }
        Some(d)
    }

    /// `TERM [is|of|:] NUM`, the verbless reading.
    fn value_of(&self, m: usize) -> Option<usize> {
        let term = self.term_of(m);
        let w = self.window(m);
        let mut i = 0;
        while w.get(i).is_some_and(|e| e.word_in(VALUE_FILLERS)) {
            i += 1;
        }
        self.eligible(w.get(i), term, Slot::Level)
    }

    fn implicit(&self, m: usize) -> Option<Draft> {
        let n = self.value_of(m)?;
        let term = self.term_of(m);
        let mut d = Draft::new(m, term, SentenceType::ToFinal, Pattern::Implicit);
        d.second = Some(n);
        // "were 871, now down to ..." carries a direction after the value.
        let after = self.mentions[n].token_range.end;
        let tail = self.elems(after, (after + 4).min(self.next_term_start(after)));
        if let Some(pos) = tail.iter().position(|e| e.word_in(&["now"])) {
            if let Some(Elem::Verb(v, dir)) = tail.get(pos + 1) {
                let direction = resolve_verb(*dir, term);
                if direction != Direction::Unknown {
                    d.verb = Some(*v);
                    d.direction = direction;
                }
            }
        }
        Some(d)
    }

    /// "Before X: A 1, B 2. After X: A 3, B 4" pairs each term with itself.
    fn before_after(&mut self) {
        let before = self.tokens.iter().position(|t| t.is_word("before"));
        let Some(before) = before else { return };
        let split = self.tokens[before + 1..]
            .iter()
            .position(|t| t.is_word("after") || t.is_word("now"))
            .map(|p| p + before + 1);
        let Some(split) = split else { return };

        let (early, late): (Vec<usize>, Vec<usize>) = self
            .terms
            .iter()
            .copied()
            .partition(|&t| self.mentions[t].token_range.start < split);
        let mut used_late = vec![false; late.len()];
        for e in early {
            let term = self.term_of(e);
            let Some(a) = self.value_of(e) else { continue };
            if self.mentions[a].token_range.start >= split {
                continue;
            }
            let partner = late
                .iter()
                .enumerate()
                .find(|(k, &l)| !used_late[*k] && self.term_of(l) == term && self.value_of(l).is_some());
            let Some((k, &l)) = partner else { continue };
            used_late[k] = true;
            let b = self.value_of(l).expect("checked above");
            let d = self.two_values(Draft::new(e, term, SentenceType::FromTo, Pattern::BeforeAfter), a, b);
            self.done[l] = true;
            self.commit(d);
        }
    }

    /// `lost 13 lbs`: a weight change without the word "weight".
    fn weight_amounts(&mut self) {
        for v in 0..self.mentions.len() {
            let MentionKind::ChangeVerb(dir) = self.mentions[v].kind else { continue };
            let direction = resolve_verb(dir, CanonicalTerm::Weight);
            if direction == Direction::Unknown {
                continue;
            }
            let start = self.mentions[v].token_range.end;
            let end = (start + TERM_WINDOW).min(self.next_term_start(start)).min(self.tokens.len());
            let w = self.elems(start, end);
            let mut i = 0;
            while w.get(i).is_some_and(|e| e.word_in(WEIGHT_FILLERS)) {
                i += 1;
            }
            let Some(n) = self.eligible(w.get(i), CanonicalTerm::Weight, Slot::Amount) else { continue };
            if *self.unit_of(n) != Unit::Lbs {
                continue;
            }
            let mut d = Draft::new(v, CanonicalTerm::Weight, SentenceType::ChangeByAmount, Pattern::WeightAmount);
            d.term_mention = None;
            d.delta = Some(n);
            d.direction = direction;
            self.commit(d);
        }
    }

    fn commit(&mut self, d: Draft) {
        for n in d.numbers() {
            self.consumed[n] = true;
        }
        if let Some(t) = d.term_mention {
            self.done[t] = true;
        }
        if d.sentence_type == SentenceType::FromTo && d.direction == Direction::Unknown {
            self.no_change += 1;
            return;
        }
        self.drafts.push(d);
    }

    fn run_pass(&mut self, rule: impl Fn(&Self, usize) -> Option<Draft>) {
        for k in 0..self.terms.len() {
            let m = self.terms[k];
            if self.done[m] {
                continue;
            }
            if let Some(d) = rule(self, m) {
                self.commit(d);
            }
        }
    }

    fn run(mut self) -> (Vec<ChangeEvent>, PairingDiagnostics) {
        self.before_after();
        self.run_pass(Self::two_value_change);
        self.run_pass(|p, m| p.change(m, Slot::Percent));
        self.run_pass(|p, m| p.change(m, Slot::Amount));
        self.weight_amounts();
        self.run_pass(Self::to_final);
        self.run_pass(Self::implicit);

        let number = |m: Option<usize>| m.map(|m| self.mentions[m].number().expect("number").clone());
        let mut events: Vec<ChangeEvent> = self
            .drafts
            .iter()
            .map(|d| {
                let mut evidence = vec![self.mentions[d.anchor].clone()];
                evidence.extend(d.verb.map(|v| self.mentions[v].clone()));
                evidence.extend(d.numbers().map(|n| self.mentions[n].clone()));
                ChangeEvent {
                    term: d.term,
                    sentence_type: d.sentence_type,
                    first_value: number(d.first),
                    second_value: number(d.second),
                    delta: number(d.delta),
                    percent: number(d.percent),
                    direction: d.direction,
                    drug: None,
                    dosage_mg: None,
                    duration_days: None,
                    pattern: d.pattern,
                    evidence,
                }
            })
            .collect();
        events.sort_by_key(|e| e.anchor().token_range.start);

        let diagnostics = PairingDiagnostics {
            unmatched_terms: self.terms.iter().filter(|&&t| !self.done[t]).count(),
            unmatched_numbers: self
                .mentions
                .iter()
                .enumerate()
                .filter(|(i, m)| m.number().is_some() && !self.consumed[*i])
                .count(),
            no_change: self.no_change,
        };
        (events, diagnostics)
    }
}

/// Pairs terms with values. `mentions` must come from `recognize_entities`
/// on the same sentence.
pub fn pair_term_values(sentence: &Sentence, mentions: &[EntityMention]) -> (Vec<ChangeEvent>, PairingDiagnostics) {
    Pairing::new(sentence, mentions).run()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FilterReason {
    /// A bound value is a dosage, a clock time or a duration.
    FactualUnit,
    /// A bound value sits right next to a drug name.
    NextToDrug,
    /// A desire, goal or condition precedes the term.
    Modality,
    /// A weight reading without a change.
    StaticWeight,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedEvent {
    pub event: ChangeEvent,
    pub reason: FilterReason,
}

/// Removes events that state facts rather than outcomes.
pub fn filter_factual(mentions: &[EntityMention], events: Vec<ChangeEvent>) -> (Vec<ChangeEvent>, Vec<DroppedEvent>) {
    let drug_tokens: Vec<&Range<usize>> = mentions
        .iter()
        .filter(|m| matches!(m.kind, MentionKind::DrugName(_)))
        .map(|m| &m.token_range)
        .collect();
    let modality_starts: Vec<usize> = mentions
        .iter()
        .filter(|m| matches!(m.kind, MentionKind::Modality(_)))
        .map(|m| m.token_range.start)
        .collect();

    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for event in events {
        let numbers = event.evidence.iter().filter(|m| m.number().is_some());
        let reason = if event
            .values()
            .any(|v| matches!(v.unit, Unit::Mg | Unit::Time(_) | Unit::Clock | Unit::Other(_)))
        {
            Some(FilterReason::FactualUnit)
        } else if numbers.clone().any(|n| {
            drug_tokens.iter().any(|d| d.end == n.token_range.start || n.token_range.end == d.start)
        }) {
            Some(FilterReason::NextToDrug)
        } else if modality_starts.iter().any(|&s| s < event.anchor().token_range.start) {
            Some(FilterReason::Modality)
        } else if event.term == CanonicalTerm::Weight && event.direction == Direction::Unknown {
            Some(FilterReason::StaticWeight)
        } else {
            None
        };
        match reason {
            Some(reason) => dropped.push(DroppedEvent { event, reason }),
            None => kept.push(event),
        }
    }
    (kept, dropped)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SentenceVerdict {
    Opinionated(Vec<SentenceType>),
    NonOpinionated,
}

/// Sentence-level verdict: the types of the surviving events, or
/// NonOpinionated when none survived.
pub fn classify_sentence_type(events: &[ChangeEvent]) -> SentenceVerdict {
    if events.is_empty() {
        SentenceVerdict::NonOpinionated
    } else {
        SentenceVerdict::Opinionated(events.iter().map(|e| e.sentence_type).collect())
    }
}

/// One review as read from line-delimited input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Review {
    pub review_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drug: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dosage: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration: Option<String>,
    pub text: String,
}

/// Parses one review per non-blank line.
pub fn parse_reviews(source: &str) -> Result<Vec<Review>, ExtractError> {
    source
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|source| ExtractError::BadRecord { line: i + 1, source }))
        .collect()
}

/// Review-level metadata resolved against the lexicons.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReviewContext {
    pub drug: Option<Drug>,
    pub dosage_mg: Option<f64>,
    pub duration_days: Option<f64>,
}

fn first_drug(text: &str, lex: &Lexicons) -> Option<Drug> {
    let tokens = tokenize(text);
    (0..tokens.len()).find_map(|i| match_at(&lex.drugs, &tokens, i).map(|(d, _)| *d))
}

fn numbers_in(text: &str, lex: &Lexicons) -> Vec<NumericValue> {
    let tokens = tokenize(text);
    (0..tokens.len())
        .filter(|&i| tokens[i].kind == TokenKind::Number)
        .filter_map(|i| parse_number(&tokens[i..], &lex.units).ok().map(|(v, _)| v))
        .collect()
}

fn to_days(value: &NumericValue) -> Option<f64> {
    match value.unit {
        Unit::Time(unit) if unit != TimeUnit::Minute && unit != TimeUnit::Hour => Some(value.magnitude * unit.days()),
        _ => None,
    }
}

impl ReviewContext {
    pub fn from_review(review: &Review, lex: &Lexicons) -> Self {
        let drug = review.drug.as_deref().and_then(|d| first_drug(d, lex));
        let dosage_mg = review.dosage.as_deref().and_then(|d| {
            numbers_in(d, lex).into_iter().find(|v| matches!(v.unit, Unit::Mg | Unit::None)).map(|v| v.magnitude)
        });
        let duration_days =
            review.duration.as_deref().and_then(|d| numbers_in(d, lex).iter().rev().find_map(to_days));
        ReviewContext { drug, dosage_mg, duration_days }
    }
}

/// Fills drug, dosage and duration: in-sentence evidence first, then the
/// review metadata.
pub fn attach_context(mentions: &[EntityMention], ctx: &ReviewContext, events: &mut [ChangeEvent]) {
    let sentence_dosage = mentions.iter().filter_map(EntityMention::number).find(|v| v.unit == Unit::Mg);
    let sentence_duration = mentions.iter().filter_map(EntityMention::number).find_map(to_days);
    for event in events.iter_mut() {
        let at = event.anchor().token_range.start;
        let nearest = mentions
            .iter()
            .filter_map(|m| match m.kind {
                MentionKind::DrugName(d) => Some((m.token_range.start.abs_diff(at), d)),
                _ => None,
            })
            .min_by_key(|(dist, _)| *dist)
            .map(|(_, d)| d);
        event.drug = nearest.or(ctx.drug);
        event.dosage_mg = ctx.dosage_mg.or(sentence_dosage.map(|v| v.magnitude));
        event.duration_days = ctx.duration_days.or(sentence_duration);
    }
}

/// Everything extraction knows about one sentence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentenceAnalysis {
    pub sentence: Sentence,
    pub mentions: Vec<EntityMention>,
    pub events: Vec<ChangeEvent>,
    pub dropped: Vec<DroppedEvent>,
    pub diagnostics: PairingDiagnostics,
}

impl SentenceAnalysis {
    pub fn verdict(&self) -> SentenceVerdict {
        classify_sentence_type(&self.events)
    }
}

pub fn analyze_sentence(sentence: &Sentence, lex: &Lexicons, ctx: &ReviewContext) -> SentenceAnalysis {
    let mentions = recognize_entities(sentence, lex);
    let (events, diagnostics) = pair_term_values(sentence, &mentions);
    let (mut events, dropped) = filter_factual(&mentions, events);
    attach_context(&mentions, ctx, &mut events);
    SentenceAnalysis { sentence: sentence.clone(), mentions, events, dropped, diagnostics }
}

pub fn analyze_review(review: &Review, lex: &Lexicons) -> Vec<SentenceAnalysis> {
    let ctx = ReviewContext::from_review(review, lex);
    split_sentences(&review.text, &review.review_id).iter().map(|s| analyze_sentence(s, lex, &ctx)).collect()
}

/// Events of a single free-standing sentence, without review metadata.
pub fn extract_events(text: &str, lex: &Lexicons) -> Vec<ChangeEvent> {
    split_sentences(text, "")
        .iter()
        .flat_map(|s| analyze_sentence(s, lex, &ReviewContext::default()).events)
        .collect()
}

/// One line of extraction output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub review_id: String,
    pub sentence_index: usize,
    pub sentence_span: Range<usize>,
    #[serde(flatten)]
    pub event: ChangeEvent,
}

impl SentenceAnalysis {
    pub fn records(&self) -> impl Iterator<Item = EventRecord> + '_ {
        self.events.iter().map(|event| EventRecord {
            review_id: self.sentence.review_id.clone(),
            sentence_index: self.sentence.index,
            sentence_span: self.sentence.span.clone(),
            event: event.clone(),
        })
    }
}
