//! Tokenization and sentence splitting for free-text reviews.
//!
//! Token spans are byte offsets into the original review text. Whitespace is
//! never emitted as a token. Numbers keep decimal points, thousands separators
//! and clock notation (`9:30`) inside a single token; a unit glued to a number
//! (`25mg`) is split off as its own word.

use std::ops::Range;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TokenKind {
    Word,
    Number,
    Punct,
    Symbol,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub text: String,
    pub span: Range<usize>,
    pub kind: TokenKind,
}

impl Token {
    pub fn is_word(&self, word: &str) -> bool {
        self.kind == TokenKind::Word && self.text.eq_ignore_ascii_case(word)
    }

    pub fn is_arrow(&self) -> bool {
        self.kind == TokenKind::Symbol && ARROWS.contains(&self.text.as_str())
    }

    /// Opening or closing quote marks, which gazetteer matching looks through.
    pub fn is_quote(&self) -> bool {
        matches!(self.text.as_str(), "\"" | "'" | "“" | "”" | "‘" | "’" | "«" | "»" | "`")
    }
}

impl AsRef<str> for Token {
    fn as_ref(&self) -> &str {
        &self.text
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sentence {
    pub text: String,
    pub span: Range<usize>,
    pub tokens: Vec<Token>,
    pub review_id: String,
    pub index: usize,
}

/// Arrow notations read as "from X to Y".
pub const ARROWS: [&str; 7] = ["-->", "==>", "—>", "->", "=>", "→", "⇒"];

const PUNCT: &[char] = &[
    '.', ',', ';', ':', '!', '?', '(', ')', '[', ']', '{', '}', '"', '\'', '“', '”', '‘', '’', '«',
    '»', '…', '—', '–',
];

fn is_apostrophe(c: char) -> bool {
    c == '\'' || c == '’'
}

/// Returns true when `text` is a number literal as produced by [`tokenize`]:
/// plain digits, comma-grouped thousands, an optional decimal part, or an
/// `h:mm` clock reading.
pub fn is_numeric_literal(text: &str) -> bool {
    let chars: Vec<char> = text.chars().collect();
    !chars.is_empty() && chars[0].is_ascii_digit() && scan_number(&chars, 0) == chars.len()
}

fn digits_from(chars: &[char], mut i: usize) -> usize {
    while i < chars.len() && chars[i].is_ascii_digit() {
        i += 1;
    }
    i
}

/// Scans a number starting at `start` (which must be an ASCII digit) and
/// returns the exclusive end index.
fn scan_number(chars: &[char], start: usize) -> usize {
    let lead_end = digits_from(chars, start);
    let lead_len = lead_end - start;

    // h:mm clock reading
    if lead_len <= 2 && lead_end < chars.len() && chars[lead_end] == ':' {
        let min_end = digits_from(chars, lead_end + 1);
        if min_end - (lead_end + 1) == 2 {
            return min_end;
        }
    }

    let mut end = lead_end;
    if lead_len <= 3 {
        while end < chars.len() && chars[end] == ',' {
            let group_end = digits_from(chars, end + 1);
            if group_end - (end + 1) == 3 {
                end = group_end;
            } else {
                break;
            }
        }
    }
    if end + 1 < chars.len() && chars[end] == '.' && chars[end + 1].is_ascii_digit() {
        end = digits_from(chars, end + 1);
    }
    end
}

fn arrow_at(chars: &[char], i: usize) -> Option<usize> {
    ARROWS.iter().find_map(|arrow| {
        let len = arrow.chars().count();
        let matches = i + len <= chars.len() && arrow.chars().zip(&chars[i..i + len]).all(|(a, &b)| a == b);
        matches.then_some(len)
    })
}

/// `'s` followed by a non-alphanumeric character or the end of input.
fn possessive_at(chars: &[char], i: usize) -> bool {
    i + 1 < chars.len()
        && is_apostrophe(chars[i])
        && matches!(chars[i + 1], 's' | 'S')
        && chars.get(i + 2).is_none_or(|c| !c.is_alphanumeric())
}

pub fn tokenize(text: &str) -> Vec<Token> {
    tokenize_at(text, 0)
}

/// Tokenizes `text`, shifting every span by `offset`.
pub(crate) fn tokenize_at(text: &str, offset: usize) -> Vec<Token> {
    let indexed: Vec<(usize, char)> = text.char_indices().collect();
    let chars: Vec<char> = indexed.iter().map(|&(_, c)| c).collect();
    let byte_at = |i: usize| indexed.get(i).map_or(text.len(), |&(b, _)| b);

    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let (end, kind) = if c.is_ascii_digit() {
            (scan_number(&chars, i), TokenKind::Number)
        } else if c.is_alphabetic() {
            let mut j = i + 1;
            while j < chars.len() {
                if chars[j].is_alphanumeric() {
                    j += 1;
                } else if is_apostrophe(chars[j])
                    && chars.get(j + 1).is_some_and(|c| c.is_alphabetic())
                    && !possessive_at(&chars, j)
                {
                    j += 2;
                } else {
                    break;
                }
            }
            (j, TokenKind::Word)
        } else if let Some(len) = arrow_at(&chars, i) {
            (i + len, TokenKind::Symbol)
        } else if possessive_at(&chars, i) {
            (i + 2, TokenKind::Word)
        } else if PUNCT.contains(&c) {
            (i + 1, TokenKind::Punct)
        } else {
            (i + 1, TokenKind::Symbol)
        };
        let (start_b, end_b) = (byte_at(i), byte_at(end));
        tokens.push(Token {
            text: text[start_b..end_b].to_string(),
            span: offset + start_b..offset + end_b,
            kind,
        });
        i = end;
    }
    tokens
}

/// Abbreviations that never end a sentence.
const TITLE_ABBREVIATIONS: &[&str] = &[
    "dr", "drs", "mr", "mrs", "ms", "prof", "st", "vs", "approx", "appr", "e.g", "i.e", "etc", "ca",
    "no", "jan", "feb", "mar", "apr", "jun", "jul", "aug", "sep", "sept", "oct", "nov", "dec",
];

/// Clipped words and units: no break when the next sentence would start with a
/// lowercase letter or a digit ("my trig. 30 points").
const CLIPPED_ABBREVIATIONS: &[&str] = &[
    "pts", "pt", "chol", "trig", "trigl", "mg", "mgs", "lbs", "lb", "wk", "wks", "mo", "mos", "yr",
    "yrs", "hr", "hrs", "min", "mins", "tot",
];

const TERMINALS: &[char] = &['.', '!', '?', '…'];
const CLOSERS: &[char] = &['"', '\'', '”', '’', ')', ']'];

fn word_before(text: &str, dot_byte: usize) -> String {
    let head = &text[..dot_byte];
    let start = head
        .char_indices()
        .rev()
        .take_while(|&(_, c)| c.is_alphabetic() || c == '.')
        .last()
        .map_or(dot_byte, |(b, _)| b);
    head[start..].to_lowercase()
}

fn first_word(text: &str) -> String {
    text.trim_start()
        .chars()
        .take_while(|c| c.is_alphabetic())
        .collect::<String>()
        .to_lowercase()
}

/// Splits review text into sentences.
///
/// Breaks on `.`, `!`, `?` (and runs of them) followed by whitespace or the end
/// of input, and always at line breaks. A dot inside a number never breaks. A
/// `Before …:` list directly followed by an `After …:` list stays one sentence,
/// since the two halves only make sense together.
pub fn split_sentences(text: &str, review_id: &str) -> Vec<Sentence> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut bounds: Vec<Range<usize>> = Vec::new();
    let mut start = 0;
    let mut i = 0;
    while i < chars.len() {
        let (byte, c) = chars[i];
        if c == '\n' || c == '\r' {
            bounds.push(start..byte);
            start = byte + c.len_utf8();
            i += 1;
            continue;
        }
        if !TERMINALS.contains(&c) {
            i += 1;
            continue;
        }
        let mut j = i;
        while j < chars.len() && TERMINALS.contains(&chars[j].1) {
            j += 1;
        }
        let single_dot = j == i + 1 && c == '.';
        while j < chars.len() && CLOSERS.contains(&chars[j].1) {
            j += 1;
        }
        let end_byte = chars.get(j).map_or(text.len(), |&(b, _)| b);
        let at_break = chars.get(j).is_none_or(|&(_, c)| c.is_whitespace());
        if !at_break {
            i = j;
            continue;
        }
        let next_char = chars[j..].iter().map(|&(_, c)| c).find(|c| !c.is_whitespace());
        let mut protected = false;
        if single_dot {
            let word = word_before(text, byte);
            if TITLE_ABBREVIATIONS.contains(&word.as_str()) {
                protected = true;
            } else if CLIPPED_ABBREVIATIONS.contains(&word.as_str()) {
                protected = next_char.is_some_and(|c| c.is_lowercase() || c.is_ascii_digit());
            }
        }
        if !protected && first_word(&text[start..byte]) == "before" && first_word(&text[end_byte..]) == "after" {
            protected = true;
        }
        if !protected {
            bounds.push(start..end_byte);
            start = end_byte;
        }
        i = j;
    }
    bounds.push(start..text.len());

    let mut sentences = Vec::new();
    for range in bounds {
        let raw = &text[range.clone()];
        let trimmed_start = raw.len() - raw.trim_start().len();
        let trimmed = raw.trim();
        if trimmed.is_empty() {
            continue;
        }
        let span_start = range.start + trimmed_start;
        sentences.push(Sentence {
            text: trimmed.to_string(),
            span: span_start..span_start + trimmed.len(),
            tokens: tokenize_at(trimmed, span_start),
            review_id: review_id.to_string(),
            index: sentences.len(),
        });
    }
    sentences
}
