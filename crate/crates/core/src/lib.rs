//! Implicit sentiment in quantitative medical sentences.
//!
//! Reviews are split into sentences, term-value change events are pulled out
//! with pattern rules, and each event is scored by a Mamdani fuzzy system
//! driven by a textual knowledge base.

pub mod textproc;
pub mod lexicon;
pub mod extract;
pub mod fuzzy;
pub mod kb;
pub mod classify;
pub mod eval;
