//! Gazetteers: alias lists mapping surface forms to canonical identities.
//!
//! Every gazetteer file is UTF-8 text with one `alias<TAB>canonical-id` entry
//! per line. Lines starting with `#` and blank lines are ignored. Aliases are
//! tokenized with the same tokenizer as review text and compared token by
//! token after lowercasing, so `Total-C` matches the tokens `total - c`.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::textproc::tokenize;

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{gazetteer}:{line}: duplicate alias {alias:?}")]
    DuplicateAlias { gazetteer: String, line: usize, alias: String },
    #[error("{gazetteer}:{line}: unknown canonical id {id:?}")]
    UnknownCanonical { gazetteer: String, line: usize, id: String },
    #[error("{gazetteer}:{line}: expected `alias<TAB>canonical-id`")]
    Malformed { gazetteer: String, line: usize },
}

/// Error returned by `FromStr` for the closed canonical registries.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown id {0:?}")]
pub struct UnknownId(pub String);

macro_rules! registry {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $id:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        pub enum $name {
            $(#[serde(rename = $id)] $variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn id(self) -> &'static str {
                match self {
                    $($name::$variant => $id),+
                }
            }
        }

        impl FromStr for $name {
            type Err = UnknownId;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $($id => Ok($name::$variant),)+
                    other => Err(UnknownId(other.to_string())),
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.id())
            }
        }
    };
}

registry! {
    /// Quantitative medical terms the extractor knows about.
    CanonicalTerm {
        Cholesterol => "Cholesterol",
        Ldl => "LDL",
        Hdl => "HDL",
        Triglyceride => "Triglyceride",
        Weight => "Weight",
        BloodPressure => "BloodPressure",
        BloodSugar => "BloodSugar",
        HeartRate => "HeartRate",
        Pulse => "Pulse",
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DesirableDirection {
    Down,
    Up,
    ContextDependent,
}

impl CanonicalTerm {
    pub fn desirable_direction(self) -> DesirableDirection {
        use CanonicalTerm::*;
        match self {
            Cholesterol | Ldl | Triglyceride | Weight | BloodPressure | BloodSugar => DesirableDirection::Down,
            Hdl => DesirableDirection::Up,
            HeartRate | Pulse => DesirableDirection::ContextDependent,
        }
    }
}

registry! {
    /// Direction carried by a change verb. `Improve` and `Worsen` resolve
    /// against the desirable direction of the term they govern.
    VerbDirection {
        Increase => "Increase",
        Decrease => "Decrease",
        Neutral => "Neutral",
        Improve => "Improve",
        Worsen => "Worsen",
    }
}

registry! {
    /// Cholesterol-lowering drugs, by active ingredient.
    Drug {
        Lovastatin => "Lovastatin",
        Pravastatin => "Pravastatin",
        Simvastatin => "Simvastatin",
        Atorvastatin => "Atorvastatin",
        Rosuvastatin => "Rosuvastatin",
        Fluvastatin => "Fluvastatin",
        Pitavastatin => "Pitavastatin",
        Niacin => "Niacin",
        Ezetimibe => "Ezetimibe",
        Colesevelam => "Colesevelam",
        Fenofibrate => "Fenofibrate",
        Gemfibrozil => "Gemfibrozil",
    }
}

registry! {
    Modality {
        Desire => "Desire",
        Goal => "Goal",
        Obligation => "Obligation",
        Condition => "Condition",
    }
}

registry! {
    TimeUnit {
        Minute => "Minute",
        Hour => "Hour",
        Day => "Day",
        Week => "Week",
        Month => "Month",
        Year => "Year",
    }
}

impl TimeUnit {
    pub fn days(self) -> f64 {
        match self {
            TimeUnit::Minute => 1.0 / 1440.0,
            TimeUnit::Hour => 1.0 / 24.0,
            TimeUnit::Day => 1.0,
            TimeUnit::Week => 7.0,
            TimeUnit::Month => 30.0,
            TimeUnit::Year => 365.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Unit {
    None,
    MgDl,
    Points,
    Percent,
    Mg,
    Lbs,
    Time(TimeUnit),
    Clock,
    Other(String),
}

impl FromStr for Unit {
    type Err = UnknownId;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "MgDl" => Unit::MgDl,
            "Points" => Unit::Points,
            "Percent" => Unit::Percent,
            "Mg" => Unit::Mg,
            "Lbs" => Unit::Lbs,
            "Clock" => Unit::Clock,
            other => match other.strip_prefix("Other:") {
                Some(name) if !name.is_empty() => Unit::Other(name.to_string()),
                _ => Unit::Time(other.parse()?),
            },
        })
    }
}

fn fold(s: &str) -> String {
    s.to_lowercase()
}

/// Case-insensitive alias table over token sequences.
#[derive(Debug, Clone)]
pub struct Gazetteer<C> {
    name: String,
    entries: HashMap<Vec<String>, C>,
    max_tokens: usize,
}

impl<C> Gazetteer<C>
where
    C: FromStr,
{
    pub fn new(name: impl Into<String>) -> Self {
        Gazetteer { name: name.into(), entries: HashMap::new(), max_tokens: 0 }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn key(alias: &str) -> Vec<String> {
        tokenize(alias).iter().map(|t| fold(&t.text)).collect()
    }

    /// Adds one alias. Returns false if the alias (after case folding) is
    /// already present.
    pub fn insert(&mut self, alias: &str, canonical: C) -> bool {
        let key = Self::key(alias);
        if key.is_empty() || self.entries.contains_key(&key) {
            return false;
        }
        self.max_tokens = self.max_tokens.max(key.len());
        self.entries.insert(key, canonical);
        true
    }

    pub fn parse(name: &str, source: &str) -> Result<Self, LexiconError> {
        let mut gazetteer = Gazetteer::new(name);
        for (idx, raw) in source.lines().enumerate() {
            let line = idx + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let (alias, id) = raw
                .split_once('\t')
                .map(|(a, i)| (a.trim(), i.trim()))
                .filter(|(a, i)| !a.is_empty() && !i.is_empty())
                .ok_or_else(|| LexiconError::Malformed { gazetteer: name.to_string(), line })?;
            let canonical = id.parse::<C>().map_err(|_| LexiconError::UnknownCanonical {
                gazetteer: name.to_string(),
                line,
                id: id.to_string(),
            })?;
            if !gazetteer.insert(alias, canonical) {
                return Err(LexiconError::DuplicateAlias {
                    gazetteer: name.to_string(),
                    line,
                    alias: alias.to_string(),
                });
            }
        }
        Ok(gazetteer)
    }

    pub fn load(path: &Path) -> Result<Self, LexiconError> {
        let source = fs::read_to_string(path).map_err(|source| LexiconError::Io { path: path.to_path_buf(), source })?;
        let name = path.file_stem().map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned());
        Self::parse(&name, &source)
    }

    /// Exact lookup of a whole alias.
    pub fn lookup(&self, alias: &str) -> Option<&C> {
        self.entries.get(&Self::key(alias))
    }

    /// Longest alias that matches at the head of `window`, with the number of
    /// tokens it covers.
    pub fn lookup_longest<S: AsRef<str>>(&self, window: &[S]) -> Option<(&C, usize)> {
        let longest = self.max_tokens.min(window.len());
        let folded: Vec<String> = window[..longest].iter().map(|s| fold(s.as_ref())).collect();
        (1..=longest).rev().find_map(|len| self.entries.get(&folded[..len]).map(|c| (c, len)))
    }

    pub fn canonicals(&self) -> impl Iterator<Item = &C> {
        self.entries.values()
    }

    pub fn aliases(&self) -> impl Iterator<Item = (&[String], &C)> {
        self.entries.iter().map(|(k, v)| (k.as_slice(), v))
    }
}

const BUNDLED_TERMS: &str = include_str!("../data/lexicons/terms.tsv");
const BUNDLED_VERBS: &str = include_str!("../data/lexicons/verbs.tsv");
const BUNDLED_DRUGS: &str = include_str!("../data/lexicons/drugs.tsv");
const BUNDLED_UNITS: &str = include_str!("../data/lexicons/units.tsv");
const BUNDLED_MODALITY: &str = include_str!("../data/lexicons/modality.tsv");

/// The five gazetteers the extractor works with.
#[derive(Debug, Clone)]
pub struct Lexicons {
    pub terms: Gazetteer<CanonicalTerm>,
    pub verbs: Gazetteer<VerbDirection>,
    pub drugs: Gazetteer<Drug>,
    pub units: Gazetteer<Unit>,
    pub modality: Gazetteer<Modality>,
}

impl Lexicons {
    pub const FILES: [&'static str; 5] = ["terms.tsv", "verbs.tsv", "drugs.tsv", "units.tsv", "modality.tsv"];

    /// Lexicons compiled into the library.
    pub fn bundled() -> Self {
        Self::from_sources(BUNDLED_TERMS, BUNDLED_VERBS, BUNDLED_DRUGS, BUNDLED_UNITS, BUNDLED_MODALITY)
            .expect("bundled lexicons are valid")
    }

    pub fn from_sources(
        terms: &str,
        verbs: &str,
        drugs: &str,
        units: &str,
        modality: &str,
    ) -> Result<Self, LexiconError> {
        Ok(Lexicons {
            terms: Gazetteer::parse("terms", terms)?,
            verbs: Gazetteer::parse("verbs", verbs)?,
            drugs: Gazetteer::parse("drugs", drugs)?,
            units: Gazetteer::parse("units", units)?,
            modality: Gazetteer::parse("modality", modality)?,
        })
    }

    /// Loads `terms.tsv`, `verbs.tsv`, `drugs.tsv`, `units.tsv` and
    /// `modality.tsv` from `dir`.
    pub fn load_dir(dir: &Path) -> Result<Self, LexiconError> {
        let read = |file: &str| {
            let path = dir.join(file);
            fs::read_to_string(&path).map_err(|source| LexiconError::Io { path, source })
        };
        let [terms, verbs, drugs, units, modality] = Self::FILES.map(read);
        Self::from_sources(&terms?, &verbs?, &drugs?, &units?, &modality?)
    }
}

impl Default for Lexicons {
    fn default() -> Self {
        Self::bundled()
    }
}

/// Source text of the bundled gazetteer files, keyed by file name.
pub fn bundled_files() -> [(&'static str, &'static str); 5] {
    [
        ("terms.tsv", BUNDLED_TERMS),
        ("verbs.tsv", BUNDLED_VERBS),
        ("drugs.tsv", BUNDLED_DRUGS),
        ("units.tsv", BUNDLED_UNITS),
        ("modality.tsv", BUNDLED_MODALITY),
    ]
}
