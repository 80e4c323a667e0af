//! Knowledge base files: fuzzy variable declarations and the rulebase.
//!
//! Both files are line oriented; `docs/kb-grammar.md` has the grammar. In
//! short, a variables file looks like
//!
//! ```text
//! version 1
//! var CHOLESTEROL_{DRUG}_Change universe 0 1000
//!   set Low trapezoid 5 15 25 35
//! ```
//!
//! where `{DRUG}` expands to one variable per drug of the statin/niacin
//! family, and a rules file holds lines such as
//!
//! ```text
//! rule R3 source=reference: IF CHOLESTEROL_finalValue IS Optimal THEN Sentiment IS Positive
//! ```

use std::collections::{BTreeSet, HashMap};
use std::fmt::{self, Write as _};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fuzzy::{Conjunct, FuzzyError, FuzzyRule, FuzzyVariable, TrapezoidMF};
use crate::lexicon::{CanonicalTerm, Drug};

/// Name of the single output variable.
pub const OUTPUT_VARIABLE: &str = "Sentiment";

/// Drugs a `{DRUG}` placeholder expands to.
pub const FAMILY_DRUGS: [Drug; 6] =
    [Drug::Lovastatin, Drug::Pravastatin, Drug::Simvastatin, Drug::Atorvastatin, Drug::Rosuvastatin, Drug::Niacin];

/// Variable-name prefix of a term, for the terms the knowledge base models.
pub fn term_prefix(term: CanonicalTerm) -> Option<&'static str> {
    match term {
        CanonicalTerm::Cholesterol => Some("CHOLESTEROL"),
        CanonicalTerm::Ldl => Some("LDL"),
        CanonicalTerm::Hdl => Some("HDL"),
        CanonicalTerm::Triglyceride => Some("TRIGLYCERIDE"),
        _ => None,
    }
}

const BUNDLED_VARIABLES: &str = include_str!("../data/kb/variables.kb");
const BUNDLED_RULES: &str = include_str!("../data/kb/rules.kb");

#[derive(Debug, Error)]
pub enum KbError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{file}:{line}: {reason}")]
    Parse { file: String, line: usize, reason: String },
    #[error("rule {rule}: unresolved reference {name}")]
    UnresolvedReference { rule: String, name: String },
    #[error("variable {variable}: no set covers [{lo}, {hi}]")]
    IncompleteCoverage { variable: String, lo: f64, hi: f64 },
    #[error("duplicate rule id {0}")]
    DuplicateRuleId(String),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Severity {
    Warning,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Issue {
    NoOutputVariable,
    UnresolvedReference { rule: String, name: String },
    IncompleteCoverage { variable: String, lo: f64, hi: f64 },
    DuplicateRuleId { rule: String },
    ConsequentNotOutput { rule: String },
    /// The same variable appears twice in one antecedent.
    RepeatedVariable { rule: String, variable: String },
    /// Two conjuncts over one variable ask for sets that never overlap.
    Unreachable { rule: String, variable: String },
    UnusedVariable { variable: String },
}

impl Issue {
    pub fn severity(&self) -> Severity {
        match self {
            Issue::RepeatedVariable { .. } | Issue::Unreachable { .. } | Issue::UnusedVariable { .. } => {
                Severity::Warning
            }
            _ => Severity::Error,
        }
    }
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Issue::NoOutputVariable => write!(f, "no output variable named {OUTPUT_VARIABLE}"),
            Issue::UnresolvedReference { rule, name } => write!(f, "rule {rule}: unresolved reference {name}"),
            Issue::IncompleteCoverage { variable, lo, hi } => {
                write!(f, "variable {variable}: no set covers [{lo}, {hi}]")
            }
            Issue::DuplicateRuleId { rule } => write!(f, "duplicate rule id {rule}"),
            Issue::ConsequentNotOutput { rule } => write!(f, "rule {rule}: consequent must be {OUTPUT_VARIABLE}"),
            Issue::RepeatedVariable { rule, variable } => {
                write!(f, "rule {rule}: {variable} appears in more than one conjunct")
            }
            Issue::Unreachable { rule, variable } => {
                write!(f, "rule {rule} can never fire: disjoint sets required of {variable}")
            }
            Issue::UnusedVariable { variable } => write!(f, "variable {variable} is not used by any rule"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub issue: Issue,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{tag}: {}", self.issue)
    }
}

impl From<Issue> for KbError {
    fn from(issue: Issue) -> Self {
        match issue {
            Issue::UnresolvedReference { rule, name } => KbError::UnresolvedReference { rule, name },
            Issue::IncompleteCoverage { variable, lo, hi } => KbError::IncompleteCoverage { variable, lo, hi },
            Issue::DuplicateRuleId { rule } => KbError::DuplicateRuleId(rule),
            other => KbError::Invalid(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnowledgeBase {
    pub version: String,
    pub variables: Vec<FuzzyVariable>,
    pub rules: Vec<FuzzyRule>,
    index: HashMap<String, usize>,
}

impl KnowledgeBase {
    pub fn new(version: impl Into<String>, variables: Vec<FuzzyVariable>, rules: Vec<FuzzyRule>) -> Self {
        let index = variables.iter().enumerate().map(|(i, v)| (v.name.to_ascii_lowercase(), i)).collect();
        KnowledgeBase { version: version.into(), variables, rules, index }
    }

    /// The knowledge base compiled into the library.
    pub fn bundled() -> Self {
        Self::parse(BUNDLED_VARIABLES, BUNDLED_RULES).expect("bundled knowledge base is valid")
    }

    pub fn bundled_sources() -> (&'static str, &'static str) {
        (BUNDLED_VARIABLES, BUNDLED_RULES)
    }

    /// Variable lookup ignores ASCII case.
    pub fn variable(&self, name: &str) -> Option<&FuzzyVariable> {
        self.index.get(&name.to_ascii_lowercase()).map(|&i| &self.variables[i])
    }

    pub fn output(&self) -> &FuzzyVariable {
        self.variable(OUTPUT_VARIABLE).expect("validated knowledge base has an output variable")
    }

    pub fn rule(&self, id: &str) -> Option<&FuzzyRule> {
        self.rules.iter().find(|r| r.id == id)
    }

    /// Parses both files and rejects the result if validation reports an
    /// error.
    pub fn parse(variables: &str, rules: &str) -> Result<Self, KbError> {
        let (version, vars) = parse_variables("variables", variables)?;
        let rules = parse_rules("rules", rules)?;
        let kb = KnowledgeBase::new(version, vars, rules);
        match kb.validate().into_iter().find(|d| d.severity == Severity::Error) {
            Some(d) => Err(d.issue.into()),
            None => Ok(kb),
        }
    }

    /// Every invariant violation and warning, errors first.
    pub fn validate(&self) -> Vec<Diagnostic> {
        let mut issues = Vec::new();
        let output = self.variable(OUTPUT_VARIABLE);
        if output.is_none() {
            issues.push(Issue::NoOutputVariable);
        }
        for var in &self.variables {
            if let Some((lo, hi)) = var.coverage_gap() {
                issues.push(Issue::IncompleteCoverage { variable: var.name.clone(), lo, hi });
            }
        }

        let mut seen = BTreeSet::new();
        let mut used = BTreeSet::new();
        for rule in &self.rules {
            if !seen.insert(rule.id.as_str()) {
                issues.push(Issue::DuplicateRuleId { rule: rule.id.clone() });
            }
            if !rule.consequent.variable.eq_ignore_ascii_case(OUTPUT_VARIABLE) {
                issues.push(Issue::ConsequentNotOutput { rule: rule.id.clone() });
            }
            for c in rule.antecedent.iter().chain(std::iter::once(&rule.consequent)) {
                match self.variable(&c.variable) {
                    None => issues.push(Issue::UnresolvedReference { rule: rule.id.clone(), name: c.variable.clone() }),
                    Some(var) => {
                        used.insert(var.name.as_str());
                        if var.set(&c.set).is_none() {
                            issues.push(Issue::UnresolvedReference {
                                rule: rule.id.clone(),
                                name: format!("{}.{}", c.variable, c.set),
                            });
                        }
                    }
                }
            }
            for (i, x) in rule.antecedent.iter().enumerate() {
                for y in &rule.antecedent[i + 1..] {
                    if !x.variable.eq_ignore_ascii_case(&y.variable) {
                        continue;
                    }
                    let var = self.variable(&x.variable);
                    let sets = var.and_then(|v| Some((v.set(&x.set)?.mf, v.set(&y.set)?.mf)));
                    let issue = match sets {
                        Some((p, q)) if disjoint(p, q) => {
                            Issue::Unreachable { rule: rule.id.clone(), variable: x.variable.clone() }
                        }
                        _ => Issue::RepeatedVariable { rule: rule.id.clone(), variable: x.variable.clone() },
                    };
                    issues.push(issue);
                }
            }
        }
        for var in &self.variables {
            if !used.contains(var.name.as_str()) {
                issues.push(Issue::UnusedVariable { variable: var.name.clone() });
            }
        }

        let mut diagnostics: Vec<Diagnostic> =
            issues.into_iter().map(|issue| Diagnostic { severity: issue.severity(), issue }).collect();
        diagnostics.sort_by_key(|d| std::cmp::Reverse(d.severity));
        diagnostics
    }

    /// The variables file for this knowledge base, placeholders expanded.
    pub fn variables_source(&self) -> String {
        let mut out = format!("version {}\n", self.version);
        for var in &self.variables {
            let _ = writeln!(out, "var {} universe {} {}", var.name, var.lo, var.hi);
            for set in &var.sets {
                let m = set.mf;
                let _ = writeln!(out, "  set {} trapezoid {} {} {} {}", set.name, m.a, m.b, m.c, m.d);
            }
        }
        out
    }

    pub fn rules_source(&self) -> String {
        let mut out = String::new();
        for rule in &self.rules {
            out.push_str(&format_rule(rule));
            out.push('\n');
        }
        out
    }
}

/// Two sets never share a point with positive membership in both.
fn disjoint(p: TrapezoidMF, q: TrapezoidMF) -> bool {
    let (first, second) = if p.a <= q.a { (p, q) } else { (q, p) };
    first.d < second.a || (first.d == second.a && !(first.c == first.d && second.a == second.b))
}

pub fn format_rule(rule: &FuzzyRule) -> String {
    let mut out = format!("rule {}", rule.id);
    if let Some(source) = &rule.source {
        let _ = write!(out, " source={source}");
    }
    out.push_str(": IF ");
    let conjuncts: Vec<String> = rule.antecedent.iter().map(|c| format!("{} IS {}", c.variable, c.set)).collect();
    out.push_str(&conjuncts.join(" AND "));
    let _ = write!(out, " THEN {} IS {}", rule.consequent.variable, rule.consequent.set);
    out
}

/// Reads both files from disk, then parses and validates them.
pub fn load_kb(variables_path: &Path, rules_path: &Path) -> Result<KnowledgeBase, KbError> {
    let read = |path: &Path| fs::read_to_string(path).map_err(|source| KbError::Io { path: path.to_path_buf(), source });
    let variables = read(variables_path)?;
    let rules = read(rules_path)?;
    let (version, vars) = parse_variables(&variables_path.display().to_string(), &variables)?;
    let rules = parse_rules(&rules_path.display().to_string(), &rules)?;
    let kb = KnowledgeBase::new(version, vars, rules);
    match kb.validate().into_iter().find(|d| d.severity == Severity::Error) {
        Some(d) => Err(d.issue.into()),
        None => Ok(kb),
    }
}

/// Loads without rejecting on validation errors, so that a caller can list
/// every diagnostic.
pub fn load_kb_unchecked(variables_path: &Path, rules_path: &Path) -> Result<KnowledgeBase, KbError> {
    let read = |path: &Path| fs::read_to_string(path).map_err(|source| KbError::Io { path: path.to_path_buf(), source });
    let (version, vars) = parse_variables(&variables_path.display().to_string(), &read(variables_path)?)?;
    let rules = parse_rules(&rules_path.display().to_string(), &read(rules_path)?)?;
    Ok(KnowledgeBase::new(version, vars, rules))
}

fn strip_comment(line: &str) -> &str {
    line.split_once('#').map_or(line, |(before, _)| before)
}

fn expand_placeholders(name: &str) -> Result<Vec<String>, String> {
    let Some(start) = name.find("{DRUG") else {
        return Ok(vec![name.to_string()]);
    };
    let end = name[start..].find('}').ok_or("unterminated {DRUG placeholder")? + start;
    let inner = &name[start + 1..end];
    let drugs: Vec<String> = match inner.strip_prefix("DRUG") {
        Some("") => FAMILY_DRUGS.iter().map(|d| d.id().to_string()).collect(),
        Some(list) => {
            let list = list.strip_prefix(':').ok_or_else(|| format!("bad placeholder {{{inner}}}"))?;
            list.split(',').map(|d| d.trim().to_string()).filter(|d| !d.is_empty()).collect()
        }
        None => return Err(format!("bad placeholder {{{inner}}}")),
    };
    if drugs.is_empty() {
        return Err("empty drug list in placeholder".into());
    }
    let mut out = Vec::new();
    for drug in drugs {
        let replaced = format!("{}{}{}", &name[..start], drug, &name[end + 1..]);
        out.extend(expand_placeholders(&replaced)?);
    }
    Ok(out)
}

fn number(word: Option<&str>, what: &str) -> Result<f64, String> {
    let word = word.ok_or_else(|| format!("missing {what}"))?;
    word.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| format!("{what}: not a number: {word:?}"))
}

/// Parses a variables file. Returns the version string and the declared
/// variables in file order.
pub fn parse_variables(file: &str, source: &str) -> Result<(String, Vec<FuzzyVariable>), KbError> {
    let mut version = String::from("unversioned");
    let mut vars: Vec<FuzzyVariable> = Vec::new();
    let mut current: Vec<usize> = Vec::new();
    let mut names: HashMap<String, usize> = HashMap::new();

    for (idx, raw) in source.lines().enumerate() {
        let line = idx + 1;
        let err = |reason: String| KbError::Parse { file: file.to_string(), line, reason };
        let text = strip_comment(raw).trim();
        if text.is_empty() {
            continue;
        }
        let mut words = text.split_whitespace();
        match words.next().map(str::to_ascii_lowercase).as_deref() {
            Some("version") => {
                let rest: Vec<&str> = words.collect();
                if rest.is_empty() {
                    return Err(err("missing version".into()));
                }
                version = rest.join(" ");
            }
            Some("var") => {
                let name = words.next().ok_or_else(|| err("missing variable name".into()))?;
                if !words.next().is_some_and(|w| w.eq_ignore_ascii_case("universe")) {
                    return Err(err("expected `universe` after the variable name".into()));
                }
                let lo = number(words.next(), "universe lower bound").map_err(err)?;
                let hi = number(words.next(), "universe upper bound").map_err(err)?;
                if let Some(extra) = words.next() {
                    return Err(err(format!("unexpected {extra:?}")));
                }
                current.clear();
                for expanded in expand_placeholders(name).map_err(err)? {
                    let key = expanded.to_ascii_lowercase();
                    if names.contains_key(&key) {
                        return Err(err(format!("variable {expanded} declared twice")));
                    }
                    let var = FuzzyVariable::new(expanded, lo, hi).map_err(|e| err(e.to_string()))?;
                    names.insert(key, vars.len());
                    current.push(vars.len());
                    vars.push(var);
                }
            }
            Some("set") => {
                if current.is_empty() {
                    return Err(err("`set` before any `var`".into()));
                }
                let name = words.next().ok_or_else(|| err("missing set name".into()))?;
                if !words.next().is_some_and(|w| w.eq_ignore_ascii_case("trapezoid")) {
                    return Err(err("expected `trapezoid` after the set name".into()));
                }
                let a = number(words.next(), "a").map_err(err)?;
                let b = number(words.next(), "b").map_err(err)?;
                let c = number(words.next(), "c").map_err(err)?;
                let d = number(words.next(), "d").map_err(err)?;
                if let Some(extra) = words.next() {
                    return Err(err(format!("unexpected {extra:?}")));
                }
                let mf = TrapezoidMF::new(a, b, c, d).map_err(|e| err(e.to_string()))?;
                for &i in &current {
                    vars[i].add_set(name, mf).map_err(|e: FuzzyError| err(e.to_string()))?;
                }
            }
            Some(other) => return Err(err(format!("unknown keyword {other:?}"))),
            None => unreachable!("blank lines are skipped"),
        }
    }
    Ok((version, vars))
}

/// Parses `<Var> IS <Set words...>`; multiword set names join with `_`.
fn parse_conjunct(words: &[&str]) -> Result<Conjunct, String> {
    match words {
        [var, is, set @ ..] if is.eq_ignore_ascii_case("is") && !set.is_empty() => {
            Ok(Conjunct::new(*var, set.join("_")))
        }
        _ => Err(format!("expected `<Variable> IS <Set>`, found {:?}", words.join(" "))),
    }
}

pub fn parse_rule_line(text: &str) -> Result<FuzzyRule, String> {
    let (head, body) = text.split_once(':').ok_or("expected `:` after the rule header")?;
    let mut head_words = head.split_whitespace();
    if !head_words.next().is_some_and(|w| w.eq_ignore_ascii_case("rule")) {
        return Err("expected `rule`".into());
    }
    let id = head_words.next().ok_or("missing rule id")?.to_string();
    let mut source = None;
    for word in head_words {
        match word.split_once('=') {
            Some((key, value)) if key.eq_ignore_ascii_case("source") && !value.is_empty() => {
                source = Some(value.to_string());
            }
            _ => return Err(format!("unexpected {word:?} in rule header")),
        }
    }

    let words: Vec<&str> = body.split_whitespace().collect();
    if !words.first().is_some_and(|w| w.eq_ignore_ascii_case("if")) {
        return Err("expected `IF`".into());
    }
    let then = words.iter().position(|w| w.eq_ignore_ascii_case("then")).ok_or("missing `THEN`")?;
    let mut antecedent = Vec::new();
    for part in words[1..then].split(|w| w.eq_ignore_ascii_case("and")) {
        antecedent.push(parse_conjunct(part)?);
    }
    let consequent = parse_conjunct(&words[then + 1..])?;
    Ok(FuzzyRule { id, source, antecedent, consequent })
}

pub fn parse_rules(file: &str, source: &str) -> Result<Vec<FuzzyRule>, KbError> {
    source
        .lines()
        .enumerate()
        .filter_map(|(idx, raw)| {
            let text = strip_comment(raw).trim();
            (!text.is_empty()).then(|| {
                parse_rule_line(text).map_err(|reason| KbError::Parse { file: file.to_string(), line: idx + 1, reason })
            })
        })
        .collect()
}
