//! Subcommand bodies.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use log::{info, warn};
use quantsent::classify::{classify_review, SentenceResult};
use quantsent::eval::{evaluate as score, load_gold, predictions_from_results, render, Prediction, ReportFormat};
use quantsent::extract::{analyze_review, ChangeEvent, Review, SentenceAnalysis};
use quantsent::kb::{parse_rules, parse_variables, KnowledgeBase, Severity};
use quantsent::lexicon::Lexicons;
use rayon::prelude::*;
use serde_json::json;

use crate::error::CliError;
use crate::{Format, Options};

fn lexicons(opts: &Options) -> Result<Lexicons, CliError> {
    match &opts.lexicons {
        None => Ok(Lexicons::bundled()),
        Some(dir) if !dir.is_dir() => {
            Err(CliError::Config(format!("lexicon directory {} does not exist", dir.display())))
        }
        Some(dir) => Ok(Lexicons::load_dir(dir)?),
    }
}

fn read_source(path: Option<&PathBuf>, bundled: &str) -> Result<(String, String), CliError> {
    match path {
        None => Ok(("<bundled>".to_string(), bundled.to_string())),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
            Ok((p.display().to_string(), text))
        }
    }
}

/// Parses the knowledge base without rejecting it, so every diagnostic can
/// be listed. Syntax errors still fail here.
fn parse_kb(opts: &Options) -> Result<KnowledgeBase, CliError> {
    let (bundled_vars, bundled_rules) = KnowledgeBase::bundled_sources();
    let (vars_name, vars) = read_source(opts.kb_vars.as_ref(), bundled_vars)?;
    let (rules_name, rules) = read_source(opts.kb_rules.as_ref(), bundled_rules)?;
    let (version, variables) = parse_variables(&vars_name, &vars).map_err(|e| CliError::Kb(e.to_string()))?;
    let rules = parse_rules(&rules_name, &rules).map_err(|e| CliError::Kb(e.to_string()))?;
    Ok(KnowledgeBase::new(version, variables, rules))
}

fn knowledge_base(opts: &Options) -> Result<KnowledgeBase, CliError> {
    let kb = parse_kb(opts)?;
    let errors: Vec<String> = kb
        .validate()
        .into_iter()
        .filter(|d| d.severity == Severity::Error)
        .map(|d| format!("  {d}"))
        .collect();
    if !errors.is_empty() {
        return Err(CliError::Kb(format!("knowledge base is invalid:\n{}", errors.join("\n"))));
    }
    info!("knowledge base {}: {} variables, {} rules", kb.version, kb.variables.len(), kb.rules.len());
    Ok(kb)
}

fn pool(opts: &Options) -> Result<rayon::ThreadPool, CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(jobs) = opts.jobs {
        builder = builder.num_threads(jobs as usize);
    }
    builder.build().map_err(|e| CliError::Config(format!("cannot start worker threads: {e}")))
}

/// Reads reviews, one per line. A line starting with `{` is a JSON review;
/// any other non-blank line is a bare review text named after its line.
/// Bad records are logged and skipped.
pub fn read_reviews(opts: &Options) -> Result<Vec<Review>, CliError> {
    let text = match &opts.input {
        Some(p) => fs::read_to_string(p).map_err(|e| CliError::io(p, e))?,
        None => {
            let mut s = String::new();
            io::stdin().read_to_string(&mut s).map_err(|e| CliError::io("<stdin>", e))?;
            s
        }
    };
    Ok(parse_review_lines(&text))
}

pub fn parse_review_lines(text: &str) -> Vec<Review> {
    let mut reviews = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if trimmed.starts_with('{') {
            match serde_json::from_str::<Review>(trimmed) {
                Ok(r) => reviews.push(r),
                Err(e) => warn!("line {}: skipped: {e}", i + 1),
            }
        } else {
            reviews.push(Review {
                review_id: format!("line-{}", i + 1),
                drug: None,
                dosage: None,
                duration: None,
                text: trimmed.to_string(),
            });
        }
    }
    reviews
}

fn write_output(opts: &Options, text: &str) -> Result<(), CliError> {
    match &opts.output {
        Some(p) => fs::write(p, text).map_err(|e| CliError::io(p, e)),
        None => {
            let mut out = io::stdout().lock();
            out.write_all(text.as_bytes()).and_then(|_| out.flush()).map_err(|e| CliError::io("<stdout>", e))
        }
    }
}

fn values(e: &ChangeEvent) -> Vec<f64> {
    e.values().map(|v| v.magnitude).collect()
}

fn values_text(e: &ChangeEvent) -> String {
    values(e).iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

pub fn extract(opts: &Options) -> Result<ExitCode, CliError> {
    let lex = lexicons(opts)?;
    let reviews = read_reviews(opts)?;
    let analyses: Vec<Vec<SentenceAnalysis>> =
        pool(opts)?.install(|| reviews.par_iter().map(|r| analyze_review(r, &lex)).collect());

    let mut out = String::new();
    for analysis in analyses.iter().flatten() {
        match opts.format {
            Format::Structured => {
                for record in analysis.records() {
                    out.push_str(&serde_json::to_string(&record).expect("record serializes"));
                    out.push('\n');
                }
            }
            Format::Text => {
                for e in &analysis.events {
                    let _ = writeln!(
                        out,
                        "{}#{}\t{}\t{:?}\t{}\t{:?}\t{:?}",
                        analysis.sentence.review_id,
                        analysis.sentence.index,
                        e.term,
                        e.sentence_type,
                        values_text(e),
                        e.direction,
                        e.pattern
                    );
                }
            }
        }
    }
    write_output(opts, &out)?;
    Ok(ExitCode::SUCCESS)
}

fn classify_all(opts: &Options, reviews: &[Review]) -> Result<Vec<SentenceResult>, CliError> {
    let lex = lexicons(opts)?;
    let kb = knowledge_base(opts)?;
    let grid = opts.grid_points as usize;
    let per_review: Vec<Vec<SentenceResult>> =
        pool(opts)?.install(|| reviews.par_iter().map(|r| classify_review(&kb, &lex, r, grid)).collect());
    Ok(per_review.into_iter().flatten().collect())
}

fn fired(trace: &quantsent::fuzzy::InferenceTrace) -> Vec<String> {
    trace.fired().map(|(id, a)| format!("{id}:{a:.3}")).collect()
}

pub fn render_results(results: &[SentenceResult], format: Format, fuse: bool) -> String {
    let mut out = String::new();
    for s in results {
        let head = format!("{}#{}", s.review_id, s.sentence_index);
        if fuse || s.results.is_empty() {
            let label = s.fused();
            match format {
                Format::Structured => {
                    let record = json!({
                        "review_id": s.review_id,
                        "sentence_index": s.sentence_index,
                        "sentence_text": s.sentence_text,
                        "label": label,
                        "events": s.results.len(),
                        "event_labels": s.results.iter().map(|r| r.label).collect::<Vec<_>>(),
                    });
                    let _ = writeln!(out, "{record}");
                }
                Format::Text => {
                    let _ = writeln!(out, "{head}\t{label:?}\t{}", s.sentence_text);
                }
            }
            continue;
        }
        for r in &s.results {
            let e = &r.event;
            match format {
                Format::Structured => {
                    let record = json!({
                        "review_id": s.review_id,
                        "sentence_index": s.sentence_index,
                        "sentence_text": s.sentence_text,
                        "term": e.term,
                        "sentence_type": e.sentence_type,
                        "values": values(e),
                        "direction": e.direction,
                        "drug": e.drug,
                        "label": r.label,
                        "crisp_score": r.crisp_score,
                        "fired_rules": fired(&r.trace),
                    });
                    let _ = writeln!(out, "{record}");
                }
                Format::Text => {
                    let score = r.crisp_score.map_or_else(|| "-".to_string(), |v| format!("{v:+.3}"));
                    let _ = writeln!(
                        out,
                        "{head}\t{:?}\t{score}\t{} {:?} {}\t{}",
                        r.label,
                        e.term,
                        e.sentence_type,
                        values_text(e),
                        fired(&r.trace).join(" ")
                    );
                }
            }
        }
    }
    out
}

pub fn classify(opts: &Options) -> Result<ExitCode, CliError> {
    let reviews = read_reviews(opts)?;
    let results = classify_all(opts, &reviews)?;
    write_output(opts, &render_results(&results, opts.format, opts.fuse))?;
    Ok(ExitCode::SUCCESS)
}

fn read_predictions(path: &Path) -> Result<Vec<Prediction>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str::<Prediction>(l)
                .map_err(|e| CliError::Data(format!("{}:{}: {e}", path.display(), i + 1)))
        })
        .collect()
}

pub fn evaluate(opts: &Options, gold: &Path, predictions: Option<&Path>) -> Result<ExitCode, CliError> {
    let gold = load_gold(gold).map_err(|e| CliError::Data(format!("{}: {e}", gold.display())))?;
    let predictions = match predictions {
        Some(p) => read_predictions(p)?,
        None => {
            let reviews = read_reviews(opts)?;
            predictions_from_results(&classify_all(opts, &reviews)?)
        }
    };
    let report = score(&predictions, &gold);
    let format = match opts.format {
        Format::Text => ReportFormat::Text,
        Format::Structured => ReportFormat::Structured,
    };
    write_output(opts, &render(&report, format))?;
    Ok(ExitCode::SUCCESS)
}

pub fn kb_validate(opts: &Options) -> Result<ExitCode, CliError> {
    let kb = parse_kb(opts)?;
    let diagnostics = kb.validate();
    let errors = diagnostics.iter().filter(|d| d.severity == Severity::Error).count();
    let mut out = String::new();
    match opts.format {
        Format::Text => {
            for d in &diagnostics {
                let _ = writeln!(out, "{d}");
            }
            let _ = writeln!(
                out,
                "{} variables, {} rules: {errors} errors, {} warnings",
                kb.variables.len(),
                kb.rules.len(),
                diagnostics.len() - errors
            );
        }
        Format::Structured => {
            for d in &diagnostics {
                let _ = writeln!(out, "{}", json!({ "severity": d.severity, "message": d.issue.to_string() }));
            }
        }
    }
    write_output(opts, &out)?;
    Ok(if errors > 0 { ExitCode::from(CliError::KB) } else { ExitCode::SUCCESS })
}
