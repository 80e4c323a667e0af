//! Mamdani inference over trapezoidal fuzzy sets.
//!
//! Conjunction and implication are `min`, aggregation is `max`, and the
//! aggregated output is defuzzified by its centroid on a uniform grid.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kb::KnowledgeBase;

/// Samples used for the output curve unless the caller asks otherwise.
pub const DEFAULT_GRID_POINTS: usize = 1001;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FuzzyError {
    #[error("trapezoid breakpoints must satisfy a <= b <= c <= d, got ({0}, {1}, {2}, {3})")]
    BadTrapezoid(f64, f64, f64, f64),
    #[error("universe [{lo}, {hi}] is empty or not finite")]
    BadUniverse { lo: f64, hi: f64 },
    #[error("set {set} of {variable} leaves the universe")]
    SetOutsideUniverse { variable: String, set: String },
    #[error("variable {variable} already has a set named {set}")]
    DuplicateSet { variable: String, set: String },
    #[error("unknown variable {0}")]
    UnknownVariable(String),
    #[error("variable {variable} has no set {set}")]
    UnknownSet { variable: String, set: String },
    #[error("no input for {0}")]
    MissingInput(String),
    #[error("grid needs at least 2 points, got {0}")]
    BadGrid(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrapezoidMF {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl TrapezoidMF {
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Result<Self, FuzzyError> {
        let finite = [a, b, c, d].iter().all(|v| v.is_finite());
        if finite && a <= b && b <= c && c <= d {
            Ok(TrapezoidMF { a, b, c, d })
        } else {
            Err(FuzzyError::BadTrapezoid(a, b, c, d))
        }
    }

    /// Degree of `x`. A vertical edge (`a == b` or `c == d`) is a crisp step
    /// that includes its end point.
    pub fn membership(&self, x: f64) -> f64 {
        if x < self.a || x > self.d {
            0.0
        } else if x >= self.b && x <= self.c {
            1.0
        } else if x < self.b {
            (x - self.a) / (self.b - self.a)
        } else {
            (self.d - x) / (self.d - self.c)
        }
    }

    pub fn plateau_midpoint(&self) -> f64 {
        (self.b + self.c) / 2.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuzzySet {
    pub name: String,
    pub mf: TrapezoidMF,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuzzyVariable {
    pub name: String,
    pub lo: f64,
    pub hi: f64,
    pub sets: Vec<FuzzySet>,
}

/// Membership degrees of one crisp input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fuzzified {
    pub input: f64,
    /// The value actually evaluated, after clamping to the universe.
    pub used: f64,
    pub degrees: Vec<(String, f64)>,
}

impl Fuzzified {
    pub fn degree(&self, set: &str) -> Option<f64> {
        self.degrees.iter().find(|(n, _)| n.eq_ignore_ascii_case(set)).map(|(_, d)| *d)
    }

    pub fn was_clamped(&self) -> bool {
        self.input != self.used
    }
}

impl FuzzyVariable {
    pub fn new(name: impl Into<String>, lo: f64, hi: f64) -> Result<Self, FuzzyError> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(FuzzyError::BadUniverse { lo, hi });
        }
        Ok(FuzzyVariable { name: name.into(), lo, hi, sets: Vec::new() })
    }

    pub fn add_set(&mut self, name: impl Into<String>, mf: TrapezoidMF) -> Result<(), FuzzyError> {
        let name = name.into();
        if self.set(&name).is_some() {
            return Err(FuzzyError::DuplicateSet { variable: self.name.clone(), set: name });
        }
        if mf.a < self.lo || mf.d > self.hi {
            return Err(FuzzyError::SetOutsideUniverse { variable: self.name.clone(), set: name });
        }
        self.sets.push(FuzzySet { name, mf });
        Ok(())
    }

    pub fn with_set(mut self, name: &str, a: f64, b: f64, c: f64, d: f64) -> Result<Self, FuzzyError> {
        self.add_set(name, TrapezoidMF::new(a, b, c, d)?)?;
        Ok(self)
    }

    /// Set lookup ignores ASCII case.
    pub fn set(&self, name: &str) -> Option<&FuzzySet> {
        self.sets.iter().find(|s| s.name.eq_ignore_ascii_case(name))
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.lo, self.hi)
    }

    pub fn fuzzify(&self, x: f64) -> Fuzzified {
        let used = self.clamp(x);
        let degrees = self.sets.iter().map(|s| (s.name.clone(), s.mf.membership(used))).collect();
        Fuzzified { input: x, used, degrees }
    }

    /// The first stretch of the universe where every set has zero
    /// membership, if there is one.
    pub fn coverage_gap(&self) -> Option<(f64, f64)> {
        // A set is positive on (a, d), plus the end points of vertical edges.
        let mut spans: Vec<(f64, bool, f64, bool)> =
            self.sets.iter().map(|s| (s.mf.a, s.mf.a == s.mf.b, s.mf.d, s.mf.c == s.mf.d)).collect();
        spans.sort_by(|x, y| x.0.total_cmp(&y.0).then(y.1.cmp(&x.1)));

        let mut reach = self.lo;
        let mut reach_closed = false;
        for (start, start_closed, end, end_closed) in spans {
            let connects = start < reach || (start == reach && (reach_closed || start_closed));
            if !connects {
                return Some((reach, start));
            }
            if end > reach {
                reach = end;
                reach_closed = end_closed;
            } else if end == reach {
                reach_closed |= end_closed;
            }
        }
        if reach < self.hi || !reach_closed {
            Some((reach, self.hi))
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Conjunct {
    pub variable: String,
    pub set: String,
}

impl Conjunct {
    pub fn new(variable: impl Into<String>, set: impl Into<String>) -> Self {
        Conjunct { variable: variable.into(), set: set.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FuzzyRule {
    pub id: String,
    pub source: Option<String>,
    pub antecedent: Vec<Conjunct>,
    pub consequent: Conjunct,
}

/// Fuzzified inputs keyed by lowercase variable name.
pub type FuzzifiedInputs = BTreeMap<String, Fuzzified>;

/// Activation of `rule`: the smallest degree among its conjuncts.
pub fn fire_rule(rule: &FuzzyRule, inputs: &FuzzifiedInputs) -> Result<f64, FuzzyError> {
    let mut activation = 1.0f64;
    for conjunct in &rule.antecedent {
        let fuzzified = inputs
            .get(&conjunct.variable.to_ascii_lowercase())
            .ok_or_else(|| FuzzyError::MissingInput(conjunct.variable.clone()))?;
        let degree = fuzzified.degree(&conjunct.set).ok_or_else(|| FuzzyError::UnknownSet {
            variable: conjunct.variable.clone(),
            set: conjunct.set.clone(),
        })?;
        activation = activation.min(degree);
    }
    Ok(activation)
}

/// The `i`-th of `n` uniform samples over `[lo, hi]`; the last one is `hi` exactly.
pub fn grid_point(lo: f64, hi: f64, n: usize, i: usize) -> f64 {
    if i + 1 == n {
        hi
    } else {
        lo + i as f64 * ((hi - lo) / (n - 1) as f64)
    }
}

/// Output membership sampled at `grid_points` uniform points: for each point
/// the largest of `min(activation, membership)` over the fired consequents.
pub fn aggregate(output: &FuzzyVariable, fired: &[(&str, f64)], grid_points: usize) -> Result<Vec<f64>, FuzzyError> {
    if grid_points < 2 {
        return Err(FuzzyError::BadGrid(grid_points));
    }
    // Several rules into one set clip at their largest activation.
    let mut clips: Vec<(TrapezoidMF, f64)> = Vec::new();
    for (name, activation) in fired {
        let set = output
            .set(name)
            .ok_or_else(|| FuzzyError::UnknownSet { variable: output.name.clone(), set: name.to_string() })?;
        match clips.iter_mut().find(|(mf, _)| *mf == set.mf) {
            Some((_, alpha)) => *alpha = alpha.max(*activation),
            None => clips.push((set.mf, *activation)),
        }
    }
    clips.retain(|(_, alpha)| *alpha > 0.0);
    let (lo, hi) = (output.lo, output.hi);
    let step = (hi - lo) / (grid_points - 1) as f64;
    let mut curve = vec![0.0f64; grid_points];
    for (mf, alpha) in &clips {
        // Only the samples inside [a, d] can be nonzero; one extra index on
        // each side absorbs rounding in the index estimate.
        let first = ((mf.a - lo) / step).floor().max(1.0) as usize - 1;
        let last = (((mf.d - lo) / step).ceil() as usize + 1).min(grid_points - 1);
        for (i, mu) in curve.iter_mut().enumerate().take(last + 1).skip(first) {
            let x = grid_point(lo, hi, grid_points, i);
            *mu = mu.max(alpha.min(mf.membership(x)));
        }
    }
    Ok(curve)
}

/// Centre of gravity of a curve sampled uniformly over `[lo, hi]`, using
/// trapezoidal weights (half weight on the two end samples).
pub fn defuzzify_centroid(lo: f64, hi: f64, curve: &[f64]) -> Option<f64> {
    let n = curve.len();
    if n < 2 {
        return None;
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for (i, &mu) in curve.iter().enumerate() {
        let w = if i == 0 || i + 1 == n { 0.5 } else { 1.0 };
        num += w * grid_point(lo, hi, n, i) * mu;
        den += w * mu;
    }
    if den > 0.0 {
        Some((num / den).clamp(lo, hi))
    } else {
        None
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleActivation {
    pub rule_id: String,
    pub activation: f64,
    /// Set when the rule could not be evaluated, e.g. a missing input.
    pub skipped: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceTrace {
    pub activations: Vec<RuleActivation>,
    pub notes: Vec<String>,
    pub grid_points: usize,
    pub curve: Vec<f64>,
    pub crisp: Option<f64>,
}

impl InferenceTrace {
    /// Rules with a positive activation, as `(id, activation)`.
    pub fn fired(&self) -> impl Iterator<Item = (&str, f64)> {
        self.activations.iter().filter(|a| a.activation > 0.0).map(|a| (a.rule_id.as_str(), a.activation))
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum InferError {
    #[error("no rule fired")]
    EmptyOutput { trace: Box<InferenceTrace> },
    #[error(transparent)]
    Fuzzy(#[from] FuzzyError),
}

/// Runs the whole Mamdani pipeline for crisp `inputs` keyed by variable name.
pub fn infer(
    kb: &KnowledgeBase,
    inputs: &BTreeMap<String, f64>,
    grid_points: usize,
) -> Result<(f64, InferenceTrace), InferError> {
    if grid_points < 2 {
        return Err(FuzzyError::BadGrid(grid_points).into());
    }
    let mut notes = Vec::new();
    let mut fuzzified = FuzzifiedInputs::new();
    for (name, &value) in inputs {
        let var = kb.variable(name).ok_or_else(|| FuzzyError::UnknownVariable(name.clone()))?;
        let f = var.fuzzify(value);
        if f.was_clamped() {
            notes.push(format!("{} = {} clamped to {}", var.name, value, f.used));
        }
        fuzzified.insert(var.name.to_ascii_lowercase(), f);
    }

    let mut activations = Vec::with_capacity(kb.rules.len());
    let mut fired = Vec::new();
    for rule in &kb.rules {
        match fire_rule(rule, &fuzzified) {
            Ok(activation) => {
                if activation > 0.0 {
                    fired.push((rule.consequent.set.as_str(), activation));
                }
                activations.push(RuleActivation { rule_id: rule.id.clone(), activation, skipped: None });
            }
            Err(e) => activations.push(RuleActivation {
                rule_id: rule.id.clone(),
                activation: 0.0,
                skipped: Some(e.to_string()),
            }),
        }
    }

    let output = kb.output();
    let curve = aggregate(output, &fired, grid_points)?;
    let crisp = defuzzify_centroid(output.lo, output.hi, &curve);
    let trace = InferenceTrace { activations, notes, grid_points, curve, crisp };
    match crisp {
        Some(score) => Ok((score, trace)),
        None => Err(InferError::EmptyOutput { trace: Box::new(trace) }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn mf(a: f64, b: f64, c: f64, d: f64) -> TrapezoidMF {
        TrapezoidMF::new(a, b, c, d).unwrap()
    }

    fn sentiment() -> FuzzyVariable {
        FuzzyVariable::new("Sentiment", -1.0, 1.0)
            .unwrap()
            .with_set("Negative", -1.0, -1.0, -0.5, -0.1)
            .unwrap()
            .with_set("Neutral", -0.3, -0.05, 0.05, 0.3)
            .unwrap()
            .with_set("Positive", 0.1, 0.5, 1.0, 1.0)
            .unwrap()
    }

    #[test]
    fn trapezoid_membership() {
        let m = mf(0.0, 0.0, 195.0, 205.0);
        assert_eq!(m.membership(100.0), 1.0);
        assert_eq!(m.membership(200.0), 0.5);
        assert_eq!(m.membership(210.0), 0.0);
        assert_eq!(m.membership(0.0), 1.0, "vertical left edge includes its foot");
        assert_eq!(m.membership(-0.001), 0.0);
        let crisp = mf(1.5, 1.5, 2.5, 2.5);
        assert_eq!(crisp.membership(1.5), 1.0);
        assert_eq!(crisp.membership(2.5), 1.0);
        assert_eq!(crisp.membership(2.5000001), 0.0);
        assert!(TrapezoidMF::new(1.0, 0.0, 2.0, 3.0).is_err());
        assert!(TrapezoidMF::new(0.0, 1.0, f64::NAN, 3.0).is_err());
    }

    #[test]
    fn variable_construction_errors() {
        assert!(FuzzyVariable::new("x", 1.0, 1.0).is_err());
        let v = FuzzyVariable::new("x", 0.0, 10.0).unwrap();
        assert!(matches!(v.clone().with_set("a", -1.0, 0.0, 1.0, 2.0), Err(FuzzyError::SetOutsideUniverse { .. })));
        let v = v.with_set("Low", 0.0, 0.0, 4.0, 6.0).unwrap();
        assert!(matches!(v.with_set("LOW", 4.0, 6.0, 10.0, 10.0), Err(FuzzyError::DuplicateSet { .. })));
    }

    #[test]
    fn coverage_gaps() {
        let full = FuzzyVariable::new("x", 0.0, 10.0)
            .unwrap()
            .with_set("Low", 0.0, 0.0, 4.0, 6.0)
            .unwrap()
            .with_set("High", 4.0, 6.0, 10.0, 10.0)
            .unwrap();
        assert_eq!(full.coverage_gap(), None);

        let gap = FuzzyVariable::new("x", 0.0, 300.0)
            .unwrap()
            .with_set("Low", 0.0, 0.0, 230.0, 240.0)
            .unwrap()
            .with_set("High", 250.0, 260.0, 300.0, 300.0)
            .unwrap();
        assert_eq!(gap.coverage_gap(), Some((240.0, 250.0)));

        // Touching open ends leave a single uncovered point.
        let point = FuzzyVariable::new("x", 0.0, 10.0)
            .unwrap()
            .with_set("Low", 0.0, 0.0, 2.0, 5.0)
            .unwrap()
            .with_set("High", 5.0, 8.0, 10.0, 10.0)
            .unwrap();
        assert_eq!(point.coverage_gap(), Some((5.0, 5.0)));

        let crisp = FuzzyVariable::new("x", 0.0, 1.0)
            .unwrap()
            .with_set("No", 0.0, 0.0, 0.5, 0.5)
            .unwrap()
            .with_set("Yes", 0.5, 0.5, 1.0, 1.0)
            .unwrap();
        assert_eq!(crisp.coverage_gap(), None);

        let short = FuzzyVariable::new("x", 0.0, 10.0).unwrap().with_set("Low", 0.0, 0.0, 4.0, 6.0).unwrap();
        assert_eq!(short.coverage_gap(), Some((6.0, 10.0)));
        let open_end = FuzzyVariable::new("x", 0.0, 10.0).unwrap().with_set("Low", 0.0, 0.0, 4.0, 10.0).unwrap();
        assert_eq!(open_end.coverage_gap(), Some((10.0, 10.0)));
    }

    #[test]
    fn fuzzify_clamps() {
        let v = FuzzyVariable::new("x", 0.0, 10.0).unwrap().with_set("All", 0.0, 0.0, 10.0, 10.0).unwrap();
        let f = v.fuzzify(25.0);
        assert!(f.was_clamped());
        assert_eq!(f.used, 10.0);
        assert_eq!(f.degree("all"), Some(1.0));
    }

    fn rule(conjuncts: &[(&str, &str)], out: &str) -> FuzzyRule {
        FuzzyRule {
            id: "r".into(),
            source: None,
            antecedent: conjuncts.iter().map(|(v, s)| Conjunct::new(*v, *s)).collect(),
            consequent: Conjunct::new("Sentiment", out),
        }
    }

    fn inputs(degrees: &[(&str, &str, f64)]) -> FuzzifiedInputs {
        let mut out = FuzzifiedInputs::new();
        for (var, set, d) in degrees {
            out.entry(var.to_ascii_lowercase())
                .or_insert_with(|| Fuzzified { input: 0.0, used: 0.0, degrees: vec![] })
                .degrees
                .push((set.to_string(), *d));
        }
        out
    }

    #[test]
    fn firing_uses_min() {
        let r = rule(&[("A", "x"), ("B", "y")], "Positive");
        assert_eq!(fire_rule(&r, &inputs(&[("A", "x", 1.0), ("B", "y", 1.0)])), Ok(1.0));
        assert_eq!(fire_rule(&r, &inputs(&[("A", "x", 0.8), ("B", "y", 0.3)])), Ok(0.3));
        assert_eq!(fire_rule(&r, &inputs(&[("A", "x", 0.0), ("B", "y", 0.9)])), Ok(0.0));
        assert_eq!(fire_rule(&r, &inputs(&[("A", "x", 0.5)])), Err(FuzzyError::MissingInput("B".into())));
    }

    #[test]
    fn aggregation_identity_and_clipping() {
        let out = sentiment();
        let n = 201;
        let full = aggregate(&out, &[("Positive", 1.0)], n).unwrap();
        let clipped = aggregate(&out, &[("Positive", 0.4)], n).unwrap();
        let pos = out.set("Positive").unwrap().mf;
        for i in 0..n {
            let x = grid_point(-1.0, 1.0, n, i);
            assert_eq!(full[i], pos.membership(x));
            assert_eq!(clipped[i], pos.membership(x).min(0.4));
        }
        let both = aggregate(&out, &[("Negative", 0.8), ("Positive", 0.2)], n).unwrap();
        let neg = out.set("Negative").unwrap().mf;
        for (i, mu) in both.iter().enumerate() {
            let x = grid_point(-1.0, 1.0, n, i);
            let expected = neg.membership(x).min(0.8).max(pos.membership(x).min(0.2));
            assert!((mu - expected).abs() < 1e-15);
        }
        assert!(aggregate(&out, &[], n).unwrap().iter().all(|&m| m == 0.0));
        assert_eq!(aggregate(&out, &[], 1), Err(FuzzyError::BadGrid(1)));
    }

    /// Centroid of a clipped trapezoid computed piecewise in closed form.
    fn analytic_centroid(m: TrapezoidMF, alpha: f64) -> f64 {
        // Clipped shape: rises a..b', flat b'..c', falls c'..d.
        let b = m.a + alpha * (m.b - m.a);
        let c = m.d - alpha * (m.d - m.c);
        let mut area = 0.0;
        let mut moment = 0.0;
        // Linear pieces: integral of (p + q x) and x (p + q x) over [u, v].
        let mut piece = |u: f64, v: f64, f: &dyn Fn(f64) -> f64| {
            if v > u {
                let (fu, fv) = (f(u), f(v));
                area += (fu + fv) * (v - u) / 2.0;
                moment += (v - u) * (fu * (2.0 * u + v) + fv * (u + 2.0 * v)) / 6.0;
            }
        };
        piece(m.a, b, &|x| m.membership(x).min(alpha));
        piece(b, c, &|_| alpha);
        piece(c, m.d, &|x| m.membership(x).min(alpha));
        moment / area
    }

    #[test]
    fn centroid_examples() {
        let out = sentiment();
        for alpha in [0.1, 0.37, 1.0] {
            let curve = aggregate(&out, &[("Neutral", alpha)], 1001).unwrap();
            assert!(defuzzify_centroid(-1.0, 1.0, &curve).unwrap().abs() < 1e-12);
        }
        let curve = aggregate(&out, &[("Positive", 1.0)], 1001).unwrap();
        let got = defuzzify_centroid(-1.0, 1.0, &curve).unwrap();
        assert!(got > 0.5);
        let exact = analytic_centroid(out.set("Positive").unwrap().mf, 1.0);
        assert!((got - exact).abs() < 1e-3 * 2.0, "{got} vs {exact}");
        assert_eq!(defuzzify_centroid(-1.0, 1.0, &[0.0; 11]), None);
        assert_eq!(defuzzify_centroid(-1.0, 1.0, &[1.0]), None);
    }

    proptest! {
        #[test]
        fn membership_is_bounded_and_plateau_is_one(
            mut pts in prop::array::uniform4(-100.0f64..100.0),
            x in -150.0f64..150.0,
        ) {
            pts.sort_by(f64::total_cmp);
            let m = mf(pts[0], pts[1], pts[2], pts[3]);
            let mu = m.membership(x);
            prop_assert!((0.0..=1.0).contains(&mu));
            if x >= pts[1] && x <= pts[2] { prop_assert_eq!(mu, 1.0); }
            if x < pts[0] || x > pts[3] { prop_assert_eq!(mu, 0.0); }
        }

        #[test]
        fn raising_a_conjunct_never_lowers_activation(
            degrees in prop::collection::vec(0.0f64..=1.0, 1..6),
            which in 0usize..6,
            bump in 0.0f64..=1.0,
        ) {
            let names: Vec<String> = (0..degrees.len()).map(|i| format!("V{i}")).collect();
            let conj: Vec<(&str, &str)> = names.iter().map(|n| (n.as_str(), "s")).collect();
            let r = rule(&conj, "Positive");
            let mk = |ds: &[f64]| {
                let rows: Vec<(&str, &str, f64)> = names.iter().zip(ds).map(|(n, d)| (n.as_str(), "s", *d)).collect();
                inputs(&rows)
            };
            let before = fire_rule(&r, &mk(&degrees)).unwrap();
            let mut raised = degrees.clone();
            let k = which % raised.len();
            raised[k] = (raised[k] + bump).min(1.0);
            let after = fire_rule(&r, &mk(&raised)).unwrap();
            prop_assert!(after >= before);
        }

        #[test]
        fn centroid_stays_in_universe(alphas in prop::array::uniform3(0.0f64..=1.0)) {
            let out = sentiment();
            let fired = [("Negative", alphas[0]), ("Neutral", alphas[1]), ("Positive", alphas[2])];
            let curve = aggregate(&out, &fired, 257).unwrap();
            prop_assert!(curve.iter().all(|m| (0.0..=1.0).contains(m)));
            if let Some(c) = defuzzify_centroid(-1.0, 1.0, &curve) {
                prop_assert!((-1.0..=1.0).contains(&c));
            } else {
                prop_assert!(alphas.iter().all(|&a| a == 0.0));
            }
        }

        #[test]
        fn clipped_centroid_matches_closed_form(alpha in 0.05f64..=1.0, set in 0usize..3) {
            let out = sentiment();
            let s = &out.sets[set];
            let curve = aggregate(&out, &[(s.name.as_str(), alpha)], 1001).unwrap();
            let got = defuzzify_centroid(-1.0, 1.0, &curve).unwrap();
            prop_assert!((got - analytic_centroid(s.mf, alpha)).abs() < 1e-3 * out.width());
        }
    }
}
