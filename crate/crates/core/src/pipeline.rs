//! End-to-end compilation of a BLP into a QUBO, multilevel or conventional.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_traits::{Signed, ToPrimitive};
use serde::Serialize;
use thiserror::Error;

use crate::levelness::{compact_certificate, refine_and_classify, CompactCertificate, LevelnessError, Sidedness};
use crate::model::{BlpModel, Sense, TwoSidedConstraint};
use crate::penalties::{synthesize, vip_conflict, vip_equality, PenaltyError, PenaltyRule, RootChoice};
use crate::poly::{fmt_rational, rat, PolyError, Polynomial, QuboModel, Rational, VarId};
use crate::reduction::{
    binary_level_reduction, discrete_expansion, discrete_level_reduction, min_selection_quadratize,
    rosenberg_quadratize, slack_expansion, AncillaryAllocator, ReductionError, ReductionStep,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Levelness(#[from] LevelnessError),
    #[error(transparent)]
    Penalty(#[from] PenaltyError),
    #[error(transparent)]
    Reduction(#[from] ReductionError),
    #[error("internal error, penalty left above degree two: {0}")]
    DegreeLeak(#[from] PolyError),
    #[error("no penalty weight given for constraint {0}")]
    MissingWeight(String),
    #[error("penalty weight for {0} must be positive")]
    NonPositiveWeight(String),
    #[error("{0}")]
    Search(String),
}

/// How constraints of degree three or more are brought down to quadratic form.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Variant {
    /// Rosenberg substitution.
    #[serde(rename = "tr4.1")]
    Rosenberg,
    /// Monomial-wise min-selection.
    #[serde(rename = "tr4.2")]
    MinSelection,
    /// Discrete slack, level reduction with `k - 2` ancillaries.
    #[serde(rename = "tr6.1")]
    DiscreteLevel,
    /// Capped binary slack, level reduction with `n' - 1` ancillaries.
    #[default]
    #[serde(rename = "tr6.2")]
    BinaryLevel,
    /// Conventional scheme: slack every inequality and square.
    #[serde(rename = "cts")]
    Conventional,
}

impl Variant {
    pub const ALL: [Variant; 5] =
        [Variant::Rosenberg, Variant::MinSelection, Variant::DiscreteLevel, Variant::BinaryLevel, Variant::Conventional];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Rosenberg => "tr4.1",
            Variant::MinSelection => "tr4.2",
            Variant::DiscreteLevel => "tr6.1",
            Variant::BinaryLevel => "tr6.2",
            Variant::Conventional => "cts",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s.to_ascii_lowercase())
            .ok_or_else(|| format!("unknown variant {s}, expected one of tr4.1, tr4.2, tr6.1, tr6.2, cts"))
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub enum PenaltyMode {
    /// `1 + sum |objective coefficients| + |objective constant|` on every constraint.
    #[default]
    Auto,
    Uniform(Rational),
    /// Per-constraint weights by name.
    Fixed(BTreeMap<String, Rational>),
    /// Smallest uniform integer weight that keeps the optimum, by brute force.
    Search,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PipelineConfig {
    pub variant: Variant,
    pub penalty_mode: PenaltyMode,
    pub root: RootChoice,
}

impl PipelineConfig {
    pub fn new(variant: Variant) -> Self {
        PipelineConfig { variant, ..Default::default() }
    }

    pub fn with_penalty(mut self, mode: PenaltyMode) -> Self {
        self.penalty_mode = mode;
        self
    }
}

/// Quadratic penalty for one source constraint, before weighting.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CompiledPenalty {
    pub source: String,
    pub poly: Polynomial,
    pub rule: Option<PenaltyRule>,
    pub factored_r: Rational,
    pub ancillaries: Vec<VarId>,
    pub steps: Vec<ReductionStep>,
}

/// All penalties of a model, ready for weighting.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PenaltySet {
    pub variant: Variant,
    pub penalties: Vec<CompiledPenalty>,
    pub ancillaries: Vec<VarId>,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceEntry {
    pub penalty: CompiledPenalty,
    pub weight: Rational,
}

/// Audit record: which rule produced each penalty, its ancillaries and its weight.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TransformTrace {
    pub variant: Variant,
    pub entries: Vec<TraceEntry>,
    pub warnings: Vec<String>,
}

impl TransformTrace {
    /// Number of distinct penalty weights that appear, i.e. free parameters of the model.
    pub fn penalty_parameters(&self) -> usize {
        self.entries.iter().filter(|e| !e.penalty.poly.is_zero()).count()
    }

    pub fn to_json(&self, name: impl Fn(VarId) -> String) -> serde_json::Value {
        let entries: Vec<_> = self
            .entries
            .iter()
            .map(|e| {
                serde_json::json!({
                    "source": e.penalty.source,
                    "rule": e.penalty.rule,
                    "factored_r": fmt_rational(&e.penalty.factored_r),
                    "weight": fmt_rational(&e.weight),
                    "ancillaries": e.penalty.ancillaries.iter().map(|v| name(*v)).collect::<Vec<_>>(),
                    "penalty": e.penalty.poly.render(&name),
                    "steps": e.penalty.steps.iter().map(|s| s.to_json(&name)).collect::<Vec<_>>(),
                })
            })
            .collect();
        serde_json::json!({ "variant": self.variant, "entries": entries, "warnings": self.warnings })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CompiledQubo {
    pub qubo: QuboModel,
    /// Objective plus weighted penalties, over originals then ancillaries.
    pub polynomial: Polynomial,
    /// Objective in minimization form.
    pub objective: Polynomial,
    pub sense: Sense,
    pub trace: TransformTrace,
    pub certificate: CompactCertificate,
    pub num_original: usize,
    pub ancillary_count: usize,
    pub is_compact: bool,
}

impl CompiledQubo {
    /// Model objective value for a QUBO energy reached at a feasible point.
    pub fn objective_from_energy(&self, energy: &Rational) -> Rational {
        match self.sense {
            Sense::Min => energy.clone(),
            Sense::Max => -energy.clone(),
        }
    }

    /// The original-variable part of a QUBO assignment.
    pub fn decode<'a>(&self, x: &'a [bool]) -> &'a [bool] {
        &x[..self.num_original]
    }
}

fn product_penalty(
    c: &TwoSidedConstraint,
    variant: Variant,
    root: RootChoice,
    alloc: &mut AncillaryAllocator,
    warnings: &mut Vec<String>,
) -> Result<Option<CompiledPenalty>, PipelineError> {
    if c.is_equality() {
        refine_and_classify(c)?;
        let t = vip_equality(c);
        return Ok(Some(CompiledPenalty {
            source: c.name.clone(),
            poly: t.poly,
            rule: Some(t.rule),
            factored_r: t.factored_r,
            ancillaries: Vec::new(),
            steps: Vec::new(),
        }));
    }
    let r = refine_and_classify(c)?;
    if r.sidedness == Sidedness::Vacuous {
        warnings.push(format!("constraint {} holds on the whole cube and was dropped", c.name));
        return Ok(None);
    }
    let t = synthesize(&r, root)?;
    let mut out = CompiledPenalty {
        source: c.name.clone(),
        poly: t.poly,
        rule: Some(t.rule),
        factored_r: t.factored_r,
        ancillaries: Vec::new(),
        steps: Vec::new(),
    };
    if out.poly.degree() <= 2 {
        return Ok(Some(out));
    }
    match variant {
        Variant::Rosenberg => {
            let q = rosenberg_quadratize(&out.poly, None, None, alloc, &c.name);
            out.poly = q.poly;
            out.ancillaries = q.created;
            out.steps = q.steps;
        }
        Variant::MinSelection => {
            let q = min_selection_quadratize(&out.poly, alloc, &c.name);
            out.poly = q.poly;
            out.ancillaries = q.created;
            out.steps = q.steps;
        }
        Variant::DiscreteLevel | Variant::BinaryLevel => {
            let lr = if variant == Variant::DiscreteLevel {
                discrete_level_reduction(&r, alloc)?
            } else {
                binary_level_reduction(&r, alloc)?
            };
            out.poly = lr.penalty;
            out.rule = None;
            out.factored_r = lr.r;
            out.ancillaries = lr.created;
            out.steps = lr.steps;
        }
        Variant::Conventional => unreachable!("conventional scheme does not build products"),
    }
    Ok(Some(out))
}

fn slack_penalty(c: &TwoSidedConstraint, alloc: &mut AncillaryAllocator, warnings: &mut Vec<String>) -> Result<Vec<CompiledPenalty>, PipelineError> {
    let lo = c.lo.clone().map_or_else(|| c.expr.min_value(), |b| b.max(c.expr.min_value()));
    let hi = c.hi.clone().map_or_else(|| c.expr.max_value(), |b| b.min(c.expr.max_value()));
    if lo > hi {
        return Err(LevelnessError::Infeasible(c.name.clone()).into());
    }
    let equality_penalty = |eq: &TwoSidedConstraint, ancillaries: Vec<VarId>, steps: Vec<ReductionStep>| {
        let t = vip_equality(eq);
        CompiledPenalty {
            source: c.name.clone(),
            poly: t.poly,
            rule: Some(t.rule),
            factored_r: t.factored_r,
            ancillaries,
            steps,
        }
    };
    if lo == hi {
        refine_and_classify(&TwoSidedConstraint::equality(c.name.clone(), c.expr.clone(), lo.clone()))?;
        let eq = TwoSidedConstraint::equality(c.name.clone(), c.expr.clone(), lo);
        return Ok(vec![equality_penalty(&eq, Vec::new(), Vec::new())]);
    }
    if lo == c.expr.min_value() && hi == c.expr.max_value() {
        warnings.push(format!("constraint {} holds on the whole cube and was dropped", c.name));
        return Ok(Vec::new());
    }
    if c.expr.is_integral() && lo.is_integer() && hi.is_integer() {
        let width = (&hi - &lo).to_integer().to_u64().expect("width fits u64");
        let capped = !(width + 1).is_power_of_two();
        let e = slack_expansion(&c.name, &c.expr, &lo, &hi, capped, alloc)?;
        return Ok(vec![equality_penalty(&e.equality, e.created, vec![e.step])]);
    }
    let r = refine_and_classify(c)?;
    if r.k == 1 {
        return Ok(vec![equality_penalty(&r.refined_constraint(), Vec::new(), Vec::new())]);
    }
    let e = discrete_expansion(&r, alloc)?;
    let mut out = vec![equality_penalty(&e.equality, e.created.clone(), vec![e.step])];
    if e.created.len() >= 2 {
        let t = vip_conflict(&format!("{}/at-most-one", c.name), &e.created.iter().copied().collect())?;
        out.push(CompiledPenalty {
            source: c.name.clone(),
            poly: t.poly,
            rule: Some(t.rule),
            factored_r: t.factored_r,
            ancillaries: Vec::new(),
            steps: Vec::new(),
        });
    }
    Ok(out)
}

/// Build the unweighted quadratic penalty of every constraint.
pub fn compile_penalties(m: &BlpModel, variant: Variant, root: RootChoice) -> Result<PenaltySet, PipelineError> {
    let mut alloc = AncillaryAllocator::new();
    let mut penalties = Vec::new();
    let mut warnings = Vec::new();
    for c in &m.constraints {
        if variant == Variant::Conventional && !c.is_equality() {
            penalties.extend(slack_penalty(c, &mut alloc, &mut warnings)?);
        } else if let Some(p) = product_penalty(c, variant, root, &mut alloc, &mut warnings)? {
            penalties.push(p);
        }
    }
    let ancillaries = (0..alloc.count() as u32).map(VarId::ancillary).collect();
    Ok(PenaltySet { variant, penalties, ancillaries, warnings })
}

/// `1 + sum |c|` over the objective, plus the constant.
pub fn auto_lambda(m: &BlpModel) -> Rational {
    let (expr, constant) = m.min_form();
    let swing: Rational = expr.terms().map(|(_, c)| c.abs()).sum();
    swing + constant.abs() + rat(1)
}

/// Weight for each penalty in `set` under a non-search mode.
pub fn weights_for(m: &BlpModel, set: &PenaltySet, mode: &PenaltyMode) -> Result<Vec<Rational>, PipelineError> {
    set.penalties
        .iter()
        .map(|p| {
            let w = match mode {
                PenaltyMode::Auto => auto_lambda(m),
                PenaltyMode::Uniform(w) => w.clone(),
                PenaltyMode::Fixed(map) => map.get(&p.source).cloned().ok_or_else(|| PipelineError::MissingWeight(p.source.clone()))?,
                PenaltyMode::Search => unreachable!("search weights come from the verifier"),
            };
            if !w.is_positive() {
                return Err(PipelineError::NonPositiveWeight(p.source.clone()));
            }
            Ok(w)
        })
        .collect()
}

/// Combine the objective and weighted penalties into a QUBO over originals then ancillaries.
pub fn assemble(m: &BlpModel, set: &PenaltySet, weights: &[Rational]) -> Result<CompiledQubo, PipelineError> {
    let parts = QuboParts {
        originals: m.names().to_vec(),
        objective: m.min_form_polynomial(),
        sense: m.objective.sense,
        certificate: compact_certificate(m)?,
    };
    assemble_parts(parts, set, weights)
}

/// What `assemble_parts` needs besides the penalties.
#[derive(Clone, Debug)]
pub struct QuboParts {
    /// Names of `VarId::original(0..n)`.
    pub originals: Vec<String>,
    /// Objective in minimization form, at most quadratic.
    pub objective: Polynomial,
    pub sense: Sense,
    pub certificate: CompactCertificate,
}

pub fn assemble_parts(parts: QuboParts, set: &PenaltySet, weights: &[Rational]) -> Result<CompiledQubo, PipelineError> {
    let mut total = parts.objective.clone();
    for (p, w) in set.penalties.iter().zip(weights) {
        total = &total + &p.poly.scale(w);
    }
    let n = parts.originals.len();
    let mut vars: Vec<VarId> = (0..n as u32).map(VarId::original).collect();
    vars.extend(set.ancillaries.iter().copied());
    let mut names = parts.originals;
    names.extend(set.ancillaries.iter().map(ToString::to_string));
    let qubo = total.to_qubo_over(&vars, names)?;
    let entries = set
        .penalties
        .iter()
        .zip(weights)
        .map(|(p, w)| TraceEntry { penalty: p.clone(), weight: w.clone() })
        .collect();
    let ancillary_count = set.ancillaries.len();
    Ok(CompiledQubo {
        qubo,
        polynomial: total,
        objective: parts.objective,
        sense: parts.sense,
        trace: TransformTrace { variant: set.variant, entries, warnings: set.warnings.clone() },
        certificate: parts.certificate,
        num_original: n,
        ancillary_count,
        is_compact: ancillary_count == 0,
    })
}

fn compile(m: &BlpModel, cfg: &PipelineConfig, variant: Variant) -> Result<CompiledQubo, PipelineError> {
    let set = compile_penalties(m, variant, cfg.root)?;
    let weights = match &cfg.penalty_mode {
        PenaltyMode::Search => {
            let w = crate::verify::minimal_lambda_for(m, &set).map_err(|e| PipelineError::Search(e.to_string()))?;
            vec![w; set.penalties.len()]
        }
        mode => weights_for(m, &set, mode)?,
    };
    assemble(m, &set, &weights)
}

/// Multilevel scheme: per-constraint penalties from levelness, reduced to quadratic per `cfg.variant`.
pub fn mlcts(m: &BlpModel, cfg: &PipelineConfig) -> Result<CompiledQubo, PipelineError> {
    compile(m, cfg, cfg.variant)
}

/// Conventional scheme: slack every inequality into an equality and square it.
pub fn cts(m: &BlpModel, cfg: &PipelineConfig) -> Result<CompiledQubo, PipelineError> {
    compile(m, cfg, Variant::Conventional)
}

/// Either scheme, by `cfg.variant`.
pub fn transform(m: &BlpModel, cfg: &PipelineConfig) -> Result<CompiledQubo, PipelineError> {
    compile(m, cfg, cfg.variant)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{parse_model_json, LinearExpression};

    pub(crate) const BLP1: &str = r#"{
        "variables": ["x1", "x2", "x3"],
        "objective": {"sense": "min", "terms": [{"var": "x1", "coef": 1}, {"var": "x2", "coef": 1}, {"var": "x3", "coef": 2}]},
        "constraints": [
            {"name": "c1", "terms": [{"var": "x1", "coef": 1}, {"var": "x2", "coef": 2}, {"var": "x3", "coef": -1}], "lo": 0, "hi": 2},
            {"name": "c2", "terms": [{"var": "x1", "coef": 2}, {"var": "x2", "coef": 2}, {"var": "x3", "coef": -1}], "lo": 1, "hi": 2},
            {"name": "c3", "terms": [{"var": "x1", "coef": 3}, {"var": "x3", "coef": -2}], "lo": null, "hi": 1}
        ]
    }"#;

    #[test]
    fn blp1_dimensions() {
        let m = parse_model_json(BLP1).unwrap();
        for v in [Variant::Rosenberg, Variant::MinSelection, Variant::DiscreteLevel, Variant::BinaryLevel] {
            let q = mlcts(&m, &PipelineConfig::new(v)).unwrap();
            assert_eq!(q.qubo.dimension, 3, "{v}");
            assert!(q.is_compact);
        }
        let c = cts(&m, &PipelineConfig::default()).unwrap();
        assert_eq!(c.qubo.dimension, 8);
        assert_eq!(c.ancillary_count, 5);
        assert!(!c.certificate.compact_guaranteed);
        assert_eq!(c.certificate.kn, Some(3));
    }

    #[test]
    fn blp1_penalties_and_lambda() {
        let m = parse_model_json(BLP1).unwrap();
        let q = mlcts(&m, &PipelineConfig::default()).unwrap();
        let polys: Vec<String> = q.trace.entries.iter().map(|e| e.penalty.poly.render(|v| m.name_of(v))).collect();
        assert_eq!(polys[0], "+1·x1*x2 -1·x1*x3 -1·x2*x3 +1·x3");
        assert_eq!(polys[1], "+4·x1*x2 -2·x1*x3 -2·x2*x3 -1·x1 -1·x2 +2·x3 +1");
        assert_eq!(polys[2], "-1·x1*x3 +1·x1");
        assert_eq!(q.trace.entries[0].weight, rat(5));
    }

    #[test]
    fn variant_names_round_trip() {
        for v in Variant::ALL {
            assert_eq!(v.name().parse::<Variant>().unwrap(), v);
        }
        assert!("tr9".parse::<Variant>().is_err());
    }

    #[test]
    fn fixed_weights_need_every_constraint() {
        let m = parse_model_json(BLP1).unwrap();
        let mode = PenaltyMode::Fixed(BTreeMap::from([("c1".to_string(), rat(3))]));
        let err = mlcts(&m, &PipelineConfig::default().with_penalty(mode)).unwrap_err();
        assert!(matches!(err, PipelineError::MissingWeight(ref n) if n == "c2"));
    }

    #[test]
    fn vacuous_constraints_are_dropped() {
        let mut m = BlpModel::with_variables(["a", "b"]).unwrap();
        let e = LinearExpression::from_ints([(VarId::original(0), 1), (VarId::original(1), 1)]);
        m.add_constraint(TwoSidedConstraint::new("v", e, Some(rat(0)), None).unwrap()).unwrap();
        for v in Variant::ALL {
            let q = transform(&m, &PipelineConfig::new(v)).unwrap();
            assert!(q.trace.entries.is_empty());
            assert_eq!(q.trace.warnings.len(), 1);
        }
    }
}
