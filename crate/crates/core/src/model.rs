//! Binary linear program containers, the JSON model format, and DIMACS ingestion.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::poly::{fmt_rational, parse_rational, rat, Polynomial, Rational, VarId};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ModelError {
    #[error("unknown variable {name} in {location}")]
    UnknownVariable { name: String, location: String },
    #[error("lower bound exceeds upper bound in {location}")]
    InvertedBounds { location: String },
    #[error("constraint {location} has no finite bound")]
    Unbounded { location: String },
    #[error("duplicate {what} name {name:?}")]
    DuplicateName { what: &'static str, name: String },
    #[error("bad number {value} in {location}")]
    BadNumber { value: String, location: String },
    #[error("invalid JSON: {0}")]
    Json(String),
    #[error("line {line}: {message}")]
    Dimacs { line: usize, message: String },
    #[error("{0}")]
    Invalid(String),
}

/// `sum a_i x_i` with no stored zero coefficients.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LinearExpression {
    terms: BTreeMap<VarId, Rational>,
}

impl LinearExpression {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_terms(terms: impl IntoIterator<Item = (VarId, Rational)>) -> Self {
        let mut e = Self::new();
        for (v, c) in terms {
            e.add_term(v, c);
        }
        e
    }

    /// Integer coefficients, convenient for tests and generators.
    pub fn from_ints(terms: impl IntoIterator<Item = (VarId, i64)>) -> Self {
        Self::from_terms(terms.into_iter().map(|(v, c)| (v, rat(c))))
    }

    pub fn add_term(&mut self, v: VarId, c: Rational) {
        let slot = self.terms.entry(v).or_insert_with(Rational::zero);
        *slot += c;
        if slot.is_zero() {
            self.terms.remove(&v);
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (VarId, &Rational)> {
        self.terms.iter().map(|(v, c)| (*v, c))
    }

    pub fn coefficient(&self, v: VarId) -> Rational {
        self.terms.get(&v).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn support(&self) -> BTreeSet<VarId> {
        self.terms.keys().copied().collect()
    }

    pub fn is_integral(&self) -> bool {
        self.terms.values().all(|c| c.is_integer())
    }

    pub fn evaluate_with(&self, value: impl Fn(VarId) -> bool) -> Rational {
        self.terms
            .iter()
            .filter(|(v, _)| value(**v))
            .fold(Rational::zero(), |acc, (_, c)| acc + c)
    }

    pub fn min_value(&self) -> Rational {
        self.terms.values().filter(|c| c.is_negative()).fold(Rational::zero(), |a, c| a + c)
    }

    pub fn max_value(&self) -> Rational {
        self.terms.values().filter(|c| c.is_positive()).fold(Rational::zero(), |a, c| a + c)
    }

    pub fn scale(&self, c: &Rational) -> Self {
        Self::from_terms(self.terms.iter().map(|(v, a)| (*v, a * c)))
    }

    pub fn to_polynomial(&self) -> Polynomial {
        Polynomial::affine(self.terms.iter().map(|(v, c)| (*v, c.clone())), Rational::zero())
    }
}

/// `lo <= expr <= hi`; `None` marks an infinite side.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TwoSidedConstraint {
    pub name: String,
    pub expr: LinearExpression,
    pub lo: Option<Rational>,
    pub hi: Option<Rational>,
}

impl TwoSidedConstraint {
    pub fn new(
        name: impl Into<String>,
        expr: LinearExpression,
        lo: Option<Rational>,
        hi: Option<Rational>,
    ) -> Result<Self, ModelError> {
        let name = name.into();
        if lo.is_none() && hi.is_none() {
            return Err(ModelError::Unbounded { location: name });
        }
        if let (Some(l), Some(h)) = (&lo, &hi) {
            if l > h {
                return Err(ModelError::InvertedBounds { location: name });
            }
        }
        Ok(TwoSidedConstraint { name, expr, lo, hi })
    }

    pub fn equality(name: impl Into<String>, expr: LinearExpression, b: Rational) -> Self {
        TwoSidedConstraint { name: name.into(), expr, lo: Some(b.clone()), hi: Some(b) }
    }

    pub fn is_equality(&self) -> bool {
        matches!((&self.lo, &self.hi), (Some(l), Some(h)) if l == h)
    }

    pub fn holds_at(&self, value: &Rational) -> bool {
        self.lo.as_ref().is_none_or(|l| value >= l) && self.hi.as_ref().is_none_or(|h| value <= h)
    }

    pub fn is_satisfied(&self, assign: impl Fn(VarId) -> bool) -> bool {
        self.holds_at(&self.expr.evaluate_with(assign))
    }

    /// Distance of `value` outside `[lo, hi]`; zero when satisfied.
    pub fn residual(&self, value: &Rational) -> Rational {
        if let Some(l) = &self.lo {
            if value < l {
                return l - value;
            }
        }
        if let Some(h) = &self.hi {
            if value > h {
                return value - h;
            }
        }
        Rational::zero()
    }

    pub fn is_integral(&self) -> bool {
        self.expr.is_integral()
            && self.lo.as_ref().is_none_or(|v| v.is_integer())
            && self.hi.as_ref().is_none_or(|v| v.is_integer())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sense {
    Min,
    Max,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Objective {
    pub sense: Sense,
    pub expr: LinearExpression,
    pub constant: Rational,
}

impl Default for Objective {
    fn default() -> Self {
        Objective { sense: Sense::Min, expr: LinearExpression::new(), constant: Rational::zero() }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BlpModel {
    names: Vec<String>,
    pub objective: Objective,
    pub constraints: Vec<TwoSidedConstraint>,
}

impl BlpModel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_variable(&mut self, name: impl Into<String>) -> Result<VarId, ModelError> {
        let name = name.into();
        if self.names.contains(&name) {
            return Err(ModelError::DuplicateName { what: "variable", name });
        }
        self.names.push(name);
        Ok(VarId::original(self.names.len() as u32 - 1))
    }

    pub fn with_variables(names: impl IntoIterator<Item = impl Into<String>>) -> Result<Self, ModelError> {
        let mut m = Self::new();
        for n in names {
            m.add_variable(n)?;
        }
        Ok(m)
    }

    pub fn num_variables(&self) -> usize {
        self.names.len()
    }

    pub fn variables(&self) -> impl Iterator<Item = VarId> {
        (0..self.names.len() as u32).map(VarId::original)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn var(&self, name: &str) -> Option<VarId> {
        self.names.iter().position(|n| n == name).map(|i| VarId::original(i as u32))
    }

    pub fn name_of(&self, v: VarId) -> String {
        if v.is_ancillary() {
            return v.to_string();
        }
        self.names.get(v.index as usize).cloned().unwrap_or_else(|| v.to_string())
    }

    pub fn set_objective(&mut self, sense: Sense, expr: LinearExpression, constant: Rational) {
        self.objective = Objective { sense, expr, constant };
    }

    pub fn add_constraint(&mut self, c: TwoSidedConstraint) -> Result<(), ModelError> {
        if self.constraints.iter().any(|o| o.name == c.name) {
            return Err(ModelError::DuplicateName { what: "constraint", name: c.name });
        }
        for v in c.expr.support() {
            if v.is_ancillary() || v.index as usize >= self.names.len() {
                return Err(ModelError::UnknownVariable { name: v.to_string(), location: c.name });
            }
        }
        self.constraints.push(c);
        Ok(())
    }

    /// Objective in minimization form: negated for max models.
    pub fn min_form(&self) -> (LinearExpression, Rational) {
        match self.objective.sense {
            Sense::Min => (self.objective.expr.clone(), self.objective.constant.clone()),
            Sense::Max => (self.objective.expr.scale(&rat(-1)), -self.objective.constant.clone()),
        }
    }

    pub fn min_form_polynomial(&self) -> Polynomial {
        let (e, c) = self.min_form();
        &e.to_polynomial() + &Polynomial::constant(c)
    }

    /// Convert a minimization-form value back to the model's own sense.
    pub fn from_min_form(&self, v: &Rational) -> Rational {
        match self.objective.sense {
            Sense::Min => v.clone(),
            Sense::Max => -v.clone(),
        }
    }

    pub fn objective_value(&self, assign: impl Fn(VarId) -> bool) -> Rational {
        self.objective.expr.evaluate_with(assign) + &self.objective.constant
    }

    pub fn is_feasible(&self, assign: impl Fn(VarId) -> bool + Copy) -> bool {
        self.constraints.iter().all(|c| c.is_satisfied(assign))
    }

    pub fn to_json(&self) -> Value {
        let terms = |e: &LinearExpression| -> Vec<Value> {
            e.terms()
                .map(|(v, c)| serde_json::json!({"var": self.name_of(v), "coef": rational_to_json(c)}))
                .collect()
        };
        let bound = |b: &Option<Rational>| b.as_ref().map_or(Value::Null, rational_to_json);
        serde_json::json!({
            "variables": self.names,
            "objective": {
                "sense": self.objective.sense,
                "terms": terms(&self.objective.expr),
                "constant": rational_to_json(&self.objective.constant),
            },
            "constraints": self.constraints.iter().map(|c| serde_json::json!({
                "name": c.name,
                "terms": terms(&c.expr),
                "lo": bound(&c.lo),
                "hi": bound(&c.hi),
            })).collect::<Vec<_>>(),
        })
    }
}

/// Integers become JSON numbers; other rationals become `"p/q"` strings.
pub fn rational_to_json(r: &Rational) -> Value {
    if r.is_integer() {
        if let Ok(n) = r.numer().to_string().parse::<i64>() {
            return Value::from(n);
        }
    }
    Value::String(fmt_rational(r))
}

/// Accepts JSON numbers (decimal text is converted exactly) or `"p/q"` strings.
pub fn rational_from_json(v: &Value, location: &str) -> Result<Rational, ModelError> {
    let text = match v {
        Value::Number(n) => n.to_string(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    };
    parse_rational(&text).ok_or(ModelError::BadNumber { value: text, location: location.to_string() })
}

#[derive(Deserialize)]
struct RawTerm {
    var: String,
    coef: Value,
}

#[derive(Deserialize)]
struct RawObjective {
    sense: Sense,
    #[serde(default)]
    terms: Vec<RawTerm>,
    #[serde(default)]
    constant: Option<Value>,
}

#[derive(Deserialize)]
struct RawConstraint {
    #[serde(default)]
    name: Option<String>,
    #[serde(default)]
    terms: Vec<RawTerm>,
    #[serde(default)]
    lo: Option<Value>,
    #[serde(default)]
    hi: Option<Value>,
}

#[derive(Deserialize)]
struct RawModel {
    variables: Vec<String>,
    #[serde(default)]
    objective: Option<RawObjective>,
    #[serde(default)]
    constraints: Vec<RawConstraint>,
}

fn resolve_terms(m: &BlpModel, terms: &[RawTerm], location: &str) -> Result<LinearExpression, ModelError> {
    let mut e = LinearExpression::new();
    for t in terms {
        let v = m.var(&t.var).ok_or_else(|| ModelError::UnknownVariable {
            name: t.var.clone(),
            location: location.to_string(),
        })?;
        e.add_term(v, rational_from_json(&t.coef, location)?);
    }
    Ok(e)
}

pub fn parse_model_json(text: &str) -> Result<BlpModel, ModelError> {
    let raw: RawModel = serde_json::from_str(text).map_err(|e| ModelError::Json(e.to_string()))?;
    let mut m = BlpModel::with_variables(raw.variables)?;
    if let Some(obj) = raw.objective {
        let expr = resolve_terms(&m, &obj.terms, "objective")?;
        let constant = match &obj.constant {
            Some(v) => rational_from_json(v, "objective")?,
            None => Rational::zero(),
        };
        m.set_objective(obj.sense, expr, constant);
    }
    for (idx, rc) in raw.constraints.into_iter().enumerate() {
        let name = rc.name.unwrap_or_else(|| format!("c{}", idx + 1));
        let location = format!("constraint {name:?} (#{})", idx + 1);
        let expr = resolve_terms(&m, &rc.terms, &location)?;
        let bound = |b: &Option<Value>| -> Result<Option<Rational>, ModelError> {
            match b {
                None | Some(Value::Null) => Ok(None),
                Some(v) => rational_from_json(v, &location).map(Some),
            }
        };
        let (lo, hi) = (bound(&rc.lo)?, bound(&rc.hi)?);
        let c = TwoSidedConstraint::new(name, expr, lo, hi).map_err(|e| match e {
            ModelError::InvertedBounds { .. } => ModelError::InvertedBounds { location: location.clone() },
            ModelError::Unbounded { .. } => ModelError::Unbounded { location: location.clone() },
            other => other,
        })?;
        m.add_constraint(c)?;
    }
    Ok(m)
}

/// Undirected simple graph on vertices `0..n`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Graph {
    pub n: usize,
    pub edges: BTreeSet<(usize, usize)>,
}

impl Graph {
    pub fn new(n: usize) -> Self {
        Graph { n, edges: BTreeSet::new() }
    }

    /// Returns false when the edge was already present. Panics on self-loops or out-of-range vertices.
    pub fn add_edge(&mut self, u: usize, v: usize) -> bool {
        assert!(u != v && u < self.n && v < self.n, "invalid edge ({u}, {v})");
        self.edges.insert((u.min(v), u.max(v)))
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.edges.contains(&(u.min(v), u.max(v)))
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn to_dimacs(&self) -> String {
        let mut s = format!("p edge {} {}\n", self.n, self.edges.len());
        for (u, v) in &self.edges {
            let _ = writeln!(s, "e {} {}", u + 1, v + 1);
        }
        s
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Literal {
    /// 0-based variable index.
    pub var: usize,
    pub positive: bool,
}

impl Literal {
    pub fn value(&self, x: &[bool]) -> bool {
        x[self.var] == self.positive
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct CnfFormula {
    pub num_vars: usize,
    pub clauses: Vec<[Literal; 2]>,
}

impl CnfFormula {
    pub fn satisfied_count(&self, x: &[bool]) -> usize {
        self.clauses.iter().filter(|c| c[0].value(x) || c[1].value(x)).count()
    }

    pub fn to_dimacs(&self) -> String {
        let mut s = format!("p cnf {} {}\n", self.num_vars, self.clauses.len());
        for c in &self.clauses {
            let lit = |l: &Literal| if l.positive { (l.var + 1) as i64 } else { -((l.var + 1) as i64) };
            let _ = writeln!(s, "{} {} 0", lit(&c[0]), lit(&c[1]));
        }
        s
    }
}

/// Square matrix of rational weights.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WeightMatrix {
    pub n: usize,
    pub w: Vec<Vec<Rational>>,
}

impl WeightMatrix {
    pub fn new(w: Vec<Vec<Rational>>) -> Result<Self, ModelError> {
        let n = w.len();
        if w.iter().any(|row| row.len() != n) {
            return Err(ModelError::Invalid("weight matrix must be square".into()));
        }
        Ok(WeightMatrix { n, w })
    }

    pub fn to_json(&self) -> Value {
        serde_json::json!({
            "n": self.n,
            "weights": self.w.iter().map(|r| r.iter().map(rational_to_json).collect::<Vec<_>>()).collect::<Vec<_>>(),
        })
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let v: Value = serde_json::from_str(text).map_err(|e| ModelError::Json(e.to_string()))?;
        let rows = v
            .get("weights")
            .and_then(Value::as_array)
            .ok_or_else(|| ModelError::Invalid("missing \"weights\" array".into()))?;
        let mut w = Vec::with_capacity(rows.len());
        for (i, row) in rows.iter().enumerate() {
            let cells = row.as_array().ok_or_else(|| ModelError::Invalid(format!("row {i} is not an array")))?;
            let parsed: Result<Vec<_>, _> =
                cells.iter().map(|c| rational_from_json(c, &format!("weights row {i}"))).collect();
            w.push(parsed?);
        }
        Self::new(w)
    }
}

fn dimacs_header<'a>(text: &'a str, kind: &str) -> Result<(usize, usize, Vec<(usize, &'a str)>), ModelError> {
    let mut header = None;
    let mut body = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let t = line.trim();
        if t.is_empty() || t.starts_with('c') || t.starts_with('%') {
            continue;
        }
        if t.starts_with('p') {
            let parts: Vec<&str> = t.split_whitespace().collect();
            let parse = |s: &str| s.parse::<usize>().ok();
            match parts.as_slice() {
                ["p", k, n, m] if *k == kind => match (parse(n), parse(m)) {
                    (Some(n), Some(m)) if header.is_none() => header = Some((n, m)),
                    _ => return Err(ModelError::Dimacs { line: line_no, message: "malformed header".into() }),
                },
                _ => {
                    return Err(ModelError::Dimacs {
                        line: line_no,
                        message: format!("malformed header, expected \"p {kind} <n> <m>\""),
                    })
                }
            }
            continue;
        }
        if header.is_none() {
            return Err(ModelError::Dimacs { line: line_no, message: "data before header".into() });
        }
        body.push((line_no, t));
    }
    let (n, m) = header.ok_or(ModelError::Dimacs { line: 0, message: format!("missing \"p {kind}\" header") })?;
    Ok((n, m, body))
}

/// Parse `p edge n m` DIMACS. Returns the graph and the number of duplicate edges collapsed.
pub fn parse_dimacs_graph(text: &str) -> Result<(Graph, usize), ModelError> {
    let (n, m, body) = dimacs_header(text, "edge")?;
    let mut g = Graph::new(n);
    let mut seen = 0;
    let mut duplicates = 0;
    for (line, t) in body {
        let parts: Vec<&str> = t.split_whitespace().collect();
        let (u, v) = match parts.as_slice() {
            ["e", u, v] => match (u.parse::<usize>(), v.parse::<usize>()) {
                (Ok(u), Ok(v)) => (u, v),
                _ => return Err(ModelError::Dimacs { line, message: "bad edge line".into() }),
            },
            _ => return Err(ModelError::Dimacs { line, message: "expected \"e <u> <v>\"".into() }),
        };
        if u == 0 || v == 0 || u > n || v > n {
            return Err(ModelError::Dimacs { line, message: format!("vertex out of range 1..={n}") });
        }
        if u == v {
            return Err(ModelError::Dimacs { line, message: "self-loop".into() });
        }
        seen += 1;
        if !g.add_edge(u - 1, v - 1) {
            duplicates += 1;
        }
    }
    if seen != m {
        return Err(ModelError::Dimacs { line: 0, message: format!("header declares {m} edges, found {seen}") });
    }
    Ok((g, duplicates))
}

pub fn parse_dimacs_cnf(text: &str) -> Result<CnfFormula, ModelError> {
    let (n, m, body) = dimacs_header(text, "cnf")?;
    let mut clauses = Vec::new();
    let mut current: Vec<i64> = Vec::new();
    let mut last_line = 0;
    for (line, t) in body {
        last_line = line;
        for tok in t.split_whitespace() {
            let lit: i64 = tok
                .parse()
                .map_err(|_| ModelError::Dimacs { line, message: format!("bad literal {tok:?}") })?;
            if lit == 0 {
                if current.len() != 2 {
                    return Err(ModelError::Dimacs {
                        line,
                        message: format!("clause has {} literals; Max2SAT needs exactly 2", current.len()),
                    });
                }
                let to_lit = |l: i64| Literal { var: (l.unsigned_abs() - 1) as usize, positive: l > 0 };
                clauses.push([to_lit(current[0]), to_lit(current[1])]);
                current.clear();
            } else {
                if lit.unsigned_abs() as usize > n {
                    return Err(ModelError::Dimacs { line, message: format!("variable {lit} out of range") });
                }
                current.push(lit);
            }
        }
    }
    if !current.is_empty() {
        return Err(ModelError::Dimacs { line: last_line, message: "unterminated clause".into() });
    }
    if clauses.len() != m {
        return Err(ModelError::Dimacs {
            line: 0,
            message: format!("header declares {m} clauses, found {}", clauses.len()),
        });
    }
    Ok(CnfFormula { num_vars: n, clauses })
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const BLP1_JSON: &str = r#"{
        "variables": ["x1", "x2", "x3"],
        "objective": {"sense": "min", "terms": [{"var": "x1", "coef": 1}, {"var": "x2", "coef": 1}, {"var": "x3", "coef": 2}], "constant": 0},
        "constraints": [
            {"name": "c1", "terms": [{"var": "x1", "coef": 1}, {"var": "x2", "coef": 2}, {"var": "x3", "coef": -1}], "lo": 0, "hi": 2},
            {"name": "c2", "terms": [{"var": "x1", "coef": 2}, {"var": "x2", "coef": 2}, {"var": "x3", "coef": -1}], "lo": 1, "hi": 2},
            {"name": "c3", "terms": [{"var": "x1", "coef": 3}, {"var": "x3", "coef": -2}], "lo": null, "hi": 1}
        ]
    }"#;

    #[test]
    fn parses_blp1() {
        let m = parse_model_json(BLP1_JSON).unwrap();
        assert_eq!(m.num_variables(), 3);
        assert_eq!(m.constraints.len(), 3);
        assert_eq!(m.constraints[2].lo, None);
        assert_eq!(parse_model_json(&m.to_json().to_string()).unwrap(), m);
    }

    #[test]
    fn unconstrained_and_errors() {
        let m = parse_model_json(r#"{"variables": ["a"], "constraints": []}"#).unwrap();
        assert!(m.constraints.is_empty());
        let err = parse_model_json(
            r#"{"variables": ["x1"], "constraints": [{"terms": [{"var": "x9", "coef": 1}], "lo": 0, "hi": 1}]}"#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("unknown variable x9"), "{err}");
        let err = parse_model_json(
            r#"{"variables": ["a"], "constraints": [{"terms": [{"var": "a", "coef": 1}], "lo": 2, "hi": 1}]}"#,
        )
        .unwrap_err();
        assert!(matches!(err, ModelError::InvertedBounds { .. }));
        let err = parse_model_json(r#"{"variables": ["a", "a"]}"#).unwrap_err();
        assert!(matches!(err, ModelError::DuplicateName { .. }));
    }

    #[test]
    fn fractional_coefficients_are_exact() {
        let m = parse_model_json(
            r#"{"variables": ["a"], "constraints": [{"terms": [{"var": "a", "coef": 0.1}], "lo": "1/3", "hi": null}]}"#,
        )
        .unwrap();
        assert_eq!(m.constraints[0].expr.coefficient(VarId::original(0)), crate::poly::ratio(1, 10));
        assert_eq!(m.constraints[0].lo, Some(crate::poly::ratio(1, 3)));
    }

    #[test]
    fn dimacs_graph() {
        let (g, dup) = parse_dimacs_graph("c triangle\np edge 3 3\ne 1 2\ne 2 3\ne 1 3\n").unwrap();
        assert_eq!(g.num_edges(), 3);
        assert_eq!(dup, 0);
        let (g2, dup2) = parse_dimacs_graph("p edge 3 2\ne 1 2\ne 2 1\n").unwrap();
        assert_eq!((g2.num_edges(), dup2), (1, 1));
        assert!(parse_dimacs_graph("p edge 3\n").is_err());
        assert!(parse_dimacs_graph("p edge 3 1\ne 1 1\n").is_err());
        assert_eq!(parse_dimacs_graph(&g.to_dimacs()).unwrap().0, g);
    }

    #[test]
    fn dimacs_cnf() {
        let f = parse_dimacs_cnf("p cnf 2 1\n1 -2 0\n").unwrap();
        assert_eq!(
            f.clauses,
            vec![[Literal { var: 0, positive: true }, Literal { var: 1, positive: false }]]
        );
        let err = parse_dimacs_cnf("p cnf 3 1\n1 2 3 0\n").unwrap_err();
        assert!(err.to_string().contains("exactly 2"));
        assert_eq!(parse_dimacs_cnf(&f.to_dimacs()).unwrap(), f);
    }

    #[test]
    fn max_sense_normalization() {
        let mut m = BlpModel::with_variables(["a", "b"]).unwrap();
        m.set_objective(Sense::Max, LinearExpression::from_ints([(VarId::original(0), 2)]), rat(1));
        let (e, c) = m.min_form();
        assert_eq!(e.coefficient(VarId::original(0)), rat(-2));
        assert_eq!(c, rat(-1));
        assert_eq!(m.from_min_form(&rat(-3)), rat(3));
    }
}
