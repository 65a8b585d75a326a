//! QUBO JSON, QUBO coordinate text, and penalty/constraint files.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write;

use anyhow::{anyhow, bail, Context, Result};
use qubo_core::model::{parse_model_json, rational_from_json, rational_to_json, Sense, TwoSidedConstraint};
use qubo_core::poly::{fmt_rational, parse_rational, Polynomial, QuboModel, Rational, VarId};
use serde::Deserialize;
use serde_json::{json, Value};

/// Metadata carried next to a QUBO so that solutions can be mapped back.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct QuboMeta {
    pub num_original: Option<usize>,
    pub sense: Option<Sense>,
    pub problem: Option<String>,
    pub form: Option<String>,
    /// Source instance in its native text format.
    pub instance: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuboFile {
    pub qubo: QuboModel,
    pub meta: QuboMeta,
}

pub fn qubo_to_json(q: &QuboModel, meta: &QuboMeta) -> Value {
    let terms: Vec<Value> = q
        .coefficients
        .iter()
        .map(|((i, j), c)| json!({"i": i, "j": j, "coef": rational_to_json(c)}))
        .collect();
    let mut v = json!({
        "n": q.dimension,
        "terms": terms,
        "constant": rational_to_json(&q.constant),
        "decode": q.decode,
    });
    let obj = v.as_object_mut().expect("object literal");
    if let Some(n) = meta.num_original {
        obj.insert("num_original".into(), json!(n));
    }
    if let Some(s) = meta.sense {
        obj.insert("sense".into(), json!(s));
    }
    for (key, value) in [("problem", &meta.problem), ("form", &meta.form), ("instance", &meta.instance)] {
        if let Some(value) = value {
            obj.insert(key.into(), json!(value));
        }
    }
    v
}

/// `c` comment lines, a `p qubo <n> <nterms> <constant>` header, then `<i> <j> <coef>` with `i <= j`.
pub fn qubo_to_coordinate(q: &QuboModel) -> String {
    let mut s = String::new();
    for (i, name) in q.decode.iter().enumerate() {
        let _ = writeln!(s, "c {i} {name}");
    }
    let _ = writeln!(s, "p qubo {} {} {}", q.dimension, q.coefficients.len(), fmt_rational(&q.constant));
    for ((i, j), c) in &q.coefficients {
        let _ = writeln!(s, "{i} {j} {}", fmt_rational(c));
    }
    s
}

fn build_qubo(n: usize, entries: Vec<(usize, usize, Rational)>, constant: Rational, decode: Vec<String>) -> Result<QuboModel> {
    let mut coefficients: BTreeMap<(usize, usize), Rational> = BTreeMap::new();
    for (i, j, c) in entries {
        if i >= n || j >= n {
            bail!("term ({i}, {j}) is outside 0..{n}");
        }
        *coefficients.entry((i.min(j), i.max(j))).or_default() += c;
    }
    coefficients.retain(|_, c| *c != Rational::default());
    if decode.len() != n {
        bail!("decode lists {} names for {n} variables", decode.len());
    }
    Ok(QuboModel { dimension: n, coefficients, constant, variables: (0..n as u32).map(VarId::original).collect(), decode })
}

#[derive(Deserialize)]
struct RawEntry {
    i: usize,
    j: usize,
    coef: Value,
}

#[derive(Deserialize)]
struct RawQubo {
    n: usize,
    #[serde(default)]
    terms: Vec<RawEntry>,
    #[serde(default)]
    constant: Option<Value>,
    #[serde(default)]
    decode: Option<Vec<String>>,
    #[serde(default)]
    num_original: Option<usize>,
    #[serde(default)]
    sense: Option<Sense>,
    #[serde(default)]
    problem: Option<String>,
    #[serde(default)]
    form: Option<String>,
    #[serde(default)]
    instance: Option<String>,
}

fn default_names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("q{i}")).collect()
}

fn parse_qubo_json(text: &str) -> Result<QuboFile> {
    let raw: RawQubo = serde_json::from_str(text).context("invalid QUBO JSON")?;
    let entries = raw
        .terms
        .iter()
        .enumerate()
        .map(|(k, t)| Ok((t.i, t.j, rational_from_json(&t.coef, &format!("term #{}", k + 1))?)))
        .collect::<Result<Vec<_>>>()?;
    let constant = match &raw.constant {
        Some(v) => rational_from_json(v, "constant")?,
        None => Rational::default(),
    };
    let decode = raw.decode.unwrap_or_else(|| default_names(raw.n));
    let meta = QuboMeta { num_original: raw.num_original, sense: raw.sense, problem: raw.problem, form: raw.form, instance: raw.instance };
    Ok(QuboFile { qubo: build_qubo(raw.n, entries, constant, decode)?, meta })
}

fn parse_coordinate(text: &str) -> Result<QuboFile> {
    let mut header = None;
    let mut entries = Vec::new();
    let mut names = BTreeMap::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let parts: Vec<&str> = line.split_whitespace().collect();
        match parts.as_slice() {
            [] => {}
            ["c", i, name] => {
                if let Ok(i) = i.parse::<usize>() {
                    names.insert(i, name.to_string());
                }
            }
            ["c", ..] => {}
            ["p", "qubo", n, m, c] => {
                let n: usize = n.parse().map_err(|_| anyhow!("line {line_no}: bad variable count {n:?}"))?;
                let m: usize = m.parse().map_err(|_| anyhow!("line {line_no}: bad term count {m:?}"))?;
                let c = parse_rational(c).ok_or_else(|| anyhow!("line {line_no}: bad constant {c:?}"))?;
                header = Some((n, m, c));
            }
            [i, j, c] if header.is_some() => {
                let i: usize = i.parse().map_err(|_| anyhow!("line {line_no}: bad index {i:?}"))?;
                let j: usize = j.parse().map_err(|_| anyhow!("line {line_no}: bad index {j:?}"))?;
                if i > j {
                    bail!("line {line_no}: expected i <= j, found {i} > {j}");
                }
                let c = parse_rational(c).ok_or_else(|| anyhow!("line {line_no}: bad coefficient {c:?}"))?;
                entries.push((i, j, c));
            }
            _ => bail!("line {line_no}: expected \"p qubo <n> <nterms> <constant>\" then \"<i> <j> <coef>\""),
        }
    }
    let (n, m, constant) = header.ok_or_else(|| anyhow!("missing \"p qubo\" header"))?;
    if entries.len() != m {
        bail!("header declares {m} terms, found {}", entries.len());
    }
    let decode = (0..n).map(|i| names.get(&i).cloned().unwrap_or_else(|| format!("q{i}"))).collect();
    Ok(QuboFile { qubo: build_qubo(n, entries, constant, decode)?, meta: QuboMeta::default() })
}

/// Reads either QUBO JSON or coordinate text.
pub fn parse_qubo(text: &str) -> Result<QuboFile> {
    if text.trim_start().starts_with('{') {
        parse_qubo_json(text)
    } else {
        parse_coordinate(text)
    }
}

#[derive(Deserialize)]
struct RawPenaltyTerm {
    vars: Vec<String>,
    coef: Value,
}

#[derive(Deserialize)]
struct RawPenalty {
    #[serde(default)]
    terms: Vec<RawPenaltyTerm>,
    #[serde(default)]
    constant: Option<Value>,
    #[serde(default)]
    ancillaries: Vec<String>,
}

/// A penalty polynomial and the constraint it is meant to encode, over shared variable names.
pub struct VipCase {
    pub penalty: Polynomial,
    pub constraint: TwoSidedConstraint,
    pub ancillaries: BTreeSet<VarId>,
    pub names: BTreeMap<VarId, String>,
}

/// Penalty file: `{"terms": [{"vars": [..], "coef": ..}], "constant": .., "ancillaries": [..]}`.
/// Constraint file: `{"name": .., "terms": [{"var": .., "coef": ..}], "lo": .., "hi": ..}`.
pub fn parse_vip_case(penalty_text: &str, constraint_text: &str) -> Result<VipCase> {
    let raw: RawPenalty = serde_json::from_str(penalty_text).context("invalid penalty JSON")?;
    let c: Value = serde_json::from_str(constraint_text).context("invalid constraint JSON")?;
    let anc_names: BTreeSet<&str> = raw.ancillaries.iter().map(String::as_str).collect();
    let mut originals: Vec<String> = Vec::new();
    let mut note = |name: &str| {
        if !anc_names.contains(name) && !originals.iter().any(|o| o == name) {
            originals.push(name.to_string());
        }
    };
    for t in c.get("terms").and_then(Value::as_array).into_iter().flatten() {
        if let Some(name) = t.get("var").and_then(Value::as_str) {
            if anc_names.contains(name) {
                bail!("ancillary {name:?} appears in the constraint");
            }
            note(name);
        }
    }
    for t in &raw.terms {
        t.vars.iter().for_each(|v| note(v));
    }
    if !c.is_object() {
        bail!("constraint JSON must be an object");
    }
    let model_json = json!({"variables": originals, "constraints": [c]});
    let model = parse_model_json(&model_json.to_string())?;
    let constraint = model.constraints[0].clone();
    let mut ids: BTreeMap<String, VarId> = model.variables().map(|v| (model.name_of(v), v)).collect();
    for (k, a) in raw.ancillaries.iter().enumerate() {
        ids.insert(a.clone(), VarId::ancillary(k as u32 + 1));
    }
    let mut penalty = Polynomial::constant(match &raw.constant {
        Some(v) => rational_from_json(v, "penalty constant")?,
        None => Rational::default(),
    });
    for (k, t) in raw.terms.iter().enumerate() {
        let vars: Vec<VarId> = t.vars.iter().map(|v| ids[v]).collect();
        penalty.add_term(vars, rational_from_json(&t.coef, &format!("penalty term #{}", k + 1))?);
    }
    let ancillaries = raw.ancillaries.iter().map(|a| ids[a]).collect();
    let names = ids.into_iter().map(|(n, v)| (v, n)).collect();
    Ok(VipCase { penalty, constraint, ancillaries, names })
}
