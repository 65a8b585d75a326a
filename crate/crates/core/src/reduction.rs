//! Ancillary-variable machinery: slack expansions, degree reduction and level reduction.

use std::collections::{BTreeMap, BTreeSet};

use num_traits::{Signed, ToPrimitive, Zero};
use serde::Serialize;
use thiserror::Error;

use crate::levelness::LevelnessReport;
use crate::model::{LinearExpression, TwoSidedConstraint};
use crate::poly::{fmt_rational, multilinear_reduce, rat, rational_gcd_all, Polynomial, Rational, VarId};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ReductionError {
    #[error("{what} needs integer coefficients and bounds (constraint {name}); use the discrete expansion instead")]
    NonInteger { what: &'static str, name: String },
    #[error("{what} needs a window of at least {needed} values, constraint {name} has {found}")]
    WindowTooSmall { what: &'static str, name: String, needed: usize, found: usize },
}

/// Hands out fresh ancillary ids.
#[derive(Clone, Debug, Default)]
pub struct AncillaryAllocator {
    next: u32,
}

impl AncillaryAllocator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn fresh(&mut self) -> VarId {
        let v = VarId::ancillary(self.next);
        self.next += 1;
        v
    }

    pub fn fresh_n(&mut self, n: usize) -> Vec<VarId> {
        (0..n).map(|_| self.fresh()).collect()
    }

    pub fn count(&self) -> usize {
        self.next as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepKind {
    DiscreteExpansion,
    BinaryExpansion,
    CappedBinaryExpansion,
    Rosenberg,
    MinSelectionNegative,
    MinSelectionPositive,
    DiscreteLevel,
    BinaryLevel,
    Normalize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReductionStep {
    pub kind: StepKind,
    pub source: String,
    pub created: Vec<VarId>,
    pub emitted: Vec<Polynomial>,
    pub params: BTreeMap<String, String>,
}

impl ReductionStep {
    fn new(kind: StepKind, source: &str) -> Self {
        ReductionStep { kind, source: source.to_string(), created: Vec::new(), emitted: Vec::new(), params: BTreeMap::new() }
    }

    fn param(mut self, key: &str, value: impl ToString) -> Self {
        self.params.insert(key.to_string(), value.to_string());
        self
    }

    pub fn to_json(&self, name: impl Fn(VarId) -> String) -> serde_json::Value {
        serde_json::json!({
            "kind": self.kind,
            "source": self.source,
            "created": self.created.iter().map(|v| name(*v)).collect::<Vec<_>>(),
            "emitted": self.emitted.iter().map(|p| p.render(&name)).collect::<Vec<_>>(),
            "params": self.params,
        })
    }
}

/// A constraint rewritten as an equality over the original and slack variables.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SlackExpansion {
    pub equality: TwoSidedConstraint,
    /// At-most-one over the slacks, when the expansion needs it.
    pub exclusion: Option<TwoSidedConstraint>,
    pub created: Vec<VarId>,
    /// The slack can exceed the window width (plain binary expansion of a non power of two).
    pub relaxed: bool,
    pub step: ReductionStep,
}

fn slack_equality(name: &str, expr: &LinearExpression, slack: &[(VarId, Rational)], rhs: Rational) -> TwoSidedConstraint {
    let mut e = expr.clone();
    for (v, c) in slack {
        e.add_term(*v, c.clone());
    }
    TwoSidedConstraint::equality(format!("{name}/slack"), e, rhs)
}

/// One-hot slack with the zero level eliminated: `h + sum (hi - w_t) s_t = hi` and `sum s_t <= 1`.
pub fn discrete_expansion(r: &LevelnessReport, alloc: &mut AncillaryAllocator) -> Result<SlackExpansion, ReductionError> {
    if r.k < 2 {
        return Err(ReductionError::WindowTooSmall { what: "discrete expansion", name: r.name.clone(), needed: 2, found: r.k });
    }
    let window = r.window();
    let hi = window[r.k - 1].clone();
    let created = alloc.fresh_n(r.k - 1);
    let slack: Vec<(VarId, Rational)> =
        created.iter().enumerate().map(|(t, v)| (*v, &hi - &window[r.k - 2 - t])).collect();
    let equality = slack_equality(&r.name, &r.expr, &slack, hi);
    let exclusion = (created.len() >= 2).then(|| TwoSidedConstraint {
        name: format!("{}/at-most-one", r.name),
        expr: LinearExpression::from_ints(created.iter().map(|v| (*v, 1))),
        lo: None,
        hi: Some(rat(1)),
    });
    let mut step = ReductionStep::new(StepKind::DiscreteExpansion, &r.name).param("k", r.k);
    step.created = created.clone();
    step.emitted.push(&equality.expr.to_polynomial() - &Polynomial::constant(equality.lo.clone().unwrap()));
    Ok(SlackExpansion { equality, exclusion, created, relaxed: false, step })
}

/// `ceil(log2(width + 1))`, the number of bits for slack values `0..=width`.
pub fn bits_for(width: u64) -> usize {
    (u64::BITS - width.leading_zeros()) as usize
}

/// Slack coefficients `1, 2, ..., 2^(n'-2), a` whose subset sums are exactly `0..=k-1`.
pub fn capped_binary_coefficients(k: u64) -> Vec<u64> {
    if k <= 1 {
        return Vec::new();
    }
    let n = bits_for(k - 1);
    let mut coefs: Vec<u64> = (0..n - 1).map(|j| 1u64 << j).collect();
    let covered: u64 = coefs.iter().sum();
    coefs.push(k - 1 - covered);
    coefs
}

fn integer_window(name: &str, expr: &LinearExpression, lo: &Rational, hi: &Rational, what: &'static str) -> Result<u64, ReductionError> {
    if !(expr.is_integral() && lo.is_integer() && hi.is_integer()) {
        return Err(ReductionError::NonInteger { what, name: name.to_string() });
    }
    Ok((hi - lo).to_integer().to_u64().expect("window width fits u64"))
}

/// `lo <= h <= hi` as `h + w = hi` with a slack `w` in `0..=hi-lo`. With `capped` the last
/// coefficient is shrunk so the slack range is exact; otherwise plain powers of two.
pub fn slack_expansion(
    name: &str,
    expr: &LinearExpression,
    lo: &Rational,
    hi: &Rational,
    capped: bool,
    alloc: &mut AncillaryAllocator,
) -> Result<SlackExpansion, ReductionError> {
    let what = if capped { "capped binary expansion" } else { "binary expansion" };
    let width = integer_window(name, expr, lo, hi, what)?;
    let coefs: Vec<u64> = if capped {
        capped_binary_coefficients(width + 1)
    } else {
        (0..bits_for(width)).map(|j| 1u64 << j).collect()
    };
    let created = alloc.fresh_n(coefs.len());
    let slack: Vec<(VarId, Rational)> = created.iter().zip(&coefs).map(|(v, c)| (*v, rat(*c as i64))).collect();
    let equality = slack_equality(name, expr, &slack, hi.clone());
    let max_slack: u64 = coefs.iter().sum();
    let relaxed = max_slack > width;
    let kind = if capped { StepKind::CappedBinaryExpansion } else { StepKind::BinaryExpansion };
    let mut step = ReductionStep::new(kind, name)
        .param("n_prime", coefs.len())
        .param("width", width + 1)
        .param("relaxed", relaxed);
    if capped {
        step = step.param("a", coefs.last().copied().unwrap_or(0));
    }
    step.created = created.clone();
    step.emitted.push(&equality.expr.to_polynomial() - &Polynomial::constant(hi.clone()));
    Ok(SlackExpansion { equality, exclusion: None, created, relaxed, step })
}

/// Binary slack expansion over the refined window.
pub fn binary_expansion(r: &LevelnessReport, alloc: &mut AncillaryAllocator) -> Result<SlackExpansion, ReductionError> {
    slack_expansion(&r.name, &r.expr, r.lo(), r.hi(), false, alloc)
}

/// Binary slack expansion with an exact range, for windows whose width is not a power of two.
pub fn capped_binary_expansion(r: &LevelnessReport, alloc: &mut AncillaryAllocator) -> Result<SlackExpansion, ReductionError> {
    slack_expansion(&r.name, &r.expr, r.lo(), r.hi(), true, alloc)
}

/// `xy - 2xz - 2yz + 3z`: zero exactly when `z = xy`, at least one otherwise.
pub fn rosenberg(x: VarId, y: VarId, z: VarId) -> Polynomial {
    let mut p = Polynomial::monomial([x, y], rat(1));
    p.add_term([x, z], rat(-2));
    p.add_term([y, z], rat(-2));
    p.add_term([z], rat(3));
    p
}

/// Result of a degree reduction. `poly` is the final quadratic; minimizing it over `created`
/// gives back the input polynomial on every original point.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Quadratization {
    pub poly: Polynomial,
    /// Polynomial after substitution, before penalties are added.
    pub substituted: Polynomial,
    pub penalties: Vec<Polynomial>,
    /// `(a, b, z)` with `z` standing for `a*b`.
    pub substitutions: Vec<(VarId, VarId, VarId)>,
    pub weight: Rational,
    pub created: Vec<VarId>,
    pub steps: Vec<ReductionStep>,
}

fn most_frequent_pair(p: &Polynomial) -> Option<(VarId, VarId)> {
    let mut counts: BTreeMap<(VarId, VarId), usize> = BTreeMap::new();
    for (s, _) in p.terms().filter(|(s, _)| s.len() >= 3) {
        for a in 0..s.len() {
            for b in a + 1..s.len() {
                *counts.entry((s[a], s[b])).or_default() += 1;
            }
        }
    }
    let best = counts.values().copied().max()?;
    counts.into_iter().find(|(_, c)| *c == best).map(|(pair, _)| pair)
}

/// Replace pairs by fresh variables until the degree is at most two, adding `weight * R`
/// for each substitution. Without explicit pairs the most frequent pair in high-degree
/// monomials is taken (ties: lowest pair). Without an explicit weight the default is
/// `1 + sum |c|` over substituted terms that mention an ancillary, which is always enough.
pub fn rosenberg_quadratize(
    p: &Polynomial,
    pairs: Option<&[(VarId, VarId)]>,
    weight: Option<Rational>,
    alloc: &mut AncillaryAllocator,
    source: &str,
) -> Quadratization {
    let mut current = p.clone();
    let mut substitutions = Vec::new();
    let mut explicit = pairs.map(|ps| ps.iter().copied()).into_iter().flatten();
    while current.degree() > 2 {
        let pair = match explicit.next() {
            Some(pair) => pair,
            None => match most_frequent_pair(&current) {
                Some(pair) => pair,
                None => break,
            },
        };
        let z = alloc.fresh();
        current = current.substitute_pair(pair.0, pair.1, z, 3);
        substitutions.push((pair.0, pair.1, z));
    }
    let created: BTreeSet<VarId> = substitutions.iter().map(|s| s.2).collect();
    let weight = weight.unwrap_or_else(|| {
        let swing: Rational = current
            .terms()
            .filter(|(s, _)| s.iter().any(|v| created.contains(v)))
            .map(|(_, c)| c.abs())
            .sum();
        swing + rat(1)
    });
    let penalties: Vec<Polynomial> = substitutions.iter().map(|(a, b, z)| rosenberg(*a, *b, *z)).collect();
    let total: Polynomial = penalties.iter().cloned().sum();
    let poly = &current + &total.scale(&weight);
    let steps = substitutions
        .iter()
        .zip(&penalties)
        .map(|((a, b, z), pen)| {
            let mut s = ReductionStep::new(StepKind::Rosenberg, source)
                .param("pair", format!("{a}*{b}"))
                .param("weight", fmt_rational(&weight));
            s.created.push(*z);
            s.emitted.push(pen.clone());
            s
        })
        .collect();
    Quadratization {
        poly,
        substituted: current,
        penalties,
        substitutions: substitutions.clone(),
        weight,
        created: substitutions.iter().map(|s| s.2).collect(),
        steps,
    }
}

/// `-prod_I x = min_s -s (S1 - |I| + 1)`.
pub fn min_selection_negative(vars: &[VarId], s: VarId) -> Polynomial {
    let mut p = Polynomial::monomial([s], rat(vars.len() as i64 - 1));
    for v in vars {
        p.add_term([*v, s], rat(-1));
    }
    p
}

/// `prod_I x = min_s sum_i s_i (c_i (-S1 + 2i) - 1) + S2`, one ancillary per `i` in `1..=floor((|I|-1)/2)`.
pub fn min_selection_positive(vars: &[VarId], anc: &[VarId]) -> Polynomial {
    let d = vars.len();
    let n = (d - 1) / 2;
    assert_eq!(anc.len(), n, "positive monomial of degree {d} needs {n} ancillaries");
    let mut p = Polynomial::zero();
    for a in 0..d {
        for b in a + 1..d {
            p.add_term([vars[a], vars[b]], rat(1));
        }
    }
    for (idx, s) in anc.iter().enumerate() {
        let i = idx as i64 + 1;
        let c = if d % 2 == 1 && idx + 1 == n { 1 } else { 2 };
        for v in vars {
            p.add_term([*v, *s], rat(-c));
        }
        p.add_term([*s], rat(2 * c * i - 1));
    }
    p
}

/// Per-monomial quadratization of every term of degree at least three.
pub fn min_selection_quadratize(p: &Polynomial, alloc: &mut AncillaryAllocator, source: &str) -> Quadratization {
    let mut poly = Polynomial::constant(p.constant_term().clone());
    let mut created = Vec::new();
    let mut steps = Vec::new();
    for (vars, c) in p.terms() {
        if vars.len() <= 2 {
            poly.add_term(vars.iter().copied(), c.clone());
            continue;
        }
        let (piece, new, kind) = if c.is_negative() {
            let s = alloc.fresh();
            (min_selection_negative(vars, s).scale(&c.abs()), vec![s], StepKind::MinSelectionNegative)
        } else {
            let anc = alloc.fresh_n((vars.len() - 1) / 2);
            (min_selection_positive(vars, &anc).scale(c), anc, StepKind::MinSelectionPositive)
        };
        let mut step = ReductionStep::new(kind, source)
            .param("monomial", vars.iter().map(ToString::to_string).collect::<Vec<_>>().join("*"))
            .param("coefficient", fmt_rational(c));
        step.created = new.clone();
        step.emitted.push(piece.clone());
        steps.push(step);
        created.extend(new);
        poly = &poly + &piece;
    }
    Quadratization {
        substituted: poly.clone(),
        poly,
        penalties: Vec::new(),
        substitutions: Vec::new(),
        weight: rat(1),
        created,
        steps,
    }
}

/// Affine rescale of the window so its first two values become 0 and 1.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Normalized {
    pub h0: Polynomial,
    pub offset: Rational,
    pub step: Rational,
    pub values: Vec<Rational>,
}

pub fn normalize_h0(r: &LevelnessReport) -> Result<Normalized, ReductionError> {
    if r.k < 2 {
        return Err(ReductionError::WindowTooSmall { what: "normalization", name: r.name.clone(), needed: 2, found: r.k });
    }
    let window = r.window();
    let offset = window[0].clone();
    let step = &window[1] - &window[0];
    Ok(normalize_with(r, offset, step, window))
}

fn normalize_with(r: &LevelnessReport, offset: Rational, step: Rational, window: &[Rational]) -> Normalized {
    let inv = step.recip();
    let h0 = (&r.expr.to_polynomial() - &Polynomial::constant(offset.clone())).scale(&inv);
    let values = window.iter().map(|v| (v - &offset) * &inv).collect();
    Normalized { h0, offset, step, values }
}

/// Integer grid normalization: `h0 = (h - lo) / g` with `g` the coefficient gcd, values `0..=(hi-lo)/g`.
fn normalize_grid(r: &LevelnessReport) -> Normalized {
    let g = rational_gcd_all(r.expr.terms().map(|(_, c)| c));
    let top = ((r.hi() - r.lo()) / &g).to_integer().to_i64().expect("grid width fits i64");
    let grid: Vec<Rational> = (0..=top).map(|t| r.lo() + &g * rat(t)).collect();
    normalize_with(r, r.lo().clone(), g, &grid)
}

/// Level reduction output: one quadratic augmented penalty.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LevelReduction {
    /// Penalty after dividing out `r`.
    pub penalty: Polynomial,
    pub r: Rational,
    /// Unfactored pieces whose sum (or product form) gave the penalty.
    pub parts: Vec<Polynomial>,
    pub created: Vec<VarId>,
    pub normalized: Normalized,
    /// The exact window was replaced by the integer grid.
    pub grid: bool,
    pub steps: Vec<ReductionStep>,
}

fn pseudo_square(phi: &Polynomial) -> Polynomial {
    phi * &(phi - &Polynomial::constant(rat(1)))
}

/// Discrete level reduction: `phi1 (phi1 - 1) + phi2 (phi2 - 1)` with
/// `phi1 = h0 - sum_{i>=3} h0_i s_i` and `phi2 = h0 + sum_{i>=3} (1 - h0_i) s_i`.
/// Uses the exact window when `h0` is integral on the cube, otherwise the integer grid.
pub fn discrete_level_reduction(r: &LevelnessReport, alloc: &mut AncillaryAllocator) -> Result<LevelReduction, ReductionError> {
    if r.k < 3 {
        return Err(ReductionError::WindowTooSmall { what: "discrete level reduction", name: r.name.clone(), needed: 3, found: r.k });
    }
    let exact = normalize_h0(r)?;
    let g = rational_gcd_all(r.expr.terms().map(|(_, c)| c));
    let grid = exact.step != g;
    let normalized = if grid { normalize_grid(r) } else { exact };
    let created = alloc.fresh_n(normalized.values.len() - 2);
    let mut phi1 = normalized.h0.clone();
    let mut phi2 = normalized.h0.clone();
    for (s, v) in created.iter().zip(&normalized.values[2..]) {
        phi1.add_term([*s], -v.clone());
        phi2.add_term([*s], rat(1) - v);
    }
    let parts = vec![pseudo_square(&phi1), pseudo_square(&phi2)];
    let (penalty, factor) = multilinear_reduce(&(&parts[0] + &parts[1]), true);
    let mut step = ReductionStep::new(StepKind::DiscreteLevel, &r.name)
        .param("levels", normalized.values.len())
        .param("grid", grid)
        .param("r", fmt_rational(&factor));
    step.created = created.clone();
    step.emitted.push(penalty.clone());
    let norm_step = normalize_step(r, &normalized);
    Ok(LevelReduction { penalty, r: factor, parts, created, normalized, grid, steps: vec![norm_step, step] })
}

fn normalize_step(r: &LevelnessReport, n: &Normalized) -> ReductionStep {
    let mut s = ReductionStep::new(StepKind::Normalize, &r.name)
        .param("offset", fmt_rational(&n.offset))
        .param("step", fmt_rational(&n.step));
    s.emitted.push(n.h0.clone());
    s
}

/// Binary level reduction: `(phi3 - k + 1)(phi3 - k + 2)` with
/// `phi3 = h0 + sum_{j=1}^{n'-2} 2^j s_j + a s_{n'-1}` over the integer grid of width `k`.
pub fn binary_level_reduction(r: &LevelnessReport, alloc: &mut AncillaryAllocator) -> Result<LevelReduction, ReductionError> {
    let normalized = normalize_grid(r);
    let k = normalized.values.len();
    if k < 3 {
        return Err(ReductionError::WindowTooSmall { what: "binary level reduction", name: r.name.clone(), needed: 3, found: k });
    }
    let coefs = capped_binary_coefficients(k as u64);
    let created = alloc.fresh_n(coefs.len() - 1);
    let mut phi3 = normalized.h0.clone();
    for (s, c) in created.iter().zip(&coefs[1..]) {
        phi3.add_term([*s], rat(*c as i64));
    }
    let kk = rat(k as i64);
    let a = &phi3 - &Polynomial::constant(&kk - rat(1));
    let b = &phi3 - &Polynomial::constant(&kk - rat(2));
    let product = &a * &b;
    let (penalty, factor) = multilinear_reduce(&product, true);
    let mut step = ReductionStep::new(StepKind::BinaryLevel, &r.name)
        .param("k", k)
        .param("n_prime", coefs.len())
        .param("a", coefs.last().copied().unwrap_or(0))
        .param("r", fmt_rational(&factor));
    step.created = created.clone();
    step.emitted.push(penalty.clone());
    let grid = normalized.step != &r.window()[1] - &r.window()[0] || normalized.values.len() != r.k;
    let norm_step = normalize_step(r, &normalized);
    Ok(LevelReduction { penalty, r: factor, parts: vec![product], created, normalized, grid, steps: vec![norm_step, step] })
}

/// `min` over all assignments of `anc` of `p`, as a function of the remaining variables.
pub fn minimize_over(p: &Polynomial, anc: &[VarId], fixed: impl Fn(VarId) -> bool) -> Rational {
    assert!(anc.len() < 63, "too many ancillaries to enumerate");
    let mut best: Option<Rational> = None;
    for mask in 0u64..(1u64 << anc.len()) {
        let v = p.evaluate_with(|v| match anc.iter().position(|a| *a == v) {
            Some(pos) => mask >> pos & 1 == 1,
            None => fixed(v),
        });
        if best.as_ref().is_none_or(|b| &v < b) {
            best = Some(v);
        }
    }
    best.unwrap_or_else(Rational::zero)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levelness::refine_and_classify;

    fn x(i: u32) -> VarId {
        VarId::original(i)
    }

    fn report(terms: &[(u32, i64)], lo: Option<i64>, hi: Option<i64>) -> LevelnessReport {
        let e = LinearExpression::from_ints(terms.iter().map(|&(i, a)| (x(i), a)));
        refine_and_classify(&TwoSidedConstraint::new("c", e, lo.map(rat), hi.map(rat)).unwrap()).unwrap()
    }

    fn window() -> LevelnessReport {
        report(&[(1, 1), (2, 1), (3, -1), (4, -2)], Some(-1), Some(1))
    }

    #[test]
    fn discrete_expansion_examples() {
        let mut alloc = AncillaryAllocator::new();
        let e = discrete_expansion(&report(&[(1, 1), (2, 2), (3, -1)], Some(0), Some(2)), &mut alloc).unwrap();
        let s = &e.created;
        assert_eq!(e.equality.expr.coefficient(s[0]), rat(1));
        assert_eq!(e.equality.expr.coefficient(s[1]), rat(2));
        assert_eq!(e.equality.lo, Some(rat(2)));
        assert!(e.exclusion.is_some());

        let e2 = discrete_expansion(&report(&[(1, 1), (2, 1)], Some(0), Some(1)), &mut alloc).unwrap();
        assert_eq!(e2.created.len(), 1);
        assert!(e2.exclusion.is_none());
    }

    #[test]
    fn capped_coefficients() {
        assert_eq!(capped_binary_coefficients(3), vec![1, 1]);
        assert_eq!(capped_binary_coefficients(4), vec![1, 2]);
        assert_eq!(capped_binary_coefficients(6), vec![1, 2, 2]);
        for k in 1..40u64 {
            let c = capped_binary_coefficients(k);
            let sums: BTreeSet<u64> =
                (0..1u64 << c.len()).map(|m| (0..c.len()).filter(|j| m >> j & 1 == 1).map(|j| c[j]).sum()).collect();
            assert_eq!(sums, (0..k).collect::<BTreeSet<_>>(), "k={k}");
        }
    }

    #[test]
    fn binary_expansion_examples() {
        let mut alloc = AncillaryAllocator::new();
        let r = report(&[(1, 3), (3, -2)], None, Some(1));
        let e = binary_expansion(&r, &mut alloc).unwrap();
        assert_eq!(e.created.len(), 2);
        assert!(!e.relaxed);
        let coefs: Vec<Rational> = e.created.iter().map(|v| e.equality.expr.coefficient(*v)).collect();
        assert_eq!(coefs, vec![rat(1), rat(2)]);

        let r3 = report(&[(1, 1), (2, 1), (3, 1)], Some(0), Some(2));
        let e3 = binary_expansion(&r3, &mut alloc).unwrap();
        assert_eq!(e3.created.len(), 2);
        assert!(e3.relaxed);

        let frac = TwoSidedConstraint::new(
            "f",
            LinearExpression::from_terms([(x(1), crate::poly::ratio(1, 2)), (x(2), rat(1))]),
            Some(rat(0)),
            Some(rat(1)),
        )
        .unwrap();
        let err = binary_expansion(&refine_and_classify(&frac).unwrap(), &mut alloc).unwrap_err();
        assert!(matches!(err, ReductionError::NonInteger { .. }));
    }

    #[test]
    fn rosenberg_values() {
        let (a, b, z) = (x(0), x(1), x(2));
        let r = rosenberg(a, b, z);
        let at = |va: bool, vb: bool, vz: bool| r.evaluate_with(|v| if v == a { va } else if v == b { vb } else { vz });
        assert_eq!(at(true, true, false), rat(1));
        assert_eq!(at(true, true, true), rat(0));
        assert_eq!(at(false, false, true), rat(3));
    }

    #[test]
    fn min_selection_cubic_matches() {
        let vars = [x(1), x(2), x(3)];
        let s = VarId::ancillary(0);
        let pos = min_selection_positive(&vars, &[s]);
        let neg = min_selection_negative(&vars, s);
        for m in 0..8u32 {
            let val = |v: VarId| vars.iter().position(|w| *w == v).is_some_and(|p| m >> p & 1 == 1);
            let cube = if m == 7 { rat(1) } else { rat(0) };
            assert_eq!(minimize_over(&pos, &[s], val), cube);
            assert_eq!(minimize_over(&neg, &[s], val), -cube);
        }
    }

    #[test]
    fn normalization() {
        let n = normalize_h0(&window()).unwrap();
        assert_eq!(n.values, vec![rat(0), rat(1), rat(2)]);
        assert_eq!(n.h0.to_string(), "+1·x1 +1·x2 -1·x3 -2·x4 +1");
        let two = report(&[(1, 2), (2, 3)], Some(3), Some(5));
        let n2 = normalize_h0(&two).unwrap();
        assert_eq!(n2.values, vec![rat(0), rat(1)]);
        assert_eq!(n2.offset, rat(3));
        assert_eq!(n2.step, rat(2));
    }

    #[test]
    fn level_reductions_on_window_constraint() {
        let mut alloc = AncillaryAllocator::new();
        let d = discrete_level_reduction(&window(), &mut alloc).unwrap();
        assert_eq!(d.created.len(), 1);
        assert_eq!(d.r, rat(2));
        let b = binary_level_reduction(&window(), &mut alloc).unwrap();
        assert_eq!(b.created.len(), 1);
        assert_eq!(b.r, rat(2));
    }

    #[test]
    fn greedy_pair_choice() {
        let p = Polynomial::monomial([x(1), x(2), x(3)], rat(1));
        let mut alloc = AncillaryAllocator::new();
        let q = rosenberg_quadratize(&p, None, None, &mut alloc, "c");
        assert_eq!(q.substitutions, vec![(x(1), x(2), VarId::ancillary(0))]);
        assert_eq!(q.weight, rat(2));
        assert!(q.poly.degree() <= 2);
    }
}
