//! Valid infeasible penalties: polynomials that vanish exactly on a constraint's feasible points.

use std::collections::BTreeSet;

use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;
use thiserror::Error;

use crate::levelness::{LevelnessReport, Sidedness};
use crate::model::TwoSidedConstraint;
use crate::poly::{fmt_rational, multilinear_reduce, product_of_roots, rat, Polynomial, Rational, VarId};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PenaltyError {
    #[error("{rule} needs {needed}, constraint {name} has {found}")]
    Precondition { rule: &'static str, name: String, needed: String, found: String },
    #[error("duplicate-root index {j} outside the window {lo}..={hi}")]
    RootOutOfRange { j: usize, lo: usize, hi: usize },
}

/// Which construction produced a penalty.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "rule", rename_all = "kebab-case")]
pub enum PenaltyRule {
    /// Constraint always holds; zero penalty.
    Vacuous,
    /// Product over an even-sized window.
    EvenProduct,
    /// Product over the lowest `k` values.
    UpperProduct,
    /// Signed product over the highest `k` values.
    LowerProduct,
    /// Odd window product with one root duplicated (1-based index into H).
    OddProduct { root: usize },
    /// Squared residual of an equality.
    EqualitySquare,
    /// Closed form for `j <= sum(I+) - sum(I-) <= j+1`.
    RegularTwoLevel { j: i64 },
    Conflict,
    Forcing,
    /// Known-penalty catalog row (1 to 4).
    Catalog { row: u8 },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PenaltyTerm {
    pub poly: Polynomial,
    pub source: String,
    pub rule: PenaltyRule,
    /// Common factor divided out of the raw construction.
    pub factored_r: Rational,
    pub ancillaries: Vec<VarId>,
}

impl PenaltyTerm {
    fn from_raw(raw: Polynomial, source: &str, rule: PenaltyRule) -> Self {
        let (poly, factored_r) = multilinear_reduce(&raw, true);
        PenaltyTerm { poly, source: source.to_string(), rule, factored_r, ancillaries: Vec::new() }
    }

    fn vacuous(source: &str) -> Self {
        PenaltyTerm {
            poly: Polynomial::zero(),
            source: source.to_string(),
            rule: PenaltyRule::Vacuous,
            factored_r: rat(1),
            ancillaries: Vec::new(),
        }
    }

    pub fn to_json(&self, name: impl Fn(VarId) -> String) -> serde_json::Value {
        serde_json::json!({
            "source": self.source,
            "rule": self.rule,
            "factored_r": fmt_rational(&self.factored_r),
            "penalty": self.poly.render(&name),
            "ancillaries": self.ancillaries.iter().map(|v| name(*v)).collect::<Vec<_>>(),
        })
    }
}

/// Which root of an odd window is squared.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum RootChoice {
    #[default]
    Median,
    /// 1-based index into H.
    Index(usize),
}

fn precondition(rule: &'static str, r: &LevelnessReport, needed: &str, found: String) -> PenaltyError {
    PenaltyError::Precondition { rule, name: r.name.clone(), needed: needed.to_string(), found }
}

pub fn vip_product_even(r: &LevelnessReport) -> Result<PenaltyTerm, PenaltyError> {
    if r.sidedness == Sidedness::Vacuous {
        return Ok(PenaltyTerm::vacuous(&r.name));
    }
    if !r.k.is_multiple_of(2) {
        return Err(precondition("even product", r, "even k", format!("k={}", r.k)));
    }
    let raw = product_of_roots(&r.expr.to_polynomial(), r.window());
    Ok(PenaltyTerm::from_raw(raw, &r.name, PenaltyRule::EvenProduct))
}

pub fn vip_one_sided_upper(r: &LevelnessReport) -> Result<PenaltyTerm, PenaltyError> {
    match r.sidedness {
        Sidedness::Vacuous => Ok(PenaltyTerm::vacuous(&r.name)),
        Sidedness::UpperOneSided => {
            let raw = product_of_roots(&r.expr.to_polynomial(), &r.values[..r.k]);
            Ok(PenaltyTerm::from_raw(raw, &r.name, PenaltyRule::UpperProduct))
        }
        other => Err(precondition("upper product", r, "an upper one-sided window", format!("{other:?}"))),
    }
}

pub fn vip_one_sided_lower(r: &LevelnessReport) -> Result<PenaltyTerm, PenaltyError> {
    match r.sidedness {
        Sidedness::Vacuous => Ok(PenaltyTerm::vacuous(&r.name)),
        Sidedness::LowerOneSided => {
            let big_k = r.big_k();
            let mut raw = product_of_roots(&r.expr.to_polynomial(), &r.values[big_k - r.k..]);
            if r.k % 2 == 1 {
                raw = -raw;
            }
            Ok(PenaltyTerm::from_raw(raw, &r.name, PenaltyRule::LowerProduct))
        }
        other => Err(precondition("lower product", r, "a lower one-sided window", format!("{other:?}"))),
    }
}

pub fn vip_product_odd(r: &LevelnessReport, root: RootChoice) -> Result<PenaltyTerm, PenaltyError> {
    if r.sidedness == Sidedness::Vacuous {
        return Ok(PenaltyTerm::vacuous(&r.name));
    }
    if r.k % 2 != 1 {
        return Err(precondition("odd product", r, "odd k", format!("k={}", r.k)));
    }
    let (lo, hi) = (r.i, r.i + r.k - 1);
    let j = match root {
        RootChoice::Median => r.i + (r.k - 1) / 2,
        RootChoice::Index(j) => j,
    };
    if j < lo || j > hi {
        return Err(PenaltyError::RootOutOfRange { j, lo, hi });
    }
    let mut roots = r.window().to_vec();
    roots.push(r.values[j - 1].clone());
    let raw = product_of_roots(&r.expr.to_polynomial(), &roots);
    Ok(PenaltyTerm::from_raw(raw, &r.name, PenaltyRule::OddProduct { root: j }))
}

/// `(h - b)^2` for `h = b`. Panics if the constraint is not an equality.
pub fn vip_equality(c: &TwoSidedConstraint) -> PenaltyTerm {
    assert!(c.is_equality(), "vip_equality needs lo = hi");
    let b = c.lo.clone().expect("equality has a bound");
    let residual = &c.expr.to_polynomial() - &Polynomial::constant(b);
    PenaltyTerm::from_raw(&residual * &residual, &c.name, PenaltyRule::EqualitySquare)
}

/// Closed form for the regular constraint `j <= sum(plus) - sum(minus) <= j + 1`.
pub fn vip_regular_2level(
    source: &str,
    j: i64,
    plus: &BTreeSet<VarId>,
    minus: &BTreeSet<VarId>,
) -> Result<PenaltyTerm, PenaltyError> {
    let (np, nm) = (plus.len() as i64, minus.len() as i64);
    if j < -nm || j > np - 1 {
        return Err(PenaltyError::Precondition {
            rule: "regular two-level form",
            name: source.to_string(),
            needed: format!("j in {}..={}", -nm, np - 1),
            found: format!("j={j}"),
        });
    }
    let mut p = Polynomial::constant(rat(j * (j + 1) / 2));
    let pairs = |set: &BTreeSet<VarId>| -> Vec<(VarId, VarId)> {
        let v: Vec<VarId> = set.iter().copied().collect();
        (0..v.len()).flat_map(|a| ((a + 1)..v.len()).map({ let v = v.clone(); move |b| (v[a], v[b]) })).collect()
    };
    for (a, b) in pairs(plus).into_iter().chain(pairs(minus)) {
        p.add_term([a, b], rat(1));
    }
    for a in plus {
        for b in minus {
            p.add_term([*a, *b], rat(-1));
        }
        p.add_term([*a], rat(-j));
    }
    for b in minus {
        p.add_term([*b], rat(j + 1));
    }
    Ok(PenaltyTerm {
        poly: p,
        source: source.to_string(),
        rule: PenaltyRule::RegularTwoLevel { j },
        factored_r: rat(1),
        ancillaries: Vec::new(),
    })
}

/// `sum_{i<j} x_i x_j`, the penalty for `sum x <= 1`.
pub fn vip_conflict(source: &str, vars: &BTreeSet<VarId>) -> Result<PenaltyTerm, PenaltyError> {
    if vars.len() < 2 {
        return Err(PenaltyError::Precondition {
            rule: "conflict",
            name: source.to_string(),
            needed: "at least 2 variables".into(),
            found: vars.len().to_string(),
        });
    }
    let term = vip_regular_2level(source, 0, vars, &BTreeSet::new())?;
    Ok(PenaltyTerm { rule: PenaltyRule::Conflict, ..term })
}

/// Penalty for `sum x >= |I| - 1`.
pub fn vip_forcing(source: &str, vars: &BTreeSet<VarId>) -> Result<PenaltyTerm, PenaltyError> {
    if vars.len() < 2 {
        return Err(PenaltyError::Precondition {
            rule: "forcing",
            name: source.to_string(),
            needed: "at least 2 variables".into(),
            found: vars.len().to_string(),
        });
    }
    let term = vip_regular_2level(source, vars.len() as i64 - 1, vars, &BTreeSet::new())?;
    Ok(PenaltyTerm { rule: PenaltyRule::Forcing, ..term })
}

/// Exact integer value of a rational, if it is one and fits.
fn as_i64(r: &Rational) -> Option<i64> {
    if r.is_integer() {
        r.to_integer().to_i64()
    } else {
        None
    }
}

/// Known compact penalties:
/// 1. `x_i + x_j <= 1` gives `x_i x_j`
/// 2. `x_i + x_j >= 1` gives `1 - x_i - x_j + x_i x_j`
/// 3. `x_i <= x_j` gives `x_i - x_i x_j`
/// 4. `x_i + x_j + x_k <= 1` gives the sum of pairs
pub fn catalog_lookup(r: &LevelnessReport) -> Option<PenaltyTerm> {
    if !r.regular || r.k != 2 {
        return None;
    }
    let lo = as_i64(r.lo())?;
    let row = match (r.plus.len(), r.minus.len(), lo, r.sidedness) {
        (2, 0, 0, Sidedness::UpperOneSided) => 1,
        (2, 0, 1, Sidedness::LowerOneSided) => 2,
        (1, 1, -1, Sidedness::UpperOneSided) => 3,
        (3, 0, 0, Sidedness::UpperOneSided) => 4,
        _ => return None,
    };
    let mut p = Polynomial::zero();
    let plus: Vec<VarId> = r.plus.iter().copied().collect();
    match row {
        1 => p.add_term([plus[0], plus[1]], rat(1)),
        2 => {
            p = Polynomial::constant(rat(1));
            p.add_term([plus[0]], rat(-1));
            p.add_term([plus[1]], rat(-1));
            p.add_term([plus[0], plus[1]], rat(1));
        }
        3 => {
            let xj = *r.minus.iter().next()?;
            p.add_term([plus[0]], rat(1));
            p.add_term([plus[0], xj], rat(-1));
        }
        _ => {
            for a in 0..3 {
                for b in a + 1..3 {
                    p.add_term([plus[a], plus[b]], rat(1));
                }
            }
        }
    }
    Some(PenaltyTerm {
        poly: p,
        source: r.name.clone(),
        rule: PenaltyRule::Catalog { row },
        factored_r: rat(1),
        ancillaries: Vec::new(),
    })
}

/// Regular constraint of levelness 2: returns its `j` (the refined lower bound).
pub fn regular_two_level_j(r: &LevelnessReport) -> Option<i64> {
    if r.regular && r.k == 2 {
        as_i64(r.lo())
    } else {
        None
    }
}

/// Pick the cheapest applicable construction: catalog, regular closed form, even product,
/// one-sided product, odd product. Equalities are squared.
pub fn synthesize(r: &LevelnessReport, root: RootChoice) -> Result<PenaltyTerm, PenaltyError> {
    if r.sidedness == Sidedness::Vacuous {
        return Ok(PenaltyTerm::vacuous(&r.name));
    }
    if r.sidedness == Sidedness::Equality {
        return Ok(vip_equality(&r.refined_constraint()));
    }
    if let Some(t) = catalog_lookup(r) {
        return Ok(t);
    }
    if let Some(j) = regular_two_level_j(r) {
        return vip_regular_2level(&r.name, j, &r.plus, &r.minus);
    }
    if r.k.is_multiple_of(2) {
        return vip_product_even(r);
    }
    match r.sidedness {
        Sidedness::UpperOneSided => vip_one_sided_upper(r),
        Sidedness::LowerOneSided => vip_one_sided_lower(r),
        _ => vip_product_odd(r, root),
    }
}

/// True when every coefficient, including the constant, is an integer.
pub fn has_integer_coefficients(p: &Polynomial) -> bool {
    p.constant_term().is_integer() && p.terms().all(|(_, c)| c.is_integer())
}

/// Smallest positive coefficient magnitude, or one for the zero polynomial.
pub fn min_abs_coefficient(p: &Polynomial) -> Rational {
    p.terms()
        .map(|(_, c)| c.abs())
        .chain((!p.constant_term().is_zero()).then(|| p.constant_term().abs()))
        .min()
        .unwrap_or_else(Rational::one)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levelness::refine_and_classify;
    use crate::model::LinearExpression;

    fn x(i: u32) -> VarId {
        VarId::original(i)
    }

    fn report(terms: &[(u32, i64)], lo: Option<i64>, hi: Option<i64>) -> LevelnessReport {
        let e = LinearExpression::from_ints(terms.iter().map(|&(i, a)| (x(i), a)));
        refine_and_classify(&TwoSidedConstraint::new("c", e, lo.map(rat), hi.map(rat)).unwrap()).unwrap()
    }

    fn set(ids: &[u32]) -> BTreeSet<VarId> {
        ids.iter().map(|&i| x(i)).collect()
    }

    #[test]
    fn blp1_penalties() {
        let p2 = vip_product_even(&report(&[(1, 2), (2, 2), (3, -1)], Some(1), Some(2))).unwrap();
        assert_eq!(p2.factored_r, rat(2));
        assert_eq!(p2.poly.to_string(), "+4·x1*x2 -2·x1*x3 -2·x2*x3 -1·x1 -1·x2 +2·x3 +1");

        let p1 = vip_product_odd(&report(&[(1, 1), (2, 2), (3, -1)], Some(0), Some(2)), RootChoice::Median).unwrap();
        assert_eq!(p1.factored_r, rat(12));
        assert_eq!(p1.poly.to_string(), "+1·x1*x2 -1·x1*x3 -1·x2*x3 +1·x3");

        let p3 = vip_one_sided_upper(&report(&[(1, 3), (3, -2)], None, Some(1))).unwrap();
        assert_eq!(p3.factored_r, rat(30));
        assert_eq!(p3.poly.to_string(), "-1·x1*x3 +1·x1");
    }

    #[test]
    fn even_product_small() {
        let t = vip_product_even(&report(&[(1, 1), (2, -1)], Some(0), Some(1))).unwrap();
        assert_eq!(t.factored_r, rat(2));
        assert_eq!(t.poly.to_string(), "-1·x1*x2 +1·x2");
        let vac = vip_product_even(&report(&[(1, 1)], Some(0), Some(1))).unwrap();
        assert!(vac.poly.is_zero());
    }

    #[test]
    fn odd_product_window_constraint() {
        let r = report(&[(1, 1), (2, 1), (3, -1), (4, -2)], Some(-1), Some(1));
        let t = vip_product_odd(&r, RootChoice::Median).unwrap();
        assert_eq!(t.rule, PenaltyRule::OddProduct { root: 4 });
        assert_eq!(
            t.poly.to_string(),
            "+4·x1*x2*x3*x4 -1·x1*x2*x3 -4·x1*x3*x4 -4·x2*x3*x4 +1·x1*x2 -1·x1*x4 -1·x2*x4 +5·x3*x4 +1·x4"
        );
        assert!(matches!(
            vip_product_odd(&r, RootChoice::Index(6)),
            Err(PenaltyError::RootOutOfRange { j: 6, lo: 3, hi: 5 })
        ));
    }

    #[test]
    fn equality_squares() {
        let e = LinearExpression::from_ints([(x(1), 1), (x(2), 1), (x(3), 1)]);
        let t = vip_equality(&TwoSidedConstraint::equality("v", e, rat(1)));
        assert_eq!(t.poly.to_string(), "+2·x1*x2 +2·x1*x3 +2·x2*x3 -1·x1 -1·x2 -1·x3 +1");
        let single = vip_equality(&TwoSidedConstraint::equality("u", LinearExpression::from_ints([(x(1), 1)]), rat(1)));
        assert_eq!(single.poly.to_string(), "-1·x1 +1");
    }

    #[test]
    fn regular_closed_forms() {
        let lop = vip_regular_2level("t", 0, &set(&[1, 2]), &set(&[3])).unwrap();
        assert_eq!(lop.poly.to_string(), "+1·x1*x2 -1·x1*x3 -1·x2*x3 +1·x3");
        let c3 = vip_regular_2level("t", -1, &set(&[1]), &set(&[2])).unwrap();
        assert_eq!(c3.poly.to_string(), "-1·x1*x2 +1·x1");
        assert!(vip_regular_2level("t", 2, &set(&[1, 2]), &set(&[])).is_err());
    }

    #[test]
    fn conflict_and_forcing() {
        assert_eq!(vip_conflict("c", &set(&[1, 2, 3])).unwrap().poly.to_string(), "+1·x1*x2 +1·x1*x3 +1·x2*x3");
        assert_eq!(vip_forcing("f", &set(&[1, 2])).unwrap().poly.to_string(), "+1·x1*x2 -1·x1 -1·x2 +1");
        let f3 = vip_forcing("f", &set(&[1, 2, 3])).unwrap();
        assert_eq!(f3.poly.evaluate_with(|v| v == x(1)), rat(1));
        assert_eq!(f3.poly.evaluate_with(|v| v != x(1)), rat(0));
        assert!(vip_conflict("c", &set(&[1])).is_err());
    }

    #[test]
    fn catalog_rows() {
        let t = catalog_lookup(&report(&[(1, 1), (2, 1)], None, Some(1))).unwrap();
        assert_eq!((t.rule, t.poly.to_string()), (PenaltyRule::Catalog { row: 1 }, "+1·x1*x2".to_string()));
        let t = catalog_lookup(&report(&[(1, 1), (2, -1)], None, Some(0))).unwrap();
        assert_eq!(t.poly.to_string(), "-1·x1*x2 +1·x1");
        assert!(catalog_lookup(&report(&[(1, 1), (2, 1), (3, 1)], None, Some(2))).is_none());
    }

    #[test]
    fn dispatch_prefers_catalog() {
        let t = synthesize(&report(&[(1, 1), (2, 1)], Some(1), None), RootChoice::Median).unwrap();
        assert_eq!(t.rule, PenaltyRule::Catalog { row: 2 });
        let t = synthesize(&report(&[(1, 1), (2, 1), (3, -1)], Some(0), Some(1)), RootChoice::Median).unwrap();
        assert_eq!(t.rule, PenaltyRule::RegularTwoLevel { j: 0 });
        let t = synthesize(&report(&[(1, 1), (2, 1), (3, 1)], Some(0), Some(2)), RootChoice::Median).unwrap();
        assert_eq!(t.rule, PenaltyRule::UpperProduct);
    }
}
