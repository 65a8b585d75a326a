//! Value sets, bound refinement, levelness classification and the compactness certificate.

use std::collections::BTreeSet;

use num_traits::{One, Signed, Zero};
use serde::Serialize;
use thiserror::Error;

use crate::model::{BlpModel, LinearExpression, TwoSidedConstraint};
use crate::poly::{Rational, VarId};

/// Supports above this size need integer coefficients for the value-set computation.
pub const DEFAULT_ENUMERATION_CAP: usize = 30;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LevelnessError {
    #[error("constraint {0} is infeasible over the cube")]
    Infeasible(String),
    #[error(
        "support of {size} variables with non-integer coefficients exceeds the enumeration cap {cap}; raise the cap to proceed"
    )]
    TooLarge { size: usize, cap: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sidedness {
    Equality,
    LowerOneSided,
    UpperOneSided,
    TwoSided,
    Vacuous,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LevelnessReport {
    pub name: String,
    pub expr: LinearExpression,
    /// Sorted achievable values `h_1 < ... < h_K`.
    pub values: Vec<Rational>,
    pub k: usize,
    /// 1-based index of the refined lower bound in `values`.
    pub i: usize,
    pub sidedness: Sidedness,
    pub support: BTreeSet<VarId>,
    pub plus: BTreeSet<VarId>,
    pub minus: BTreeSet<VarId>,
    /// All coefficients are +1 or -1.
    pub regular: bool,
}

impl LevelnessReport {
    pub fn big_k(&self) -> usize {
        self.values.len()
    }

    /// The feasible window `h_i..=h_{i+k-1}`.
    pub fn window(&self) -> &[Rational] {
        &self.values[self.i - 1..self.i - 1 + self.k]
    }

    pub fn lo(&self) -> &Rational {
        &self.values[self.i - 1]
    }

    pub fn hi(&self) -> &Rational {
        &self.values[self.i + self.k - 2]
    }

    /// Degree of the product penalty: one extra factor for an odd two-sided window.
    pub fn kappa(&self) -> usize {
        if self.sidedness == Sidedness::TwoSided && self.k % 2 == 1 {
            self.k + 1
        } else {
            self.k
        }
    }

    pub fn is_integral(&self) -> bool {
        self.expr.is_integral() && self.values.iter().all(|v| v.is_integer())
    }

    /// The constraint with refined bounds.
    pub fn refined_constraint(&self) -> TwoSidedConstraint {
        TwoSidedConstraint {
            name: self.name.clone(),
            expr: self.expr.clone(),
            lo: Some(self.lo().clone()),
            hi: Some(self.hi().clone()),
        }
    }
}

pub fn value_set(expr: &LinearExpression) -> Result<Vec<Rational>, LevelnessError> {
    value_set_with_cap(expr, DEFAULT_ENUMERATION_CAP)
}

/// Reachable subset sums of the coefficients. Integer data has a bounded number of sums,
/// so the cap only applies to non-integer coefficients.
pub fn value_set_with_cap(expr: &LinearExpression, cap: usize) -> Result<Vec<Rational>, LevelnessError> {
    if expr.len() > cap && !expr.is_integral() {
        return Err(LevelnessError::TooLarge { size: expr.len(), cap });
    }
    let mut sums: BTreeSet<Rational> = BTreeSet::from([Rational::zero()]);
    for (_, c) in expr.terms() {
        let shifted: Vec<Rational> = sums.iter().map(|s| s + c).collect();
        sums.extend(shifted);
    }
    Ok(sums.into_iter().collect())
}

pub fn refine_and_classify(c: &TwoSidedConstraint) -> Result<LevelnessReport, LevelnessError> {
    let values = value_set(&c.expr)?;
    let inside: Vec<usize> = values
        .iter()
        .enumerate()
        .filter(|(_, v)| c.holds_at(v))
        .map(|(idx, _)| idx)
        .collect();
    let (first, last) = match (inside.first(), inside.last()) {
        (Some(f), Some(l)) => (*f, *l),
        _ => return Err(LevelnessError::Infeasible(c.name.clone())),
    };
    let k = last - first + 1;
    let big_k = values.len();
    let sidedness = if k == big_k {
        Sidedness::Vacuous
    } else if c.is_equality() {
        Sidedness::Equality
    } else if first == 0 {
        Sidedness::UpperOneSided
    } else if last == big_k - 1 {
        Sidedness::LowerOneSided
    } else {
        Sidedness::TwoSided
    };
    let plus = c.expr.terms().filter(|(_, a)| a.is_positive()).map(|(v, _)| v).collect();
    let minus = c.expr.terms().filter(|(_, a)| a.is_negative()).map(|(v, _)| v).collect();
    let regular = c.expr.terms().all(|(_, a)| a.abs().is_one());
    Ok(LevelnessReport {
        name: c.name.clone(),
        expr: c.expr.clone(),
        values,
        k,
        i: first + 1,
        sidedness,
        support: c.expr.support(),
        plus,
        minus,
        regular,
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CertificateEntry {
    pub name: String,
    pub kappa: usize,
    pub support: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CompactCertificate {
    pub entries: Vec<CertificateEntry>,
    /// `None` when the model has no (non-vacuous) inequality constraints.
    pub kn: Option<usize>,
    pub compact_guaranteed: bool,
}

pub fn compact_certificate(m: &BlpModel) -> Result<CompactCertificate, LevelnessError> {
    let mut entries = Vec::new();
    for c in m.constraints.iter().filter(|c| !c.is_equality()) {
        let r = refine_and_classify(c)?;
        if r.sidedness == Sidedness::Vacuous {
            continue;
        }
        entries.push(CertificateEntry { name: r.name.clone(), kappa: r.kappa(), support: r.support.len() });
    }
    let kn = entries.iter().map(|e| e.kappa.min(e.support)).max();
    Ok(CompactCertificate { compact_guaranteed: kn.is_none_or(|k| k <= 2), kn, entries })
}
