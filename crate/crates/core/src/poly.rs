//! Exact multilinear pseudo-Boolean polynomials and their lowering to QUBO form.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Rational = num_rational::BigRational;

/// Shorthand for an integer-valued rational.
pub fn rat(v: i64) -> Rational {
    Rational::from_integer(BigInt::from(v))
}

/// Shorthand for `num / den`.
pub fn ratio(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

/// Positive gcd of two rationals: the largest `g` with `a/g` and `b/g` both integers.
pub fn rational_gcd(a: &Rational, b: &Rational) -> Rational {
    if a.is_zero() {
        return b.abs();
    }
    if b.is_zero() {
        return a.abs();
    }
    let num = (a.numer() * b.denom()).gcd(&(b.numer() * a.denom()));
    Rational::new(num, a.denom() * b.denom())
}

/// Gcd over an iterator of rationals; zero when every input is zero.
pub fn rational_gcd_all<'a>(values: impl IntoIterator<Item = &'a Rational>) -> Rational {
    values
        .into_iter()
        .fold(Rational::zero(), |acc, v| rational_gcd(&acc, v))
}

/// Least common multiple of the denominators.
pub fn common_denominator<'a>(values: impl IntoIterator<Item = &'a Rational>) -> BigInt {
    values
        .into_iter()
        .fold(BigInt::one(), |acc, v| acc.lcm(v.denom()))
}

/// Render a rational as `p` or `p/q`.
pub fn fmt_rational(r: &Rational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Parse `p`, `p/q` or a finite decimal such as `-1.25` or `2e-3` into an exact rational.
pub fn parse_rational(text: &str) -> Option<Rational> {
    let t = text.trim();
    if let Some((n, d)) = t.split_once('/') {
        let n: BigInt = n.trim().parse().ok()?;
        let d: BigInt = d.trim().parse().ok()?;
        if d.is_zero() {
            return None;
        }
        return Some(Rational::new(n, d));
    }
    let (mantissa, exp) = match t.find(['e', 'E']) {
        Some(pos) => (&t[..pos], t[pos + 1..].parse::<i32>().ok()?),
        None => (t, 0),
    };
    let (neg, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let all: BigInt = format!("{int_part}{frac_part}0").parse().ok()?;
    let mut value = Rational::new(all, BigInt::from(10u8).pow(frac_part.len() as u32 + 1));
    let ten = rat(10);
    for _ in 0..exp.unsigned_abs() {
        value = if exp > 0 { value * &ten } else { value / &ten };
    }
    Some(if neg { -value } else { value })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VarKind {
    Original,
    Ancillary,
}

/// A binary variable. Originals sort before ancillaries.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VarId {
    pub kind: VarKind,
    pub index: u32,
}

impl VarId {
    pub const fn original(index: u32) -> Self {
        VarId { kind: VarKind::Original, index }
    }

    pub const fn ancillary(index: u32) -> Self {
        VarId { kind: VarKind::Ancillary, index }
    }

    pub fn is_ancillary(&self) -> bool {
        self.kind == VarKind::Ancillary
    }
}

impl fmt::Display for VarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            VarKind::Original => write!(f, "x{}", self.index),
            VarKind::Ancillary => write!(f, "s{}", self.index),
        }
    }
}

/// Sorted, duplicate-free variable set. Orders by descending degree, then lexicographically.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Support(Vec<VarId>);

impl Support {
    pub fn new(vars: impl IntoIterator<Item = VarId>) -> Self {
        let set: BTreeSet<VarId> = vars.into_iter().collect();
        Support(set.into_iter().collect())
    }

    pub fn vars(&self) -> &[VarId] {
        &self.0
    }

    pub fn degree(&self) -> usize {
        self.0.len()
    }

    pub fn contains(&self, v: VarId) -> bool {
        self.0.binary_search(&v).is_ok()
    }

    fn union(&self, other: &Support) -> Support {
        let mut out = Vec::with_capacity(self.0.len() + other.0.len());
        let (mut i, mut j) = (0, 0);
        while i < self.0.len() && j < other.0.len() {
            match self.0[i].cmp(&other.0[j]) {
                Ordering::Less => {
                    out.push(self.0[i]);
                    i += 1;
                }
                Ordering::Greater => {
                    out.push(other.0[j]);
                    j += 1;
                }
                Ordering::Equal => {
                    out.push(self.0[i]);
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&self.0[i..]);
        out.extend_from_slice(&other.0[j..]);
        Support(out)
    }
}

impl Ord for Support {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.len().cmp(&self.0.len()).then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for Support {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Monomial {
    pub coefficient: Rational,
    pub support: Vec<VarId>,
}

pub type Assignment = BTreeMap<VarId, bool>;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PolyError {
    #[error("assignment is missing variable {0}")]
    MissingVariable(VarId),
    #[error("degree above 2 cannot be lowered to QUBO: {}", .0.join(", "))]
    DegreeTooHigh(Vec<String>),
    #[error("variable {0} is not in the QUBO variable order")]
    UnknownVariable(VarId),
}

/// Multilinear polynomial with exact coefficients. Products apply `x*x = x` eagerly,
/// so every value is already multilinear and canonical.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Polynomial {
    terms: BTreeMap<Support, Rational>,
    constant: Rational,
}

impl Polynomial {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: Rational) -> Self {
        Polynomial { terms: BTreeMap::new(), constant: c }
    }

    pub fn var(v: VarId) -> Self {
        let mut p = Self::zero();
        p.add_term([v], rat(1));
        p
    }

    /// `c * prod(vars)`; an empty product is the constant `c`.
    pub fn monomial(vars: impl IntoIterator<Item = VarId>, c: Rational) -> Self {
        let mut p = Self::zero();
        p.add_term(vars, c);
        p
    }

    /// `c + sum a_i x_i`.
    pub fn affine(terms: impl IntoIterator<Item = (VarId, Rational)>, c: Rational) -> Self {
        let mut p = Self::constant(c);
        for (v, a) in terms {
            p.add_term([v], a);
        }
        p
    }

    pub fn add_term(&mut self, vars: impl IntoIterator<Item = VarId>, c: Rational) {
        let support = Support::new(vars);
        self.add_support(support, c);
    }

    fn add_support(&mut self, support: Support, c: Rational) {
        if c.is_zero() {
            return;
        }
        if support.degree() == 0 {
            self.constant += c;
            return;
        }
        match self.terms.entry(support) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                *e.get_mut() += c;
                if e.get().is_zero() {
                    e.remove();
                }
            }
        }
    }

    pub fn constant_term(&self) -> &Rational {
        &self.constant
    }

    /// Non-constant terms in canonical order.
    pub fn terms(&self) -> impl Iterator<Item = (&[VarId], &Rational)> {
        self.terms.iter().map(|(s, c)| (s.vars(), c))
    }

    pub fn monomials(&self) -> Vec<Monomial> {
        self.terms()
            .map(|(s, c)| Monomial { coefficient: c.clone(), support: s.to_vec() })
            .collect()
    }

    pub fn coefficient(&self, vars: &[VarId]) -> Rational {
        if vars.is_empty() {
            return self.constant.clone();
        }
        self.terms
            .get(&Support::new(vars.iter().copied()))
            .cloned()
            .unwrap_or_else(Rational::zero)
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty() && self.constant.is_zero()
    }

    pub fn degree(&self) -> usize {
        self.terms.keys().next().map_or(0, Support::degree)
    }

    pub fn support(&self) -> BTreeSet<VarId> {
        self.terms.keys().flat_map(|s| s.vars().iter().copied()).collect()
    }

    pub fn scale(&self, c: &Rational) -> Polynomial {
        if c.is_zero() {
            return Self::zero();
        }
        Polynomial {
            terms: self.terms.iter().map(|(s, v)| (s.clone(), v * c)).collect(),
            constant: &self.constant * c,
        }
    }

    /// Replace every occurrence of the pair `a*b` by `z` inside monomials of degree at least `min_degree`.
    pub fn substitute_pair(&self, a: VarId, b: VarId, z: VarId, min_degree: usize) -> Polynomial {
        let mut out = Polynomial::constant(self.constant.clone());
        for (s, c) in &self.terms {
            if s.degree() >= min_degree && s.contains(a) && s.contains(b) {
                let vars = s.vars().iter().copied().filter(|v| *v != a && *v != b);
                out.add_term(vars.chain([z]), c.clone());
            } else {
                out.add_support(s.clone(), c.clone());
            }
        }
        out
    }

    pub fn evaluate(&self, a: &Assignment) -> Result<Rational, PolyError> {
        for s in self.terms.keys() {
            for v in s.vars() {
                if !a.contains_key(v) {
                    return Err(PolyError::MissingVariable(*v));
                }
            }
        }
        Ok(self.evaluate_with(|v| a[&v]))
    }

    pub fn evaluate_with(&self, value: impl Fn(VarId) -> bool) -> Rational {
        let mut total = self.constant.clone();
        for (s, c) in &self.terms {
            if s.vars().iter().all(|v| value(*v)) {
                total += c;
            }
        }
        total
    }

    /// Substitute constants for some variables.
    pub fn restrict(&self, fixed: &Assignment) -> Polynomial {
        let mut out = Polynomial::constant(self.constant.clone());
        for (s, c) in &self.terms {
            let mut rest = Vec::new();
            let mut alive = true;
            for v in s.vars() {
                match fixed.get(v) {
                    Some(true) => {}
                    Some(false) => {
                        alive = false;
                        break;
                    }
                    None => rest.push(*v),
                }
            }
            if alive {
                out.add_term(rest, c.clone());
            }
        }
        out
    }

    pub fn max_abs_coefficient(&self) -> Rational {
        self.terms
            .values()
            .map(Signed::abs)
            .max()
            .unwrap_or_else(Rational::zero)
    }

    pub fn to_qubo(&self) -> Result<QuboModel, PolyError> {
        let vars: Vec<VarId> = self.support().into_iter().collect();
        let names = vars.iter().map(ToString::to_string).collect();
        self.to_qubo_over(&vars, names)
    }

    /// Lower to QUBO over an explicit variable order (which may include variables absent from the polynomial).
    pub fn to_qubo_over(&self, vars: &[VarId], names: Vec<String>) -> Result<QuboModel, PolyError> {
        let high: Vec<String> = self
            .terms
            .keys()
            .filter(|s| s.degree() > 2)
            .map(|s| s.vars().iter().map(ToString::to_string).collect::<Vec<_>>().join("*"))
            .collect();
        if !high.is_empty() {
            return Err(PolyError::DegreeTooHigh(high));
        }
        let index: BTreeMap<VarId, usize> = vars.iter().enumerate().map(|(i, v)| (*v, i)).collect();
        let lookup = |v: &VarId| index.get(v).copied().ok_or(PolyError::UnknownVariable(*v));
        let mut coefficients = BTreeMap::new();
        for (s, c) in &self.terms {
            let key = match s.vars() {
                [v] => {
                    let i = lookup(v)?;
                    (i, i)
                }
                [u, v] => {
                    let (i, j) = (lookup(u)?, lookup(v)?);
                    (i.min(j), i.max(j))
                }
                _ => unreachable!("degree checked above"),
            };
            coefficients.insert(key, c.clone());
        }
        Ok(QuboModel {
            dimension: vars.len(),
            coefficients,
            constant: self.constant.clone(),
            variables: vars.to_vec(),
            decode: names,
        })
    }
}

/// Reduce to multilinear form and optionally divide out the positive gcd of all coefficients
/// (constant included). Returns the reduced polynomial and the factor `r`.
pub fn multilinear_reduce(p: &Polynomial, factor_out: bool) -> (Polynomial, Rational) {
    if !factor_out || p.is_zero() {
        return (p.clone(), rat(1));
    }
    let g = rational_gcd_all(p.terms.values().chain([&p.constant]));
    let inv = g.recip();
    (p.scale(&inv), g)
}

/// `prod (h - root)` over the given roots.
pub fn product_of_roots(h: &Polynomial, roots: &[Rational]) -> Polynomial {
    roots.iter().fold(Polynomial::constant(rat(1)), |acc, root| {
        &acc * &(h - &Polynomial::constant(root.clone()))
    })
}

impl Polynomial {
    /// Text form with custom variable names, e.g. `+3·a*b -1·a +5`.
    pub fn render(&self, name: impl Fn(VarId) -> String) -> String {
        if self.is_zero() {
            return "0".to_string();
        }
        let mut parts = Vec::new();
        for (s, c) in &self.terms {
            let sign = if c.is_negative() { '-' } else { '+' };
            let vars: Vec<String> = s.vars().iter().map(|v| name(*v)).collect();
            parts.push(format!("{sign}{}·{}", fmt_rational(&c.abs()), vars.join("*")));
        }
        if !self.constant.is_zero() {
            let sign = if self.constant.is_negative() { '-' } else { '+' };
            parts.push(format!("{sign}{}", fmt_rational(&self.constant.abs())));
        }
        parts.join(" ")
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.render(|v| v.to_string()))
    }
}

impl Add for &Polynomial {
    type Output = Polynomial;
    fn add(self, rhs: &Polynomial) -> Polynomial {
        let mut out = self.clone();
        for (s, c) in &rhs.terms {
            out.add_support(s.clone(), c.clone());
        }
        out.constant += &rhs.constant;
        out
    }
}

impl Sub for &Polynomial {
    type Output = Polynomial;
    fn sub(self, rhs: &Polynomial) -> Polynomial {
        self + &(-rhs)
    }
}

impl Neg for &Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        self.scale(&rat(-1))
    }
}

impl Mul for &Polynomial {
    type Output = Polynomial;
    fn mul(self, rhs: &Polynomial) -> Polynomial {
        let mut out = Polynomial::constant(&self.constant * &rhs.constant);
        for (s, c) in &self.terms {
            if !rhs.constant.is_zero() {
                out.add_support(s.clone(), c * &rhs.constant);
            }
            for (t, d) in &rhs.terms {
                out.add_support(s.union(t), c * d);
            }
        }
        if !self.constant.is_zero() {
            for (t, d) in &rhs.terms {
                out.add_support(t.clone(), &self.constant * d);
            }
        }
        out
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl $tr for Polynomial {
            type Output = Polynomial;
            fn $m(self, rhs: Polynomial) -> Polynomial {
                (&self).$m(&rhs)
            }
        }
        impl $tr<&Polynomial> for Polynomial {
            type Output = Polynomial;
            fn $m(self, rhs: &Polynomial) -> Polynomial {
                (&self).$m(rhs)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

impl Neg for Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        -&self
    }
}

impl std::iter::Sum for Polynomial {
    fn sum<I: Iterator<Item = Polynomial>>(iter: I) -> Polynomial {
        iter.fold(Polynomial::zero(), |acc, p| &acc + &p)
    }
}

/// `x^T Q x + c` with `Q` upper triangular; diagonal entries are linear terms.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QuboModel {
    pub dimension: usize,
    pub coefficients: BTreeMap<(usize, usize), Rational>,
    pub constant: Rational,
    /// Source variable per index.
    pub variables: Vec<VarId>,
    /// Human-readable name per index.
    pub decode: Vec<String>,
}

impl QuboModel {
    pub fn evaluate(&self, x: &[bool]) -> Rational {
        let mut total = self.constant.clone();
        for ((i, j), c) in &self.coefficients {
            if x[*i] && x[*j] {
                total += c;
            }
        }
        total
    }

    pub fn to_polynomial(&self) -> Polynomial {
        let mut p = Polynomial::constant(self.constant.clone());
        for ((i, j), c) in &self.coefficients {
            p.add_term([self.variables[*i], self.variables[*j]], c.clone());
        }
        p
    }

    pub fn max_abs_entry(&self) -> Rational {
        self.coefficients
            .values()
            .map(Signed::abs)
            .max()
            .unwrap_or_else(Rational::zero)
    }
}

/// Polynomial compiled to integer arithmetic over bitmask assignments, for fast exhaustive scans.
/// Values are `scale` times the true values.
#[derive(Clone, Debug)]
pub struct ScaledPolynomial {
    pub terms: Vec<(u64, i128)>,
    pub constant: i128,
    pub scale: BigInt,
}

impl ScaledPolynomial {
    /// `bit_of` maps each variable to its bit position. Panics if a variable is missing or the
    /// scaled coefficients overflow `i128`, both of which are caller bugs at the sizes we scan.
    pub fn compile(p: &Polynomial, bit_of: &BTreeMap<VarId, u32>) -> Self {
        let scale = common_denominator(p.terms.values().chain([&p.constant]));
        let to_int = |c: &Rational| -> i128 {
            (c * Rational::from_integer(scale.clone()))
                .to_integer()
                .to_i128()
                .expect("scaled coefficient overflows i128")
        };
        let terms = p
            .terms
            .iter()
            .map(|(s, c)| {
                let mask = s.vars().iter().fold(0u64, |m, v| m | (1u64 << bit_of[v]));
                (mask, to_int(c))
            })
            .collect();
        ScaledPolynomial { terms, constant: to_int(&p.constant), scale }
    }

    pub fn eval(&self, mask: u64) -> i128 {
        let mut total = self.constant;
        for (m, c) in &self.terms {
            if mask & m == *m {
                total += c;
            }
        }
        total
    }

    pub fn unscale(&self, v: i128) -> Rational {
        Rational::new(BigInt::from(v), self.scale.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x(i: u32) -> Polynomial {
        Polynomial::var(VarId::original(i))
    }

    fn c(v: i64) -> Polynomial {
        Polynomial::constant(rat(v))
    }

    #[test]
    fn square_reduces_to_zero() {
        let p = &(&x(1) * &x(1)) - &x(1);
        let (q, r) = multilinear_reduce(&p, false);
        assert!(q.is_zero());
        assert_eq!(r, rat(1));
    }

    #[test]
    fn golden_factored_products() {
        let h = &(&x(1) + &x(2).scale(&rat(2))) - &x(3);
        let p = product_of_roots(&h, &[rat(0), rat(1), rat(1), rat(2)]);
        let (q, r) = multilinear_reduce(&p, true);
        assert_eq!(r, rat(12));
        assert_eq!(q.to_string(), "+1·x1*x2 -1·x1*x3 -1·x2*x3 +1·x3");

        let h2 = &(&x(1).scale(&rat(2)) + &x(2).scale(&rat(2))) - &x(3);
        let (q2, r2) = multilinear_reduce(&product_of_roots(&h2, &[rat(1), rat(2)]), true);
        assert_eq!(r2, rat(2));
        assert_eq!(q2.to_string(), "+4·x1*x2 -2·x1*x3 -2·x2*x3 -1·x1 -1·x2 +2·x3 +1");
    }

    #[test]
    fn evaluation_and_missing_variable() {
        let p1 = &(&(&(&x(1) * &x(2)) - &(&x(1) * &x(3))) - &(&x(2) * &x(3))) + &x(3);
        let a: Assignment = [(0, false), (1, false), (2, true)]
            .into_iter()
            .map(|(i, b)| (VarId::original(i + 1), b))
            .collect();
        assert_eq!(p1.evaluate(&a).unwrap(), rat(1));
        let partial: Assignment = [(VarId::original(1), true)].into_iter().collect();
        assert_eq!(p1.evaluate(&partial), Err(PolyError::MissingVariable(VarId::original(2))));
        assert_eq!(c(7).evaluate(&Assignment::new()).unwrap(), rat(7));
    }

    #[test]
    fn qubo_lowering() {
        let p = &(&(&x(0) * &x(1)).scale(&rat(3)) - &x(0)) + &c(5);
        let q = p.to_qubo().unwrap();
        assert_eq!(q.coefficients[&(0, 1)], rat(3));
        assert_eq!(q.coefficients[&(0, 0)], rat(-1));
        assert_eq!(q.constant, rat(5));
        assert_eq!(p.to_string(), "+3·x0*x1 -1·x0 +5");

        let cubic = &(&x(0) * &x(1)) * &x(2);
        assert_eq!(cubic.to_qubo(), Err(PolyError::DegreeTooHigh(vec!["x0*x1*x2".into()])));

        let empty = Polynomial::zero().to_qubo().unwrap();
        assert_eq!(empty.dimension, 0);
        assert_eq!(empty.constant, rat(0));
    }

    #[test]
    fn composition() {
        let s = &x(1) + &x(2);
        let sq = &s * &s;
        assert_eq!(sq, &(&x(1) + &x(2)) + &(&x(1) * &x(2)).scale(&rat(2)));
        assert!((&sq + &(-&sq)).is_zero());
        assert_eq!(sq.scale(&rat(4)).coefficient(&[VarId::original(1), VarId::original(2)]), rat(8));
    }

    #[test]
    fn rational_helpers() {
        assert_eq!(rational_gcd(&ratio(1, 2), &ratio(3, 4)), ratio(1, 4));
        assert_eq!(rational_gcd(&rat(-6), &rat(4)), rat(2));
        assert_eq!(parse_rational("-1.25"), Some(ratio(-5, 4)));
        assert_eq!(parse_rational("3/6"), Some(ratio(1, 2)));
        assert_eq!(parse_rational("2e-3"), Some(ratio(1, 500)));
        assert_eq!(parse_rational("12"), Some(rat(12)));
        assert_eq!(parse_rational("x"), None);
        assert_eq!(fmt_rational(&ratio(-3, 2)), "-3/2");
    }

    #[test]
    fn scaled_matches_exact() {
        let p = &(&x(0) * &x(1)).scale(&ratio(1, 3)) - &c(2);
        let bits: BTreeMap<VarId, u32> = [(VarId::original(0), 0), (VarId::original(1), 1)].into();
        let sp = ScaledPolynomial::compile(&p, &bits);
        assert_eq!(sp.unscale(sp.eval(0b11)), ratio(-5, 3));
        assert_eq!(sp.unscale(sp.eval(0b01)), rat(-2));
    }
}
