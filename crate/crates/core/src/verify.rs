//! Brute-force oracles: penalty validity, BLP/QUBO equivalence and minimal penalty weights.

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigInt;
use num_traits::{Signed, ToPrimitive};
use rayon::prelude::*;
use thiserror::Error;

use crate::model::{BlpModel, TwoSidedConstraint};
use crate::pipeline::{assemble, compile_penalties, CompiledQubo, PenaltySet, PipelineError, Variant};
use crate::penalties::RootChoice;
use crate::poly::{common_denominator, fmt_rational, rat, Polynomial, Rational, ScaledPolynomial, VarId};

pub const VERIFY_CAP: usize = 24;
pub const SEARCH_CAP: usize = 20;
pub const LAMBDA_CAP: i64 = 1 << 16;

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("{n} variables exceed the exhaustive cap of {cap}; use sampling instead")]
    TooLarge { n: usize, cap: usize },
    #[error("the model has no feasible point")]
    InfeasibleModel,
    #[error("no penalty weight up to {0} preserves the optimum; a penalty is not valid")]
    NoLambda(i64),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Counterexample {
    pub assignment: Vec<(VarId, bool)>,
    pub values: BTreeMap<String, Rational>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Verdict {
    pub ok: bool,
    pub checked: u64,
    pub counterexample: Option<Counterexample>,
    /// Headline values such as the two optima of an equivalence check.
    pub summary: BTreeMap<String, Rational>,
}

impl Verdict {
    pub fn to_json(&self, name: impl Fn(VarId) -> String) -> serde_json::Value {
        let render = |m: &BTreeMap<String, Rational>| -> serde_json::Map<String, serde_json::Value> {
            m.iter().map(|(k, v)| (k.clone(), serde_json::json!(fmt_rational(v)))).collect()
        };
        serde_json::json!({
            "ok": self.ok,
            "checked": self.checked,
            "summary": render(&self.summary),
            "counterexample": self.counterexample.as_ref().map(|c| serde_json::json!({
                "assignment": c.assignment.iter().map(|(v, b)| (name(*v), serde_json::json!(u8::from(*b)))).collect::<serde_json::Map<_, _>>(),
                "values": render(&c.values),
            })),
        })
    }
}

/// Bit position per variable: the first variable of `order` is the most significant bit.
fn bit_positions(order: &[VarId], shift: usize) -> BTreeMap<VarId, u32> {
    let n = order.len();
    order.iter().enumerate().map(|(j, v)| (*v, (shift + n - 1 - j) as u32)).collect()
}

fn assignment(order: &[VarId], mask: u64) -> Vec<(VarId, bool)> {
    let n = order.len();
    order.iter().enumerate().map(|(j, v)| (*v, mask >> (n - 1 - j) & 1 == 1)).collect()
}

/// `ceil(lo * scale)` and `floor(hi * scale)` as integer bounds on a scaled value.
fn scaled_bounds(c: &TwoSidedConstraint, scale: &BigInt) -> (Option<i128>, Option<i128>) {
    let s = Rational::from_integer(scale.clone());
    let lo = c.lo.as_ref().map(|b| (b * &s).ceil().to_integer().to_i128().expect("bound fits i128"));
    let hi = c.hi.as_ref().map(|b| (b * &s).floor().to_integer().to_i128().expect("bound fits i128"));
    (lo, hi)
}

struct ScaledConstraint {
    expr: ScaledPolynomial,
    lo: Option<i128>,
    hi: Option<i128>,
}

impl ScaledConstraint {
    fn new(c: &TwoSidedConstraint, bits: &BTreeMap<VarId, u32>) -> Self {
        let expr = ScaledPolynomial::compile(&c.expr.to_polynomial(), bits);
        let (lo, hi) = scaled_bounds(c, &expr.scale);
        ScaledConstraint { expr, lo, hi }
    }

    fn holds(&self, mask: u64) -> bool {
        let v = self.expr.eval(mask);
        self.lo.is_none_or(|lo| v >= lo) && self.hi.is_none_or(|hi| v <= hi)
    }
}

/// Block of coupled ancillaries. Quadratic blocks are minimized by a Gray-code walk with
/// local fields; anything else is enumerated directly.
enum Block {
    Quadratic {
        /// Per ancillary: constant part of its linear coefficient and `(x mask, coef)` parts.
        linear: Vec<(i64, Vec<(u64, i64)>)>,
        /// Neighbours of ancillary `i` are `neighbor[offset[i]..offset[i + 1]]`.
        offset: Vec<usize>,
        neighbor: Vec<(usize, i64)>,
    },
    General(ScaledPolynomial),
}

impl Block {
    fn compile(p: &Polynomial, xs: &[VarId], vars: &[VarId]) -> Self {
        let local: BTreeMap<VarId, usize> = vars.iter().enumerate().map(|(i, v)| (*v, i)).collect();
        let x_bits = bit_positions(xs, 0);
        let total: Rational = p.terms().map(|(_, c)| c.abs()).sum();
        let fits = total.to_integer().to_i64().is_some_and(|t| t < i64::MAX / 4);
        if p.degree() > 2 || !fits {
            let mut bits = bit_positions(xs, vars.len());
            bits.extend(bit_positions(vars, 0));
            return Block::General(ScaledPolynomial::compile(p, &bits));
        }
        let as_int = |c: &Rational| c.to_integer().to_i64().expect("checked above");
        let mut linear = vec![(0i64, Vec::new()); vars.len()];
        let mut coupling: Vec<Vec<(usize, i64)>> = vec![Vec::new(); vars.len()];
        for (term, c) in p.terms() {
            let c = as_int(c);
            match term {
                [a] => linear[local[a]].0 += c,
                [a, b] => match (local.get(a), local.get(b)) {
                    (Some(&i), Some(&j)) => {
                        coupling[i].push((j, c));
                        coupling[j].push((i, c));
                    }
                    (Some(&i), None) => linear[i].1.push((1u64 << x_bits[b], c)),
                    (None, Some(&j)) => linear[j].1.push((1u64 << x_bits[a], c)),
                    (None, None) => unreachable!("block terms mention an ancillary"),
                },
                _ => unreachable!("degree checked above"),
            }
        }
        let mut offset = vec![0];
        for list in &coupling {
            offset.push(offset.last().expect("nonempty") + list.len());
        }
        Block::Quadratic { linear, offset, neighbor: coupling.concat() }
    }

    /// Minimum over the block at point `t`, with the minimizing block assignment (first variable
    /// most significant).
    fn min(&self, width: usize, t: u64) -> (i128, u64) {
        match self {
            Block::General(sp) => (0..1u64 << width).map(|s| (sp.eval(t << width | s), s)).min().expect("nonempty"),
            Block::Quadratic { linear, offset, neighbor } => {
                let mut field: Vec<i64> = linear
                    .iter()
                    .map(|(c, parts)| c + parts.iter().filter(|(m, _)| t & m == *m).map(|(_, v)| v).sum::<i64>())
                    .collect();
                let (mut s, mut value) = (0u64, 0i64);
                let (mut best, mut best_s) = (0i64, 0u64);
                for k in 1u64..1u64 << width {
                    let i = k.trailing_zeros() as usize;
                    let sign = if s >> i & 1 == 0 { 1 } else { -1 };
                    value += sign * field[i];
                    s ^= 1 << i;
                    for (j, c) in &neighbor[offset[i]..offset[i + 1]] {
                        field[*j] += sign * c;
                    }
                    if value < best {
                        best = value;
                        best_s = s;
                    }
                }
                let msb_first = (0..width).filter(|i| best_s >> i & 1 == 1).fold(0u64, |m, i| m | 1 << (width - 1 - i));
                (i128::from(best), msb_first)
            }
        }
    }
}

/// `min_s p(x, s)` over bitmask points `x`. Ancillaries are grouped into blocks that share no
/// monomial, so the minimum is the ancillary-free part plus one independent minimum per block.
struct Projection {
    n_x: usize,
    base: ScaledPolynomial,
    blocks: Vec<(Vec<VarId>, Block)>,
    scale: BigInt,
}

impl Projection {
    fn new(p: &Polynomial, xs: &[VarId], ancillaries: &[VarId]) -> Result<Self, VerifyError> {
        let index: BTreeMap<VarId, usize> = ancillaries.iter().enumerate().map(|(i, v)| (*v, i)).collect();
        let mut parent: Vec<usize> = (0..ancillaries.len()).collect();
        fn root(parent: &mut [usize], mut i: usize) -> usize {
            while parent[i] != i {
                parent[i] = parent[parent[i]];
                i = parent[i];
            }
            i
        }
        for (vars, _) in p.terms() {
            let mut touched = vars.iter().filter_map(|v| index.get(v).copied());
            if let Some(first) = touched.next() {
                for other in touched {
                    let (a, b) = (root(&mut parent, first), root(&mut parent, other));
                    parent[a] = b;
                }
            }
        }
        let mut groups: BTreeMap<usize, Vec<VarId>> = BTreeMap::new();
        for (i, v) in ancillaries.iter().enumerate() {
            groups.entry(root(&mut parent, i)).or_default().push(*v);
        }
        let largest = groups.values().map(Vec::len).max().unwrap_or(0);
        check_cap(xs.len() + largest, VERIFY_CAP)?;

        let scale = common_denominator(p.terms().map(|(_, c)| c).chain([p.constant_term()]));
        let scaled = p.scale(&Rational::from_integer(scale.clone()));
        let mut base = Polynomial::constant(scaled.constant_term().clone());
        let mut parts: BTreeMap<usize, Polynomial> = groups.keys().map(|g| (*g, Polynomial::zero())).collect();
        for (vars, c) in scaled.terms() {
            match vars.iter().find_map(|v| index.get(v)) {
                Some(&i) => parts.get_mut(&root(&mut parent, i)).expect("block").add_term(vars.iter().copied(), c.clone()),
                None => base.add_term(vars.iter().copied(), c.clone()),
            }
        }
        let base = ScaledPolynomial::compile(&base, &bit_positions(xs, 0));
        let blocks = groups
            .into_iter()
            .map(|(g, vars)| {
                let block = Block::compile(&parts[&g], xs, &vars);
                (vars, block)
            })
            .collect();
        Ok(Projection { n_x: xs.len(), base, blocks, scale })
    }

    fn value(&self, t: u64) -> i128 {
        self.base.eval(t) + self.blocks.iter().map(|(vars, b)| b.min(vars.len(), t).0).sum::<i128>()
    }

    /// A minimizing ancillary assignment at `t`.
    fn argmin(&self, t: u64) -> Vec<(VarId, bool)> {
        self.blocks.iter().flat_map(|(vars, b)| assignment(vars, b.min(vars.len(), t).1)).collect()
    }

    /// Values at every point, first variable most significant.
    fn all(&self) -> Vec<i128> {
        (0..1u64 << self.n_x).into_par_iter().map(|t| self.value(t)).collect()
    }

    fn unscale(&self, v: i128) -> Rational {
        Rational::new(BigInt::from(v), self.scale.clone())
    }
}

fn split_variables(p: &Polynomial, c: Option<&TwoSidedConstraint>, ancillaries: &BTreeSet<VarId>) -> (Vec<VarId>, Vec<VarId>) {
    let mut all = p.support();
    if let Some(c) = c {
        all.extend(c.expr.support());
    }
    let xs = all.iter().copied().filter(|v| !ancillaries.contains(v)).collect();
    (xs, ancillaries.iter().copied().collect())
}

fn check_cap(n: usize, cap: usize) -> Result<(), VerifyError> {
    if n > cap {
        Err(VerifyError::TooLarge { n, cap })
    } else {
        Ok(())
    }
}

/// `min_s p(x, s)` at every point `x` over the non-ancillary support, first variable most significant.
pub fn projected_values(p: &Polynomial, ancillaries: &BTreeSet<VarId>) -> Result<(Vec<VarId>, Vec<Rational>), VerifyError> {
    let (xs, anc) = split_variables(p, None, ancillaries);
    let proj = Projection::new(p, &xs, &anc)?;
    let values = proj.all().into_iter().map(|v| proj.unscale(v)).collect();
    Ok((xs, values))
}

/// Exhaustive check that `p` is zero exactly where `c` holds and positive elsewhere.
pub fn check_vip(p: &Polynomial, c: &TwoSidedConstraint) -> Result<Verdict, VerifyError> {
    check_augmented_vip(p, c, &BTreeSet::new())
}

/// As `check_vip` for the minimum of `p` over the ancillary variables.
pub fn check_augmented_vip(p: &Polynomial, c: &TwoSidedConstraint, ancillaries: &BTreeSet<VarId>) -> Result<Verdict, VerifyError> {
    let (xs, anc) = split_variables(p, Some(c), ancillaries);
    let proj = Projection::new(p, &xs, &anc)?;
    let sc = ScaledConstraint::new(c, &bit_positions(&xs, 0));
    let projected = proj.all();
    let failure = projected.iter().enumerate().find(|(t, v)| {
        let holds = sc.holds(*t as u64);
        (holds && **v != 0) || (!holds && **v <= 0)
    });
    let counterexample = failure.map(|(t, v)| Counterexample {
        assignment: assignment(&xs, t as u64).into_iter().chain(proj.argmin(t as u64)).collect(),
        values: BTreeMap::from([
            ("penalty".to_string(), proj.unscale(*v)),
            ("h".to_string(), sc.expr.unscale(sc.expr.eval(t as u64))),
        ]),
    });
    Ok(Verdict { ok: counterexample.is_none(), checked: projected.len() as u64, counterexample, summary: BTreeMap::new() })
}

/// Feasibility table and optimum of a BLP over all `2^n` points.
pub struct BlpOracle {
    pub feasible: Vec<bool>,
    pub optimum: Rational,
    pub argmin: u64,
}

pub fn solve_blp(m: &BlpModel) -> Result<BlpOracle, VerifyError> {
    let n = m.num_variables();
    check_cap(n, VERIFY_CAP)?;
    let order: Vec<VarId> = m.variables().collect();
    let bits = bit_positions(&order, 0);
    let constraints: Vec<ScaledConstraint> = m.constraints.iter().map(|c| ScaledConstraint::new(c, &bits)).collect();
    let objective = ScaledPolynomial::compile(&m.min_form_polynomial(), &bits);
    let rows: Vec<(bool, i128)> = (0..1u64 << n)
        .into_par_iter()
        .map(|t| {
            let ok = constraints.iter().all(|c| c.holds(t));
            (ok, if ok { objective.eval(t) } else { i128::MAX })
        })
        .collect();
    let (argmin, best) = rows
        .iter()
        .enumerate()
        .filter(|(_, r)| r.0)
        .min_by_key(|(t, r)| (r.1, *t))
        .map(|(t, r)| (t as u64, r.1))
        .ok_or(VerifyError::InfeasibleModel)?;
    Ok(BlpOracle { feasible: rows.into_iter().map(|r| r.0).collect(), optimum: objective.unscale(best), argmin })
}

fn equivalence_with(oracle: &BlpOracle, q: &CompiledQubo) -> Result<Verdict, VerifyError> {
    let (xs, anc) = q.qubo.variables.split_at(q.num_original);
    let proj = Projection::new(&q.qubo.to_polynomial(), xs, anc)?;
    let values = proj.all();
    let (best_t, best) = values.iter().enumerate().min_by_key(|(t, v)| (**v, *t)).map(|(t, v)| (t as u64, *v)).expect("nonempty");
    let failure = values.iter().enumerate().position(|(t, v)| *v == best && !oracle.feasible[t]).map(|t| t as u64);
    let qubo_min = proj.unscale(best);
    let ok = qubo_min == oracle.optimum && failure.is_none();
    let summary = BTreeMap::from([("qubo_min".to_string(), qubo_min.clone()), ("blp_optimum".to_string(), oracle.optimum.clone())]);
    let counterexample = (!ok).then(|| {
        let t = failure.unwrap_or(best_t);
        Counterexample {
            assignment: assignment(xs, t).into_iter().chain(proj.argmin(t)).collect(),
            values: BTreeMap::from([
                ("energy".to_string(), qubo_min.clone()),
                ("feasible".to_string(), rat(i64::from(oracle.feasible[t as usize]))),
            ]),
        }
    });
    Ok(Verdict { ok, checked: values.len() as u64, counterexample, summary })
}

/// Brute-force QUBO minimum equals the BLP optimum (minimization form) and every QUBO argmin
/// restricts to a feasible point.
pub fn check_equivalence(m: &BlpModel, q: &CompiledQubo) -> Result<Verdict, VerifyError> {
    equivalence_with(&solve_blp(m)?, q)
}

/// Smallest uniform integer weight for which `set` passes the equivalence check.
pub fn minimal_lambda_for(m: &BlpModel, set: &PenaltySet) -> Result<Rational, VerifyError> {
    check_cap(m.num_variables() + set.ancillaries.len(), SEARCH_CAP)?;
    let oracle = solve_blp(m)?;
    let passes = |w: i64| -> Result<bool, VerifyError> {
        let q = assemble(m, set, &vec![rat(w); set.penalties.len()])?;
        Ok(equivalence_with(&oracle, &q)?.ok)
    };
    let mut hi = 1i64;
    while !passes(hi)? {
        if hi >= LAMBDA_CAP {
            return Err(VerifyError::NoLambda(LAMBDA_CAP));
        }
        hi *= 2;
    }
    let mut lo = hi / 2;
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if passes(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(rat(hi))
}

pub fn minimal_lambda(m: &BlpModel, variant: Variant) -> Result<Rational, VerifyError> {
    let set = compile_penalties(m, variant, RootChoice::Median)?;
    minimal_lambda_for(m, &set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::LinearExpression;
    use crate::pipeline::{cts, mlcts, PenaltyMode, PipelineConfig};

    fn x(i: u32) -> VarId {
        VarId::original(i)
    }

    fn le(terms: &[(u32, i64)], lo: Option<i64>, hi: Option<i64>) -> TwoSidedConstraint {
        TwoSidedConstraint::new("c", LinearExpression::from_ints(terms.iter().map(|&(i, a)| (x(i), a))), lo.map(rat), hi.map(rat)).unwrap()
    }

    fn mis_k3() -> BlpModel {
        let mut m = BlpModel::with_variables(["v1", "v2", "v3"]).unwrap();
        m.set_objective(crate::model::Sense::Max, LinearExpression::from_ints((0..3).map(|i| (x(i), 1))), rat(0));
        for (k, (a, b)) in [(0, 1), (0, 2), (1, 2)].into_iter().enumerate() {
            m.add_constraint(TwoSidedConstraint::new(format!("e{k}"), LinearExpression::from_ints([(x(a), 1), (x(b), 1)]), None, Some(rat(1))).unwrap())
                .unwrap();
        }
        m
    }

    #[test]
    fn block_projection_matches_enumeration() {
        let s = VarId::ancillary;
        let mut p = Polynomial::constant(crate::poly::ratio(1, 3));
        p.add_term([x(0), s(0)], rat(-2));
        p.add_term([s(0), s(1)], rat(3));
        p.add_term([x(1), s(1)], rat(-1));
        p.add_term([x(1), s(2)], crate::poly::ratio(-1, 2));
        p.add_term([s(2)], rat(1));
        p.add_term([x(0), x(1)], rat(1));
        let anc: BTreeSet<VarId> = (0..3).map(s).collect();
        let (xs, values) = projected_values(&p, &anc).unwrap();
        assert_eq!(xs, vec![x(0), x(1)]);
        for (t, v) in values.iter().enumerate() {
            let xv = [t >> 1 & 1 == 1, t & 1 == 1];
            let brute = (0..8u32)
                .map(|m| p.evaluate_with(|v| if v.is_ancillary() { m >> v.index & 1 == 1 } else { xv[v.index as usize] }))
                .min()
                .unwrap();
            assert_eq!(*v, brute, "t={t}");
        }
    }

    #[test]
    fn uncoupled_ancillaries_exceed_the_joint_cap() {
        let mut p = Polynomial::zero();
        let anc: BTreeSet<VarId> = (0..40).map(VarId::ancillary).collect();
        for a in &anc {
            p.add_term([x(0), *a], rat(-1));
            p.add_term([*a], rat(1));
        }
        let (_, values) = projected_values(&p, &anc).unwrap();
        assert_eq!(values, vec![rat(0), rat(0)]);
        let xs = [x(0)];
        let anc: Vec<VarId> = anc.into_iter().collect();
        let proj = Projection::new(&p, &xs, &anc).unwrap();
        let pick = proj.argmin(1);
        assert_eq!(pick.len(), 40);
        let value = p.evaluate_with(|v| v == x(0) || pick.iter().any(|(a, b)| *a == v && *b));
        assert_eq!(value, rat(0));
    }

    #[test]
    fn vip_verdicts() {
        let p = Polynomial::monomial([x(1), x(2)], rat(1));
        assert!(check_vip(&p, &le(&[(1, 1), (2, 1)], None, Some(1))).unwrap().ok);
        let bad = check_vip(&p, &le(&[(1, 1), (2, 1)], Some(1), None)).unwrap();
        assert!(!bad.ok);
        let ce = bad.counterexample.unwrap();
        assert_eq!(ce.assignment, vec![(x(1), false), (x(2), false)]);
        assert_eq!(ce.values["penalty"], rat(0));
    }

    #[test]
    fn rosenberg_alone_is_augmented_vip_for_product() {
        let (a, b, z) = (x(0), x(1), VarId::ancillary(0));
        let r = crate::reduction::rosenberg(a, b, z);
        let (_, vals) = projected_values(&r, &BTreeSet::from([z])).unwrap();
        assert_eq!(vals, vec![rat(0); 4]);
        for m in 0..8u32 {
            let at = |v: VarId| (if v == a { m & 1 } else if v == b { m & 2 } else { m & 4 }) != 0;
            let consistent = at(z) == (at(a) && at(b));
            assert_eq!(r.evaluate_with(at) == rat(0), consistent);
        }
    }

    #[test]
    fn mis_equivalence_and_lambda() {
        let m = mis_k3();
        let q = mlcts(&m, &PipelineConfig::default().with_penalty(PenaltyMode::Uniform(rat(2)))).unwrap();
        let v = check_equivalence(&m, &q).unwrap();
        assert!(v.ok);
        assert_eq!(v.summary["qubo_min"], rat(-1));
        let q1 = mlcts(&m, &PipelineConfig::default().with_penalty(PenaltyMode::Uniform(rat(1)))).unwrap();
        assert!(!check_equivalence(&m, &q1).unwrap().ok);
        assert_eq!(minimal_lambda(&m, Variant::BinaryLevel).unwrap(), rat(2));
        let c = cts(&m, &PipelineConfig::default()).unwrap();
        assert!(check_equivalence(&m, &c).unwrap().ok);
    }

    #[test]
    fn equality_only_lambda_is_one() {
        let mut m = BlpModel::with_variables(["a", "b"]).unwrap();
        m.set_objective(crate::model::Sense::Min, LinearExpression::from_ints([(x(0), 1)]), rat(0));
        m.add_constraint(TwoSidedConstraint::equality("e", LinearExpression::from_ints([(x(0), 1), (x(1), 1)]), rat(1))).unwrap();
        assert_eq!(minimal_lambda(&m, Variant::BinaryLevel).unwrap(), rat(1));
    }

    #[test]
    fn infeasible_model_is_distinct() {
        let mut m = BlpModel::with_variables(["a"]).unwrap();
        m.add_constraint(TwoSidedConstraint::new("c", LinearExpression::from_ints([(x(0), 1)]), Some(rat(2)), None).unwrap()).unwrap();
        assert!(matches!(solve_blp(&m), Err(VerifyError::InfeasibleModel)));
    }
}
