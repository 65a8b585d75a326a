//! Max2SAT, linear ordering, community detection and independent set encodings, with
//! decoders, brute-force domain oracles and seeded instance generators.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::levelness::CompactCertificate;
use crate::model::{BlpModel, CnfFormula, Graph, LinearExpression, Literal, Sense, TwoSidedConstraint, WeightMatrix};
use crate::pipeline::{
    assemble, assemble_parts, auto_lambda, cts, mlcts, CompiledPenalty, CompiledQubo, PenaltyMode,
    PenaltySet, PipelineConfig, PipelineError, QuboParts, Variant,
};
use crate::penalties::PenaltyRule;
use crate::poly::{rat, Polynomial, Rational, VarId};
use crate::reduction::{rosenberg_quadratize, AncillaryAllocator};

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Model(#[from] crate::model::ModelError),
    #[error("invalid generator parameter: {0}")]
    Parameter(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Problem {
    Max2sat,
    Lop,
    Cdp,
    Mis,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Instance {
    Cnf(CnfFormula),
    Weights(WeightMatrix),
    Graph(Graph),
}

/// A named QUBO form of a problem, such as `QUBO1` or `QUBO2`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NamedForm {
    pub name: String,
    pub qubo: CompiledQubo,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProblemEncoding {
    pub problem: Problem,
    pub instance: Instance,
    pub blp: BlpModel,
    pub forms: Vec<NamedForm>,
}

impl ProblemEncoding {
    pub fn form(&self, name: &str) -> Option<&CompiledQubo> {
        self.forms.iter().find(|f| f.name.eq_ignore_ascii_case(name)).map(|f| &f.qubo)
    }

    /// Domain object for the original-variable part of a QUBO point.
    pub fn decode(&self, x: &[bool]) -> Decoded {
        match &self.instance {
            Instance::Cnf(f) => decode_max2sat(f, x),
            Instance::Weights(w) => decode_lop(w, x),
            Instance::Graph(g) if self.problem == Problem::Cdp => decode_cdp(g, x),
            Instance::Graph(g) => decode_mis(g, x),
        }
    }
}

/// A decoded solution with its objective recomputed from the instance.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "problem", rename_all = "lowercase")]
pub enum Decoded {
    Max2sat { assignment: Vec<bool>, satisfied: usize },
    Lop { order: Vec<usize>, valid: bool, value: String },
    Cdp { clusters: Vec<Vec<usize>>, valid: bool, value: i64 },
    Mis { vertices: Vec<usize>, independent: bool, size: usize },
}

impl Decoded {
    pub fn feasible(&self) -> bool {
        match self {
            Decoded::Max2sat { .. } => true,
            Decoded::Lop { valid, .. } | Decoded::Cdp { valid, .. } => *valid,
            Decoded::Mis { independent, .. } => *independent,
        }
    }

    /// Domain objective (maximized for every problem); `None` when infeasible.
    pub fn objective(&self) -> Option<Rational> {
        if !self.feasible() {
            return None;
        }
        Some(match self {
            Decoded::Max2sat { satisfied, .. } => rat(*satisfied as i64),
            Decoded::Lop { value, .. } => crate::poly::parse_rational(value).expect("rendered rational"),
            Decoded::Cdp { value, .. } => rat(*value),
            Decoded::Mis { size, .. } => rat(*size as i64),
        })
    }
}

fn empty_certificate() -> CompactCertificate {
    CompactCertificate { entries: Vec::new(), kn: None, compact_guaranteed: true }
}

fn literal_expr(l: &Literal, target: &mut LinearExpression, sign: i64) -> i64 {
    let v = VarId::original(l.var as u32);
    if l.positive {
        target.add_term(v, rat(sign));
        0
    } else {
        target.add_term(v, rat(-sign));
        sign
    }
}

fn literal_poly(l: &Literal) -> Polynomial {
    let x = Polynomial::var(VarId::original(l.var as u32));
    if l.positive {
        x
    } else {
        &Polynomial::constant(rat(1)) - &x
    }
}

/// Clause-selection BLP: minimize the number of clauses with `C_i = 0`, `l <= C_i` for both
/// literals and `C_i <= l1 + l2 <= C_i + 1`. Variables are `x_1..x_n` then `C_1..C_m`.
pub fn max2sat_blp(f: &CnfFormula) -> Result<BlpModel, ProblemError> {
    let n = f.num_vars;
    let m = f.clauses.len();
    let names = (1..=n).map(|i| format!("x_{i}")).chain((1..=m).map(|i| format!("C_{i}")));
    let mut model = BlpModel::with_variables(names)?;
    let clause_var = |i: usize| VarId::original((n + i) as u32);
    let objective = LinearExpression::from_ints((0..m).map(|i| (clause_var(i), -1)));
    model.set_objective(Sense::Min, objective, rat(m as i64));
    for (i, clause) in f.clauses.iter().enumerate() {
        for (side, l) in clause.iter().enumerate() {
            let mut e = LinearExpression::new();
            let shift = literal_expr(l, &mut e, 1);
            e.add_term(clause_var(i), rat(-1));
            let c = TwoSidedConstraint::new(format!("lit{}_{}", side + 1, i + 1), e, None, Some(rat(-shift)))?;
            model.add_constraint(c)?;
        }
        let mut e = LinearExpression::new();
        let shift = literal_expr(&clause[0], &mut e, 1) + literal_expr(&clause[1], &mut e, 1);
        e.add_term(clause_var(i), rat(-1));
        let c = TwoSidedConstraint::new(format!("clause_{}", i + 1), e, Some(rat(-shift)), Some(rat(1 - shift)))?;
        model.add_constraint(c)?;
    }
    Ok(model)
}

/// `QUBO1`: the clause-selection BLP through the multilevel pipeline (`n + m` variables).
/// `QUBO2`: `sum_i (1 - l_i1)(1 - l_i2)` over the `n` propositional variables, with no weights.
pub fn encode_max2sat(f: &CnfFormula, mode: &PenaltyMode) -> Result<ProblemEncoding, ProblemError> {
    let blp = max2sat_blp(f)?;
    let q1 = mlcts(&blp, &PipelineConfig::default().with_penalty(mode.clone()))?;
    let mut objective = Polynomial::zero();
    for clause in &f.clauses {
        let miss = |l: &Literal| &Polynomial::constant(rat(1)) - &literal_poly(l);
        objective = &objective + &(&miss(&clause[0]) * &miss(&clause[1]));
    }
    let parts = QuboParts {
        originals: blp.names()[..f.num_vars].to_vec(),
        objective,
        sense: Sense::Min,
        certificate: empty_certificate(),
    };
    let empty = PenaltySet { variant: Variant::default(), penalties: Vec::new(), ancillaries: Vec::new(), warnings: Vec::new() };
    let q2 = assemble_parts(parts, &empty, &[])?;
    Ok(ProblemEncoding {
        problem: Problem::Max2sat,
        instance: Instance::Cnf(f.clone()),
        blp,
        forms: vec![NamedForm { name: "QUBO1".into(), qubo: q1 }, NamedForm { name: "QUBO2".into(), qubo: q2 }],
    })
}

pub fn decode_max2sat(f: &CnfFormula, x: &[bool]) -> Decoded {
    let assignment = x[..f.num_vars].to_vec();
    Decoded::Max2sat { satisfied: f.satisfied_count(&assignment), assignment }
}

pub fn max2sat_optimum(f: &CnfFormula) -> usize {
    (0..1u64 << f.num_vars)
        .map(|mask| {
            let x: Vec<bool> = (0..f.num_vars).map(|i| mask >> i & 1 == 1).collect();
            f.satisfied_count(&x)
        })
        .max()
        .unwrap_or(0)
}

/// Index of the pair variable `x_{u,v}`, `u < v`, in row-major upper-triangle order.
pub fn pair_index(n: usize, u: usize, v: usize) -> usize {
    debug_assert!(u < v && v < n);
    u * (2 * n - u - 1) / 2 + (v - u - 1)
}

fn pair_names(n: usize) -> Vec<String> {
    let mut names = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            names.push(format!("x_{}_{}", u + 1, v + 1));
        }
    }
    names
}

fn pair_var(n: usize, u: usize, v: usize) -> VarId {
    VarId::original(pair_index(n, u.min(v), u.max(v)) as u32)
}

/// Ordering BLP: `x_ij = 1` puts `i` before `j` (`i < j`), maximize the weight of respected
/// precedences subject to `0 <= x_ij + x_jk - x_ik <= 1`.
pub fn lop_blp(w: &WeightMatrix) -> Result<BlpModel, ProblemError> {
    let n = w.n;
    let mut model = BlpModel::with_variables(pair_names(n))?;
    let mut objective = LinearExpression::new();
    let mut constant = rat(0);
    for i in 0..n {
        for j in i + 1..n {
            objective.add_term(pair_var(n, i, j), &w.w[i][j] - &w.w[j][i]);
            constant += &w.w[j][i];
        }
    }
    model.set_objective(Sense::Max, objective, constant);
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                let e = LinearExpression::from_ints([(pair_var(n, i, j), 1), (pair_var(n, j, k), 1), (pair_var(n, i, k), -1)]);
                let name = format!("tri_{}_{}_{}", i + 1, j + 1, k + 1);
                model.add_constraint(TwoSidedConstraint::new(name, e, Some(rat(0)), Some(rat(1)))?)?;
            }
        }
    }
    Ok(model)
}

pub fn encode_lop(w: &WeightMatrix, mode: &PenaltyMode) -> Result<ProblemEncoding, ProblemError> {
    if w.n < 2 {
        return Err(ProblemError::Parameter("linear ordering needs n >= 2".into()));
    }
    let blp = lop_blp(w)?;
    let q = mlcts(&blp, &PipelineConfig::default().with_penalty(mode.clone()))?;
    Ok(ProblemEncoding {
        problem: Problem::Lop,
        instance: Instance::Weights(w.clone()),
        blp,
        forms: vec![NamedForm { name: "QUBO".into(), qubo: q }],
    })
}

fn before(n: usize, x: &[bool], i: usize, j: usize) -> bool {
    if i < j {
        x[pair_index(n, i, j)]
    } else {
        !x[pair_index(n, j, i)]
    }
}

fn order_value(w: &WeightMatrix, order: &[usize]) -> Rational {
    let mut total = rat(0);
    for a in 0..order.len() {
        for b in a + 1..order.len() {
            total += &w.w[order[a]][order[b]];
        }
    }
    total
}

/// Rank by number of successors (descending, ties by index); valid when the ranking
/// reproduces every pair variable.
pub fn decode_lop(w: &WeightMatrix, x: &[bool]) -> Decoded {
    let n = w.n;
    let succ = |i: usize| (0..n).filter(|&j| j != i && before(n, x, i, j)).count();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| (std::cmp::Reverse(succ(i)), i));
    let valid = (0..n).all(|a| (a + 1..n).all(|b| before(n, x, order[a], order[b])));
    Decoded::Lop { valid, value: crate::poly::fmt_rational(&order_value(w, &order)), order: order.iter().map(|i| i + 1).collect() }
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

pub fn lop_optimum(w: &WeightMatrix) -> Rational {
    permutations(w.n).iter().map(|p| order_value(w, p)).max().unwrap_or_else(|| rat(0))
}

/// Transitivity rotations: for each triple and each middle vertex `m`, `x_am + x_mb - x_ab >= 0`.
fn cdp_rotations(n: usize) -> Vec<(usize, usize, usize)> {
    let mut out = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            for w in v + 1..n {
                out.push((u, v, w));
                out.push((v, u, w));
                out.push((w, u, v));
            }
        }
    }
    out
}

/// Partition BLP: `x_uv = 1` separates `u` and `v`; maximize `sum_{u,v} a_uv (1 - x_uv)` over
/// ordered pairs, so each intra-cluster edge counts twice.
pub fn cdp_blp(g: &Graph) -> Result<BlpModel, ProblemError> {
    let n = g.n;
    let mut model = BlpModel::with_variables(pair_names(n))?;
    let objective = LinearExpression::from_ints(g.edges.iter().map(|&(u, v)| (pair_var(n, u, v), -2)));
    model.set_objective(Sense::Max, objective, rat(2 * g.num_edges() as i64));
    for (m, a, b) in cdp_rotations(n) {
        let e = LinearExpression::from_ints([(pair_var(n, a, m), 1), (pair_var(n, m, b), 1), (pair_var(n, a, b), -1)]);
        let name = format!("trans_{}_{}_{}", a + 1, m + 1, b + 1);
        model.add_constraint(TwoSidedConstraint::new(name, e, Some(rat(0)), None)?)?;
    }
    Ok(model)
}

/// Cubic penalty `(1 - x_am)(1 - x_mb) x_ab` of one rotation, quadratized by substituting
/// `y = x_am x_mb`: returns the substituted part and the Rosenberg term.
pub fn cdp_rotation_penalty(n: usize, (m, a, b): (usize, usize, usize), alloc: &mut AncillaryAllocator) -> (Polynomial, Polynomial, VarId) {
    let (am, mb, ab) = (pair_var(n, a, m), pair_var(n, m, b), pair_var(n, a, b));
    let one = Polynomial::constant(rat(1));
    let cubic = &(&(&one - &Polynomial::var(am)) * &(&one - &Polynomial::var(mb))) * &Polynomial::var(ab);
    let q = rosenberg_quadratize(&cubic, Some(&[(am, mb)]), Some(rat(1)), alloc, "");
    (q.substituted, q.penalties[0].clone(), q.created[0])
}

fn cdp_form(g: &Graph, blp: &BlpModel, lambda1: Rational, lambda2: Rational) -> Result<CompiledQubo, ProblemError> {
    let n = g.n;
    let mut alloc = AncillaryAllocator::new();
    let mut penalties = Vec::new();
    let mut weights = Vec::new();
    for (rot, c) in cdp_rotations(n).into_iter().zip(&blp.constraints) {
        let (sub, r, y) = cdp_rotation_penalty(n, rot, &mut alloc);
        let entry = |poly: Polynomial, rule: Option<PenaltyRule>, ancillaries: Vec<VarId>| CompiledPenalty {
            source: c.name.clone(),
            poly,
            rule,
            factored_r: rat(6),
            ancillaries,
            steps: Vec::new(),
        };
        penalties.push(entry(sub, Some(PenaltyRule::LowerProduct), vec![y]));
        weights.push(lambda1.clone());
        penalties.push(entry(r, None, Vec::new()));
        weights.push(lambda2.clone());
    }
    let set = PenaltySet {
        variant: Variant::Rosenberg,
        penalties,
        ancillaries: (0..alloc.count() as u32).map(VarId::ancillary).collect(),
        warnings: Vec::new(),
    };
    Ok(assemble(blp, &set, &weights)?)
}

/// `QUBO1` with weights `lambda` and `2 lambda` on the substituted and Rosenberg parts (auto
/// `lambda` unless a uniform weight is given); `QUBO2` with the fixed weights 1 and 2.
pub fn encode_cdp(g: &Graph, mode: &PenaltyMode) -> Result<ProblemEncoding, ProblemError> {
    let blp = cdp_blp(g)?;
    let lambda = match mode {
        PenaltyMode::Uniform(l) => l.clone(),
        _ => auto_lambda(&blp),
    };
    let q1 = cdp_form(g, &blp, lambda.clone(), &lambda * rat(2))?;
    let q2 = cdp_form(g, &blp, rat(1), rat(2))?;
    Ok(ProblemEncoding {
        problem: Problem::Cdp,
        instance: Instance::Graph(g.clone()),
        blp,
        forms: vec![NamedForm { name: "QUBO1".into(), qubo: q1 }, NamedForm { name: "QUBO2".into(), qubo: q2 }],
    })
}

fn cdp_value(g: &Graph, cluster: &[usize]) -> i64 {
    2 * g.edges.iter().filter(|(u, v)| cluster[*u] == cluster[*v]).count() as i64
}

/// Clusters from the `x_uv = 0` relation; valid when that relation is an equivalence.
pub fn decode_cdp(g: &Graph, x: &[bool]) -> Decoded {
    let n = g.n;
    let same = |u: usize, v: usize| u == v || !x[pair_index(n, u.min(v), u.max(v))];
    let mut label = vec![usize::MAX; n];
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for u in 0..n {
        if label[u] == usize::MAX {
            let members: Vec<usize> = (u..n).filter(|&v| label[v] == usize::MAX && same(u, v)).collect();
            for &v in &members {
                label[v] = clusters.len();
            }
            clusters.push(members);
        }
    }
    let valid = (0..n).all(|u| (u + 1..n).all(|v| same(u, v) == (label[u] == label[v])));
    Decoded::Cdp {
        value: cdp_value(g, &label),
        valid,
        clusters: clusters.into_iter().map(|c| c.into_iter().map(|v| v + 1).collect()).collect(),
    }
}

/// Best objective over all set partitions (restricted growth strings).
pub fn cdp_optimum(g: &Graph) -> i64 {
    fn rec(g: &Graph, label: &mut Vec<usize>, next: usize, best: &mut i64) {
        if label.len() == g.n {
            *best = (*best).max(cdp_value(g, label));
            return;
        }
        for c in 0..=next {
            label.push(c);
            rec(g, label, next.max(c + 1), best);
            label.pop();
        }
    }
    let mut best = 0;
    rec(g, &mut Vec::new(), 0, &mut best);
    best
}

pub fn mis_blp(g: &Graph) -> Result<BlpModel, ProblemError> {
    let mut model = BlpModel::with_variables((1..=g.n).map(|v| format!("x_{v}")))?;
    model.set_objective(Sense::Max, LinearExpression::from_ints((0..g.n).map(|v| (VarId::original(v as u32), 1))), rat(0));
    for &(u, v) in &g.edges {
        let e = LinearExpression::from_ints([(VarId::original(u as u32), 1), (VarId::original(v as u32), 1)]);
        model.add_constraint(TwoSidedConstraint::new(format!("e_{}_{}", u + 1, v + 1), e, None, Some(rat(1)))?)?;
    }
    Ok(model)
}

pub const MIS_DEFAULT_LAMBDA: i64 = 2;

/// `QUBO1`: conventional slack form over `n + m` variables. `QUBO2`: `-sum x + lambda sum_E x_u x_v`.
pub fn encode_mis(g: &Graph, lambda: Rational) -> Result<ProblemEncoding, ProblemError> {
    let blp = mis_blp(g)?;
    let cfg = PipelineConfig::default().with_penalty(PenaltyMode::Uniform(lambda));
    let q1 = cts(&blp, &cfg)?;
    let q2 = mlcts(&blp, &cfg)?;
    Ok(ProblemEncoding {
        problem: Problem::Mis,
        instance: Instance::Graph(g.clone()),
        blp,
        forms: vec![NamedForm { name: "QUBO1".into(), qubo: q1 }, NamedForm { name: "QUBO2".into(), qubo: q2 }],
    })
}

pub fn decode_mis(g: &Graph, x: &[bool]) -> Decoded {
    let vertices: Vec<usize> = (0..g.n).filter(|v| x[*v]).collect();
    let independent = g.edges.iter().all(|(u, v)| !(x[*u] && x[*v]));
    Decoded::Mis { size: vertices.len(), independent, vertices: vertices.into_iter().map(|v| v + 1).collect() }
}

pub fn mis_optimum(g: &Graph) -> usize {
    (0..1u64 << g.n)
        .filter(|mask| g.edges.iter().all(|(u, v)| mask >> u & 1 == 0 || mask >> v & 1 == 0))
        .map(|mask| mask.count_ones() as usize)
        .max()
        .unwrap_or(0)
}

pub fn gnp_graph(n: usize, p: f64, seed: u64) -> Result<Graph, ProblemError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(ProblemError::Parameter(format!("edge probability {p} outside [0, 1]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = Graph::new(n);
    for u in 0..n {
        for v in u + 1..n {
            if rng.gen_bool(p) {
                g.add_edge(u, v);
            }
        }
    }
    Ok(g)
}

/// `m` clauses over two distinct variables each, signs uniform.
pub fn random_2cnf(n: usize, m: usize, seed: u64) -> Result<CnfFormula, ProblemError> {
    if n < 2 {
        return Err(ProblemError::Parameter("2-CNF needs at least two variables".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let clauses = (0..m)
        .map(|_| {
            let a = rng.gen_range(0..n);
            let mut b = rng.gen_range(0..n - 1);
            if b >= a {
                b += 1;
            }
            [Literal { var: a, positive: rng.gen() }, Literal { var: b, positive: rng.gen() }]
        })
        .collect();
    Ok(CnfFormula { num_vars: n, clauses })
}

/// Integer weights uniform in `lo..=hi`, zero diagonal.
pub fn random_weights(n: usize, lo: i64, hi: i64, seed: u64) -> Result<WeightMatrix, ProblemError> {
    if lo > hi {
        return Err(ProblemError::Parameter(format!("empty weight range {lo}..={hi}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = (0..n)
        .map(|i| (0..n).map(|j| if i == j { rat(0) } else { rat(rng.gen_range(lo..=hi)) }).collect())
        .collect();
    Ok(WeightMatrix::new(w)?)
}
