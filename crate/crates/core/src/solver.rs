//! QUBO solvers: exhaustive Gray-code scan and seeded simulated annealing.

use std::time::{Duration, Instant};

use num_bigint::BigInt;
use num_traits::{ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::poly::{common_denominator, QuboModel, Rational};

pub const EXHAUSTIVE_CAP: usize = 26;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SolveError {
    #[error("exhaustive search supports at most {cap} variables, got {n}")]
    TooLarge { n: usize, cap: usize },
    #[error("simulated annealing needs at least one variable")]
    Empty,
}

/// QUBO with integer coefficients (`scale` times the true values) in adjacency form.
/// Bit `n - 1 - i` of a mask holds variable `i`, so numeric mask order is lexicographic.
#[derive(Clone, Debug)]
pub struct ScaledQubo {
    pub n: usize,
    pub linear: Vec<i128>,
    pub neighbors: Vec<Vec<(usize, i128)>>,
    pub constant: i128,
    pub scale: BigInt,
}

impl ScaledQubo {
    pub fn new(q: &QuboModel) -> Self {
        let scale = common_denominator(q.coefficients.values().chain([&q.constant]));
        let to_int = |c: &Rational| -> i128 {
            (c * Rational::from_integer(scale.clone())).to_integer().to_i128().expect("scaled coefficient overflows i128")
        };
        let mut linear = vec![0i128; q.dimension];
        let mut neighbors = vec![Vec::new(); q.dimension];
        for ((i, j), c) in &q.coefficients {
            let v = to_int(c);
            if i == j {
                linear[*i] += v;
            } else {
                neighbors[*i].push((*j, v));
                neighbors[*j].push((*i, v));
            }
        }
        ScaledQubo { n: q.dimension, linear, neighbors, constant: to_int(&q.constant), scale }
    }

    pub fn bit(&self, i: usize) -> u64 {
        1u64 << (self.n - 1 - i)
    }

    pub fn energy(&self, mask: u64) -> i128 {
        let mut e = self.constant;
        for i in 0..self.n {
            if mask & self.bit(i) != 0 {
                e += self.linear[i];
                for (j, w) in &self.neighbors[i] {
                    if *j > i && mask & self.bit(*j) != 0 {
                        e += w;
                    }
                }
            }
        }
        e
    }

    /// Energy change from flipping variable `i`.
    pub fn flip_delta(&self, mask: u64, i: usize) -> i128 {
        let mut field = self.linear[i];
        for (j, w) in &self.neighbors[i] {
            if mask & self.bit(*j) != 0 {
                field += w;
            }
        }
        if mask & self.bit(i) != 0 {
            -field
        } else {
            field
        }
    }

    pub fn unscale(&self, v: i128) -> Rational {
        Rational::new(BigInt::from(v), self.scale.clone())
    }

    pub fn to_bits(&self, mask: u64) -> Vec<bool> {
        (0..self.n).map(|i| mask & self.bit(i) != 0).collect()
    }
}

/// Outcome of a full scan: minimum, smallest argmin, and whether every argmin passes a predicate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ScanResult {
    pub min: i128,
    pub argmin: u64,
    pub all_pass: bool,
    /// Smallest argmin failing the predicate.
    pub first_failure: Option<u64>,
    pub checked: u64,
}

impl ScanResult {
    fn visit(&mut self, energy: i128, mask: u64, pass: &impl Fn(u64) -> bool) {
        if energy < self.min {
            let ok = pass(mask);
            *self = ScanResult { min: energy, argmin: mask, all_pass: ok, first_failure: (!ok).then_some(mask), checked: self.checked };
        } else if energy == self.min {
            self.argmin = self.argmin.min(mask);
            if !pass(mask) {
                self.all_pass = false;
                self.first_failure = Some(self.first_failure.map_or(mask, |f| f.min(mask)));
            }
        }
    }

    fn merge(self, other: ScanResult) -> ScanResult {
        let checked = self.checked + other.checked;
        let mut out = match self.min.cmp(&other.min) {
            std::cmp::Ordering::Less => self,
            std::cmp::Ordering::Greater => other,
            std::cmp::Ordering::Equal => ScanResult {
                min: self.min,
                argmin: self.argmin.min(other.argmin),
                all_pass: self.all_pass && other.all_pass,
                first_failure: match (self.first_failure, other.first_failure) {
                    (Some(a), Some(b)) => Some(a.min(b)),
                    (a, b) => a.or(b),
                },
                checked: 0,
            },
        };
        out.checked = checked;
        out
    }
}

/// Visit every assignment, in parallel chunks over the leading bits and Gray code within a chunk.
pub fn exhaustive_scan(q: &ScaledQubo, pass: impl Fn(u64) -> bool + Sync) -> ScanResult {
    let n = q.n;
    let prefix_bits = n.min(8);
    let low = n - prefix_bits;
    let chunk = |prefix: u64| -> ScanResult {
        let mut mask = prefix << low;
        let mut energy = q.energy(mask);
        let mut r = ScanResult { min: i128::MAX, argmin: u64::MAX, all_pass: true, first_failure: None, checked: 0 };
        r.visit(energy, mask, &pass);
        for t in 1u64..(1u64 << low) {
            let i = n - 1 - t.trailing_zeros() as usize;
            energy += q.flip_delta(mask, i);
            mask ^= q.bit(i);
            r.visit(energy, mask, &pass);
        }
        r.checked = 1u64 << low;
        r
    };
    (0..1u64 << prefix_bits)
        .into_par_iter()
        .map(chunk)
        .collect::<Vec<_>>()
        .into_iter()
        .reduce(ScanResult::merge)
        .expect("at least one chunk")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Exhaustive,
    Sa,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HistorySample {
    pub iteration: u64,
    pub seconds: f64,
    pub energy: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveResult {
    pub best_assignment: Vec<bool>,
    /// Exact energy at `best_assignment`.
    pub best_energy: Rational,
    pub method: Method,
    pub iterations: u64,
    pub restarts: usize,
    pub elapsed: Duration,
    pub seed: Option<u64>,
    pub history: Option<Vec<HistorySample>>,
}

impl SolveResult {
    pub fn to_json(&self, names: &[String]) -> serde_json::Value {
        serde_json::json!({
            "method": self.method,
            "best_energy": crate::poly::fmt_rational(&self.best_energy),
            "variables": names,
            "best_assignment": self.best_assignment.iter().map(|b| u8::from(*b)).collect::<Vec<_>>(),
            "iterations": self.iterations,
            "restarts": self.restarts,
            "elapsed_ms": self.elapsed.as_secs_f64() * 1000.0,
            "seed": self.seed,
        })
    }
}

/// Global minimum with the lexicographically smallest argmin (first variable most significant).
pub fn solve_exhaustive(q: &QuboModel) -> Result<SolveResult, SolveError> {
    if q.dimension > EXHAUSTIVE_CAP {
        return Err(SolveError::TooLarge { n: q.dimension, cap: EXHAUSTIVE_CAP });
    }
    let start = Instant::now();
    let scaled = ScaledQubo::new(q);
    let scan = exhaustive_scan(&scaled, |_| true);
    let best_assignment = scaled.to_bits(scan.argmin);
    Ok(SolveResult {
        best_energy: scaled.unscale(scan.min),
        best_assignment,
        method: Method::Exhaustive,
        iterations: scan.checked,
        restarts: 1,
        elapsed: start.elapsed(),
        seed: None,
        history: None,
    })
}

/// QUBO with float coefficients in adjacency form, for annealing.
#[derive(Clone, Debug)]
pub struct FloatQubo {
    pub n: usize,
    pub linear: Vec<f64>,
    pub neighbors: Vec<Vec<(usize, f64)>>,
    pub constant: f64,
    pub max_abs: f64,
}

impl FloatQubo {
    pub fn new(q: &QuboModel) -> Self {
        let f = |c: &Rational| c.to_f64().expect("finite coefficient");
        let mut linear = vec![0.0; q.dimension];
        let mut neighbors = vec![Vec::new(); q.dimension];
        for ((i, j), c) in &q.coefficients {
            if i == j {
                linear[*i] += f(c);
            } else {
                neighbors[*i].push((*j, f(c)));
                neighbors[*j].push((*i, f(c)));
            }
        }
        let max_abs = q.max_abs_entry().to_f64().unwrap_or(0.0);
        FloatQubo { n: q.dimension, linear, neighbors, constant: f(&q.constant), max_abs }
    }

    pub fn energy(&self, x: &[bool]) -> f64 {
        let mut e = self.constant;
        for i in (0..self.n).filter(|i| x[*i]) {
            e += self.linear[i];
            e += self.neighbors[i].iter().filter(|(j, _)| *j > i && x[*j]).map(|(_, w)| w).sum::<f64>();
        }
        e
    }
}

/// Current point of an annealing run with local fields kept up to date.
#[derive(Clone, Debug)]
pub struct AnnealState<'a> {
    q: &'a FloatQubo,
    x: Vec<bool>,
    field: Vec<f64>,
    energy: f64,
}

impl<'a> AnnealState<'a> {
    pub fn new(q: &'a FloatQubo, x: Vec<bool>) -> Self {
        let field = (0..q.n)
            .map(|i| q.linear[i] + q.neighbors[i].iter().filter(|(j, _)| x[*j]).map(|(_, w)| w).sum::<f64>())
            .collect();
        let energy = q.energy(&x);
        AnnealState { q, x, field, energy }
    }

    pub fn delta(&self, i: usize) -> f64 {
        if self.x[i] {
            -self.field[i]
        } else {
            self.field[i]
        }
    }

    /// Flip variable `i` and return the energy change.
    pub fn flip(&mut self, i: usize) -> f64 {
        let d = self.delta(i);
        self.x[i] = !self.x[i];
        let sign = if self.x[i] { 1.0 } else { -1.0 };
        for (j, w) in &self.q.neighbors[i] {
            self.field[*j] += sign * w;
        }
        self.energy += d;
        d
    }

    pub fn energy(&self) -> f64 {
        self.energy
    }

    pub fn x(&self) -> &[bool] {
        &self.x
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Budget {
    Iterations(u64),
    Time(Duration),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SaParams {
    pub seed: u64,
    pub budget: Budget,
    pub restarts: usize,
    /// Keep this many evenly spaced history samples of the best energy.
    pub history_samples: Option<usize>,
}

impl SaParams {
    pub fn iterations(seed: u64, iterations: u64) -> Self {
        SaParams { seed, budget: Budget::Iterations(iterations), restarts: 1, history_samples: None }
    }
}

struct RunOutcome {
    x: Vec<bool>,
    iterations: u64,
    history: Vec<HistorySample>,
}

fn anneal_once(q: &FloatQubo, seed: u64, budget: Budget, samples: Option<usize>) -> RunOutcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x0: Vec<bool> = (0..q.n).map(|_| rng.gen()).collect();
    let mut state = AnnealState::new(q, x0);
    let mut best = state.x().to_vec();
    let mut best_energy = state.energy();
    let t0 = if q.max_abs > 0.0 { q.max_abs } else { 1.0 };
    let ratio: f64 = 1e-3;
    let cap = match budget {
        Budget::Iterations(n) => n,
        Budget::Time(_) => u64::MAX,
    };
    let every = match (samples, budget) {
        (Some(s), Budget::Iterations(n)) => (n / s.max(1) as u64).max(1),
        (Some(_), Budget::Time(_)) => 1024,
        (None, _) => u64::MAX,
    };
    let mut history = Vec::new();
    let mut progress = 0.0f64;
    let mut t = 0u64;
    while t < cap {
        match budget {
            Budget::Iterations(n) => progress = t as f64 / n as f64,
            Budget::Time(limit) => {
                if t.is_multiple_of(256) {
                    progress = start.elapsed().as_secs_f64() / limit.as_secs_f64();
                    if progress >= 1.0 {
                        break;
                    }
                }
            }
        }
        let temp = t0 * ratio.powf(progress);
        let i = rng.gen_range(0..q.n);
        let d = state.delta(i);
        if d <= 0.0 || rng.gen::<f64>() < (-d / temp).exp() {
            state.flip(i);
            if state.energy() < best_energy {
                best_energy = state.energy();
                best.copy_from_slice(state.x());
            }
        }
        t += 1;
        if t.is_multiple_of(every) {
            history.push(HistorySample { iteration: t, seconds: start.elapsed().as_secs_f64(), energy: best_energy });
        }
    }
    RunOutcome { x: best, iterations: t, history }
}

/// One-flip Metropolis annealing with geometric cooling from `max |Q|` to a thousandth of it.
/// Restarts run in parallel with seeds `seed + r`; the best exact energy wins, ties to the lowest restart.
pub fn solve_sa(q: &QuboModel, params: &SaParams) -> Result<SolveResult, SolveError> {
    if q.dimension == 0 {
        return Err(SolveError::Empty);
    }
    let start = Instant::now();
    let fq = FloatQubo::new(q);
    let runs: Vec<RunOutcome> = (0..params.restarts.max(1))
        .into_par_iter()
        .map(|r| anneal_once(&fq, params.seed.wrapping_add(r as u64), params.budget, params.history_samples))
        .collect();
    let mut best: Option<(Rational, usize)> = None;
    for (idx, run) in runs.iter().enumerate() {
        let e = q.evaluate(&run.x);
        if best.as_ref().is_none_or(|(b, _)| &e < b) {
            best = Some((e, idx));
        }
    }
    let (best_energy, idx) = best.expect("at least one restart");
    let iterations = runs.iter().map(|r| r.iterations).sum();
    let history = params.history_samples.map(|_| runs[idx].history.clone());
    Ok(SolveResult {
        best_assignment: runs[idx].x.clone(),
        best_energy,
        method: Method::Sa,
        iterations,
        restarts: runs.len(),
        elapsed: start.elapsed(),
        seed: Some(params.seed),
        history,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum Gap {
    Percent { value: f64 },
    NoFeasible,
    /// Reference optimum is zero.
    Undefined,
}

/// `100 (z* - z) / z*` on domain objective values; `None` for an infeasible decode.
pub fn gap(reference: &Rational, found: Option<&Rational>) -> Gap {
    match found {
        None => Gap::NoFeasible,
        Some(_) if reference.is_zero() => Gap::Undefined,
        Some(z) => {
            let g = (reference - z) / reference * Rational::from_integer(100.into());
            Gap::Percent { value: g.to_f64().unwrap_or(f64::NAN) }
        }
    }
}

/// Largest absolute difference between maintained and recomputed energy over a flip sequence.
pub fn flip_audit(q: &QuboModel, seed: u64, flips: usize) -> f64 {
    let fq = FloatQubo::new(q);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x0: Vec<bool> = (0..q.dimension).map(|_| rng.gen()).collect();
    let mut state = AnnealState::new(&fq, x0);
    let mut worst = 0.0f64;
    for _ in 0..flips {
        state.flip(rng.gen_range(0..q.dimension));
        let exact = q.evaluate(state.x()).to_f64().unwrap_or(f64::NAN);
        worst = worst.max((exact - state.energy()).abs());
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::{rat, Polynomial, VarId};

    fn qubo(p: &Polynomial) -> QuboModel {
        p.to_qubo().unwrap()
    }

    fn mis_k3() -> QuboModel {
        let x = |i: u32| VarId::original(i);
        let mut p = Polynomial::zero();
        for i in 0..3 {
            p.add_term([x(i)], rat(-1));
        }
        for (a, b) in [(0, 1), (0, 2), (1, 2)] {
            p.add_term([x(a), x(b)], rat(2));
        }
        qubo(&p)
    }

    #[test]
    fn exhaustive_examples() {
        let r = solve_exhaustive(&mis_k3()).unwrap();
        assert_eq!(r.best_energy, rat(-1));
        assert_eq!(r.best_assignment, vec![false, false, true]);

        let zero = QuboModel {
            dimension: 3,
            coefficients: Default::default(),
            constant: rat(0),
            variables: (0..3).map(VarId::original).collect(),
            decode: vec!["a".into(), "b".into(), "c".into()],
        };
        let r = solve_exhaustive(&zero).unwrap();
        assert_eq!(r.best_energy, rat(0));
        assert_eq!(r.best_assignment, vec![false; 3]);

        let one = qubo(&Polynomial::monomial([VarId::original(0)], rat(-3)));
        let r = solve_exhaustive(&one).unwrap();
        assert_eq!((r.best_energy, r.best_assignment), (rat(-3), vec![true]));
    }

    #[test]
    fn sa_is_deterministic_and_finds_k3() {
        let params = SaParams { restarts: 3, history_samples: Some(10), ..SaParams::iterations(5, 2000) };
        let a = solve_sa(&mis_k3(), &params).unwrap();
        let b = solve_sa(&mis_k3(), &params).unwrap();
        assert_eq!(a.best_assignment, b.best_assignment);
        assert_eq!(a.best_energy, rat(-1));
        let h = a.history.unwrap();
        assert!(h.windows(2).all(|w| w[1].energy <= w[0].energy));
    }

    #[test]
    fn gap_cases() {
        assert_eq!(gap(&rat(10), Some(&rat(9))), Gap::Percent { value: 10.0 });
        assert_eq!(gap(&rat(10), Some(&rat(10))), Gap::Percent { value: 0.0 });
        assert_eq!(gap(&rat(10), None), Gap::NoFeasible);
        assert_eq!(gap(&rat(0), Some(&rat(0))), Gap::Undefined);
    }

    #[test]
    fn audit_small() {
        assert!(flip_audit(&mis_k3(), 1, 1000) < 1e-9);
    }
}
