//! Independent-set benchmark: compact versus slack QUBO under simulated annealing.

use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::poly::{rat, Rational};
use crate::problems::{encode_mis, gnp_graph, ProblemError, MIS_DEFAULT_LAMBDA};
use crate::solver::{gap, solve_sa, Gap, SaParams};

#[derive(Clone, Debug, PartialEq)]
pub struct BenchConfig {
    pub sizes: Vec<usize>,
    pub probabilities: Vec<f64>,
    /// Instance seeds `0..seeds`.
    pub seeds: u64,
    pub iterations: u64,
    pub restarts: usize,
    pub lambda: Rational,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            sizes: vec![50, 100, 200],
            probabilities: vec![0.05, 0.1],
            seeds: 5,
            iterations: 200_000,
            restarts: 1,
            lambda: rat(MIS_DEFAULT_LAMBDA),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchRow {
    pub instance: String,
    pub n: usize,
    pub p: f64,
    pub seed: u64,
    pub edges: usize,
    pub form: String,
    pub dimension: usize,
    pub feasible: bool,
    /// Decoded set size, zero when infeasible.
    pub objective: usize,
    pub gap: Gap,
    pub elapsed_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BucketSummary {
    pub n: usize,
    pub p: f64,
    pub form: String,
    pub instances: usize,
    pub feasible: usize,
    pub mean_objective: f64,
    pub mean_dimension: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    pub buckets: Vec<BucketSummary>,
}

const FORMS: [&str; 2] = ["QUBO2", "QUBO1"];

fn instance_rows(n: usize, p: f64, seed: u64, cfg: &BenchConfig) -> Result<Vec<BenchRow>, ProblemError> {
    let g = gnp_graph(n, p, seed)?;
    let enc = encode_mis(&g, cfg.lambda.clone())?;
    let mut rows = Vec::new();
    for form in FORMS {
        let q = enc.form(form).expect("both forms encoded");
        let start = Instant::now();
        let params = SaParams { restarts: cfg.restarts, ..SaParams::iterations(seed, cfg.iterations) };
        let r = solve_sa(&q.qubo, &params).expect("nonempty graph");
        let d = enc.decode(q.decode(&r.best_assignment));
        rows.push(BenchRow {
            instance: format!("gnp_n{n}_p{p}_s{seed}"),
            n,
            p,
            seed,
            edges: g.num_edges(),
            form: form.to_string(),
            dimension: q.qubo.dimension,
            feasible: d.feasible(),
            objective: d.objective().map_or(0, |v| v.to_integer().try_into().unwrap_or(0)),
            gap: Gap::NoFeasible,
            elapsed_ms: start.elapsed().as_secs_f64() * 1000.0,
        });
    }
    let best = rows.iter().filter(|r| r.feasible).map(|r| r.objective).max();
    for row in &mut rows {
        row.gap = match best {
            Some(b) => gap(&rat(b as i64), row.feasible.then(|| rat(row.objective as i64)).as_ref()),
            None => Gap::NoFeasible,
        };
    }
    Ok(rows)
}

/// Per-(n, p, form) aggregates recomputed from rows.
pub fn summarize(rows: &[BenchRow]) -> Vec<BucketSummary> {
    let mut buckets: Vec<BucketSummary> = Vec::new();
    for row in rows {
        let idx = match buckets.iter().position(|b| b.n == row.n && b.p == row.p && b.form == row.form) {
            Some(i) => i,
            None => {
                buckets.push(BucketSummary {
                    n: row.n,
                    p: row.p,
                    form: row.form.clone(),
                    instances: 0,
                    feasible: 0,
                    mean_objective: 0.0,
                    mean_dimension: 0.0,
                });
                buckets.len() - 1
            }
        };
        let b = &mut buckets[idx];
        b.instances += 1;
        b.feasible += usize::from(row.feasible);
        b.mean_objective += row.objective as f64;
        b.mean_dimension += row.dimension as f64;
    }
    for b in &mut buckets {
        b.mean_objective /= b.instances as f64;
        b.mean_dimension /= b.instances as f64;
    }
    buckets
}

/// Rows are ordered by (n, p, seed, form) regardless of scheduling.
pub fn run_mis_bench(cfg: &BenchConfig) -> Result<BenchReport, ProblemError> {
    let mut jobs = Vec::new();
    for &n in &cfg.sizes {
        for &p in &cfg.probabilities {
            for seed in 0..cfg.seeds {
                jobs.push((n, p, seed));
            }
        }
    }
    let per_job: Vec<Vec<BenchRow>> =
        jobs.par_iter().map(|&(n, p, seed)| instance_rows(n, p, seed, cfg)).collect::<Result<_, _>>()?;
    let rows: Vec<BenchRow> = per_job.into_iter().flatten().collect();
    Ok(BenchReport { buckets: summarize(&rows), rows })
}

impl BenchReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("instance,n,p,seed,edges,form,dimension,feasible,objective,gap,elapsed_ms\n");
        for r in &self.rows {
            let gap = match r.gap {
                Gap::Percent { value } => format!("{value:.4}"),
                Gap::NoFeasible | Gap::Undefined => "-".to_string(),
            };
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{:.3}\n",
                r.instance, r.n, r.p, r.seed, r.edges, r.form, r.dimension, r.feasible, r.objective, gap, r.elapsed_ms
            ));
        }
        out
    }
}
