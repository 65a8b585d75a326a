//! `qubo`: analyze, transform, verify, encode, generate, solve and benchmark.

mod formats;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use qubo_core::bench::{run_mis_bench, BenchConfig};
use qubo_core::levelness::{compact_certificate, refine_and_classify};
use qubo_core::model::{parse_dimacs_cnf, parse_dimacs_graph, parse_model_json, BlpModel, WeightMatrix};
use qubo_core::pipeline::{transform, PenaltyMode, PipelineConfig, Variant};
use qubo_core::poly::{fmt_rational, parse_rational, rat, Rational, VarId};
use qubo_core::problems::{
    decode_cdp, decode_lop, decode_max2sat, decode_mis, encode_cdp, encode_lop, encode_max2sat, encode_mis,
    gnp_graph, random_2cnf, random_weights, ProblemEncoding, MIS_DEFAULT_LAMBDA,
};
use qubo_core::solver::{gap, solve_exhaustive, solve_sa, Budget, SaParams, SolveResult};
use qubo_core::verify::{check_augmented_vip, check_equivalence, Verdict};
use serde_json::{json, Value};

use formats::{parse_qubo, parse_vip_case, qubo_to_coordinate, qubo_to_json, QuboFile, QuboMeta};

/// Worker threads for parallel enumeration, annealing restarts and benchmarks.
const THREADS_ENV: &str = "QUBO_THREADS";

#[derive(Parser)]
#[command(name = "qubo", version, about = "Binary linear programs to QUBO via multilevel constraint transformations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Levelness report for every constraint of a model, one JSON record per line.
    Analyze(AnalyzeArgs),
    /// Compile a model JSON into a QUBO.
    Transform(TransformArgs),
    /// Exhaustively check a penalty against a constraint, or a compiled model against its BLP.
    Verify(VerifyArgs),
    /// Encode a problem instance into its QUBO forms.
    Encode(EncodeArgs),
    /// Generate a random instance.
    Gen(GenArgs),
    /// Minimize a QUBO from JSON or coordinate text.
    Solve(SolveArgs),
    /// Compact versus slack MIS forms under annealing over a grid of random graphs.
    Bench(BenchArgs),
}

#[derive(Args)]
struct AnalyzeArgs {
    model: PathBuf,
    /// Print the compactness certificate instead of per-constraint records.
    #[arg(long)]
    certificate: bool,
}

#[derive(Args, Clone)]
struct CompileArgs {
    #[arg(long, default_value = "tr6.2", value_parser = parse_variant)]
    variant: Variant,
    /// `auto`, `search`, or a positive number applied to every constraint.
    #[arg(long, default_value = "auto")]
    lambda: String,
}

#[derive(Args)]
struct TransformArgs {
    model: PathBuf,
    #[command(flatten)]
    compile: CompileArgs,
    /// Write the transformation trace as JSON.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Write the QUBO JSON here instead of standard output.
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Also write the QUBO in coordinate text format.
    #[arg(long)]
    coo: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Penalty polynomial JSON.
    #[arg(long, requires = "constraint", conflicts_with = "model")]
    vip: Option<PathBuf>,
    /// Constraint JSON.
    #[arg(long, requires = "vip")]
    constraint: Option<PathBuf>,
    /// Model JSON to compile and compare with its brute-force optimum.
    #[arg(long, required_unless_present = "vip")]
    model: Option<PathBuf>,
    #[command(flatten)]
    compile: CompileArgs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum ProblemKind {
    Max2sat,
    Lop,
    Cdp,
    Mis,
}

#[derive(Args)]
struct EncodeArgs {
    #[arg(long, value_enum)]
    problem: ProblemKind,
    /// DIMACS graph (mis, cdp), DIMACS CNF (max2sat) or weights JSON (lop).
    instance: PathBuf,
    /// Form printed to standard output; defaults to the last (compact) form.
    #[arg(long)]
    form: Option<String>,
    /// `auto`, `search`, or a positive number.
    #[arg(long, default_value = "auto")]
    lambda: String,
    /// Write every form to `<dir>/<form>.json` and `<dir>/<form>.qubo`.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_enum)]
    problem: ProblemKind,
    /// Vertices or variables.
    #[arg(long)]
    n: usize,
    /// Edge probability for graph problems.
    #[arg(long)]
    p: Option<f64>,
    /// Clause count for max2sat.
    #[arg(long)]
    m: Option<usize>,
    /// Weight range for lop, as `lo,hi`.
    #[arg(long, default_value = "-9,9", value_parser = parse_range)]
    weights: (i64, i64),
    #[arg(long)]
    seed: u64,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Exhaustive,
    Sa,
}

#[derive(Args)]
struct SolveArgs {
    qubo: PathBuf,
    #[arg(long, value_enum, default_value = "sa")]
    method: MethodArg,
    /// Required for annealing.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, conflicts_with = "time_ms")]
    iters: Option<u64>,
    #[arg(long)]
    time_ms: Option<u64>,
    #[arg(long, default_value_t = 1)]
    restarts: usize,
    /// Write best-energy samples as CSV.
    #[arg(long)]
    history: Option<PathBuf>,
    /// Known optimum of the decoded objective, for the optimality gap.
    #[arg(long, value_parser = parse_rational_arg)]
    reference: Option<Rational>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, value_enum, default_value = "mis")]
    problem: ProblemKind,
    #[arg(long, value_delimiter = ',', default_value = "50,100,200")]
    sizes: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "0.05,0.1")]
    p: Vec<f64>,
    /// Seeds `0..seeds` per (size, p).
    #[arg(long, default_value_t = 5)]
    seeds: u64,
    #[arg(long, default_value_t = 200_000)]
    budget_iters: u64,
    #[arg(long, default_value_t = 1)]
    restarts: usize,
    #[arg(long, value_parser = parse_rational_arg)]
    lambda: Option<Rational>,
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

fn parse_variant(s: &str) -> Result<Variant, String> {
    s.parse()
}

fn parse_rational_arg(s: &str) -> Result<Rational, String> {
    parse_rational(s).ok_or_else(|| format!("{s:?} is not a number; use an integer, decimal or p/q"))
}

fn parse_range(s: &str) -> Result<(i64, i64), String> {
    let (lo, hi) = s.split_once(',').ok_or("expected lo,hi")?;
    let lo = lo.trim().parse().map_err(|_| format!("bad lower bound {lo:?}"))?;
    let hi = hi.trim().parse().map_err(|_| format!("bad upper bound {hi:?}"))?;
    Ok((lo, hi))
}

fn penalty_mode(lambda: &str) -> Result<PenaltyMode> {
    match lambda {
        "auto" => Ok(PenaltyMode::Auto),
        "search" => Ok(PenaltyMode::Search),
        v => {
            let w = parse_rational(v).ok_or_else(|| anyhow!("--lambda {v:?}: expected auto, search or a positive number"))?;
            if w <= rat(0) {
                bail!("--lambda must be positive, got {v}");
            }
            Ok(PenaltyMode::Uniform(w))
        }
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => write(p, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn pretty(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("serializable") + "\n"
}

fn load_model(path: &Path) -> Result<BlpModel> {
    parse_model_json(&read(path)?).with_context(|| format!("in {}", path.display()))
}

fn model_namer(m: &BlpModel) -> impl Fn(VarId) -> String + '_ {
    move |v| if v.is_ancillary() { v.to_string() } else { m.name_of(v) }
}

fn analyze(args: &AnalyzeArgs) -> Result<ExitCode> {
    let m = load_model(&args.model)?;
    if args.certificate {
        print!("{}", pretty(&serde_json::to_value(compact_certificate(&m)?)?));
        return Ok(ExitCode::SUCCESS);
    }
    for c in &m.constraints {
        let r = refine_and_classify(c)?;
        let record = json!({
            "name": r.name,
            "H": r.values.iter().map(fmt_rational).collect::<Vec<_>>(),
            "K": r.big_k(),
            "k": r.k,
            "i": r.i,
            "sidedness": r.sidedness,
            "regular": r.regular,
            "kappa": r.kappa(),
            "support": r.support.iter().map(|v| m.name_of(*v)).collect::<Vec<_>>(),
        });
        println!("{record}");
    }
    Ok(ExitCode::SUCCESS)
}

fn compile(m: &BlpModel, args: &CompileArgs) -> Result<qubo_core::pipeline::CompiledQubo> {
    let cfg = PipelineConfig::new(args.variant).with_penalty(penalty_mode(&args.lambda)?);
    Ok(transform(m, &cfg)?)
}

fn run_transform(args: &TransformArgs) -> Result<ExitCode> {
    let m = load_model(&args.model)?;
    let q = compile(&m, &args.compile)?;
    for w in &q.trace.warnings {
        eprintln!("warning: {w}");
    }
    if let Some(path) = &args.trace {
        let mut trace = q.trace.to_json(model_namer(&m));
        trace["certificate"] = serde_json::to_value(&q.certificate)?;
        trace["ancillary_count"] = json!(q.ancillary_count);
        trace["compact"] = json!(q.is_compact);
        write(path, &pretty(&trace))?;
    }
    if let Some(path) = &args.coo {
        write(path, &qubo_to_coordinate(&q.qubo))?;
    }
    let meta = QuboMeta { num_original: Some(q.num_original), sense: Some(q.sense), ..Default::default() };
    emit(args.out.as_deref(), &pretty(&qubo_to_json(&q.qubo, &meta)))?;
    Ok(ExitCode::SUCCESS)
}

fn verdict_exit(v: &Verdict) -> ExitCode {
    if v.ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn run_verify(args: &VerifyArgs) -> Result<ExitCode> {
    if let (Some(vip), Some(constraint)) = (&args.vip, &args.constraint) {
        let case = parse_vip_case(&read(vip)?, &read(constraint)?)?;
        let v = check_augmented_vip(&case.penalty, &case.constraint, &case.ancillaries)?;
        let name = |id: VarId| case.names.get(&id).cloned().unwrap_or_else(|| id.to_string());
        print!("{}", pretty(&v.to_json(name)));
        return Ok(verdict_exit(&v));
    }
    let path = args.model.as_ref().expect("clap requires --model without --vip");
    let m = load_model(path)?;
    let q = compile(&m, &args.compile)?;
    let v = check_equivalence(&m, &q)?;
    let mut out = v.to_json(model_namer(&m));
    out["variant"] = json!(args.compile.variant);
    out["dimension"] = json!(q.qubo.dimension);
    print!("{}", pretty(&out));
    Ok(verdict_exit(&v))
}

fn load_encoding(kind: ProblemKind, text: &str, lambda: &str) -> Result<ProblemEncoding> {
    let mode = penalty_mode(lambda)?;
    Ok(match kind {
        ProblemKind::Max2sat => encode_max2sat(&parse_dimacs_cnf(text)?, &mode)?,
        ProblemKind::Lop => encode_lop(&WeightMatrix::from_json(text)?, &mode)?,
        ProblemKind::Cdp => encode_cdp(&parse_dimacs_graph(text)?.0, &mode)?,
        ProblemKind::Mis => {
            let lambda = match mode {
                PenaltyMode::Auto => rat(MIS_DEFAULT_LAMBDA),
                PenaltyMode::Uniform(w) => w,
                _ => bail!("mis takes --lambda auto or a positive number"),
            };
            encode_mis(&parse_dimacs_graph(text)?.0, lambda)?
        }
    })
}

fn problem_name(kind: ProblemKind) -> &'static str {
    match kind {
        ProblemKind::Max2sat => "max2sat",
        ProblemKind::Lop => "lop",
        ProblemKind::Cdp => "cdp",
        ProblemKind::Mis => "mis",
    }
}

fn run_encode(args: &EncodeArgs) -> Result<ExitCode> {
    let text = read(&args.instance)?;
    let enc = load_encoding(args.problem, &text, &args.lambda)?;
    let meta = |form: &str, q: &qubo_core::pipeline::CompiledQubo| QuboMeta {
        num_original: Some(q.num_original),
        sense: Some(q.sense),
        problem: Some(problem_name(args.problem).to_string()),
        form: Some(form.to_string()),
        instance: Some(text.clone()),
    };
    if let Some(dir) = &args.out_dir {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
        for f in &enc.forms {
            write(&dir.join(format!("{}.json", f.name)), &pretty(&qubo_to_json(&f.qubo.qubo, &meta(&f.name, &f.qubo))))?;
            write(&dir.join(format!("{}.qubo", f.name)), &qubo_to_coordinate(&f.qubo.qubo))?;
        }
    }
    let names: Vec<&str> = enc.forms.iter().map(|f| f.name.as_str()).collect();
    let chosen = match &args.form {
        Some(name) => enc.forms.iter().find(|f| f.name.eq_ignore_ascii_case(name)).ok_or_else(|| {
            anyhow!("--form {name:?} is not a form of {}; choose one of {}", problem_name(args.problem), names.join(", "))
        })?,
        None => enc.forms.last().expect("every encoding has a form"),
    };
    if args.out_dir.is_none() || args.form.is_some() {
        print!("{}", pretty(&qubo_to_json(&chosen.qubo.qubo, &meta(&chosen.name, &chosen.qubo))));
    }
    Ok(ExitCode::SUCCESS)
}

fn run_gen(args: &GenArgs) -> Result<ExitCode> {
    let text = match args.problem {
        ProblemKind::Mis | ProblemKind::Cdp => {
            let p = args.p.ok_or_else(|| anyhow!("--p is required for graph problems"))?;
            gnp_graph(args.n, p, args.seed)?.to_dimacs()
        }
        ProblemKind::Max2sat => {
            let m = args.m.ok_or_else(|| anyhow!("--m is required for max2sat"))?;
            random_2cnf(args.n, m, args.seed)?.to_dimacs()
        }
        ProblemKind::Lop => pretty(&random_weights(args.n, args.weights.0, args.weights.1, args.seed)?.to_json()),
    };
    emit(args.out.as_deref(), &text)?;
    Ok(ExitCode::SUCCESS)
}

fn decode_embedded(file: &QuboFile, x: &[bool]) -> Result<Option<qubo_core::problems::Decoded>> {
    let (Some(problem), Some(text)) = (&file.meta.problem, &file.meta.instance) else {
        return Ok(None);
    };
    let n = file.meta.num_original.unwrap_or(file.qubo.dimension).min(x.len());
    let x = &x[..n];
    Ok(Some(match problem.as_str() {
        "max2sat" => decode_max2sat(&parse_dimacs_cnf(text)?, x),
        "lop" => decode_lop(&WeightMatrix::from_json(text)?, x),
        "cdp" => decode_cdp(&parse_dimacs_graph(text)?.0, x),
        "mis" => decode_mis(&parse_dimacs_graph(text)?.0, x),
        other => bail!("unknown embedded problem {other:?}"),
    }))
}

fn run_solve(args: &SolveArgs) -> Result<ExitCode> {
    let file = parse_qubo(&read(&args.qubo)?).with_context(|| format!("in {}", args.qubo.display()))?;
    let q = &file.qubo;
    if q.dimension == 0 {
        bail!("the QUBO has no variables");
    }
    let result: SolveResult = match args.method {
        MethodArg::Exhaustive => solve_exhaustive(q).map_err(|e| anyhow!("{e}; try --method sa --seed <n>"))?,
        MethodArg::Sa => {
            let budget = match (args.iters, args.time_ms) {
                (_, Some(ms)) => Budget::Time(Duration::from_millis(ms)),
                (Some(n), None) => Budget::Iterations(n),
                (None, None) => Budget::Iterations(100_000),
            };
            let params = SaParams {
                seed: args.seed.ok_or_else(|| anyhow!("--method sa needs --seed <n> so runs are reproducible"))?,
                budget,
                restarts: args.restarts.max(1),
                history_samples: args.history.as_ref().map(|_| 200),
            };
            solve_sa(q, &params)?
        }
    };
    if let Some(path) = &args.history {
        let mut csv = String::from("iteration,seconds,energy\n");
        for h in result.history.iter().flatten() {
            csv.push_str(&format!("{},{:.6},{}\n", h.iteration, h.seconds, h.energy));
        }
        write(path, &csv)?;
    }
    let mut out = result.to_json(&q.decode);
    if let Some(sense) = file.meta.sense {
        let value = match sense {
            qubo_core::model::Sense::Min => result.best_energy.clone(),
            qubo_core::model::Sense::Max => -result.best_energy.clone(),
        };
        out["objective_if_feasible"] = json!(fmt_rational(&value));
    }
    if let Some(d) = decode_embedded(&file, &result.best_assignment)? {
        out["decoded"] = serde_json::to_value(&d)?;
        out["feasible"] = json!(d.feasible());
        if let Some(reference) = &args.reference {
            out["gap"] = serde_json::to_value(gap(reference, d.objective().as_ref()))?;
        }
    }
    print!("{}", pretty(&out));
    Ok(ExitCode::SUCCESS)
}

fn run_bench(args: &BenchArgs) -> Result<ExitCode> {
    if args.problem != ProblemKind::Mis {
        bail!("bench supports --problem mis only");
    }
    let cfg = BenchConfig {
        sizes: args.sizes.clone(),
        probabilities: args.p.clone(),
        seeds: args.seeds,
        iterations: args.budget_iters,
        restarts: args.restarts.max(1),
        lambda: args.lambda.clone().unwrap_or_else(|| rat(MIS_DEFAULT_LAMBDA)),
    };
    let report = run_mis_bench(&cfg)?;
    if let Some(path) = &args.csv {
        write(path, &report.to_csv())?;
    }
    emit(args.out.as_deref(), &pretty(&serde_json::to_value(&report)?))?;
    Ok(ExitCode::SUCCESS)
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v.parse().map_err(|_| anyhow!("{THREADS_ENV}={v:?} is not a thread count"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<ExitCode> {
    configure_threads()?;
    match &cli.command {
        Command::Analyze(a) => analyze(a),
        Command::Transform(a) => run_transform(a),
        Command::Verify(a) => run_verify(a),
        Command::Encode(a) => run_encode(a),
        Command::Gen(a) => run_gen(a),
        Command::Solve(a) => run_solve(a),
        Command::Bench(a) => run_bench(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
