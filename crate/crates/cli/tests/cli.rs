use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn qubo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qubo")).args(args).env_remove("QUBO_THREADS").output().expect("binary runs")
}

fn ok_json(args: &[&str]) -> Value {
    let out = qubo(args);
    assert_eq!(out.status.code(), Some(0), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("JSON output")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn analyze_reports_every_constraint() {
    let out = qubo(&["analyze", path(&data("blp1.json"))]);
    assert!(out.status.success());
    let records: Vec<Value> =
        String::from_utf8(out.stdout).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    let ks: Vec<_> = records.iter().map(|r| (r["name"].as_str().unwrap(), r["K"].as_u64().unwrap(), r["k"].as_u64().unwrap())).collect();
    assert_eq!(ks, [("c1", 5, 3), ("c2", 6, 2), ("c3", 4, 3)]);
    assert_eq!(records[2]["sidedness"], "upper-one-sided");
    let cert = ok_json(&["analyze", "--certificate", path(&data("blp1.json"))]);
    assert_eq!(cert["kn"], 3);
    assert_eq!(cert["compact_guaranteed"], false);
}

#[test]
fn transform_writes_qubo_trace_and_coordinates() {
    let dir = tempfile::tempdir().unwrap();
    let (trace, coo) = (dir.path().join("trace.json"), dir.path().join("q.qubo"));
    let q = ok_json(&[
        "transform", "--variant", "tr6.2", "--lambda", "auto", path(&data("blp1.json")),
        "--trace", path(&trace), "--coo", path(&coo),
    ]);
    assert_eq!(q["n"], 3);
    assert_eq!(q["decode"], serde_json::json!(["x1", "x2", "x3"]));
    let trace: Value = serde_json::from_str(&std::fs::read_to_string(&trace).unwrap()).unwrap();
    assert_eq!(trace["entries"].as_array().unwrap().len(), 3);
    assert_eq!(trace["compact"], true);
    let text = std::fs::read_to_string(&coo).unwrap();
    let terms = q["terms"].as_array().unwrap().len();
    assert!(text.contains(&format!("p qubo 3 {terms} {}", q["constant"])), "{text}");
    let r = ok_json(&["solve", "--method", "exhaustive", path(&coo)]);
    assert_eq!(r["best_energy"], "1");
    assert_eq!(r["best_assignment"], serde_json::json!([0, 1, 0]));
    let cts = ok_json(&["transform", "--variant", "cts", path(&data("blp1.json"))]);
    assert_eq!(cts["n"], 8);
}

#[test]
fn verify_exit_codes() {
    for variant in ["tr4.1", "tr4.2", "tr6.1", "tr6.2", "cts"] {
        let v = ok_json(&["verify", "--model", path(&data("blp1.json")), "--variant", variant]);
        assert_eq!(v["ok"], true, "{variant}");
        assert_eq!(v["summary"]["blp_optimum"], "1");
    }
    let good = ok_json(&["verify", "--vip", path(&data("xor_penalty.json")), "--constraint", path(&data("xor.json"))]);
    assert_eq!(good["checked"], 4);

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"terms": [{"vars": ["a"], "coef": 1}]}"#).unwrap();
    let out = qubo(&["verify", "--vip", path(&bad), "--constraint", path(&data("xor.json"))]);
    assert_eq!(out.status.code(), Some(1));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["ok"], false);
    assert!(v["counterexample"]["assignment"].is_object());

    assert_eq!(qubo(&["verify", "--model", "missing.json"]).status.code(), Some(2));
    assert_eq!(qubo(&["verify"]).status.code(), Some(2));
}

#[test]
fn gen_encode_solve_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let graph = dir.path().join("g.dimacs");
    let gen = |out: &Path| qubo(&["gen", "--problem", "mis", "--n", "14", "--p", "0.3", "--seed", "7", "-o", path(out)]);
    assert!(gen(&graph).status.success());
    let again = dir.path().join("g2.dimacs");
    assert!(gen(&again).status.success());
    assert_eq!(std::fs::read(&graph).unwrap(), std::fs::read(&again).unwrap());

    let forms = dir.path().join("forms");
    assert!(qubo(&["encode", "--problem", "mis", path(&graph), "--out-dir", path(&forms)]).status.success());
    let q1: Value = serde_json::from_str(&std::fs::read_to_string(forms.join("QUBO1.json")).unwrap()).unwrap();
    let q2: Value = serde_json::from_str(&std::fs::read_to_string(forms.join("QUBO2.json")).unwrap()).unwrap();
    let edges = std::fs::read_to_string(&graph).unwrap().lines().filter(|l| l.starts_with('e')).count();
    assert_eq!(q1["n"].as_u64().unwrap(), q2["n"].as_u64().unwrap() + edges as u64);

    let exact = ok_json(&["solve", "--method", "exhaustive", path(&forms.join("QUBO2.json"))]);
    assert_eq!(exact["decoded"]["independent"], true);
    let size = exact["decoded"]["size"].as_u64().unwrap().to_string();
    let q2_path = forms.join("QUBO2.json");
    let sa_args = ["solve", path(&q2_path), "--seed", "3", "--iters", "20000", "--restarts", "2", "--reference", &size];
    let sa = ok_json(&sa_args);
    assert_eq!(sa["feasible"], true);
    assert_eq!(sa["gap"]["status"], "percent");
    assert_eq!(ok_json(&sa_args)["best_assignment"], sa["best_assignment"]);

    let missing_seed = qubo(&["solve", path(&forms.join("QUBO2.json"))]);
    assert_eq!(missing_seed.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&missing_seed.stderr).contains("--seed"));
}

#[test]
fn other_problems_encode_and_decode() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("max2sat", vec!["--n", "4", "--m", "6"], "QUBO2"),
        ("lop", vec!["--n", "3"], "QUBO"),
        ("cdp", vec!["--n", "4", "--p", "0.6"], "QUBO1"),
    ];
    for (problem, extra, form) in cases {
        let inst = dir.path().join(problem);
        let mut args = vec!["gen", "--problem", problem, "--seed", "1", "-o", path(&inst)];
        args.extend(extra);
        assert!(qubo(&args).status.success(), "{problem}");
        let enc = qubo(&["encode", "--problem", problem, path(&inst), "--form", form]);
        assert!(enc.status.success(), "{problem}: {}", String::from_utf8_lossy(&enc.stderr));
        let file = dir.path().join(format!("{problem}.json"));
        std::fs::write(&file, &enc.stdout).unwrap();
        let r = ok_json(&["solve", "--method", "exhaustive", path(&file)]);
        assert_eq!(r["feasible"], true, "{problem}");
        assert_eq!(r["decoded"]["problem"], problem);
    }
    let bad = qubo(&["encode", "--problem", "lop", path(&dir.path().join("lop")), "--form", "QUBO9"]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn bench_rows_and_buckets_agree() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("bench.csv");
    let report = ok_json(&["bench", "--sizes", "15,20", "--p", "0.2", "--seeds", "2", "--budget-iters", "3000", "--csv", path(&csv)]);
    let rows = report["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 8);
    let order: Vec<_> = rows.iter().map(|r| (r["n"].as_u64().unwrap(), r["seed"].as_u64().unwrap(), r["form"].as_str().unwrap())).collect();
    assert_eq!(order[..4], [(15, 0, "QUBO2"), (15, 0, "QUBO1"), (15, 1, "QUBO2"), (15, 1, "QUBO1")]);
    for b in report["buckets"].as_array().unwrap() {
        let members: Vec<_> = rows.iter().filter(|r| r["n"] == b["n"] && r["form"] == b["form"]).collect();
        assert_eq!(b["instances"].as_u64().unwrap() as usize, members.len());
        let feasible = members.iter().filter(|r| r["feasible"] == true).count();
        assert_eq!(b["feasible"].as_u64().unwrap() as usize, feasible);
    }
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 9);
    assert!(text.starts_with("instance,n,p,seed,edges,form,dimension,feasible,objective,gap,elapsed_ms\n"));
    let out = qubo(&["bench", "--problem", "lop"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn thread_count_comes_from_the_environment() {
    let out = Command::new(env!("CARGO_BIN_EXE_qubo"))
        .args(["analyze", path(&data("blp1.json"))])
        .env("QUBO_THREADS", "2")
        .output()
        .unwrap();
    assert!(out.status.success());
    let bad = Command::new(env!("CARGO_BIN_EXE_qubo"))
        .args(["analyze", path(&data("blp1.json"))])
        .env("QUBO_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
}
