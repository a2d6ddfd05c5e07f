use std::path::{Path, PathBuf};
use std::process::Command;

use timefork::config::{parse_config, render_config};
use timefork::io::{load_headers, HeaderFormat};
use timefork::report;
use timefork::runner::run_experiment_with;
use timefork_core::forensics::{planted_fixture, FixtureSpec};
use timefork_core::sim::{run_experiment, SimConfig};
use timefork_core::strategy::StrategyKind;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_timefork"))
}

fn run(dir: &Path, args: &[&str]) -> i32 {
    bin().current_dir(dir).args(args).output().unwrap().status.code().unwrap()
}

fn schema(name: &str) -> serde_json::Value {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("schemas").join(format!("{name}.json"));
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn assert_valid(schema_name: &str, doc: &str) {
    let instance: serde_json::Value = serde_json::from_str(doc).unwrap();
    assert_eq!(instance["schema"], schema_name);
    let compiled = jsonschema::JSONSchema::compile(&schema(schema_name)).unwrap();
    let msgs: Vec<String> = match compiled.validate(&instance) {
        Ok(()) => Vec::new(),
        Err(errors) => errors.map(|e| format!("{} at {}", e, e.instance_path)).collect(),
    };
    assert!(msgs.is_empty(), "schema violations: {msgs:?}");
}

fn fixture_csv(spec: &FixtureSpec) -> String {
    let mut s = String::from("chain,height,timestamp,miner\n");
    for r in planted_fixture(spec).records {
        s.push_str(&format!("{},{},{},{}\n", r.chain_id, r.height, r.timestamp, r.miner));
    }
    s
}

#[test]
fn simulate_writes_schema_valid_report() {
    let dir = tempfile::tempdir().unwrap();
    let code = run(
        dir.path(),
        &["simulate", "--strategy", "suum", "--alpha", "0.25", "--blocks", "5000", "--trials", "3", "--seed", "42", "--out", "r.json", "--csv", "r.csv"],
    );
    assert_eq!(code, 0);
    let json = std::fs::read_to_string(dir.path().join("r.json")).unwrap();
    assert_valid(report::REPORT_SCHEMA, &json);
    let csv = std::fs::read_to_string(dir.path().join("r.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], report::SIM_CSV_HEADER);
    assert_eq!(lines.len(), 2);
    assert!(lines[1].starts_with("suum,0.25,"));
}

#[test]
fn single_trial_report_is_schema_valid() {
    let cfg = SimConfig { n_blocks: 2000, n_trials: 1, ..SimConfig::default() };
    let rep = run_experiment(&cfg);
    assert_eq!(rep.rr_attack.stderr, None);
    assert_valid(report::REPORT_SCHEMA, &report::report_json(&rep));
}

#[test]
fn markov_grid_has_eleven_rows() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(dir.path(), &["markov", "--strategy", "uum", "--alpha-grid", "0:0.5:0.05", "--out", "grid.csv"]), 0);
    let csv = std::fs::read_to_string(dir.path().join("grid.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], report::MARKOV_CSV_HEADER);
    assert_eq!(lines.len(), 12);
    assert!(lines[4].starts_with("uum,0.15,"));
}

#[test]
fn analyze_writes_schema_valid_verdicts() {
    let dir = tempfile::tempdir().unwrap();
    let spec = FixtureSpec { blocks_per_pool: 2000, ..FixtureSpec::default() };
    std::fs::write(dir.path().join("headers.csv"), fixture_csv(&spec)).unwrap();
    let code = run(
        dir.path(),
        &["analyze", "--input", "headers.csv", "--top-pools", "10", "--out", "v.json", "--histogram-out", "h.csv"],
    );
    assert_eq!(code, 0);
    let json = std::fs::read_to_string(dir.path().join("v.json")).unwrap();
    assert_valid(report::VERDICTS_SCHEMA, &json);
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    let flagged: Vec<&str> = v["verdicts"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|x| x["flagged"].as_bool().unwrap())
        .map(|x| x["miner"].as_str().unwrap())
        .collect();
    assert_eq!(flagged, vec!["pool00", "pool01"]);
    let hist = std::fs::read_to_string(dir.path().join("h.csv")).unwrap();
    assert!(hist.starts_with("miner,dt,count\n"));
    assert!(hist.lines().any(|l| l.starts_with("*,")));
}

#[test]
fn compare_joins_all_strategies() {
    let dir = tempfile::tempdir().unwrap();
    let code = run(dir.path(), &["compare", "--alpha-grid", "0:0.5:0.05", "--blocks", "1000", "--trials", "2", "--seed", "1", "--out", "c.csv"]);
    assert_eq!(code, 0);
    let csv = std::fs::read_to_string(dir.path().join("c.csv")).unwrap();
    let mut rdr = csv::Reader::from_reader(csv.as_bytes());
    let headers = rdr.headers().unwrap().clone();
    let col = |n: &str| headers.iter().position(|h| h == n).unwrap();
    let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 44);
    for r in rows.iter().filter(|r| &r[col("strategy")] == "honest") {
        assert_eq!(&r[col("fr")], "0");
    }
    for r in &rows {
        assert!(!r[col("E_A")].is_empty(), "analytic value missing");
    }
}

#[test]
fn usage_and_data_errors() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(run(d, &[]), 1);
    assert_eq!(run(d, &["simulate", "--bogus"]), 1);
    assert_eq!(run(d, &["simulate", "--alpha", "0.2", "--out", "x.json"]), 1, "seed is mandatory");
    assert_eq!(run(d, &["simulate", "--alpha", "1.5", "--seed", "1", "--out", "x.json"]), 1);
    assert_eq!(run(d, &["markov", "--alpha-grid", "0:1:0", "--out", "g.csv"]), 1);
    assert_eq!(run(d, &["analyze", "--input", "missing.csv", "--out", "v.json"]), 2);
    std::fs::write(d.join("bad.csv"), "chain,height,timestamp,miner\nx,1,1,a\nx,2,2\n").unwrap();
    let out = bin().current_dir(d).args(["analyze", "--input", "bad.csv", "--out", "v.json"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
    std::fs::write(d.join("bad.cfg"), "alpha = 0.1\nnot a pair\n").unwrap();
    assert_eq!(run(d, &["simulate", "--config", "bad.cfg", "--out", "x.json"]), 2);
    assert!(!d.join("x.json").exists());
    assert!(!d.join("v.json").exists());
    assert_eq!(run(d, &["version"]), 0);
    assert_eq!(run(d, &["--help"]), 0);
}

#[test]
fn config_file_and_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = SimConfig { strategy: StrategyKind::Uum, alpha: 0.2, n_blocks: 3000, n_trials: 2, seed: 9, ..SimConfig::default() };
    std::fs::write(dir.path().join("exp.cfg"), render_config(&cfg)).unwrap();
    assert_eq!(run(dir.path(), &["simulate", "--config", "exp.cfg", "--out", "a.json"]), 0);
    assert_eq!(run(dir.path(), &["simulate", "--config", "exp.cfg", "--alpha", "0.3", "--out", "b.json"]), 0);
    let a: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("a.json")).unwrap()).unwrap();
    let b: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("b.json")).unwrap()).unwrap();
    assert_eq!(a["config"]["alpha"], 0.2);
    assert_eq!(a["config"]["seed"], 9);
    assert_eq!(b["config"]["alpha"], 0.3);
    assert_eq!(b["config"]["strategy"], "uum");
    assert_eq!(parse_config(&render_config(&cfg)).unwrap(), cfg);
}

#[test]
fn thread_count_does_not_change_results() {
    let cfg = SimConfig { strategy: StrategyKind::Suum, n_blocks: 4000, n_trials: 6, seed: 5, ..SimConfig::default() };
    let one = run_experiment_with(&cfg, Some(1));
    let four = run_experiment_with(&cfg, Some(4));
    assert_eq!(report::report_json(&one), report::report_json(&four));
    assert_eq!(one, run_experiment(&cfg));
}

#[test]
fn jsonl_and_csv_agree() {
    let spec = FixtureSpec { pools: 3, manipulators: 1, blocks_per_pool: 300, ..FixtureSpec::default() };
    let recs = planted_fixture(&spec).records;
    let csv = fixture_csv(&spec);
    let jsonl: String = recs.iter().map(|r| serde_json::to_string(r).unwrap() + "\n").collect();
    let a = load_headers(csv.as_bytes(), HeaderFormat::Csv).unwrap();
    let b = load_headers(jsonl.as_bytes(), HeaderFormat::Jsonl).unwrap();
    assert_eq!(a, b);
    assert_eq!(a, recs);
}
