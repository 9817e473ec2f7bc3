use std::path::Path;
use std::process::{Command, Output};

fn netqubo(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_netqubo")).args(args).current_dir(cwd).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

const REDUCED: &[&str] = &["--k", "1", "--demand-limit", "2"];

#[test]
fn generate_writes_five_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = netqubo(&["generate", "--output", "bundle"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["topology.json", "demands.json", "catalog.json", "ilp.txt", "qubo.txt"] {
        assert!(dir.path().join("bundle").join(f).exists(), "{f}");
    }
    assert!(stdout(&out).contains("N = 90"));
}

#[test]
fn exhaustive_solve_reports_oracle_cost() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["solve", "--output", "o", "--method", "exhaustive"];
    args.extend_from_slice(REDUCED);
    let solve = netqubo(&args, dir.path());
    assert!(solve.status.success(), "{}", String::from_utf8_lossy(&solve.stderr));

    let mut args = vec!["oracle", "--output", "o"];
    args.extend_from_slice(REDUCED);
    let oracle = stdout(&netqubo(&args, dir.path()));
    let cost = oracle.lines().next().unwrap().trim_start_matches("oracle cost = ").to_string();

    let mut args = vec!["report", "--output", "o"];
    args.extend_from_slice(REDUCED);
    let report = netqubo(&args, dir.path());
    assert!(report.status.success());
    let text = stdout(&report);
    assert!(text.contains(&format!("best feasible cost = {cost}")), "{text}");
    assert!(text.contains(&format!("oracle cost = {cost}")), "{text}");
    assert!(dir.path().join("o/run.csv").exists());
    assert!(dir.path().join("o/histogram.csv").exists());
}

#[test]
fn scaling_report_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = netqubo(&["report", "--mode", "scaling", "--sizes", "3,4,5,6,7", "--output", "s"], dir.path());
    assert!(out.status.success());
    let csv = std::fs::read_to_string(dir.path().join("s/scaling.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "n_nodes,accuracy,logical_qubits,couplings,chain_length,physical_qubits,logical_util_pct,physical_util_pct,coupler_util_pct,embeddable"
    );
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 10);
    assert!(rows.iter().filter(|r| r.starts_with("7,")).all(|r| r.ends_with(",false")));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::create_dir(dir.path().join("e")).unwrap();
    std::fs::write(dir.path().join("e/results.jsonl"), "").unwrap();
    let empty = netqubo(&["report", "--output", "e"], dir.path());
    assert_eq!(empty.status.code(), Some(2));

    let infeasible = netqubo(&["oracle", "--mu", "1000", "--sigma", "0", "--output", "i"], dir.path());
    assert_eq!(infeasible.status.code(), Some(2));

    std::fs::write(dir.path().join("bad.json"), r#"{"penalti": 3}"#).unwrap();
    let bad = netqubo(&["generate", "--config", "bad.json"], dir.path());
    assert_eq!(bad.status.code(), Some(3));
    let small = netqubo(&["generate", "--nodes", "2"], dir.path());
    assert_eq!(small.status.code(), Some(3));
    let schedule = netqubo(&["solve", "--schedule", "100@1.5+20"], dir.path());
    assert_ne!(schedule.status.code(), Some(0));
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("cfg.json"),
        r#"{"paths": {"k": 1}, "demands": {"limit": 2}, "sampler": {"method": "random", "n": 10}, "output": "from_config"}"#,
    )
    .unwrap();
    let out = netqubo(&["solve", "--config", "cfg.json", "--samples", "7"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let records = std::fs::read_to_string(dir.path().join("from_config/results.jsonl")).unwrap();
    assert_eq!(records.lines().count(), 7);
    assert!(records.contains("\"source\":\"random\""));
}
