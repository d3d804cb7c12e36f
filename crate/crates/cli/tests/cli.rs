use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_edgecheck"))
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// Compares against `tests/golden/<name>`; set `EDGECHECK_BLESS=1` to rewrite.
fn golden(name: &str, actual: &str) {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name);
    if std::env::var_os("EDGECHECK_BLESS").is_some() {
        std::fs::write(&path, actual).unwrap();
        return;
    }
    let expected = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert_eq!(actual, expected, "output differs from {}", path.display());
}

#[test]
fn incentives_worked_example_is_not_dominant() {
    let o = run(&["incentives", "10", "4", "1", "0.5", "10", "2"]);
    assert!(o.status.success());
    golden("incentives_b2.txt", &stdout(&o));
    let o = run(&["--format", "jsonl", "incentives", "10", "4", "1", "0.5", "10", "2"]);
    let v: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert_eq!(v["dd"], 6.0);
    assert_eq!(v["d_dishonest"], 8.0);
    assert_eq!(v["dishonest_d"], -2.0);
    assert_eq!(v["dishonest_dishonest"], 9.0);
    assert_eq!(v["honesty_dominant"], false);
}

#[test]
fn larger_bounty_makes_honesty_dominant() {
    let o = run(&["incentives", "10", "4", "1", "0.5", "10", "4"]);
    assert!(o.status.success());
    golden("incentives_b4.txt", &stdout(&o));
}

#[test]
fn incentives_rejects_bad_parameters() {
    for args in [
        ["incentives", "-1", "4", "1", "0.5", "10", "2"],
        ["incentives", "10", "4", "1", "1.5", "10", "2"],
        ["incentives", "10", "1", "4", "0.5", "10", "2"],
    ] {
        let o = run(&args);
        assert_eq!(o.status.code(), Some(1), "{args:?}");
        assert!(o.stdout.is_empty());
    }
}

#[test]
fn sampling_table_golden() {
    let o = run(&["sampling-table"]);
    assert!(o.status.success());
    golden("sampling_table.txt", &stdout(&o));
    let o = run(&["--format", "jsonl", "sampling-table", "--rates", "0.1", "--intervals", "44"]);
    let v: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert!((v["detection_probability"].as_f64().unwrap() - 0.990302).abs() < 1e-6);
}

#[test]
fn honest_run_golden_and_repeatable() {
    let f = fixture("honest.toml");
    let a = run(&["run", f.to_str().unwrap()]);
    let b = run(&["run", f.to_str().unwrap()]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    golden("run_honest.txt", &stdout(&a));
}

#[test]
fn seed_override_changes_trace() {
    let f = fixture("honest.toml");
    let a = run(&["--format", "jsonl", "run", f.to_str().unwrap()]);
    let b = run(&["--format", "jsonl", "run", f.to_str().unwrap(), "--seed", "8"]);
    let a: serde_json::Value = serde_json::from_str(stdout(&a).trim()).unwrap();
    let b: serde_json::Value = serde_json::from_str(stdout(&b).trim()).unwrap();
    assert_eq!(b["seed"], 8);
    assert_ne!(a["trace_digest"], b["trace_digest"]);
}

#[test]
fn cheater_is_convicted() {
    let o = run(&["--format", "jsonl", "run", fixture("cheater.toml").to_str().unwrap()]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert_eq!(v["violation_detected"], true);
    assert_eq!(v["convicted"], "contractor");
    assert_eq!(v["mechanism"], "sampling_reexecution");
}

#[test]
fn lossy_uplink_breaches_response_rate() {
    let o = run(&["run", fixture("lossy.toml").to_str().unwrap()]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("contractor:low_response_rate@"));
}

#[test]
fn reps_emit_one_record_each() {
    let o = run(&["--format", "jsonl", "run", fixture("cheater.toml").to_str().unwrap(), "--reps", "3"]);
    assert!(o.status.success());
    let seeds: Vec<u64> = stdout(&o)
        .lines()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap()["seed"].as_u64().unwrap())
        .collect();
    assert_eq!(seeds.len(), 3);
    assert_eq!(seeds[0], 3);
    assert!(seeds[1] != seeds[0] && seeds[2] != seeds[1]);
}

#[test]
fn config_errors_exit_1() {
    for name in ["deposit_below_fee.toml", "bad_key.toml", "missing.toml"] {
        let o = run(&["run", fixture(name).to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(1), "{name}");
        assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"), "{name}");
    }
    let o = run(&["threat-matrix", "--config", fixture("empty_suite.toml").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let o = run(&["threat-matrix", "--reps", "0"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn threat_matrix_from_suite_file() {
    let f = fixture("suite.toml");
    let a = run(&["threat-matrix", "--config", f.to_str().unwrap()]);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    golden("threat_matrix_suite.txt", &stdout(&a));
    let o = run(&["--format", "jsonl", "threat-matrix", "--config", f.to_str().unwrap(), "--reps", "5"]);
    let rows: Vec<serde_json::Value> = stdout(&o).lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(rows.len(), 4);
    assert!(rows.iter().all(|r| r["runs"] == 5));
}

#[test]
fn out_flag_writes_file() {
    let dir = std::env::temp_dir().join(format!("edgecheck-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("table.txt");
    let o = run(&["--out", path.to_str().unwrap(), "sampling-table"]);
    assert!(o.status.success());
    assert!(o.stdout.is_empty());
    assert_eq!(std::fs::read_to_string(&path).unwrap(), stdout(&run(&["sampling-table"])));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn invariant_violation_exits_2() {
    let o = run(&["run", fixture("truncated.toml").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(!o.stdout.is_empty(), "report is still written");
    assert!(String::from_utf8_lossy(&o.stderr).contains("max_ticks"));
}
