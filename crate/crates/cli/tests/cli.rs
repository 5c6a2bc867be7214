use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_risnet")
}

fn risnet(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().expect("binary runs")
}

fn sweeps_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../sweeps")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn json(p: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn generate_solve_validate() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("sc.json");
    let schedule = dir.path().join("schedule.json");
    let out = risnet(&["generate", "--seed", "7", "--robots", "5", "--slots", "12", "-o", path(&scenario)]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    let out = risnet(&["solve", path(&scenario), "-o", path(&schedule), "-q"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    let out = risnet(&["validate", path(&scenario), path(&schedule)]);
    assert_eq!(code(&out), 0);
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "feasible: no violations");
}

#[test]
fn same_seed_same_scenario_file() {
    let a = risnet(&["generate", "--seed", "3", "--robots", "2", "--slots", "5"]);
    let b = risnet(&["generate", "--seed", "3", "--robots", "2", "--slots", "5"]);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
    let c = risnet(&["generate", "--seed", "4", "--robots", "2", "--slots", "5"]);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn heuristic_schedule_has_only_window_violations() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("sc.json");
    let schedule = dir.path().join("h.json");
    let report = dir.path().join("h-report.json");
    assert_eq!(code(&risnet(&["generate", "--seed", "11", "--robots", "10", "-o", path(&scenario)])), 0);
    let out = risnet(&["heuristic", path(&scenario), "-o", path(&schedule), "--report", path(&report), "-q"]);
    let r = json(&report);
    match code(&out) {
        0 => assert_eq!(r["status"], "feasible"),
        3 => assert_eq!(r["status"], "infeasible"),
        c => panic!("exit {c}"),
    }
    for v in r["violations"].as_array().unwrap() {
        assert_eq!(v["family"], "outage_window");
    }
    let check = risnet(&["validate", path(&scenario), path(&schedule)]);
    assert_eq!(code(&check) == 0, r["violations"].as_array().unwrap().is_empty());
}

#[test]
fn external_solver_matches_the_built_in_one() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("sc.json");
    assert_eq!(code(&risnet(&["generate", "--seed", "2", "--robots", "3", "--slots", "6", "-o", path(&scenario)])), 0);

    let internal = dir.path().join("internal.json");
    let out = risnet(&["solve", path(&scenario), "--report", path(&internal), "-o", "/dev/null", "-q"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    for format in ["lp", "mps"] {
        let external = dir.path().join(format!("external-{format}.json"));
        let cmd = format!("{} lp-solve {{model}} -o {{solution}} --solver bundled -q", bin());
        let out = risnet(&[
            "solve",
            path(&scenario),
            "--solver",
            "external",
            "--solver-cmd",
            &cmd,
            "--solver-format",
            format,
            "--report",
            path(&external),
            "-o",
            "/dev/null",
            "-q",
        ]);
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
        assert_eq!(json(&external)["objective"], json(&internal)["objective"]);
        assert_eq!(json(&external)["violations"], serde_json::json!([]));
    }
}

#[test]
fn export_model_writes_both_formats() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("sc.json");
    assert_eq!(code(&risnet(&["generate", "--seed", "1", "--robots", "2", "--slots", "3", "-o", path(&scenario)])), 0);
    let lp = risnet(&["export-model", path(&scenario)]);
    assert!(String::from_utf8_lossy(&lp.stdout).contains("Subject To"));
    let mps_path = dir.path().join("m.mps");
    assert_eq!(code(&risnet(&["export-model", path(&scenario), "-o", path(&mps_path)])), 0);
    let mps = std::fs::read_to_string(&mps_path).unwrap();
    assert!(mps.contains("ROWS") && mps.contains("ENDATA"));
    let sol = risnet(&["lp-solve", path(&mps_path), "-q"]);
    assert_eq!(code(&sol), 0);
}

#[test]
fn tiny_timeout_reports_timeout() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = dir.path().join("sc.json");
    let report = dir.path().join("r.json");
    assert_eq!(code(&risnet(&["generate", "--seed", "5", "--robots", "14", "-o", path(&scenario)])), 0);
    let out = risnet(&[
        "solve",
        path(&scenario),
        "--solver",
        "bundled",
        "--timeout",
        "0.001",
        "--report",
        path(&report),
        "-o",
        path(&dir.path().join("s.json")),
    ]);
    assert_eq!(code(&out), 4, "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(json(&report)["status"], "timeout");
    assert!(String::from_utf8_lossy(&out.stderr).contains("timeout"));
}

#[test]
fn sweep_writes_one_row_per_point_and_method() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("robots.csv");
    let spec = sweeps_dir().join("robots.toml");
    let out = risnet(&["sweep", path(&spec), "--trials", "1", "-o", path(&csv), "-q"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert!(lines
        .next()
        .unwrap()
        .starts_with("axis_name,axis_value,method,trials,feasible_pct,mean_outage_pct,ci95_outage,mean_runtime_s,timeouts"));
    assert_eq!(lines.count(), 7 * 3);
}

#[test]
fn every_bundled_sweep_spec_parses() {
    for entry in std::fs::read_dir(sweeps_dir()).unwrap() {
        let p = entry.unwrap().path();
        let text = std::fs::read_to_string(&p).unwrap();
        risnet::harness::SweepSpec::from_toml(&text).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
    }
}

#[test]
fn bad_input_fails_cleanly() {
    assert_eq!(code(&risnet(&["solve"])), 2);
    assert_eq!(code(&risnet(&["generate", "--floor", "40by40"])), 2);
    assert_eq!(code(&risnet(&["frobnicate"])), 2);

    let dir = tempfile::tempdir().unwrap();
    let junk = dir.path().join("junk.json");
    std::fs::write(&junk, "{\"format\": \"something-else\"}").unwrap();
    let out = risnet(&["solve", path(&junk)]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
    assert_eq!(code(&risnet(&["solve", "/nonexistent/file.json"])), 1);
    assert_eq!(code(&risnet(&["solve", path(&junk), "--obstacles", "3"])), 1);
}

#[test]
fn printed_config_feeds_back_into_generate() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("c.toml");
    assert_eq!(code(&risnet(&["generate", "--print-config", "-o", path(&config)])), 0);
    let a = risnet(&["generate", "--config", path(&config), "--seed", "9", "--slots", "4"]);
    let b = risnet(&["generate", "--seed", "9", "--slots", "4"]);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
}
