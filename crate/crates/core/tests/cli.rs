//! End-to-end tests of the binary: exit codes, determinism, report schema
//! and the verification suite.

use std::process::{Command, Output};

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_qudit-teleport"));
    cmd.env_remove("QT_SEED");
    cmd
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}): {}",
            String::from_utf8_lossy(&out.stdout)
        )
    })
}

#[test]
fn simulate_reports_expected_analytic_value() {
    let out = run(&[
        "simulate",
        "--d",
        "2",
        "--spectrum",
        "0.6,0.8",
        "--strategy",
        "none",
        "--trials",
        "2000",
        "--seed",
        "7",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let report = stdout_json(&out);
    let analytic = report["fidelities"]["analytic"].as_f64().unwrap();
    assert!((analytic - 0.86).abs() <= 1e-12);
    let exact = report["fidelities"]["exact"].as_f64().unwrap();
    assert!((exact - 0.86).abs() <= 1e-9);
    assert_eq!(report["config"]["seed"].as_u64(), Some(7));
}

#[test]
fn simulate_maximal_preset_is_perfect() {
    let out = run(&["simulate", "--d", "3", "--spectrum", "maximal", "--strategy", "xz", "--trials", "500"]);
    assert_eq!(out.status.code(), Some(0));
    let report = stdout_json(&out);
    assert!((report["fidelities"]["analytic"].as_f64().unwrap() - 1.0).abs() <= 1e-9);
    assert!((report["fidelities"]["exact"].as_f64().unwrap() - 1.0).abs() <= 1e-9);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("expanded spectrum preset"), "preset expansion is logged");
}

#[test]
fn simulate_same_seed_is_byte_identical() {
    let args = [
        "simulate", "--spectrum", "0.6,0.8", "--strategy", "x", "--trials", "3000", "--seed", "11",
    ];
    let a = run(&args);
    let b = run(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn qt_seed_env_is_fallback() {
    let via_flag = run(&[
        "simulate", "--spectrum", "0.6,0.8", "--trials", "1000", "--seed", "9",
    ]);
    let via_env = bin()
        .args(["simulate", "--spectrum", "0.6,0.8", "--trials", "1000"])
        .env("QT_SEED", "9")
        .output()
        .expect("binary runs");
    assert_eq!(via_flag.stdout, via_env.stdout);
}

#[test]
fn exit_codes_follow_contract() {
    // 0: success.
    assert_eq!(run(&["discriminate", "--spectrum", "0.6,0.8"]).status.code(), Some(0));
    // 1: malformed config.
    assert_eq!(run(&["simulate", "--spectrum", "0.6,oops"]).status.code(), Some(1));
    assert_eq!(run(&["simulate", "--spectrum", "0.6,0.7"]).status.code(), Some(1));
    assert_eq!(run(&["simulate"]).status.code(), Some(1));
    // 2: linearly dependent spectrum, with diagnostics naming the zeros.
    let ld = run(&["simulate", "--spectrum", "0,0.6,0.8", "--renormalize"]);
    assert_eq!(ld.status.code(), Some(2));
    let msg = String::from_utf8_lossy(&ld.stderr);
    assert!(msg.contains("indices [0]"), "diagnostic was: {msg}");
}

#[test]
fn csv_format_has_versioned_header() {
    let out = run(&[
        "simulate", "--spectrum", "0.6,0.8", "--trials", "500", "--seed", "3", "--format", "csv",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("# qudit-teleport v1"));
    assert!(lines.next().unwrap().starts_with("d,spectrum,strategy"));
    assert!(lines.next().unwrap().starts_with("2,0.6;0.8,none,0.86,"));
}

#[test]
fn json_numbers_round_trip_exactly() {
    let args = [
        "simulate", "--spectrum", "0.6,0.8", "--trials", "1000", "--seed", "5",
    ];
    let report = stdout_json(&run(&args));
    // Re-serializing the parsed f64 must reproduce the same value; ryu
    // formatting guarantees lossless text round-trips.
    for key in ["exact", "mc_mean", "mc_stderr", "banaszek_corrected"] {
        let v = report["fidelities"][key].as_f64().unwrap();
        let reparsed: f64 = serde_json::to_string(&v).unwrap().parse().unwrap();
        assert_eq!(v.to_bits(), reparsed.to_bits(), "field {key}");
    }
}

#[test]
fn simulate_emits_branch_records() {
    let out = run(&[
        "simulate",
        "--spectrum",
        "[0.6, 0.8]",
        "--trials",
        "500",
        "--seed",
        "3",
        "--emit-branches",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let report = stdout_json(&out);
    let branches = report["branches"].as_array().unwrap();
    assert_eq!(branches.len(), 8, "2d * d branches at d = 2");
    let mut total = 0.0;
    for b in branches {
        for key in ["branch_type", "l_or_s", "k", "probability", "fidelity"] {
            assert!(!b[key].is_null(), "missing {key}");
        }
        total += b["probability"].as_f64().unwrap();
        if b["branch_type"] == "conclusive" {
            assert!((b["fidelity"].as_f64().unwrap() - 1.0).abs() <= 1e-10);
        }
    }
    assert!((total - 1.0).abs() <= 1e-10);
}

#[test]
fn discriminate_with_oracle() {
    let out = run(&[
        "discriminate", "--spectrum", "0.6,0.8", "--oracle", "--resolution", "0.005",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let report = stdout_json(&out);
    let failure = report["discrimination"]["failure"].as_f64().unwrap();
    assert!((failure - 0.28).abs() <= 1e-12);
    let oracle = report["discrimination"]["oracle"]["failure"].as_f64().unwrap();
    assert!((oracle - failure).abs() <= 0.01);
    assert!(report["discrimination"]["unitarity_residual"].as_f64().unwrap() <= 1e-10);
    let min_eig = report["discrimination"]["q_min_eigenvalue"].as_f64().unwrap();
    assert!((-1e-10..=1e-8).contains(&min_eig));
}

#[test]
fn discriminate_maximal_failure_is_zero() {
    let out = run(&["discriminate", "--d", "4", "--spectrum", "maximal"]);
    let report = stdout_json(&out);
    assert!(report["discrimination"]["failure"].as_f64().unwrap() <= 1e-12);
}

#[test]
fn sweep_table_properties() {
    let out = run(&["sweep", "--d", "2", "--steps", "6"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<&str> = text.lines().skip(2).collect();
    assert_eq!(rows.len(), 6);
    for row in &rows {
        let fields: Vec<&str> = row.split(',').collect();
        // d=2 collapse: the f1 and f2 columns are identical.
        assert_eq!(fields[4], fields[5]);
        let f0: f64 = fields[3].parse().unwrap();
        let f1: f64 = fields[4].parse().unwrap();
        let f2: f64 = fields[5].parse().unwrap();
        let exact_xz: f64 = fields[8].parse().unwrap();
        let bound: f64 = fields[9].parse().unwrap();
        assert!(f0 <= f1 + 1e-12 && f1 <= f2 + 1e-12);
        assert!(exact_xz <= bound + 1e-9);
    }
    // Endpoint A_min^2 = 1/d is the maximal channel.
    let last: Vec<&str> = rows.last().unwrap().split(',').collect();
    for idx in 3..=8 {
        let v: f64 = last[idx].parse().unwrap();
        assert!((v - 1.0).abs() <= 1e-9);
    }
}

#[test]
fn sweep_rejects_grid_outside_domain() {
    let out = run(&["sweep", "--d", "3", "--amin2-start", "0.2", "--amin2-stop", "0.5"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn verify_quick_is_green_and_machine_readable() {
    let out = run(&["verify", "--depth", "quick", "--seed", "12345"]);
    assert_eq!(out.status.code(), Some(0));
    let summary = stdout_json(&out);
    assert_eq!(summary["all_passed"].as_bool(), Some(true));
    assert!(summary["failures"].as_array().unwrap().is_empty());
    let checks = summary["checks"].as_array().unwrap();
    assert!(checks.len() >= 20, "expected the full check catalog");
    for check in checks {
        assert!(check["passed"].as_bool().unwrap(), "{}", check["name"]);
    }
}

#[test]
fn verify_full_emits_adjudication() {
    let out = run(&["verify", "--depth", "full", "--seed", "0"]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let summary = stdout_json(&out);
    assert_eq!(summary["all_passed"].as_bool(), Some(true));
    let rows = summary["adjudication"].as_array().unwrap();
    assert_eq!(rows.len(), 20, "10 spectra each at d = 3 and 4");
    for row in rows {
        let d = row["d"].as_u64().unwrap();
        assert!(d == 3 || d == 4);
        for key in [
            "exact_xz",
            "f2_formula",
            "formula_deviation",
            "banaszek_corrected",
            "banaszek_as_written",
        ] {
            assert!(row[key].is_number(), "missing {key}");
        }
        let f1 = row["f1_value"].as_f64().unwrap();
        let exact = row["exact_xz"].as_f64().unwrap();
        let bound = row["banaszek_corrected"].as_f64().unwrap();
        assert!(f1 <= exact + 1e-9 && exact <= bound + 1e-9);
    }
}
