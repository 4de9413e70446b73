use std::process::{Command, Output};

use epiconj::io::{csv_rows, read_trace_csv};
use epiconj::problems::find;
use epiconj::solver::solve;
use epiconj::{SolverConfig, Vector};

fn epiconj(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_epiconj"))
        .args(args)
        .env_remove("EPICONJ_SEED")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

#[test]
fn run_quad1d_converges_quadratically() {
    let o = epiconj(&["run", "--problem", "quad1d", "--backend", "exact"]);
    assert_eq!(code(&o), 0);
    let summary = String::from_utf8(o.stderr).unwrap();
    assert!(summary.contains("classification=quadratic"), "{summary}");
    let f_hat: f64 = summary
        .split_whitespace()
        .find_map(|kv| kv.strip_prefix("f_hat="))
        .unwrap()
        .parse()
        .unwrap();
    assert!(f_hat.abs() <= 1e-10);
}

#[test]
fn run_sharp_problem_is_finite() {
    let o = epiconj(&["run", "--problem", "sharpL1_3", "--backend", "exact"]);
    assert_eq!(code(&o), 0);
    let summary = String::from_utf8(o.stderr).unwrap();
    assert!(summary.contains("classification=finite"), "{summary}");
    let iters: usize = summary
        .split_whitespace()
        .find_map(|kv| kv.strip_prefix("iterations="))
        .unwrap()
        .parse()
        .unwrap();
    assert!(iters <= 5);
}

#[test]
fn exit_codes_on_faults() {
    // unknown problem, unknown flag, bad backend, bad x0, dimension mismatch
    for args in [
        vec!["run", "--problem", "nosuch"],
        vec!["run", "--problem", "quad1d", "--bogus"],
        vec!["run", "--problem", "quad1d", "--backend", "magic"],
        vec!["run", "--problem", "quad1d", "--x0", "abc"],
        vec!["run", "--problem", "quadN_2", "--x0", "1"],
        vec!["run", "--problem", "quad1d", "--eps-g", "0"],
        vec!["compare", "--problem", "quadN_2", "--budget", "0"],
        vec!["suite", "--suite", "nosuch"],
        vec![],
    ] {
        let o = epiconj(&args);
        assert_eq!(code(&o), 1, "{args:?}");
        assert!(!o.stderr.is_empty(), "{args:?}");
    }
    // the exact engine needs the conjugate
    assert_eq!(code(&epiconj(&["run", "--problem", "maxAffine_2", "--backend", "exact"])), 1);
    // out of iterations is a non-converged run
    assert_eq!(code(&epiconj(&["run", "--problem", "quartic_3", "--max-iter", "2"])), 2);
    assert_eq!(code(&epiconj(&["--help"])), 0);
}

#[test]
fn csv_trace_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("trace.csv");
    let o = epiconj(&["run", "--problem", "quadN_2", "--backend", "cutting", "--out", path.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(
        text.lines().next().unwrap(),
        "k,xi_k,xi_p,g_norm,f_xp,e_k,theta_k,oracle_calls,inner_iters"
    );
    let parsed = read_trace_csv(text.as_bytes()).unwrap();
    let p = find("quadN_2").unwrap();
    let cfg = SolverConfig::with_backend(epiconj::Backend::Cutting);
    let trace = solve(&p, &Vector::zeros(2), &cfg).unwrap();
    assert_eq!(parsed, csv_rows(&trace));
    // a second run writes byte-identical output
    let path2 = dir.path().join("again.csv");
    epiconj(&["run", "--problem", "quadN_2", "--backend", "cutting", "--out", path2.to_str().unwrap()]);
    assert_eq!(text, std::fs::read_to_string(&path2).unwrap());
}

#[test]
fn json_report_has_totals() {
    let o = epiconj(&["run", "--problem", "quartic_1", "--output", "json"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("\"totals\""));
    assert!(text.contains("\"classification\": \"superlinear\""));
}

#[test]
fn problem_file_is_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.json");
    std::fs::write(&path, r#"{"type":"quad","Q":[2,1],"c":[1,-1]}"#).unwrap();
    let o = epiconj(&["run", "--problem", path.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    std::fs::write(&path, r#"{"type":"quad","Q":[-2,1],"c":[1,-1]}"#).unwrap();
    assert_eq!(code(&epiconj(&["run", "--problem", path.to_str().unwrap()])), 1);
}

#[test]
fn suite_lemmas_and_seed_override() {
    let o = epiconj(&["suite", "--suite", "lemmas", "--seed", "7"]);
    assert_eq!(code(&o), 0);
    let out = String::from_utf8(o.stdout).unwrap();
    assert_eq!(out.lines().filter(|l| l.starts_with("PASS")).count(), 3, "{out}");
    assert!(out.contains("(seed 7)"));

    let o = Command::new(env!("CARGO_BIN_EXE_epiconj"))
        .args(["suite", "--suite", "lemmas", "--seed", "7"])
        .env("EPICONJ_SEED", "11")
        .output()
        .unwrap();
    assert!(String::from_utf8(o.stdout).unwrap().contains("(seed 11)"));
}

#[test]
fn compare_table_shape() {
    let o = epiconj(&["compare", "--problem", "quadN_2", "--budget", "200"]);
    assert_eq!(code(&o), 0);
    let out = String::from_utf8(o.stdout).unwrap();
    let rows: Vec<&str> = out.lines().skip(1).collect();
    assert_eq!(rows.len(), 200);
    let last: Vec<f64> = rows[199].split(',').map(|s| s.parse().unwrap()).collect();
    // final errors: epi-projection at least as good as the baseline
    assert!(last[3] <= last[4], "{}", rows[199]);

    let o = epiconj(&["compare", "--problem", "quartic_3", "--budget", "50"]);
    assert_eq!(String::from_utf8(o.stdout).unwrap().lines().count(), 51);
}
