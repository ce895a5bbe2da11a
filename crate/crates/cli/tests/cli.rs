use std::path::PathBuf;
use std::process::{Command, Output};

use spiral_core::bench::parse_trajectory_csv;

fn spiral(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spiral")).args(args).output().expect("spawn spiral")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn tmp(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("spiral-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn json(s: &str) -> serde_json::Value {
    serde_json::from_str(s).unwrap()
}

#[test]
fn lt_on_two_lines_writes_two_rows() {
    let out = tmp("traj.csv");
    let o = spiral(&[
        "feas", "--problem", "two-lines", "--theta", "0.7854", "--method", "lt", "--x0", "1,1", "--max-iter", "500",
        "--tol", "1e-10", "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("iter,coord_0,coord_1,branch,shadow_0,shadow_1\n"));
    let rows = parse_trajectory_csv(&text).unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[1].branch, "circumcenter");
    assert!(rows[1].coords.iter().all(|c| c.abs() < 1e-12));
}

#[test]
fn dr_trajectory_contracts_at_cos_theta() {
    let o = spiral(&["feas", "--problem", "two-lines", "--theta", "0.6", "--method", "dr", "--x0", "1,0.3", "--max-iter", "40", "--tol", "0", "--out", "-"]);
    assert_eq!(code(&o), 2, "tol 0 never triggers, so the cap is hit");
    let rows = parse_trajectory_csv(&stdout(&o)).unwrap();
    assert_eq!(rows.len(), 41);
    for w in rows.windows(2) {
        let n0 = w[0].coords[0].hypot(w[0].coords[1]);
        let n1 = w[1].coords[0].hypot(w[1].coords[1]);
        assert!((n1 / n0 - 0.6f64.cos()).abs() < 1e-6);
    }
}

#[test]
fn csv_round_trips_exact_values() {
    let o = spiral(&["feas", "--problem", "exp-graph", "--method", "dr", "--x0", "0.7,-1.3", "--max-iter", "30", "--out", "-"]);
    let text = stdout(&o);
    let rows = parse_trajectory_csv(&text).unwrap();
    assert_eq!(rows.iter().map(|r| r.iter).collect::<Vec<_>>(), (0..rows.len()).collect::<Vec<_>>());
    let rewritten = spiral_core::bench::write_trajectory_csv(&rows);
    assert_eq!(rewritten, text);
}

#[test]
fn crm_on_circle_line_converges_with_shadow() {
    let o = spiral(&["feas", "--problem", "circle-line", "--offset", "0.5", "--method", "crm", "--x0", "0.2,1.6", "--out", "-"]);
    assert_eq!(code(&o), 0);
    let rows = parse_trajectory_csv(&stdout(&o)).unwrap();
    let last = rows.last().unwrap();
    let shadow = last.shadow.as_ref().unwrap();
    assert_eq!(shadow[1], 0.5);
    assert!((shadow[0].hypot(shadow[1]) - 1.0).abs() < 1e-8);
}

#[test]
fn check_sweeps_pass() {
    let o = spiral(&["check", "--instance", "exp-graph", "--checker", "bisectors", "--samples", "200", "--seed", "7", "--tol", "1e-8"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("pass"));
    let o = spiral(&["check", "--instance", "two-lines", "--checker", "spiraling", "--samples", "200", "--tol", "1e-9"]);
    assert_eq!(code(&o), 0);
    let o = spiral(&["check", "--instance", "two-lines", "--checker", "mss", "--samples", "0"]);
    assert_eq!(code(&o), 0);
}

#[test]
fn impossible_tolerance_fails_the_check() {
    let o = spiral(&["check", "--instance", "exp-graph", "--checker", "mss", "--samples", "50", "--tol", "0"]);
    assert_eq!(code(&o), 3);
    assert!(stdout(&o).contains("FAIL"));
}

#[test]
fn usage_errors_exit_one() {
    for args in [
        &["feas", "--problem", "sphere", "--method", "lt"][..],
        &["feas", "--problem", "two-lines", "--method", "newton"],
        &["feas", "--problem", "two-lines", "--method", "lt", "--x0", "1,2,3"],
        &["feas", "--problem", "two-lines", "--method", "lt", "--x0", "1,abc"],
        &["check", "--instance", "circle-line", "--checker", "mss"],
        &["check", "--instance", "two-lines", "--checker", "volume"],
        &["bp", "solve", "--accel", "fista"],
        &["bp", "solve", "--n", "10", "--nu", "10"],
        &["bp", "bench", "--c", "-1"],
        &["bp", "solve", "--max-iter", "many"],
        &["frobnicate"],
    ] {
        let o = spiral(args);
        assert_eq!(code(&o), 1, "{args:?}");
    }
    assert_eq!(code(&spiral(&["--help"])), 0);
}

#[test]
fn bp_solve_is_deterministic() {
    let (a, b) = (tmp("run_a.json"), tmp("run_b.json"));
    for p in [&a, &b] {
        let o = spiral(&["bp", "solve", "--seed", "0", "--n", "30", "--nu", "10", "--c", "1.0", "--accel", "lt", "--max-iter", "1000000", "--out", p.to_str().unwrap()]);
        assert_eq!(code(&o), 0);
    }
    let (ta, tb) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(ta, tb);
    let v = json(std::str::from_utf8(&ta).unwrap());
    assert_eq!(v["instance"]["seed"], 0);
    assert_eq!(v["runs"][0]["accel"], "lt");
    assert_eq!(v["runs"][0]["solved"], true);
}

#[test]
fn ct_solve_hits_the_cap_and_still_writes() {
    let o = spiral(&["bp", "solve", "--seed", "0", "--accel", "none,ct", "--out", "-"]);
    assert_eq!(code(&o), 2);
    let v = json(&stdout(&o));
    assert_eq!(v["runs"][0]["solved"], true);
    assert_eq!(v["runs"][1]["status"], "iteration_cap_exceeded");
    assert_eq!(v["runs"][1]["iterations"], 100_000);
}

#[test]
fn bench_is_deterministic_and_consistent() {
    let args = ["bp", "bench", "--instances", "12", "--seed-base", "3", "--accel", "none,lt", "--out", "-"];
    let (o1, o2) = (spiral(&args), spiral(&args));
    assert_eq!(code(&o1), 0);
    assert_eq!(o1.stdout, o2.stdout);
    let v = json(&stdout(&o1));
    let stats = v["stats"].as_array().unwrap();
    let wins: f64 = stats.iter().map(|s| s["wins"].as_f64().unwrap()).sum();
    assert_eq!(wins, 12.0);
    for s in stats {
        let q: Vec<f64> = ["min", "q1", "median", "q3", "max"].iter().map(|k| s[k].as_f64().unwrap()).collect();
        assert!(q.windows(2).all(|w| w[0] <= w[1]));
    }
    let rows = v["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 12);
    assert_eq!(rows[0]["seed"], 3);
}

#[test]
fn single_instance_bench_has_degenerate_quantiles() {
    let o = spiral(&["bp", "bench", "--instances", "1", "--accel", "lt", "--out", "-"]);
    let v = json(&stdout(&o));
    let s = &v["stats"][0];
    for k in ["q1", "median", "q3", "max"] {
        assert_eq!(s[k], s["min"]);
    }
}
