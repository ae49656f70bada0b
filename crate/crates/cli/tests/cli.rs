use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;
use wm1::fixtures::{relaxation_problem, single_jump_limit, two_stage_jump};
use wm1::{CadlagPath, PadMode};

fn wm1(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wm1")).args(args).output().expect("binary runs")
}

fn write_json<T: serde::Serialize>(dir: &Path, name: &str, value: &T) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, serde_json::to_string(value).unwrap()).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout_json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn identical_paths_are_at_distance_zero() {
    let dir = TempDir::new().unwrap();
    let a = write_json(dir.path(), "a.json", &two_stage_jump(10));
    let b = write_json(dir.path(), "b.json", &two_stage_jump(10));
    let v = stdout_json(&wm1(&["distance", s(&a), s(&b)]));
    assert_eq!(v["d_uniform"].as_f64().unwrap(), 0.0);
    assert!(v["d_p"].as_f64().unwrap() < 1e-9);
    assert!(v["d_w"]["upper"].as_f64().unwrap() < 1e-9);
    assert_eq!(v["d_j1"]["lower"].as_f64().unwrap(), 0.0);
}

#[test]
fn close_in_product_metric_but_not_in_j1() {
    let dir = TempDir::new().unwrap();
    let a = write_json(dir.path(), "xn.json", &two_stage_jump(100));
    let b = write_json(dir.path(), "x.json", &single_jump_limit());
    let v = stdout_json(&wm1(&["distance", s(&a), s(&b)]));
    assert!(v["d_p"].as_f64().unwrap() <= 0.02);
    assert!(v["d_j1"]["lower"].as_f64().unwrap() >= 0.4);

    let csv = wm1(&["distance", s(&a), s(&b), "--format", "csv"]);
    let text = String::from_utf8(csv.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("# schema: wm1-distance v1"));
    assert_eq!(lines.next(), Some("d_uniform,d_p,d_w_lower,d_w_upper,d_j1_lower,d_j1_upper"));
    assert_eq!(lines.next().unwrap().split(',').count(), 6);
}

#[test]
fn malformed_json_exits_with_code_2() {
    let dir = TempDir::new().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{ \"times\": [").unwrap();
    let good = write_json(dir.path(), "x.json", &single_jump_limit());
    let out = wm1(&["distance", s(&bad), s(&good)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
}

#[test]
fn dimension_mismatch_exits_with_code_3() {
    let dir = TempDir::new().unwrap();
    let one = CadlagPath::constant(2.0, PadMode::ZeroLeft, vec![1.0]).unwrap();
    let a = write_json(dir.path(), "one.json", &one);
    let b = write_json(dir.path(), "two.json", &single_jump_limit());
    assert_eq!(wm1(&["distance", s(&a), s(&b)]).status.code(), Some(3));
}

fn orthant_controls(dir: &Path, scale: f64) {
    for n in [10u64, 100] {
        let u = CadlagPath::step(
            2.0,
            PadMode::ZeroLeft,
            vec![0.0, 1.0 - 1.0 / n as f64],
            vec![vec![0.0, 0.0], vec![scale, scale]],
        )
        .unwrap();
        write_json(dir, &format!("n{n}.json"), &u);
    }
    let limit = CadlagPath::step(2.0, PadMode::ZeroLeft, vec![0.0, 1.0], vec![vec![0.0, 0.0], vec![scale, scale]])
        .unwrap();
    write_json(dir, "limit.json", &limit);
}

#[test]
fn negative_increment_exits_with_code_4() {
    let dir = TempDir::new().unwrap();
    let problem = write_json(dir.path(), "problem.json", &relaxation_problem());
    let controls = dir.path().join("controls");
    fs::create_dir(&controls).unwrap();
    orthant_controls(&controls, -1.0);
    let out = wm1(&["experiment", s(&problem), s(&controls), "--paths", "10"]);
    assert_eq!(out.status.code(), Some(4), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn experiment_writes_reports() {
    let dir = TempDir::new().unwrap();
    let problem = write_json(dir.path(), "problem.json", &relaxation_problem());
    let controls = dir.path().join("controls");
    fs::create_dir(&controls).unwrap();
    orthant_controls(&controls, 1.0);
    let out_dir = dir.path().join("report");
    let out = wm1(&["experiment", s(&problem), s(&controls), "--paths", "50", "--out", s(&out_dir)]);
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let report: Value = serde_json::from_str(&fs::read_to_string(out_dir.join("experiment.json")).unwrap()).unwrap();
    let rows = report["experiment"]["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0]["label"], 10);
    assert_eq!(rows[1]["label"], 100);
    let csv = fs::read_to_string(out_dir.join("experiment.csv")).unwrap();
    assert!(csv.starts_with("# schema: wm1-experiment v1\n"));
    assert!(out_dir.join("tightness.csv").is_file());
}

#[test]
fn constant_controls_give_identical_costs() {
    let dir = TempDir::new().unwrap();
    let problem = write_json(dir.path(), "problem.json", &relaxation_problem());
    let controls = dir.path().join("controls");
    fs::create_dir(&controls).unwrap();
    let u = CadlagPath::constant(2.0, PadMode::HoldLeft, vec![0.5, 0.5]).unwrap();
    for name in ["n1.json", "n2.json", "limit.json"] {
        write_json(&controls, name, &u);
    }
    let v = stdout_json(&wm1(&["experiment", s(&problem), s(&controls), "--paths", "40", "--seed", "7"]));
    let rows = v["experiment"]["rows"].as_array().unwrap();
    let limit = v["experiment"]["limit_cost"].as_f64().unwrap();
    for row in rows {
        assert_eq!(row["cost"].as_f64().unwrap(), limit);
        assert_eq!(row["gap"].as_f64().unwrap(), 0.0);
    }
}

fn trace_column(text: &str, name: &str) -> Vec<(f64, f64)> {
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = header.iter().position(|h| *h == name).unwrap();
    lines
        .map(|l| {
            let f: Vec<f64> = l.split(',').map(|v| v.parse().unwrap()).collect();
            (f[0], f[col])
        })
        .collect()
}

#[test]
fn demo_traces_have_the_expected_shape() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("demo");
    let res = wm1(&["demo-example", "--n-range", "2,10,100", "--out", s(&out)]);
    assert!(res.status.success(), "stderr: {}", String::from_utf8_lossy(&res.stderr));
    let traces = fs::read_to_string(out.join("paramrep_traces.csv")).unwrap();

    // n = 2 holds at 1/2 between the two jumps
    for (t, r) in trace_column(&traces, "rhat_n2") {
        if t > 1.0 / 12.0 + 1e-9 && t < 7.0 / 12.0 - 1e-9 {
            assert!((r - 0.5).abs() < 1e-12, "rhat_n2({t}) = {r}");
        }
    }
    for (t, r) in trace_column(&traces, "rhat_limit") {
        if t > 1.0 / 6.0 + 1e-9 && t < 5.0 / 6.0 - 1e-9 {
            assert!((r - 1.0).abs() < 1e-12, "rhat_limit({t}) = {r}");
        }
    }
    let x1 = trace_column(&traces, "xhat1_limit");
    let x2 = trace_column(&traces, "xhat2_limit");
    let i = x1.iter().position(|(t, _)| (t - 2.0 / 3.0).abs() < 1e-12).unwrap();
    assert!((x1[i].1 - 2.0).abs() < 1e-12 && (x2[i].1 - 1.0).abs() < 1e-12);

    for file in ["convergence.csv", "pipeline.json", "pipeline.csv", "paths/x.json", "paths/x_n100.json"] {
        assert!(out.join(file).is_file(), "{file} missing");
    }
}

#[test]
fn outputs_are_deterministic() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for d in [&a, &b] {
        assert!(wm1(&["demo-example", "--n-range", "2,10", "--out", s(d)]).status.success());
    }
    for file in ["paramrep_traces.csv", "convergence.csv", "pipeline.json", "pipeline.csv"] {
        assert_eq!(fs::read(a.join(file)).unwrap(), fs::read(b.join(file)).unwrap(), "{file} differs");
    }

    let problem = write_json(dir.path(), "problem.json", &relaxation_problem());
    let u = write_json(dir.path(), "u.json", &two_stage_jump(10));
    let run = || wm1(&["simulate", s(&problem), s(&u), "--paths", "30", "--seed", "3"]).stdout;
    assert_eq!(run(), run());
}

#[test]
fn written_paths_roundtrip() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("demo");
    assert!(wm1(&["demo-example", "--n-range", "10", "--out", s(&out)]).status.success());
    let text = fs::read_to_string(out.join("paths/x_n10.json")).unwrap();
    let path: CadlagPath = serde_json::from_str(&text).unwrap();
    assert_eq!(path, two_stage_jump(10));

    let rep = stdout_json(&wm1(&["paramrep", s(&out.join("paths/x_n10.json"))]));
    assert_eq!(rep["rhat"].as_array().unwrap().last().unwrap().as_f64().unwrap(), 2.0);
}

#[test]
fn oscillation_and_stretch_run() {
    let dir = TempDir::new().unwrap();
    let a = write_json(dir.path(), "a.json", &two_stage_jump(10));
    let b = write_json(dir.path(), "b.json", &two_stage_jump(100));
    let osc = wm1(&["oscillation", s(&a), s(&b), "--format", "csv"]);
    assert!(osc.status.success(), "stderr: {}", String::from_utf8_lossy(&osc.stderr));

    let u = CadlagPath::step(1.0, PadMode::ZeroLeft, vec![0.0, 0.5], vec![vec![0.0], vec![1.0]]).unwrap();
    let u = write_json(dir.path(), "u.json", &u);
    let v = stdout_json(&wm1(&["stretch", s(&u)]));
    assert!(v["stretched"].is_object());
}
