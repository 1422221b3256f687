mod common;

use std::path::Path;
use std::process::{Command, Output};

use common::fixture;
use serde_json::Value;

fn lab(args: &[&str]) -> Output {
    lab_with_seed(args, None)
}

fn lab_with_seed(args: &[&str], seed: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_extremal-lab"));
    cmd.args(args).env_remove("EXTREMAL_LAB_SEED");
    if let Some(s) = seed {
        cmd.env("EXTREMAL_LAB_SEED", s);
    }
    cmd.output().unwrap()
}

fn fx(name: &str) -> String {
    fixture(name).display().to_string()
}

fn report(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("bad JSON ({e}): {}", String::from_utf8_lossy(&out.stdout)))
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn csv_rows(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut rd = csv::Reader::from_path(path).unwrap();
    let header = rd.headers().unwrap().iter().map(str::to_string).collect();
    let rows = rd.records().map(|r| r.unwrap().iter().map(|v| v.parse().unwrap()).collect()).collect();
    (header, rows)
}

fn write_csv(path: &Path, header: &[String], rows: &[Vec<f64>]) {
    let mut w = csv::Writer::from_path(path).unwrap();
    w.write_record(header).unwrap();
    for r in rows {
        w.write_record(r.iter().map(|v| format!("{v:.16e}"))).unwrap();
    }
    w.flush().unwrap();
}

#[test]
fn help_lists_subcommands() {
    let out = lab(&["--help"]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    for sub in ["solve", "check", "noether", "transform", "regularity"] {
        assert!(text.contains(sub), "{sub} missing from help");
    }
}

#[test]
fn solve_quadratic_writes_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("q.csv");
    let out = lab(&["solve", &fx("quadratic.prob"), "--steps", "512", "--out", csv.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let r = report(&out);
    assert_eq!(r["command"], "solve");
    let cost = r["result"]["trajectory"]["cost"].as_f64().unwrap();
    assert!((cost - 1.0).abs() <= 1e-9, "cost {cost}");
    let (header, rows) = csv_rows(&csv);
    assert_eq!(header, ["t", "x1", "psi1", "u1", "H"]);
    assert_eq!(rows.len(), 513);
}

#[test]
fn solve_rejects_incomplete_boundary() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("free.prob");
    let text = std::fs::read_to_string(fixture("quadratic.prob")).unwrap().replace("x1_t1 = 1", "");
    std::fs::write(&p, text).unwrap();
    let out = lab(&["solve", p.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("boundary incomplete"), "{}", stderr(&out));
    assert!(report(&out)["result"]["error"].as_str().unwrap().contains("boundary incomplete"));
}

#[test]
fn solve_abnormal_multiplier_is_numerical_failure() {
    let out = lab(&["solve", &fx("quadratic.prob"), "--psi0", "0"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).contains("nontriviality"), "{}", stderr(&out));
}

#[test]
fn solve_rejects_bad_step_count() {
    let out = lab(&["solve", &fx("quadratic.prob"), "--steps", "4"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn check_reports_symbolic_zero_and_violation() {
    let out = lab(&["check", &fx("prob10.prob"), "--f", "H*psi1*x1"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert_eq!(report(&out)["result"]["verdict"]["mode"], "symbolic-zero");

    let out = lab(&["check", &fx("quadratic.prob"), "--f", "x1"]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(r["result"]["verdict"]["mode"], "violated");
    assert!(r["result"]["verdict"]["witness"]["point"].is_object());
}

#[test]
fn check_monitors_a_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("q.csv");
    assert!(lab(&["solve", &fx("quadratic.prob"), "--out", csv.to_str().unwrap()]).status.success());
    let out = lab(&["check", &fx("quadratic.prob"), "--f", "H", "--trajectory", csv.to_str().unwrap()]);
    let drift = report(&out)["result"]["verdict"]["drift"]["max"].as_f64().unwrap();
    assert!(drift <= 1e-9, "drift {drift:e}");
}

#[test]
fn noether_emits_conserved_quantities() {
    let out = lab(&["noether", &fx("quadratic.prob"), &fx("shift.fam")]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let r = report(&out);
    let par = &r["result"]["invariance"]["parameters"][0];
    assert_eq!(par["conserved"], "2*psi0*x1 + psi1*t");
    assert!(par["drift"]["max"].as_f64().unwrap() <= 1e-9);

    let out = lab(&["noether", &fx("cubicpoly.prob"), &fx("scale.fam")]);
    assert_eq!(report(&out)["result"]["invariance"]["parameters"][0]["conserved"], "psi1*x1 + psi2*x2");
}

#[test]
fn noether_rejects_malformed_family() {
    let out = lab(&["noether", &fx("quadratic.prob"), &fx("bad.fam")]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).starts_with("error:"));
}

#[test]
fn tau_lift_sits_on_zero_level_and_projection_checks_it() {
    let dir = tempfile::tempdir().unwrap();
    let orig = dir.path().join("q.csv");
    let img = dir.path().join("img.csv");
    let back = dir.path().join("back.csv");
    assert!(lab(&["solve", &fx("quadratic.prob"), "--out", orig.to_str().unwrap()]).status.success());

    let out = lab(&["transform", &fx("quadratic.prob"), "--kind", "tau", "--lift", orig.to_str().unwrap(), "--out", img.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let (header, mut rows) = csv_rows(&img);
    assert_eq!(header, ["t", "t_state", "z1", "psi1", "psi2", "v", "w1", "H"]);
    assert!(rows.iter().all(|r| r[7].abs() <= 1e-7));

    let out = lab(&["transform", &fx("quadratic.prob"), "--kind", "tau", "--project", img.to_str().unwrap(), "--out", back.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let gap = report(&out)["result"]["project"]["cost_gap"].as_f64().unwrap();
    assert!(gap <= 1e-9, "gap {gap:e}");
    let (_, back_rows) = csv_rows(&back);
    let (_, orig_rows) = csv_rows(&orig);
    for (a, b) in back_rows.iter().zip(&orig_rows) {
        assert!((a[1] - b[1]).abs() <= 1e-9);
    }

    // push the image off the zero level by one unit
    for r in &mut rows {
        r[3] += 1.0;
        r[7] += r[5];
    }
    write_csv(&img, &header, &rows);
    let out = lab(&["transform", &fx("quadratic.prob"), "--kind", "tau", "--project", img.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("zero-level"), "{}", stderr(&out));
}

#[test]
fn gamkrelidze_image_file() {
    let dir = tempfile::tempdir().unwrap();
    let image = dir.path().join("image.prob");
    let out = lab(&["transform", &fx("quadratic.prob"), "--kind", "gam", "--upsilon", "1/u1^2", "--box", "t:0,1;x1:-1,1;u1:0.5,2", "--out", image.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = std::fs::read_to_string(&image).unwrap();
    assert!(text.contains("L = \"1\""), "{text}");
    assert!(text.contains("t_state"));

    let out = lab(&["transform", &fx("quadratic.prob"), "--kind", "gam", "--upsilon", "-1"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn regularity_verdicts() {
    let out = lab(&["regularity", &fx("quadratic.prob"), "--condition", "27"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let v = &report(&out)["result"]["verdict"];
    assert_eq!(v["k"].as_f64(), Some(0.0));
    assert_eq!(v["suspected_violation"], false);

    let out = lab(&["regularity", &fx("xu2.prob"), "--condition", "27"]);
    assert_eq!(report(&out)["result"]["verdict"]["suspected_violation"], true);

    let out = lab(&["regularity", &fx("quadratic.prob"), "--condition", "coercivity", "--theta", "r^2"]);
    assert_eq!(report(&out)["result"]["verdict"]["passed"], true);
    let out = lab(&["regularity", &fx("quadratic.prob"), "--condition", "coercivity", "--theta", "r^3"]);
    assert_eq!(report(&out)["result"]["verdict"]["passed"], false);

    let out = lab(&["regularity", &fx("sine.prob"), "--condition", "convexity"]);
    assert_eq!(report(&out)["result"]["verdict"]["passed"], false);

    let out = lab(&["regularity", &fx("quadratic.prob"), "--condition", "42"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn seed_moves_sampled_witness() {
    let q = fx("quadratic.prob");
    let w = |seed| report(&lab_with_seed(&["check", &q, "--f", "x1"], seed))["result"]["verdict"]["witness"].clone();
    assert_eq!(w(None), w(Some("0")));
    assert_ne!(w(Some("0")), w(Some("7")));
}

#[test]
fn report_file_matches_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.json");
    let out = lab(&["--report", path.to_str().unwrap(), "check", &fx("quadratic.prob"), "--f", "H"]);
    let mut a = report(&out);
    let mut b: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    a["wall_time_ms"] = Value::Null;
    b["wall_time_ms"] = Value::Null;
    assert_eq!(a, b);
}
