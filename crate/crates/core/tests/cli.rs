use std::path::Path;
use std::process::{Command, Output};

use gencvx::corpus::{corpus, Property};
use gencvx::report::{corpus_report, corpus_status, Report, RunConfig, BCURVE_HEADER};

fn gencvx(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gencvx")).args(args).env_remove("GENCVX_SEED").output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn read_report(path: &Path) -> Report {
    Report::from_json(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn analyze_fractional_holds() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let o = gencvx(&["analyze", "--corpus", "fractional", "--properties", "pseudolinear", "--seed", "42", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = read_report(&out);
    assert_eq!(r.schema, "v1");
    assert_eq!(r.config.plan.seed, 42);
    assert_eq!(r.functions[0].verdicts[0].property, Property::Pseudolinear);
    assert_eq!(r.functions[0].verdicts[0].verdict.name(), "holds-at-samples");
    assert!(r.timing.is_none());
    assert!(r.assumptions.iter().any(|a| a.contains("Clarke")));
    let line = stdout(&o);
    assert!(line.starts_with("pseudolinear holds-at-samples witnesses=0 max_residual=-"), "{line}");
    assert_eq!(line.lines().count(), 1);
}

#[test]
fn analyze_cubic_is_refuted_near_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let o = gencvx(&[
        "analyze", "--function", "x1^3", "--dim", "1", "--region", "box(-1..1)", "--properties", "pseudoconvex", "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let r = read_report(&out);
    let w = &r.functions[0].verdicts[0].witnesses[0];
    assert!(w.x[0].abs() < 0.05, "{}", w.x);
    assert!(stdout(&o).starts_with("pseudoconvex refuted witnesses="));
}

#[test]
fn syntax_error_exits_1_without_a_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let o = gencvx(&["analyze", "--function", "min(x1", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.contains("syntax error at offset 7"), "{err}");
    assert!(!out.exists());
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn evaluation_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    // log is undefined on half the box
    let o = gencvx(&["analyze", "--function", "log(x1)", "--region", "box(-1..1)", "--samples", "20", "--out", out.to_str().unwrap()]);
    assert!(matches!(o.status.code(), Some(0) | Some(1) | Some(2)));
    if o.status.code() == Some(1) {
        assert!(!out.exists());
    }
    let o = gencvx(&["analyze", "--function", "x1", "--region", "box(0..1, 0..1)", "--dim", "1"]);
    assert_eq!(o.status.code(), Some(1));
    let o = gencvx(&["analyze", "--corpus", "nonexistent"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("nonexistent"));
}

#[test]
fn config_file_and_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, r#"{"corpus": "affine", "properties": ["quasilinear"], "plan": {"pairs": 30, "seed": 5}}"#).unwrap();
    let out = dir.path().join("r.json");
    let o = gencvx(&["analyze", "--config", cfg.to_str().unwrap(), "--samples", "25", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = read_report(&out);
    assert_eq!((r.config.plan.pairs, r.config.plan.seed), (25, 5));
    assert_eq!(r.config.properties, vec![Property::Quasilinear]);
    assert_eq!(r.config.out.as_deref(), Some(out.as_path()));

    std::fs::write(&cfg, r#"{"corpus": "affine", "sampels": 3}"#).unwrap();
    let o = gencvx(&["analyze", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("sampels"));
}

#[test]
fn seed_falls_back_to_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r.json");
    let o = Command::new(env!("CARGO_BIN_EXE_gencvx"))
        .args(["analyze", "--corpus", "affine", "--properties", "quasiconvex", "--samples", "10", "--out", out.to_str().unwrap()])
        .env("GENCVX_SEED", "1234")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(read_report(&out).config.plan.seed, 1234);
}

#[test]
fn timing_only_on_request() {
    let o = gencvx(&["analyze", "--corpus", "affine", "--properties", "quasiconvex", "--samples", "10", "--timing", "--out", "-"]);
    assert_eq!(o.status.code(), Some(0));
    let r = Report::from_json(&stdout(&o)).unwrap();
    assert!(r.timing.unwrap().elapsed_ms >= 0.0);
}

#[test]
fn bcurve_fractional_matches_closed_form() {
    let o = gencvx(&["bcurve", "--corpus", "fractional", "--x", "1,0", "--y", "2,2", "--lambda-grid", "5"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(!text.contains('\r'));
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some(BCURVE_HEADER));
    let rows: Vec<Vec<String>> = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    assert_eq!(rows.len(), 5);
    for (k, row) in rows.iter().enumerate() {
        let l: f64 = row[0].parse().unwrap();
        let b: f64 = row[1].parse().unwrap();
        assert_eq!(l, (k + 1) as f64 / 6.0);
        assert!((b - 2.0 / (1.0 + l)).abs() < 1e-12);
        // 17 significant digits
        assert_eq!(row[1].split('e').next().unwrap().replace(['.', '-'], "").len(), 17);
    }
    // y lies outside the sampling box but inside the function's domain
    assert!(stderr(&o).contains("outside the region"));
}

#[test]
fn bcurve_degenerate_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("b.csv");
    let o = gencvx(&["bcurve", "--function", "x1^2 + x2^2", "--x", "0.5,0", "--y", "0,-0.5", "--lambda-grid", "3", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = std::fs::read_to_string(&out).unwrap();
    for row in text.lines().skip(1) {
        assert!(row.ends_with(",true"), "{row}");
        assert!(row.split(',').nth(1).unwrap().starts_with("1.0000000000000000e0"));
    }
    let o = gencvx(&["bcurve", "--corpus", "fractional", "--x", "0,1", "--y", "1,1"]);
    assert_eq!(o.status.code(), Some(1));
    let o = gencvx(&["bcurve", "--corpus", "fractional", "--x", "1", "--y", "1,1"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn corpus_default_plan_exits_0() {
    let o = gencvx(&["corpus", "--seed", "42"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o).lines().count(), 7 * 9);
}

#[test]
fn starved_corpus_exits_3() {
    let o = gencvx(&["corpus", "--samples", "1"]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("insufficient sampling"));
}

#[test]
fn wrong_label_exits_4() {
    let mut entries = corpus();
    let affine = entries.iter_mut().find(|e| e.name == "affine").unwrap();
    affine.labels.insert(Property::Pseudoconvex, false);
    let report = corpus_report(&entries, &RunConfig::default(), false).unwrap();
    assert_eq!(corpus_status(&report), 4);
    let m = &report.functions[0].mismatches;
    assert_eq!(m.len(), 1);
    assert_eq!(m[0].property, Property::Pseudoconvex);

    let mut entries = corpus();
    entries[6].labels.insert(Property::Quasiconvex, false);
    entries[3].labels.insert(Property::Pseudoconvex, true);
    let report = corpus_report(&entries, &RunConfig::default(), false).unwrap();
    assert_eq!(corpus_status(&report), 4);
    assert_eq!(report.functions.iter().map(|f| f.mismatches.len()).sum::<usize>(), 2);
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(gencvx(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(gencvx(&["analyze", "--samples", "many"]).status.code(), Some(1));
    assert_eq!(gencvx(&["analyze", "--corpus", "affine", "--samples", "0"]).status.code(), Some(1));
    assert_eq!(gencvx(&["--help"]).status.code(), Some(0));
}
