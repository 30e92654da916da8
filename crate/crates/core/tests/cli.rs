use std::path::Path;
use std::process::{Command, Output};

use enkf_smcs::experiments::{io, CompareReport, InferSummary, REPORT_FILE, RESULTS_FILE, SUMMARY_FILE};

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_enkf-smcs")).args(args).output().expect("spawn cli")
}

fn ok(args: &[&str]) -> Output {
    let out = cli(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn simulate_writes_one_row_per_step() {
    let dir = tempfile::tempdir().unwrap();
    for (preset, cols) in [("bernoulli-s08", 1), ("erk", 4), ("lorenz-x", 1)] {
        let out = dir.path().join(preset);
        ok(&["simulate", "--preset", preset, "--out", path(&out)]);
        let text = std::fs::read_to_string(out.join("observations.csv")).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        let header: Vec<String> = std::iter::once("t".to_string()).chain((1..=cols).map(|i| format!("y{i}"))).collect();
        assert_eq!(lines[0], header.join(","));
        let expected_rows = if preset == "lorenz-x" { 100 } else { 50 };
        assert_eq!(lines.len() - 1, expected_rows, "{preset}");
        assert!(lines[1..].iter().all(|l| l.split(',').count() == cols + 1));
        assert!(out.join("observations.json").exists());
    }
}

#[test]
fn fixed_seeds_give_byte_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        ok(&["simulate", "--preset", "bernoulli-s04", "--seed", "77", "--out", path(out)]);
        ok(&[
            "infer", "--preset", "bernoulli-s04", "--algorithm", "enkf_smcs_wr", "--seed", "3", "--particles", "300",
            "--data", path(&out.join("observations.csv")), "--out", path(out),
        ]);
    }
    for file in ["observations.csv", "observations.json", RESULTS_FILE, SUMMARY_FILE] {
        assert_eq!(std::fs::read(a.join(file)).unwrap(), std::fs::read(b.join(file)).unwrap(), "{file}");
    }
    let c = dir.path().join("c");
    ok(&[
        "infer", "--preset", "bernoulli-s04", "--algorithm", "enkf_smcs_wr", "--seed", "3", "--particles", "300",
        "--data", path(&a.join("observations.csv")), "--out", path(&c), "--sequential",
    ]);
    assert_eq!(std::fs::read(a.join(RESULTS_FILE)).unwrap(), std::fs::read(c.join(RESULTS_FILE)).unwrap());
}

#[test]
fn results_file_has_documented_layout() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    ok(&["infer", "--preset", "lorenz-x", "--algorithm", "enkf_smcs_wr", "--particles", "200", "--out", path(out)]);
    let text = std::fs::read_to_string(out.join(RESULTS_FILE)).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "t,param_index,mean,std,bias,ess,refined,resampled,model_evals");
    assert_eq!(lines.count(), 100 * 3);
    let summary: InferSummary = io::read_json(&out.join(SUMMARY_FILE)).unwrap();
    assert_eq!(summary.run.steps, 100);
    assert_eq!(summary.run.refinement_steps.last(), Some(&100));
    assert_eq!(
        summary.run.total_model_evals,
        200 * 101 + 200 * summary.run.refinement_steps.len() as u64
    );
}

#[test]
fn single_run_compare_matches_infer() {
    let dir = tempfile::tempdir().unwrap();
    let (i, c) = (dir.path().join("infer"), dir.path().join("compare"));
    let args = ["--preset", "bernoulli-s08", "--algorithm", "enkf_smcs", "--seed", "4", "--particles", "250"];
    ok(&[&["infer"], &args[..], &["--out", path(&i)]].concat());
    let out = ok(&[&["compare"], &args[..], &["--out", path(&c)]].concat());
    assert!(String::from_utf8_lossy(&out.stdout).contains("enkf_smcs"));
    let summary: InferSummary = io::read_json(&i.join(SUMMARY_FILE)).unwrap();
    let report: CompareReport = io::read_json(&c.join(REPORT_FILE)).unwrap();
    assert_eq!(report.runs, vec![summary.run]);
    assert!(c.join("runs").join("enkf_smcs_seed4.csv").exists());
    assert!(c.join("compare.csv").exists());
}

#[test]
fn configuration_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"schema_version\": 1, \"name\": \"x\",\n \"model\": 3}").unwrap();
    for args in [
        vec!["infer", "--config", path(&bad)],
        vec!["infer", "--preset", "no-such-preset"],
        vec!["infer", "--preset", "bernoulli-s04", "--particles", "1"],
    ] {
        let out = cli(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
    }
    let line = String::from_utf8_lossy(&cli(&["infer", "--config", path(&bad)]).stderr).to_string();
    assert!(line.contains("line 2"), "{line}");

    let erk = dir.path().join("erk");
    ok(&["simulate", "--preset", "erk", "--out", path(&erk)]);
    let out = cli(&[
        "infer", "--preset", "bernoulli-s04", "--data", path(&erk.join("observations.csv")), "--out", path(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn numerical_failure_exits_with_three_and_names_the_step() {
    let dir = tempfile::tempdir().unwrap();
    let out = cli(&["infer", "--preset", "lorenz-y", "--algorithm", "enkf_smcs_wr", "--seed", "5", "--out", path(dir.path())]);
    assert_eq!(out.status.code(), Some(3));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("degenerate ensemble"), "{stderr}");
    assert!(stderr.contains("failed at step 48"), "{stderr}");
}

#[test]
fn presets_are_listed() {
    let out = ok(&["presets"]);
    let text = String::from_utf8_lossy(&out.stdout);
    for name in ["bernoulli-s04", "lorenz-y", "erk-full", "linear"] {
        assert!(text.lines().any(|l| l == name), "{name}");
    }
}
