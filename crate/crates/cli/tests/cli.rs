use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_heatsphere"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

/// Two classes of count vectors over `n` words; class `a` favors the first
/// half of the vocabulary.
fn count_csv(dir: &Path, n: usize, per_class: usize) -> PathBuf {
    let mut text = String::from("id");
    for j in 0..n {
        let _ = write!(text, ",w{j}");
    }
    text.push_str(",label\n");
    let mut state = 12345u64;
    let mut next = || {
        state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (state >> 33) % 5
    };
    for i in 0..2 * per_class {
        let class = i % 2;
        let _ = write!(text, "s{i:03}");
        for j in 0..n {
            let boost = if (j < n / 2) == (class == 0) { 6 } else { 0 };
            let _ = write!(text, ",{}", next() + boost);
        }
        let _ = writeln!(text, ",{}", ["a", "b"][class]);
    }
    let path = dir.join(format!("counts_{n}.csv"));
    std::fs::write(&path, text).unwrap();
    path
}

fn json_of(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn cv_reports_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let input = count_csv(dir.path(), 12, 20);
    let input = input.to_str().unwrap();
    let mut reports = Vec::new();
    for (i, threads) in ["1", "2"].iter().enumerate() {
        let out = dir.path().join(format!("cv{i}.json"));
        let o = run(&[
            "cv",
            "--input",
            input,
            "--kernel",
            "ext",
            "--runs",
            "2",
            "--C-grid",
            "1,10",
            "--m-r",
            "15",
            "--kmeans-runs",
            "5",
            "--seed",
            "42",
            "--threads",
            threads,
            "--output",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        reports.push(std::fs::read(&out).unwrap());
    }
    assert_eq!(reports[0], reports[1]);
    let v: Value = serde_json::from_slice(&reports[0]).unwrap();
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["seed"], 42);
    assert!(v["result"].get("wall_time").is_none());
    assert_eq!(v["result"]["runs"].as_array().unwrap().len(), 2);
}

#[test]
fn timing_is_opt_in() {
    let dir = TempDir::new().unwrap();
    let input = count_csv(dir.path(), 8, 10);
    let out = dir.path().join("cv.json");
    let o = run(&[
        "cv",
        "--input",
        input.to_str().unwrap(),
        "--kernel",
        "cos",
        "--runs",
        "1",
        "--timing",
        "--output",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    assert!(json_of(&out)["result"]["wall_time"].as_f64().unwrap() >= 0.0);
}

#[test]
fn single_run_single_point_is_plain_cv() {
    let dir = TempDir::new().unwrap();
    let input = count_csv(dir.path(), 8, 10);
    let out = dir.path().join("cv.json");
    let o = run(&[
        "cv",
        "--input",
        input.to_str().unwrap(),
        "--kernel",
        "lin",
        "--runs",
        "1",
        "--C-grid",
        "1",
        "--output",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    let v = json_of(&out);
    let point = &v["result"]["runs"][0]["points"][0];
    let folds: Vec<f64> = point["fold_accuracies"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect();
    let mean = folds.iter().sum::<f64>() / folds.len() as f64;
    assert_eq!(folds.len(), 5);
    assert!((v["result"]["mean_best_accuracy"].as_f64().unwrap() - mean).abs() < 1e-15);
}

#[test]
fn kernel_outputs_are_reproducible_and_use_the_sweet_spot() {
    let dir = TempDir::new().unwrap();
    let input = count_csv(dir.path(), 100, 6);
    let mut grams = Vec::new();
    for i in 0..2 {
        let out = dir.path().join(format!("gram{i}.csv"));
        let o = run(&[
            "kernel",
            "--input",
            input.to_str().unwrap(),
            "--kernel",
            "ext",
            "--t-star",
            "1.0",
            "--map",
            "sqrt-l1",
            "--format",
            "csv",
            "--psd-check",
            "--output",
            out.to_str().unwrap(),
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        grams.push(std::fs::read(&out).unwrap());
        let side = json_of(&out.with_extension("json"));
        let t = side["result"]["spec"]["kind"]["t"].as_f64().unwrap();
        assert!((t - 100f64.ln() / 100.0).abs() < 1e-15);
        assert_eq!(side["result"]["m"], 12);
        assert_eq!(side["result"]["psd"]["pass"], true);
    }
    assert_eq!(grams[0], grams[1]);
    let text = String::from_utf8(grams[0].clone()).unwrap();
    assert!(text.starts_with("s000,s001"));
    assert_eq!(text.lines().count(), 13);
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = TempDir::new().unwrap();
    let input = count_csv(dir.path(), 8, 10);
    let input = input.to_str().unwrap();
    let cases: Vec<Vec<&str>> = vec![
        vec!["kernel", "--input", input, "--kernel", "lin", "--map", "sqrt-l1"],
        vec!["kernel", "--input", input, "--kernel", "ext", "--t", "0.1", "--t-star", "1"],
        vec!["kernel", "--input", input, "--kernel", "ext"],
        vec!["kernel", "--input", input, "--kernel", "cos", "--map", "none"],
        vec!["kernel", "--input", input, "--kernel", "rbf"],
        vec!["kernel", "--input", input, "--kernel", "nope"],
        vec!["cv", "--input", input, "--kernel", "cos", "--balance"],
        vec!["cv", "--input", input, "--kernel", "lin", "--t-star-grid", "1,2"],
        vec!["simulate", "--t", "0.1", "--t-star", "1"],
        vec!["diagnose", "--theta-grid", "4.0"],
        vec!["frobnicate"],
    ];
    for args in cases {
        let o = run(&args);
        assert_eq!(code(&o), 2, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn data_errors_exit_with_three() {
    let dir = TempDir::new().unwrap();
    let input = count_csv(dir.path(), 8, 10);
    let input = input.to_str().unwrap();
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "a,b,label\n1,x,p\n2,3,q\n").unwrap();
    let negative = dir.path().join("neg.csv");
    std::fs::write(&negative, "a,b,label\n1,-2,p\n2,3,q\n").unwrap();
    let cases: Vec<Vec<&str>> = vec![
        vec!["cv", "--input", input, "--kernel", "cos", "--m-r", "50"],
        vec!["kernel", "--input", "/nonexistent/file.csv", "--kernel", "lin"],
        vec!["kernel", "--input", bad.to_str().unwrap(), "--kernel", "lin"],
        vec!["kernel", "--input", negative.to_str().unwrap(), "--kernel", "cos"],
        vec!["simulate", "--walkers", "10"],
        vec!["simulate", "--delta", "0.5"],
    ];
    for args in cases {
        let o = run(&args);
        assert_eq!(code(&o), 3, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn simulate_matches_kernel_at_defaults() {
    let o = run(&["simulate", "--n", "3", "--t-star", "1.0", "--seed", "5"]);
    assert_eq!(code(&o), 0);
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    let ks = v["result"]["ks_statistic"].as_f64().unwrap();
    assert!(ks < 0.02, "KS {ks}");
    assert_eq!(v["result"]["histogram"].as_array().unwrap().len(), 32);
}

#[test]
fn simulate_sweep_and_path_dump() {
    let dir = TempDir::new().unwrap();
    for ts in ["0.5", "1.0", "2.0"] {
        let paths = dir.path().join(format!("paths_{ts}.csv"));
        let o = run(&[
            "simulate",
            "--t-star",
            ts,
            "--walkers",
            "2000",
            "--format",
            "csv",
            "--paths",
            paths.to_str().unwrap(),
            "--path-walkers",
            "3",
        ]);
        assert_eq!(code(&o), 0);
        let text = String::from_utf8(o.stdout).unwrap();
        assert!(text.starts_with("# heatsphere simulate"));
        assert!(text.contains("theta_lo,theta_hi,count,empirical_density,predicted_density"));
        let dump = std::fs::read_to_string(&paths).unwrap();
        let walkers: std::collections::BTreeSet<&str> =
            dump.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
        assert_eq!(walkers.len(), 3);
    }
}

#[test]
fn diagnose_slopes_and_regime_flag() {
    let o = run(&["diagnose", "--n-grid", "3,100,200"]);
    assert_eq!(code(&o), 0);
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    for s in v["result"]["summaries"].as_array().unwrap() {
        assert!(s["slope_ext_at_pi"].as_f64().unwrap().abs() < 1e-6);
        assert!(s["slope_prx_at_pi"].as_f64().unwrap() < 0.0);
    }
    // normalized exact profiles barely change with n at the sweet spot
    let rows = v["result"]["rows"].as_array().unwrap();
    let profile =
        |n: u64| -> Vec<f64> { rows.iter().filter(|r| r["n"] == n).map(|r| r["k_exact"].as_f64().unwrap()).collect() };
    let (a, b, c) = (profile(3), profile(100), profile(200));
    let sup = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
    assert!(sup(&a, &b).max(sup(&a, &c)).max(sup(&b, &c)) < 0.15);

    let boundary = 3.0 / 198.0;
    let grid = format!("{},{}", boundary * 0.999, boundary * 1.001);
    let o = run(&["diagnose", "--n-grid", "200", "--t-grid", &grid, "--theta-grid", "0.5"]);
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    let flags: Vec<bool> =
        v["result"]["summaries"].as_array().unwrap().iter().map(|s| s["unphysical"].as_bool().unwrap()).collect();
    assert_eq!(flags, vec![false, true]);
}

#[test]
fn headers_carry_config_and_seed() {
    let o = run(&["diagnose", "--n-grid", "5", "--theta-grid", "0.1,0.2", "--format", "csv", "--seed", "9"]);
    let text = String::from_utf8(o.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "# heatsphere diagnose schema_version=1 seed=9");
    assert!(lines.next().unwrap().starts_with("# config {"));
    assert!(lines.next().unwrap().starts_with("n,t,theta,k_prx"));
    assert_eq!(lines.count(), 2);
}
