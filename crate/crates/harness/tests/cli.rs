use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use nondecomp::artifacts::{read_trace_csv, validate_against_schema, RunSummary, SUMMARY_SCHEMA, TRACE_HEADER};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_nondecomp"))
}

fn small(algo: &str, measure: &str, out: &Path) -> Vec<String> {
    [
        "--algo", algo, "--measure", measure, "--seed", "7", "--synthetic-n", "400", "--synthetic-p",
        "0.2", "--synthetic-separation", "1.5", "--hidden", "4", "--iters", "55", "--batch", "32",
        "--inner-iters", "2", "--pretrain-epochs", "1",
    ]
    .iter()
    .map(|s| s.to_string())
    .chain(["--out".to_string(), out.display().to_string()])
    .collect()
}

fn run(args: &[String]) -> Output {
    bin().arg("run").args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

#[test]
fn run_writes_artifacts_with_one_row_per_eval_point() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r");
    let o = run(&small("dspade", "min", &out));
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["trace.csv", "summary.json", "plot.svg", "timing.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }
    let bytes = fs::read(out.join("trace.csv")).unwrap();
    let text = String::from_utf8(bytes.clone()).unwrap();
    assert_eq!(text.lines().next().unwrap(), TRACE_HEADER.join(","));
    let rows = read_trace_csv(&bytes).unwrap();
    // every 10 iterations plus the last
    assert_eq!(rows.iter().map(|r| r.iter).collect::<Vec<_>>(), vec![10, 20, 30, 40, 50, 55]);
    assert!(rows.iter().all(|r| r.alpha.is_some() && r.level_v.is_none()));
    assert_eq!(rows[5].samples, 55 * 32);

    let summary: serde_json::Value = serde_json::from_slice(&fs::read(out.join("summary.json")).unwrap()).unwrap();
    let schema: serde_json::Value = serde_json::from_str(SUMMARY_SCHEMA).unwrap();
    validate_against_schema(&summary, &schema).unwrap();
    let s: RunSummary = serde_json::from_value(summary).unwrap();
    let last = rows.last().unwrap();
    assert_eq!(s.rows, rows.len());
    assert_eq!(s.final_test_metric, last.test_metric);
    assert_eq!(s.final_train_metric, last.train_metric);
    assert_eq!(s.samples, last.samples);
    let best = rows.iter().filter_map(|r| r.test_metric).fold(f64::NEG_INFINITY, f64::max);
    assert_eq!(s.best_test_metric, Some(best));
    let stable = rows.iter().find(|r| r.grad_norm.unwrap() <= s.epsilon).map(|r| r.iter);
    assert_eq!(s.first_stable_iter, stable);

    let svg = fs::read_to_string(out.join("plot.svg")).unwrap();
    assert!(svg.starts_with("<?xml") && svg.contains("<polyline"));
    assert!(!svg.contains("href") && !svg.contains("url("));
}

#[test]
fn repeated_runs_give_identical_traces() {
    let dir = tempfile::tempdir().unwrap();
    for algo in [("dspade", "q_mean"), ("dnemsis", "kld"), ("damp", "f1"), ("structann", "f1")] {
        let a = dir.path().join(format!("{}-a", algo.0));
        let b = dir.path().join(format!("{}-b", algo.0));
        assert_eq!(code(&run(&small(algo.0, algo.1, &a))), 0);
        assert_eq!(code(&run(&small(algo.0, algo.1, &b))), 0);
        assert_eq!(fs::read(a.join("trace.csv")).unwrap(), fs::read(b.join("trace.csv")).unwrap(), "{algo:?}");
    }
}

#[test]
fn config_file_with_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    fs::write(
        &cfg,
        "seed = 3\nalgo = \"plugin\"\nmeasure = \"f1\"\nsynthetic_n = 400\nsynthetic_p = 0.25\n\
         hidden = [4]\niters = 30\neval_every = 5\n",
    )
    .unwrap();
    let out = dir.path().join("o");
    let o = bin()
        .args(["run", "--config"])
        .arg(&cfg)
        .args(["--iters", "20", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rows = read_trace_csv(&fs::read(out.join("trace.csv")).unwrap()).unwrap();
    assert_eq!(rows.len(), 4);
    let s: RunSummary = serde_json::from_slice(&fs::read(out.join("summary.json")).unwrap()).unwrap();
    assert!(s.plugin.is_some());
    assert_eq!(s.config["train"]["iterations"], 20);
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x");
    // plug-in thresholds need a pseudolinear measure
    assert_eq!(code(&run(&small("plugin", "min", &out))), 2);
    assert_eq!(code(&run(&small("dspade", "kld", &out))), 2);
    assert_eq!(code(&run(&small("dnemsis", "f1", &out))), 2);
    assert!(!out.exists());
    // no seed
    let o = bin().args(["run", "--algo", "ce", "--measure", "f1"]).output().unwrap();
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("seed"));
    let o = bin().args(["run", "--algo", "nope"]).output().unwrap();
    assert_eq!(code(&o), 2);
    let o = bin().args(["run", "--config", "/does/not/exist.toml"]).output().unwrap();
    assert_eq!(code(&o), 2);
}

#[test]
fn divergence_exits_3_with_partial_trace() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("nan");
    let mut args = small("ce", "f1", &out);
    args.extend(["--eta".into(), "1e308".into(), "--eval-every".into(), "1".into()]);
    let o = run(&args);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(out.join("trace.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), TRACE_HEADER.join(","));
    let s: RunSummary = serde_json::from_slice(&fs::read(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(s.status, "diverged");
}

#[test]
fn version_and_help() {
    let o = bin().arg("--version").output().unwrap();
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains(env!("CARGO_PKG_VERSION")));
    for sub in [vec!["--help"], vec!["run", "--help"], vec!["compare", "--help"], vec!["drift", "--help"]] {
        let o = bin().args(&sub).output().unwrap();
        assert_eq!(code(&o), 0, "{sub:?}");
    }
    let help = String::from_utf8(bin().args(["run", "--help"]).output().unwrap().stdout).unwrap();
    for flag in ["--algo", "--measure", "--data", "--eta", "--batch", "--iters", "--seed", "--out"] {
        assert!(help.contains(flag), "{flag}");
    }
}

#[test]
fn compare_writes_one_curve_per_algorithm() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cmp");
    let mut args = small("ce", "min", &out);
    args.extend(["--algos".into(), "dspade,ce".into(), "--x".into(), "samples".into()]);
    let o = bin().arg("compare").args(&args).output().unwrap();
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let svg = fs::read_to_string(out.join("plot.svg")).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 2);
    let table = fs::read_to_string(out.join("table.csv")).unwrap();
    let mut lines = table.lines();
    assert_eq!(lines.next().unwrap(), "samples,dspade,ce");
    assert_eq!(lines.count(), 6);
    assert!(out.join("dspade/trace.csv").exists() && out.join("ce/trace.csv").exists());

    // a single member degenerates to one curve
    let one = dir.path().join("one");
    let o = bin().arg("compare").args(small("ce", "min", &one)).output().unwrap();
    assert_eq!(code(&o), 0);
    assert_eq!(fs::read_to_string(one.join("plot.svg")).unwrap().matches("<polyline").count(), 1);
}

#[test]
fn compare_rejects_mismatched_cadence() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.toml");
    let b = dir.path().join("b.toml");
    fs::write(&a, "seed = 1\nalgo = \"ce\"\nmeasure = \"f1\"\neval_every = 10\n").unwrap();
    fs::write(&b, "seed = 1\nalgo = \"damp\"\nmeasure = \"f1\"\neval_every = 20\n").unwrap();
    let o = bin()
        .args(["compare", "-c"])
        .arg(&a)
        .arg("-c")
        .arg(&b)
        .arg("--out")
        .arg(dir.path().join("o"))
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("cadence"));
}

#[test]
fn drift_study_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("drift");
    let mut args = small("ce", "kld", &out);
    args.extend(["--algos".into(), "ce,dnemsis".into()]);
    let o = bin().arg("drift").args(&args).output().unwrap();
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("drift.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "model,target_prior,true_prior,estimated_prior,kld");
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 18);
    assert_eq!(rows.iter().filter(|r| r.starts_with("ce,")).count(), 9);
    assert!(rows[0].starts_with("ce,0.1,0.1,"));
    assert!(out.join("drift.svg").exists());

    let o = bin().arg("drift").args(small("ce", "f1", &dir.path().join("bad"))).output().unwrap();
    assert_eq!(code(&o), 2);
}

#[test]
fn data_dir_fallback() {
    let dir = tempfile::tempdir().unwrap();
    let mut text = String::new();
    for i in 0..200 {
        let (label, shift) = if i % 4 == 0 { ("+1", 1.0) } else { ("-1", -1.0) };
        let x = shift + ((i * 37 % 11) as f64 - 5.0) / 5.0;
        text.push_str(&format!("{label} 1:{x} 3:{}\n", (i % 7) as f64 / 7.0));
    }
    fs::write(dir.path().join("toy.svm"), text).unwrap();
    let out = dir.path().join("o");
    let o = bin()
        .env("NONDECOMP_DATA_DIR", dir.path())
        .current_dir(std::env::temp_dir())
        .args(["run", "--algo", "ce", "--measure", "q_mean", "--seed", "1", "--data", "toy.svm", "--iters", "20"])
        .args(["--batch", "16", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let s: RunSummary = serde_json::from_slice(&fs::read(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(s.config["data"]["kind"], "libsvm");

    let o = bin()
        .env_remove("NONDECOMP_DATA_DIR")
        .current_dir(std::env::temp_dir())
        .args(["run", "--algo", "ce", "--measure", "q_mean", "--seed", "1", "--data", "toy-missing.svm"])
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
}
