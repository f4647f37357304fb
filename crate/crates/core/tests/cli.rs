use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use localboost::harness::{DataSource, RunConfig, RunReport};
use localboost::metrics::MetricsReport;
use localboost::weaksource::GeneratorConfig;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_localboost"))
}

fn run(args: &[&str], cwd: &Path) -> Output {
    bin().args(args).current_dir(cwd).output().unwrap()
}

fn small_config(dir: &Path) -> String {
    let mut g = GeneratorConfig::benchmark();
    g.n_weak = 600;
    g.n_clean = 100;
    g.n_test = 200;
    g.dim = 6;
    let mut cfg = RunConfig {
        data: DataSource::Synthetic { generator: g },
        clean_size: 80,
        rounds: 1,
        ..RunConfig::default()
    };
    cfg.cond_fn.hidden = [8, 8];
    cfg.cond_fn.train.epochs = 5;
    cfg.learner.train.epochs = 5;
    let path = dir.join("small.json");
    fs::write(&path, cfg.to_json_pretty().unwrap()).unwrap();
    path.to_string_lossy().into_owned()
}

fn read_json<T: serde::de::DeserializeOwned>(p: impl AsRef<Path>) -> T {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn prop1_prints_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["prop1"], dir.path());
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["min_convex_loss"], 0.5);
    assert_eq!(v["gated_loss"], 0.0);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.json"), r#"{"rounds": "five"}"#).unwrap();
    fs::write(dir.path().join("range.json"), r#"{"k": 0}"#).unwrap();
    let code = |args: &[&str]| run(args, dir.path()).status.code();
    assert_eq!(
        code(&["train", "--config", "bad.json", "--out", "r"]),
        Some(2)
    );
    assert_eq!(
        code(&["train", "--config", "range.json", "--out", "r"]),
        Some(2)
    );
    assert_eq!(
        code(&["train", "--config", "missing.json", "--out", "r"]),
        Some(3)
    );
    assert_eq!(code(&["train", "--variant", "nope", "--out", "r"]), Some(2));
    assert_eq!(
        code(&["train", "--profile", "mnist", "--out", "r"]),
        Some(2)
    );
    assert_eq!(
        code(&["evaluate", "--ensemble", "none.json", "--data", "none.json"]),
        Some(3)
    );
}

#[test]
fn train_then_evaluate_reproduces_test_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let d = dir.path();
    assert!(run(
        &["train", "--config", &cfg, "--seed", "4", "--out", "run"],
        d
    )
    .status
    .success());
    for f in [
        "metrics.jsonl",
        "report.json",
        "ensemble.json",
        "config.resolved.json",
    ] {
        assert!(d.join("run").join(f).exists(), "{f}");
    }
    let resolved: RunConfig = read_json(d.join("run/config.resolved.json"));
    assert_eq!(resolved.seed, 4);
    assert_eq!(resolved.k, Some(5));

    assert!(run(
        &["generate", "--config", &cfg, "--seed", "4", "--out", "data"],
        d
    )
    .status
    .success());
    let out = run(
        &[
            "evaluate",
            "--ensemble",
            "run/ensemble.json",
            "--data",
            "data/test.json",
            "--out",
            "eval.json",
        ],
        d,
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report: RunReport = read_json(d.join("run/report.json"));
    let eval: MetricsReport = read_json(d.join("eval.json"));
    assert_eq!(eval, report.test);
}

#[test]
fn saved_config_replays_byte_identically() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let d = dir.path();
    assert!(
        run(&["train", "--config", &cfg, "--seed", "8", "--out", "a"], d)
            .status
            .success()
    );
    assert!(run(
        &["train", "--config", "a/config.resolved.json", "--out", "b"],
        d
    )
    .status
    .success());
    for f in ["ensemble.json", "metrics.jsonl", "report.json"] {
        assert_eq!(
            fs::read(d.join("a").join(f)).unwrap(),
            fs::read(d.join("b").join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn profile_flag_sets_localization() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = run(
        &["train", "--config", &cfg, "--profile", "trec", "--out", "r"],
        dir.path(),
    );
    assert!(out.status.success());
    let resolved: RunConfig = read_json(dir.path().join("r/config.resolved.json"));
    assert_eq!((resolved.k, resolved.c1), (Some(5), Some(10.0)));
}

#[test]
fn ablate_and_sweep_write_summaries() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let d = dir.path();
    assert!(run(&["ablate", "--config", &cfg, "--out", "abl"], d)
        .status
        .success());
    let reports: Vec<RunReport> = read_json(d.join("abl/ablation.json"));
    let names: Vec<&str> = reports.iter().map(|r| r.variant.name()).collect();
    assert_eq!(
        names,
        [
            "full",
            "no_cond_fn",
            "hard_matching",
            "weak_only_weights",
            "integrated_mode"
        ]
    );
    for n in names {
        assert!(d.join("abl").join(n).join("ensemble.json").exists());
    }

    let out = run(
        &[
            "sweep",
            "--config",
            &cfg,
            "--seeds",
            "1,2",
            "--variant",
            "weak_only_weights",
            "--out",
            "sw",
        ],
        d,
    );
    assert!(out.status.success());
    let s: serde_json::Value = read_json(d.join("sw/sweep.json"));
    assert_eq!(s["completed"], serde_json::json!([1, 2]));
    assert_eq!(s["variant"], "weak_only_weights");
}
