use std::path::{Path, PathBuf};
use std::process::Command;

use bhs_cli::config::SamplerKind;
use bhs_cli::{cmd_benchmark, cmd_gentest, cmd_run, ExperimentConfig};

fn config(name: &str) -> ExperimentConfig {
    ExperimentConfig::load(&config_path(name)).unwrap()
}

fn config_path(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn bhs() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bhs"))
}

fn data_lines(text: &str) -> Vec<&str> {
    text.lines().skip(2).collect()
}

#[test]
fn run_writes_versioned_csv_and_json() {
    let dir = tempfile::tempdir().unwrap();
    let summary = cmd_run(&config("univariate.toml"), dir.path()).unwrap();
    // T = 100, δ = 0.1
    assert_eq!(summary.n_samples, 1000);

    let samples = std::fs::read_to_string(dir.path().join("samples.csv")).unwrap();
    let mut lines = samples.lines();
    assert_eq!(lines.next().unwrap(), "# schema: bhs-samples/1");
    assert!(lines.next().unwrap().starts_with("t,"));
    assert_eq!(data_lines(&samples).len(), 1000);
    let field = data_lines(&samples)[5].split(',').nth(1).unwrap();
    let mantissa = field.trim_start_matches('-').split('e').next().unwrap();
    assert_eq!(mantissa.replace('.', "").len(), 17, "{field}");

    let skeleton = std::fs::read_to_string(dir.path().join("skeleton.csv")).unwrap();
    assert_eq!(skeleton.lines().next().unwrap(), "# schema: bhs-skeleton/1");

    let json = std::fs::read_to_string(dir.path().join("summary.json")).unwrap();
    let value: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(value["schema"], "bhs-summary/1");
    assert!(json.find("\"schema\"").unwrap() < json.find("\"moments\"").unwrap());
    assert!(dir.path().join("histogram.json").exists());
}

#[test]
fn benchmark_table_has_four_rows() {
    let mut cfg = config("benchmark.toml");
    cfg.replications = 2;
    let dir = tempfile::tempdir().unwrap();
    let report = cmd_benchmark(&cfg, dir.path(), 2).unwrap();
    let labels: Vec<_> = report.rows().into_iter().map(|r| r.0).collect();
    assert_eq!(labels, ["MSE(mu1)", "MSE(mu2)", "MSE(var1)", "MSE(var2)"]);
    let csv = std::fs::read_to_string(dir.path().join("mse.csv")).unwrap();
    assert_eq!(csv.lines().nth(1).unwrap(), "quantity,gibbs,qbhs");
    assert_eq!(data_lines(&csv).len(), 4);

    cfg.replications = 1;
    assert!(cmd_benchmark(&cfg, dir.path(), 1).is_err());
}

#[test]
fn gentest_flags_the_unflipped_kernel() {
    let cfg = config("gentest_bps.toml");
    let dir = tempfile::tempdir().unwrap();
    let good = cmd_gentest(&cfg, dir.path(), false).unwrap();
    assert!(good.pass, "max |z| = {}", good.max_abs_z);
    let bad = cmd_gentest(&cfg, dir.path(), true).unwrap();
    assert!(!bad.pass);
}

#[test]
fn gentest_rejects_unusable_setups() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config("gentest.toml");
    cfg.gentest.as_mut().unwrap().functions = Some(vec![]);
    assert!(cmd_gentest(&cfg, dir.path(), false).is_err());

    let mut cfg = config("benchmark.toml");
    assert!(cmd_gentest(&cfg, dir.path(), false).is_err());
    cfg.sampler = SamplerKind::Gibbs;
    assert!(cmd_gentest(&cfg, dir.path(), false).is_err());
}

#[test]
fn seed_override_changes_the_chain() {
    let tmp = tempfile::tempdir().unwrap();
    let run = |seed: &str, sub: &str| {
        let dir = tmp.path().join(sub);
        let out = bhs()
            .args(["run", "--config"])
            .arg(config_path("univariate.toml"))
            .args(["--seed-override", seed, "--out-dir"])
            .arg(&dir)
            .output()
            .unwrap();
        assert!(out.status.success());
        std::fs::read(dir.join("samples.csv")).unwrap()
    };
    assert_ne!(run("1", "a"), run("2", "b"));
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.toml");
    std::fs::write(&bad, "sampler = \"bhs\"\nseed = 1\nbogus = 3\n").unwrap();
    let status = bhs().args(["run", "--config"]).arg(&bad).output().unwrap().status;
    assert_eq!(status.code(), Some(2));

    let status = bhs()
        .args(["gentest", "--corrupt-kernel", "--config"])
        .arg(config_path("gentest_bps.toml"))
        .arg("--out-dir")
        .arg(tmp.path())
        .output()
        .unwrap()
        .status;
    assert_eq!(status.code(), Some(3));

    let status = bhs()
        .args(["truth", "--config"])
        .arg(config_path("benchmark.toml"))
        .arg("--out-dir")
        .arg(tmp.path())
        .output()
        .unwrap()
        .status;
    assert!(status.success());
    assert!(tmp.path().join("truth.json").exists());
}

#[test]
fn shipped_configs_round_trip() {
    for name in ["univariate.toml", "benchmark.toml", "gentest.toml", "gentest_bps.toml"] {
        let cfg = config(name);
        let again = ExperimentConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(again.to_toml(), cfg.to_toml(), "{name}");
    }
}
