use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = r#"seed = 3
trials = 2

[population]
n = 6

[noise]
kinds = ["EM"]
snr_db = [5.0]

[na_model]
recordings = 3

[protocol]
owners = 1
attempts = 2
"#;

fn blocker(config: &Path, out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_blocker"))
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .unwrap()
}

fn setup() -> (tempfile::TempDir, std::path::PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("small.toml");
    fs::write(&config, SMALL).unwrap();
    (dir, config)
}

#[test]
fn bad_config_fails_with_a_message() {
    let (dir, config) = setup();
    fs::write(&config, "[ecc]\nn = 2\n").unwrap();
    let out = blocker(&config, &dir.path().join("o"), &["enroll"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("error:"));
}

#[test]
fn report_rebuilds_the_summary() {
    let (dir, config) = setup();
    let regen = dir.path().join("regen");
    assert!(blocker(&config, &regen, &["regen", "--noise", "EM", "--snr", "0"]).status.success());
    let rebuilt = dir.path().join("rebuilt");
    let detail = regen.join("detail.csv");
    let out = blocker(&config, &rebuilt, &["report", "--input", detail.to_str().unwrap()]);
    assert!(out.status.success());
    for f in ["summary.csv", "plot.csv"] {
        assert_eq!(fs::read(regen.join(f)).unwrap(), fs::read(rebuilt.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn puf_training_accepts_its_own_crp_file() {
    let (dir, config) = setup();
    let first = dir.path().join("first");
    assert!(blocker(&config, &first, &["puf-train", "--crps", "400"]).status.success());
    let second = dir.path().join("second");
    let crps = first.join("crps.csv");
    let out = blocker(&config, &second, &["puf-train", "--crps-in", crps.to_str().unwrap()]);
    assert!(out.status.success());
    assert_eq!(fs::read(first.join("model.json")).unwrap(), fs::read(second.join("model.json")).unwrap());
    let report: serde_json::Value = serde_json::from_slice(&fs::read(second.join("puf_report.json")).unwrap()).unwrap();
    assert_eq!(report["crps"], 400);
    assert!(report["fresh_accuracy"].is_null());
}

#[test]
fn outputs_record_the_effective_config() {
    let (dir, config) = setup();
    let out = dir.path().join("o");
    assert!(blocker(&config, &out, &["--seed", "9", "synth-gen"]).status.success());
    let written = fs::read_to_string(out.join("config.toml")).unwrap();
    let cfg = blocker_core::bench::ExperimentConfig::from_toml(&written).unwrap();
    assert_eq!(cfg.seed, 9);
    assert_eq!(cfg.population.n, 6);
    assert_eq!(fs::read_dir(out.join("signals")).unwrap().count(), 12);
}
