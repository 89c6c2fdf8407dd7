use std::path::Path;
use std::process::{Command, Output};

use engm_phd::config::ScenarioConfig;

fn exe() -> Command {
    Command::new(env!("CARGO_BIN_EXE_engm-phd"))
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("binary runs")
}

fn small_config(dir: &Path) -> std::path::PathBuf {
    let mut config = ScenarioConfig::default();
    config.scenario.t_end = 10.0;
    config.scenario.particle_count = 50;
    let path = dir.join("small.toml");
    std::fs::write(&path, config.to_toml()).unwrap();
    path
}

#[test]
fn emitted_config_parses_back_to_default() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cfg.toml");
    let out = run(exe().args(["emit-config", "--out"]).arg(&path));
    assert!(out.status.success());
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(ScenarioConfig::parse(&text).unwrap(), ScenarioConfig::default());
}

#[test]
fn invalid_config_exits_with_code_one_and_names_field() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "[detection]\np_detect = 1.5\n").unwrap();
    let out = run(exe().args(["run", "--filter", "gm", "--config"]).arg(&path).arg("--out-dir").arg(dir.path()));
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("p_detect"));
}

#[test]
fn validate_passes() {
    let out = run(exe().arg("validate"));
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
}

#[test]
fn compare_writes_all_tables() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out_dir = dir.path().join("out");
    let out = run(exe().args(["compare", "--runs", "2", "--config"]).arg(&cfg).arg("--out-dir").arg(&out_dir));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for name in [
        "summary_gm.csv",
        "summary_smc.csv",
        "summary_engm.csv",
        "comparison.csv",
        "efficiency.csv",
        "config.toml",
    ] {
        assert!(out_dir.join(name).is_file(), "missing {name}");
    }
    let comparison = std::fs::read_to_string(out_dir.join("comparison.csv")).unwrap();
    assert_eq!(comparison.lines().count(), 11, "header plus one row per scan k = 1..=10");
}

#[test]
fn thread_count_does_not_change_records() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let mut records = Vec::new();
    for threads in ["1", "2"] {
        let out_dir = dir.path().join(threads);
        let out = run(
            exe()
                .args(["run", "--filter", "smc", "--runs", "3", "--threads", threads, "--config"])
                .arg(&cfg)
                .arg("--out-dir")
                .arg(&out_dir),
        );
        assert!(out.status.success());
        records.push(std::fs::read(out_dir.join("records_smc.csv")).unwrap());
    }
    assert_eq!(records[0], records[1]);
}
