//! End-to-end tests through the compiled binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use speccert_core::symtensor::SymmetricTensor;

fn speccert(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_speccert"))
        .args(args)
        .output()
        .expect("binary should run")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn stdout_value(out: &Output, key: &str) -> f64 {
    let text = stdout(out);
    let line = text
        .lines()
        .find(|l| l.starts_with(&format!("{key} = ")))
        .unwrap_or_else(|| panic!("no `{key} = ` line in:\n{text}"));
    line.split(" = ").nth(1).unwrap().parse().unwrap()
}

#[test]
fn help_runs_without_arguments() {
    let out = speccert(&[]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("Commands:"));
}

#[test]
fn unknown_command_exits_with_usage_code() {
    let out = speccert(&["flub"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("`flub`"), "{}", stderr(&out));
}

#[test]
fn unknown_key_is_rejected_by_name() {
    let dir = tempfile::tempdir().unwrap();
    let out = speccert(&[
        "lowdeg", "--a", "1", "--n", "8", "--p", "4", "--d", "3", "--m_cap", "2", "--bogus", "1",
        "--out", dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(err.contains("`bogus`") && err.contains("`lowdeg`"), "{err}");
}

#[test]
fn missing_and_mistyped_keys_are_named() {
    let dir = tempfile::tempdir().unwrap();
    let out = speccert(&["detect", "--n", "100", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("`p`"), "{}", stderr(&out));

    let out = speccert(&[
        "gen", "--hypothesis", "null", "--p", "x", "--n", "10",
        "--out", dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(err.contains("`p`") && err.contains("`x`"), "{err}");
}

#[test]
fn lowdeg_prints_the_handworked_sum() {
    let dir = tempfile::tempdir().unwrap();
    let out = speccert(&[
        "lowdeg", "--a", "1", "--n", "8", "--p", "4", "--d", "3", "--c_d", "1", "--m_cap", "2",
        "--out", dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(
        stdout(&out).contains("value = 6.5500000000000000e1"),
        "{}",
        stdout(&out)
    );
    let summary = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert!(summary.contains("value,6.5500000000000000e1"), "{summary}");
    let manifest = fs::read_to_string(dir.path().join("manifest")).unwrap();
    assert!(manifest.contains("command = lowdeg"), "{manifest}");
    assert!(manifest.contains("m_cap = 2"), "{manifest}");
}

#[test]
fn norm_reports_rank_one_certificates() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("rank_one.symtensor");
    SymmetricTensor::rank_one(2.0, &[1.0, 1.0], 3)
        .unwrap()
        .write_to(&input)
        .unwrap();
    let out = speccert(&[
        "norm", "--input", input.to_str().unwrap(), "--oracle_eps", "0.01",
        "--out", dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let truth = 2.0 * 2f64.sqrt().powi(3);
    assert!((stdout_value(&out, "lower") - truth).abs() < 1e-4);
    assert!((stdout_value(&out, "upper") - truth).abs() < 1e-9);
    let oracle = stdout_value(&out, "oracle");
    let bound = stdout_value(&out, "oracle_error_bound");
    assert!(oracle <= truth + 1e-12 && oracle + bound >= truth);
    let summary = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert!(summary.starts_with("metric,value\nlower,"), "{summary}");
}

#[test]
fn gen_feeds_cumulant() {
    let gen_dir = tempfile::tempdir().unwrap();
    let out = speccert(&[
        "gen", "--hypothesis", "planted", "--p", "2", "--n", "60", "--a", "1.0",
        "--d", "3", "--q", "0.2", "--seed", "3", "--out", gen_dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let samples = gen_dir.path().join("samples.csv");
    assert_eq!(fs::read_to_string(&samples).unwrap().lines().count(), 60);

    let cum_dir = tempfile::tempdir().unwrap();
    let out = speccert(&[
        "cumulant", "--input", samples.to_str().unwrap(), "--order", "3",
        "--out", cum_dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let tensor = SymmetricTensor::read_from(&cum_dir.path().join("cumulant.symtensor")).unwrap();
    assert_eq!((tensor.dim(), tensor.order()), (2, 3));
}

#[test]
fn constant_rows_give_zero_cumulant() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("constant.csv");
    fs::write(&input, "1.0,2.0\n1.0,2.0\n1.0,2.0\n").unwrap();
    let out = speccert(&[
        "cumulant", "--input", input.to_str().unwrap(), "--order", "3",
        "--out", dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let tensor = SymmetricTensor::read_from(&dir.path().join("cumulant.symtensor")).unwrap();
    assert!(tensor.is_zero());
}

#[test]
fn flag_overrides_beat_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.cfg");
    fs::write(
        &config,
        format!(
            "# smoke config\nhypothesis = null\np = 2\nn = 10\nseed = 1\nout_dir = {}\n",
            dir.path().display()
        ),
    )
    .unwrap();
    let out = speccert(&["gen", "--config", config.to_str().unwrap(), "--seed", "2"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let manifest = fs::read_to_string(dir.path().join("manifest")).unwrap();
    assert!(manifest.contains("seed = 2"), "{manifest}");
}

#[test]
fn missing_input_file_exits_nonzero_with_path() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.symtensor");
    let out = speccert(&[
        "norm", "--input", missing.to_str().unwrap(),
        "--out", dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(
        stderr(&out).contains(missing.file_name().unwrap().to_str().unwrap()),
        "{}",
        stderr(&out)
    );
}

#[test]
fn detect_writes_raw_and_summary_schemas() {
    let dir = tempfile::tempdir().unwrap();
    let out = speccert(&[
        "detect", "--p", "2", "--n", "50", "--a", "1.0", "--d", "3", "--q", "0.2",
        "--seed", "9", "--reps", "4", "--out", dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let raw = fs::read_to_string(dir.path().join("raw.csv")).unwrap();
    let lines: Vec<&str> = raw.lines().collect();
    assert_eq!(lines[0], "rep,hypothesis,statistic");
    assert_eq!(lines.len(), 1 + 2 * 4);
    assert!(lines[1].starts_with("0,null,"));
    assert!(lines[5].starts_with("0,planted,"));
    let summary = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert!(summary.contains("\nbest_sum,"), "{summary}");
    assert!(Path::new(&dir.path().join("manifest")).exists());
}

#[test]
fn estgap_quantile_rows_ascend() {
    let dir = tempfile::tempdir().unwrap();
    let out = speccert(&[
        "estgap", "--p", "2", "--n", "50", "--a", "1.0", "--d", "3", "--q", "0.2",
        "--seed", "9", "--reps", "5", "--out", dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let summary = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    let levels: Vec<f64> = summary
        .lines()
        .filter_map(|l| l.strip_prefix("err_upper_q"))
        .map(|l| l.split(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(levels.len(), 7);
    assert!(levels.windows(2).all(|w| w[0] < w[1]), "{levels:?}");
}
