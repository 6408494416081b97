//! Acceptance gate, CLI side: repeated runs of the experiment commands must
//! produce byte-identical result files.

use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

fn run_into(dir: &Path, args: &[&str]) -> Vec<u8> {
    let out = Command::new(env!("CARGO_BIN_EXE_speccert"))
        .args(args)
        .args(["--out", dir.to_str().unwrap()])
        .output()
        .expect("binary should run");
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    fs::read(dir.join("summary.csv")).unwrap()
}

#[test]
fn criterion_11_determinism() {
    let started = Instant::now();
    let budget = Duration::from_secs(60);
    let mut failures = Vec::new();

    let detect_args = [
        "detect", "--p", "3", "--n", "200", "--a", "1.0", "--d", "3", "--q", "0.2",
        "--seed", "5", "--reps", "20",
    ];
    let estgap_args = [
        "estgap", "--p", "3", "--n", "200", "--a", "1.0", "--d", "3", "--q", "0.2",
        "--seed", "5", "--reps", "20",
    ];
    for (name, args) in [("detect", &detect_args[..]), ("estgap", &estgap_args[..])] {
        let first_dir = tempfile::tempdir().unwrap();
        let second_dir = tempfile::tempdir().unwrap();
        let first = run_into(first_dir.path(), args);
        let second = run_into(second_dir.path(), args);
        if first != second {
            failures.push(format!("{name} summary.csv differs between runs"));
        }
        let raw_first = fs::read(first_dir.path().join("raw.csv")).unwrap();
        let raw_second = fs::read(second_dir.path().join("raw.csv")).unwrap();
        if raw_first != raw_second {
            failures.push(format!("{name} raw.csv differs between runs"));
        }
    }

    let elapsed = started.elapsed();
    if elapsed > budget {
        failures.push(format!(
            "runtime {:.1}s exceeds budget {:.1}s",
            elapsed.as_secs_f64(),
            budget.as_secs_f64()
        ));
    }
    let verdict = if failures.is_empty() { "pass" } else { "FAIL" };
    println!(
        "criterion 11 determinism: {verdict} [{:.2}s]",
        elapsed.as_secs_f64()
    );
    assert!(failures.is_empty(), "criterion 11: {}", failures.join("; "));
}
