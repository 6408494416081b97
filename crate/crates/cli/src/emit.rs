//! Deterministic text outputs: the run manifest, CSV tables, and the float
//! format shared by every file and stdout line.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::CliError;

/// 17 significant digits, the round-trip precision of `f64`.
pub fn g17(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes `<dir>/manifest`: the command, tool version, and every resolved
/// config key in sorted order. No timestamps, so reruns byte-match.
pub fn write_manifest(
    dir: &Path,
    command: &str,
    resolved: &BTreeMap<String, String>,
) -> Result<PathBuf, CliError> {
    let mut text = String::new();
    text.push_str(&format!("command = {command}\n"));
    text.push_str(&format!(
        "tool_version = {}\n",
        env!("CARGO_PKG_VERSION")
    ));
    for (key, value) in resolved {
        text.push_str(&format!("{key} = {value}\n"));
    }
    let path = dir.join("manifest");
    write_text(&path, &text)?;
    Ok(path)
}

/// Writes `<dir>/summary.csv` with a `metric,value` header and one aggregate
/// per row, in the order given.
pub fn write_summary(dir: &Path, rows: &[(String, String)]) -> Result<PathBuf, CliError> {
    let mut text = String::from("metric,value\n");
    for (metric, value) in rows {
        text.push_str(&format!("{metric},{value}\n"));
    }
    let path = dir.join("summary.csv");
    write_text(&path, &text)?;
    Ok(path)
}

/// Writes a raw CSV with the given header and rows of preformatted cells.
pub fn write_raw(dir: &Path, header: &str, rows: &[Vec<String>]) -> Result<PathBuf, CliError> {
    let mut text = String::from(header);
    text.push('\n');
    for row in rows {
        text.push_str(&row.join(","));
        text.push('\n');
    }
    let path = dir.join("raw.csv");
    write_text(&path, &text)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g17_round_trips_f64() {
        for v in [65.5, -0.1, 1.0 / 3.0, 2f64.sqrt() * 1e-12, 1e300] {
            assert_eq!(g17(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn manifest_is_sorted_and_versioned() {
        let dir = tempfile::tempdir().unwrap();
        let resolved: BTreeMap<String, String> = [("seed", "7"), ("a", "1.0")]
            .into_iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect();
        let path = write_manifest(dir.path(), "detect", &resolved).unwrap();
        let text = fs::read_to_string(path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "command = detect");
        assert!(lines[1].starts_with("tool_version = "));
        assert_eq!(lines[2], "a = 1.0");
        assert_eq!(lines[3], "seed = 7");
    }
}
