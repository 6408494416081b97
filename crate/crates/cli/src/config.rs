//! Flat `key = value` experiment configuration.
//!
//! Values come from an optional config file (`#` starts a comment, later
//! lines win) overlaid with `--key value` flags. Commands declare their
//! allowed keys; anything else is rejected by name.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::{usage, CliError};

#[derive(Clone, Debug, Default)]
pub struct Config {
    entries: BTreeMap<String, String>,
}

impl Config {
    pub fn from_sources(
        file: Option<&Path>,
        overrides: &[(String, String)],
    ) -> Result<Self, CliError> {
        let mut entries = BTreeMap::new();
        if let Some(path) = file {
            let text = fs::read_to_string(path).map_err(|e| {
                usage(format!("cannot read config file {}: {e}", path.display()))
            })?;
            for (lineno, raw) in text.lines().enumerate() {
                let line = raw.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let Some((key, value)) = line.split_once('=') else {
                    return Err(usage(format!(
                        "{}:{}: expected `key = value`, got `{line}`",
                        path.display(),
                        lineno + 1
                    )));
                };
                let key = key.trim();
                if key.is_empty() {
                    return Err(usage(format!(
                        "{}:{}: empty key",
                        path.display(),
                        lineno + 1
                    )));
                }
                entries.insert(key.to_string(), value.trim().to_string());
            }
        }
        for (key, value) in overrides {
            entries.insert(key.clone(), value.clone());
        }
        Ok(Config { entries })
    }

    /// Builds a config from in-memory pairs (used by tests).
    pub fn from_pairs(pairs: &[(&str, &str)]) -> Self {
        Config {
            entries: pairs
                .iter()
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect(),
        }
    }

    /// Rejects any key outside the command's allowed set, by name.
    pub fn check_keys(&self, command: &str, allowed: &[&str]) -> Result<(), CliError> {
        for key in self.entries.keys() {
            if !allowed.contains(&key.as_str()) {
                return Err(usage(format!(
                    "unknown config key `{key}` for command `{command}`"
                )));
            }
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn require(&self, key: &str) -> Result<&str, CliError> {
        self.get(key)
            .ok_or_else(|| usage(format!("missing required config key `{key}`")))
    }

    fn parse<T: FromStr>(key: &str, raw: &str, expected: &str) -> Result<T, CliError> {
        raw.parse().map_err(|_| {
            usage(format!(
                "config key `{key}`: expected {expected}, got `{raw}`"
            ))
        })
    }

    pub fn get_f64(&self, key: &str) -> Result<Option<f64>, CliError> {
        self.get(key)
            .map(|raw| Self::parse(key, raw, "a number"))
            .transpose()
    }

    pub fn require_f64(&self, key: &str) -> Result<f64, CliError> {
        Self::parse(key, self.require(key)?, "a number")
    }

    pub fn get_usize(&self, key: &str) -> Result<Option<usize>, CliError> {
        self.get(key)
            .map(|raw| Self::parse(key, raw, "a nonnegative integer"))
            .transpose()
    }

    pub fn require_usize(&self, key: &str) -> Result<usize, CliError> {
        Self::parse(key, self.require(key)?, "a nonnegative integer")
    }

    pub fn get_u64(&self, key: &str) -> Result<Option<u64>, CliError> {
        self.get(key)
            .map(|raw| Self::parse(key, raw, "a 64-bit unsigned integer"))
            .transpose()
    }

    /// Comma-separated list of integers, e.g. `n_grid = 1000,4000,16000`.
    pub fn require_usize_list(&self, key: &str) -> Result<Vec<usize>, CliError> {
        self.require(key)?
            .split(',')
            .map(|piece| Self::parse(key, piece.trim(), "a comma-separated integer list"))
            .collect()
    }
}
