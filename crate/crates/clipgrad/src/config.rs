//! Flat `key = value` experiment configs.
//!
//! One assignment per line, `#` comments, no sections. Typed access and the
//! key whitelist live here; the harness maps validated keys onto experiment
//! structures. Unknown keys are hard errors so typos cannot silently fall
//! back to defaults.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Every key the experiment schema understands.
pub const KNOWN_KEYS: &[&str] = &[
    "name",
    "problem",
    "problem.nu",
    "noise",
    "noise.sigma",
    "optimizer.family",
    "optimizer.gamma",
    "optimizer.delay",
    "optimizer.eta",
    "optimizer.b_init",
    "optimizer.beta1",
    "optimizer.beta2",
    "optimizer.bias_correction",
    "clip.mode",
    "clip.lambda",
    "clip.layers",
    "steps",
    "seeds",
    "base_seed",
    "x0",
    "metric",
    "percentiles",
    "epsilon",
];

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

/// Parsed but untyped config: ordered key-value pairs.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RawConfig {
    entries: BTreeMap<String, String>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (lineno, raw_line) in text.lines().enumerate() {
            let line = raw_line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(config_err(format!(
                    "line {}: expected `key = value`, got {raw_line:?}",
                    lineno + 1
                )));
            };
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if key.is_empty() {
                return Err(config_err(format!("line {}: empty key", lineno + 1)));
            }
            if entries.insert(key.clone(), value).is_some() {
                return Err(config_err(format!(
                    "line {}: duplicate key {key}",
                    lineno + 1
                )));
            }
        }
        Ok(Self { entries })
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    /// Apply one `key=value` override (the `--set` flag); replaces any value
    /// from the file.
    pub fn apply_set(&mut self, assignment: &str) -> Result<()> {
        let Some((key, value)) = assignment.split_once('=') else {
            return Err(config_err(format!(
                "override must look like key=value, got {assignment:?}"
            )));
        };
        let key = key.trim();
        if key.is_empty() {
            return Err(config_err("override with empty key"));
        }
        self.entries
            .insert(key.to_string(), value.trim().to_string());
        Ok(())
    }

    /// Reject any key outside the schema.
    pub fn check_known_keys(&self) -> Result<()> {
        for key in self.entries.keys() {
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(config_err(format!("unknown config key: {key}")));
            }
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.entries.insert(key.to_string(), value.into());
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.get(key)
            .ok_or_else(|| config_err(format!("missing required key: {key}")))
    }

    pub fn get_f64(&self, key: &str) -> Result<Option<f64>> {
        self.get(key)
            .map(|v| {
                v.parse::<f64>()
                    .map_err(|_| config_err(format!("{key}: expected a number, got {v:?}")))
            })
            .transpose()
    }

    pub fn get_usize(&self, key: &str) -> Result<Option<usize>> {
        self.get(key)
            .map(|v| {
                v.parse::<usize>()
                    .map_err(|_| config_err(format!("{key}: expected a nonnegative integer, got {v:?}")))
            })
            .transpose()
    }

    pub fn get_u64(&self, key: &str) -> Result<Option<u64>> {
        self.get(key)
            .map(|v| {
                v.parse::<u64>()
                    .map_err(|_| config_err(format!("{key}: expected a nonnegative integer, got {v:?}")))
            })
            .transpose()
    }

    pub fn get_bool(&self, key: &str) -> Result<Option<bool>> {
        self.get(key)
            .map(|v| match v {
                "true" => Ok(true),
                "false" => Ok(false),
                other => Err(config_err(format!(
                    "{key}: expected true or false, got {other:?}"
                ))),
            })
            .transpose()
    }

    /// Comma-separated list of numbers, e.g. `0.1, 0.5, 0.9`.
    pub fn get_f64_list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        self.get(key)
            .map(|v| {
                v.split(',')
                    .map(|item| {
                        item.trim().parse::<f64>().map_err(|_| {
                            config_err(format!("{key}: expected a number list, got {item:?}"))
                        })
                    })
                    .collect()
            })
            .transpose()
    }

    /// Comma-separated half-open ranges, e.g. `0..2, 2..5`.
    pub fn get_ranges(&self, key: &str) -> Result<Option<Vec<(usize, usize)>>> {
        self.get(key)
            .map(|v| {
                v.split(',')
                    .map(|item| {
                        let item = item.trim();
                        let parsed = item.split_once("..").and_then(|(a, b)| {
                            Some((a.trim().parse().ok()?, b.trim().parse().ok()?))
                        });
                        parsed.ok_or_else(|| {
                            config_err(format!(
                                "{key}: expected ranges like 0..2, got {item:?}"
                            ))
                        })
                    })
                    .collect()
            })
            .transpose()
    }

    /// Stable serialization used for hashing and reproducibility checks:
    /// schema order, one `key=value` line per present key.
    pub fn canonical(&self) -> String {
        let mut out = String::new();
        for key in KNOWN_KEYS {
            if let Some(value) = self.get(key) {
                out.push_str(key);
                out.push('=');
                out.push_str(value);
                out.push('\n');
            }
        }
        out
    }
}
