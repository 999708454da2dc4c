//! Runtime configuration: defaults, an optional `key = value` file, and CLI
//! overrides, in ascending precedence.
//!
//! Threshold values keep their decimal text all the way into exact rationals
//! (`0.2` means 2/10, not the nearest float), so configured boundaries are
//! honored exactly. Unknown keys are rejected rather than ignored.

use std::path::Path;

use thiserror::Error;

use scop_core::constraints::{Ratio, Thresholds, UnionMode};
use scop_core::proxy::{Metric, PairingMode};
use scop_core::relation::RelationRule;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: String,
        source: std::io::Error,
    },
    #[error("config line {line}: expected `key = value`, got {text:?}")]
    Syntax { line: usize, text: String },
    #[error("{}: unknown key {key:?}", Origin(*line))]
    UnknownKey { line: usize, key: String },
    #[error("{}: bad value for {key}: {message}", Origin(*line))]
    BadValue {
        line: usize,
        key: String,
        message: String,
    },
    #[error("{0}")]
    Invalid(String),
}

/// Where a key-value pair came from: a file line, or a CLI flag (line 0).
struct Origin(usize);

impl std::fmt::Display for Origin {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        if self.0 == 0 {
            write!(f, "command-line flag")
        } else {
            write!(f, "config line {}", self.0)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub thresholds: Thresholds,
    pub union_mode: UnionMode,
    pub relation_rule: RelationRule,
    pub and_probability: f64,
    pub max_expansion: f64,
    pub global_seed: u64,
    pub proxy_mode: PairingMode,
    pub conf_threshold: f64,
    pub metric: Metric,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            thresholds: Thresholds::default(),
            union_mode: UnionMode::default(),
            relation_rule: RelationRule::default(),
            and_probability: 0.1,
            max_expansion: 0.10,
            global_seed: 0,
            proxy_mode: PairingMode::default(),
            conf_threshold: 0.1,
            metric: Metric::default(),
        }
    }
}

impl Config {
    /// Defaults overlaid with a config file, when given.
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let mut config = Config::default();
        if let Some(path) = path {
            let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
                path: path.display().to_string(),
                source,
            })?;
            config.apply_file(&text)?;
        }
        Ok(config)
    }

    /// Apply `key = value` lines. `#` starts a comment.
    pub fn apply_file(&mut self, text: &str) -> Result<(), ConfigError> {
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(ConfigError::Syntax {
                    line,
                    text: raw.to_string(),
                });
            };
            self.set(key.trim(), value.trim(), line)?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str, line: usize) -> Result<(), ConfigError> {
        let bad = |message: String| ConfigError::BadValue {
            line,
            key: key.to_string(),
            message,
        };
        match key {
            "tau_v" => self.thresholds.tau_v = parse_ratio(value).map_err(bad)?,
            "tau_u" => self.thresholds.tau_u = parse_ratio(value).map_err(bad)?,
            "tau_o" => self.thresholds.tau_o = parse_ratio(value).map_err(bad)?,
            "tau_s" => self.thresholds.tau_s = parse_ratio(value).map_err(bad)?,
            "and_probability" => {
                self.and_probability = value.parse().map_err(|e| bad(format!("{e}")))?
            }
            "max_expansion" => {
                self.max_expansion = value.parse().map_err(|e| bad(format!("{e}")))?
            }
            "global_seed" => self.global_seed = value.parse().map_err(|e| bad(format!("{e}")))?,
            "conf_threshold" => {
                self.conf_threshold = value.parse().map_err(|e| bad(format!("{e}")))?
            }
            "union_mode" => {
                self.union_mode = match value {
                    "exact" => UnionMode::Exact,
                    "enclosing_box" => UnionMode::EnclosingBox,
                    other => return Err(bad(format!("unknown union_mode {other:?}"))),
                }
            }
            "relation_rule" => {
                self.relation_rule = match value {
                    "octant" => RelationRule::Octant,
                    "axis_dominant" => RelationRule::AxisDominant,
                    other => return Err(bad(format!("unknown relation_rule {other:?}"))),
                }
            }
            "proxy_mode" => {
                self.proxy_mode = match value {
                    "paper" => PairingMode::Paper,
                    "full" => PairingMode::Full,
                    other => return Err(bad(format!("unknown proxy_mode {other:?}"))),
                }
            }
            "metric" => {
                self.metric = match value {
                    "cosine" => Metric::Cosine,
                    "dot" => Metric::Dot,
                    "euclidean" => Metric::Euclidean,
                    other => return Err(bad(format!("unknown metric {other:?}"))),
                }
            }
            other => {
                return Err(ConfigError::UnknownKey {
                    line,
                    key: other.to_string(),
                })
            }
        }
        Ok(())
    }

    /// Check every value is in its legal range. Call after all overrides.
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.thresholds
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if !(0.0..=1.0).contains(&self.and_probability) {
            return Err(ConfigError::Invalid(
                "and_probability must be in [0, 1]".into(),
            ));
        }
        if !(0.0..=0.10).contains(&self.max_expansion) {
            return Err(ConfigError::Invalid(
                "max_expansion must be in [0, 0.10]".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.conf_threshold) {
            return Err(ConfigError::Invalid(
                "conf_threshold must be in [0, 1]".into(),
            ));
        }
        Ok(())
    }
}

fn parse_ratio(value: &str) -> Result<Ratio, String> {
    Ratio::parse_decimal(value).map_err(|e| e.to_string())
}
