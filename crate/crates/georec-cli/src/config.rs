//! Layered configuration: built-in defaults, then an optional config file,
//! then command-line flags, highest last.
//!
//! The file format is flat `key = value` lines with `#` comments. Unknown
//! keys are rejected so typos fail loudly instead of silently using a
//! default.

use std::collections::HashMap;
use std::path::Path;

use georec::{AlphaScope, ForestConfig};

use crate::error::AppError;

#[derive(Debug, Clone, PartialEq)]
pub struct AppConfig {
    pub beta: f64,
    pub gamma: f64,
    pub alpha_scope: AlphaScope,
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_samples_split: usize,
    pub features_per_split: usize,
    pub split_ratio: f64,
    pub seed: u64,
    pub strict_ingest: bool,
    pub augment: usize,
}

impl Default for AppConfig {
    fn default() -> Self {
        let forest = ForestConfig::default();
        Self {
            beta: 5.0,
            gamma: 2.0,
            alpha_scope: AlphaScope::Candidates,
            n_trees: forest.n_trees,
            max_depth: forest.max_depth,
            min_samples_split: forest.min_samples_split,
            features_per_split: forest.features_per_split,
            split_ratio: 0.8,
            seed: 42,
            strict_ingest: false,
            augment: 3,
        }
    }
}

impl AppConfig {
    pub fn forest_config(&self) -> ForestConfig {
        ForestConfig {
            n_trees: self.n_trees,
            max_depth: self.max_depth,
            min_samples_split: self.min_samples_split,
            features_per_split: self.features_per_split,
            seed: self.seed,
        }
    }

    /// Overlay values parsed from a config file onto the defaults.
    pub fn apply_file(&mut self, path: &Path) -> Result<(), AppError> {
        let body = std::fs::read_to_string(path)
            .map_err(|e| AppError::io(format!("cannot read config {}: {e}", path.display())))?;
        let entries = parse_config_file(&body)?;
        for (key, value) in &entries {
            self.set(key, value)?;
        }
        Ok(())
    }

    fn set(&mut self, key: &str, value: &str) -> Result<(), AppError> {
        fn parsed<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, AppError>
        where
            T::Err: std::fmt::Display,
        {
            value
                .parse()
                .map_err(|e| AppError::parse(format!("config key {key}: {e}")))
        }
        match key {
            "beta" => self.beta = parsed(key, value)?,
            "gamma" => self.gamma = parsed(key, value)?,
            "alpha_scope" => {
                self.alpha_scope = value
                    .parse()
                    .map_err(|e| AppError::parse(format!("config key alpha_scope: {e}")))?
            }
            "n_trees" => self.n_trees = parsed(key, value)?,
            "max_depth" => self.max_depth = parsed(key, value)?,
            "min_samples_split" => self.min_samples_split = parsed(key, value)?,
            "features_per_split" => self.features_per_split = parsed(key, value)?,
            "split_ratio" => self.split_ratio = parsed(key, value)?,
            "seed" => self.seed = parsed(key, value)?,
            "strict_ingest" => self.strict_ingest = parsed(key, value)?,
            "augment" => self.augment = parsed(key, value)?,
            other => {
                return Err(AppError::parse(format!("unknown config key {other:?}")));
            }
        }
        Ok(())
    }
}

/// Parse `key = value` lines; `#` starts a comment, blank lines are ignored.
/// Returns pairs in file order.
fn parse_config_file(body: &str) -> Result<Vec<(String, String)>, AppError> {
    let mut entries = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for (idx, raw) in body.lines().enumerate() {
        let line = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(AppError::parse(format!(
                "config line {}: expected key = value, got {raw:?}",
                idx + 1
            )));
        };
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if let Some(first) = seen.insert(key.clone(), idx + 1) {
            return Err(AppError::parse(format!(
                "config line {}: key {key:?} already set at line {first}",
                idx + 1
            )));
        }
        entries.push((key, value));
    }
    Ok(entries)
}
