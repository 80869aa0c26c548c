//! Pipeline configuration file: JSON with `${VAR}` substitution.
//!
//! Precedence, lowest first: built-in defaults, the config file, command
//! line flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::backend::BackendConfig;
use crate::corpus::DomainTag;
use crate::disfluency::InjectionPlan;
use crate::eval::AggregationParams;
use crate::metrics::MetricParams;
use crate::scenario::DEFAULT_BATCH;
use crate::sim::GenerationPlan;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DataPaths {
    /// Directory of `<domain>.json` few-shot banks.
    pub fewshot_dir: Option<PathBuf>,
    /// Directory holding `fillers.json`, `cues.json`, `synonyms.json`, `antonyms.json`.
    pub lexicon_dir: Option<PathBuf>,
    /// Directory of role prompt templates.
    pub prompts_dir: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub backend: BackendConfig,
    pub domains: Vec<DomainTag>,
    pub scenarios_per_domain: usize,
    pub batch_size: usize,
    pub generation: GenerationPlan,
    pub injection: Option<InjectionPlan>,
    pub metrics: MetricParams,
    pub aggregation: AggregationParams,
    pub seed: Option<u64>,
    pub paths: DataPaths,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            backend: BackendConfig::default(),
            domains: DomainTag::ALL.to_vec(),
            scenarios_per_domain: 2,
            batch_size: DEFAULT_BATCH,
            generation: GenerationPlan::default(),
            injection: None,
            metrics: MetricParams::default(),
            aggregation: AggregationParams::default(),
            seed: None,
            paths: DataPaths::default(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("environment variable `{0}` referenced by the config is not set")]
    MissingVar(String),
    #[error("config path `{0}` does not exist")]
    MissingPath(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// Replaces `${NAME}` with the value of environment variable `NAME`.
pub fn interpolate_env(text: &str, lookup: impl Fn(&str) -> Option<String>) -> Result<String, ConfigError> {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(start) = rest.find("${") {
        out.push_str(&rest[..start]);
        let after = &rest[start + 2..];
        let end = after
            .find('}')
            .ok_or_else(|| ConfigError::Invalid("unterminated `${` in config".into()))?;
        let name = &after[..end];
        let value = lookup(name).ok_or_else(|| ConfigError::MissingVar(name.to_string()))?;
        // Values land inside JSON strings.
        let escaped = serde_json::to_string(&value).expect("string serializes");
        out.push_str(&escaped[1..escaped.len() - 1]);
        rest = &after[end + 1..];
    }
    out.push_str(rest);
    Ok(out)
}

impl PipelineConfig {
    pub fn from_json(text: &str, origin: &str) -> Result<Self, ConfigError> {
        let text = interpolate_env(text, |k| std::env::var(k).ok())?;
        let cfg: PipelineConfig = serde_json::from_str(&text)
            .map_err(|e| ConfigError::Parse { path: origin.to_string(), message: e.to_string() })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        let mut cfg = Self::from_json(&text, &path.display().to_string())?;
        // Relative data paths are taken relative to the config file.
        if let Some(base) = path.parent() {
            let p = &mut cfg.paths;
            for slot in [&mut p.fewshot_dir, &mut p.lexicon_dir, &mut p.prompts_dir, &mut p.output_dir] {
                if let Some(dir) = slot.as_mut() {
                    if dir.is_relative() {
                        *dir = base.join(&*dir);
                    }
                }
            }
        }
        cfg.check_paths()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.backend.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.metrics.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.domains.is_empty() {
            return Err(ConfigError::Invalid("at least one domain is required".into()));
        }
        if !(1..=crate::scenario::MAX_BATCH).contains(&self.batch_size) {
            return Err(ConfigError::Invalid(format!("batch_size {} out of range", self.batch_size)));
        }
        Ok(())
    }

    /// Input directories must exist. The output directory may not yet.
    pub fn check_paths(&self) -> Result<(), ConfigError> {
        let p = &self.paths;
        for dir in [&p.fewshot_dir, &p.lexicon_dir, &p.prompts_dir].into_iter().flatten() {
            if !dir.exists() {
                return Err(ConfigError::MissingPath(dir.display().to_string()));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolation() {
        let look = |k: &str| (k == "TOKEN_VAR").then(|| "a\"b".to_string());
        assert_eq!(interpolate_env(r#"{"x":"${TOKEN_VAR}"}"#, look).unwrap(), r#"{"x":"a\"b"}"#);
        assert!(matches!(interpolate_env("${NOPE}", look), Err(ConfigError::MissingVar(_))));
    }

    #[test]
    fn defaults_round_trip() {
        let cfg = PipelineConfig::default();
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(PipelineConfig::from_json(&text, "mem").unwrap(), cfg);
        let partial = PipelineConfig::from_json(r#"{"seed": 4, "domains": ["weather"]}"#, "mem").unwrap();
        assert_eq!(partial.seed, Some(4));
        assert_eq!(partial.domains, vec![DomainTag::Weather]);
    }

    #[test]
    fn missing_input_dir() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        std::fs::write(&path, r#"{"paths": {"lexicon_dir": "nowhere"}}"#).unwrap();
        assert!(matches!(PipelineConfig::load(&path), Err(ConfigError::MissingPath(_))));
    }
}
