//! Service configuration, resolved with precedence
//! command-line flag > `MOD_*` environment variable > TOML config file > default.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::decision::{FailPolicy, PipelineConfig, DEFAULT_ALLOW_THRESHOLD};

pub const ENV_PORT: &str = "MOD_PORT";
pub const ENV_RULES_PATH: &str = "MOD_RULES_PATH";
pub const ENV_MODEL_PATH: &str = "MOD_MODEL_PATH";
pub const ENV_THRESHOLD: &str = "MOD_THRESHOLD";
pub const ENV_FEEDBACK_DB: &str = "MOD_FEEDBACK_DB";
pub const ENV_FAIL_POLICY: &str = "MOD_FAIL_POLICY";

pub const DEFAULT_PORT: u16 = 8080;
pub const DEFAULT_FEEDBACK_DB: &str = "feedback.db";

#[derive(Debug, Error)]
pub enum ServiceConfigError {
    #[error("no rules file configured (use --rules, {ENV_RULES_PATH} or rules_path in the config file)")]
    MissingRules,
    #[error("{key}: invalid value {value:?}: {reason}")]
    Invalid { key: String, value: String, reason: String },
    #[error("config file {path}: {message}")]
    File { path: String, message: String },
}

/// One source of settings. Unset fields defer to lower-precedence layers.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigLayer {
    pub port: Option<u16>,
    pub rules_path: Option<PathBuf>,
    pub model_path: Option<PathBuf>,
    pub threshold: Option<f64>,
    pub fail_policy: Option<FailPolicy>,
    pub feedback_store_path: Option<PathBuf>,
}

impl ConfigLayer {
    /// Reads the `MOD_*` variables from an iterator of `(name, value)` pairs,
    /// typically `std::env::vars()`.
    pub fn from_env<I, K, V>(vars: I) -> Result<Self, ServiceConfigError>
    where
        I: IntoIterator<Item = (K, V)>,
        K: AsRef<str>,
        V: AsRef<str>,
    {
        let mut layer = Self::default();
        for (k, v) in vars {
            let (k, v) = (k.as_ref(), v.as_ref());
            let invalid = |reason: String| ServiceConfigError::Invalid {
                key: k.to_string(),
                value: v.to_string(),
                reason,
            };
            match k {
                ENV_PORT => layer.port = Some(v.parse().map_err(|e| invalid(format!("{e}")))?),
                ENV_RULES_PATH => layer.rules_path = Some(v.into()),
                ENV_MODEL_PATH => layer.model_path = Some(v.into()),
                ENV_THRESHOLD => layer.threshold = Some(v.parse().map_err(|e| invalid(format!("{e}")))?),
                ENV_FEEDBACK_DB => layer.feedback_store_path = Some(v.into()),
                ENV_FAIL_POLICY => layer.fail_policy = Some(v.parse().map_err(invalid)?),
                _ => {}
            }
        }
        Ok(layer)
    }

    pub fn from_toml_str(text: &str, origin: &str) -> Result<Self, ServiceConfigError> {
        toml::from_str(text).map_err(|e| ServiceConfigError::File {
            path: origin.to_string(),
            message: e.to_string(),
        })
    }

    pub fn from_toml_file(path: &Path) -> Result<Self, ServiceConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ServiceConfigError::File {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_toml_str(&text, &path.display().to_string())
    }

    /// Fields from `self`, falling back to `lower`.
    pub fn over(self, lower: ConfigLayer) -> ConfigLayer {
        ConfigLayer {
            port: self.port.or(lower.port),
            rules_path: self.rules_path.or(lower.rules_path),
            model_path: self.model_path.or(lower.model_path),
            threshold: self.threshold.or(lower.threshold),
            fail_policy: self.fail_policy.or(lower.fail_policy),
            feedback_store_path: self.feedback_store_path.or(lower.feedback_store_path),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceConfig {
    pub port: u16,
    pub rules_path: PathBuf,
    /// Without a model directory the bundled reference scorer is used.
    pub model_path: Option<PathBuf>,
    pub threshold: f64,
    pub fail_policy: FailPolicy,
    pub feedback_store_path: PathBuf,
}

impl ServiceConfig {
    pub fn resolve(flags: ConfigLayer, env: ConfigLayer, file: ConfigLayer) -> Result<Self, ServiceConfigError> {
        let merged = flags.over(env).over(file);
        let threshold = merged.threshold.unwrap_or(DEFAULT_ALLOW_THRESHOLD);
        if !(threshold > 0.0 && threshold < 1.0) {
            return Err(ServiceConfigError::Invalid {
                key: "threshold".into(),
                value: threshold.to_string(),
                reason: "must lie strictly between 0 and 1".into(),
            });
        }
        Ok(Self {
            port: merged.port.unwrap_or(DEFAULT_PORT),
            rules_path: merged.rules_path.ok_or(ServiceConfigError::MissingRules)?,
            model_path: merged.model_path,
            threshold,
            fail_policy: merged.fail_policy.unwrap_or_default(),
            feedback_store_path: merged.feedback_store_path.unwrap_or_else(|| DEFAULT_FEEDBACK_DB.into()),
        })
    }

    pub fn pipeline_config(&self) -> PipelineConfig {
        PipelineConfig::new(self.threshold, self.fail_policy).expect("threshold validated in resolve")
    }
}
