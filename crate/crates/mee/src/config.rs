//! Run configuration: command-line flags override the config file, which
//! overrides built-in defaults.
//!
//! The config file is flat TOML:
//!
//! ```toml
//! mode = "stepwise"        # stepwise | jall | jmeae
//! teacher_forcing = false
//! grounding = true
//! jobs = 4                 # documents in flight and HTTP requests in flight
//! temperature = 0.0
//! max_tokens = 256
//! model = "default"
//! retries = 3
//! timeout_secs = 60
//! token_env = "MEE_API_TOKEN"
//! image_root = "images/"
//! embedding_dim = 512
//! templates = "templates/"
//! ```

use std::path::{Path, PathBuf};

use mee_core::extract::{ExtractionConfig, RoleSource};
use mee_core::gateway::DecodeParams;
use mee_core::prompt::PromptMode;
use serde::{Deserialize, Serialize};

use crate::files::{self, FileError};
use crate::http::{HttpOptions, DEFAULT_MAX_IN_FLIGHT, DEFAULT_RETRIES, DEFAULT_TIMEOUT_SECS};

pub const DEFAULT_TOKEN_ENV: &str = "MEE_API_TOKEN";

/// Every key is optional; absent keys fall through to defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub mode: Option<String>,
    pub teacher_forcing: Option<bool>,
    pub grounding: Option<bool>,
    pub jobs: Option<usize>,
    pub temperature: Option<f64>,
    pub max_tokens: Option<u32>,
    pub model: Option<String>,
    pub retries: Option<u32>,
    pub timeout_secs: Option<u64>,
    pub token_env: Option<String>,
    pub image_root: Option<PathBuf>,
    pub embedding_dim: Option<usize>,
    pub templates: Option<PathBuf>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, FileError> {
        toml::from_str(&files::read_text(path)?).map_err(|e| FileError {
            path: path.to_path_buf(),
            line: None,
            message: e.to_string(),
        })
    }

    /// Keys set in `self` win over keys set in `lower`.
    pub fn over(self, lower: FileConfig) -> FileConfig {
        FileConfig {
            mode: self.mode.or(lower.mode),
            teacher_forcing: self.teacher_forcing.or(lower.teacher_forcing),
            grounding: self.grounding.or(lower.grounding),
            jobs: self.jobs.or(lower.jobs),
            temperature: self.temperature.or(lower.temperature),
            max_tokens: self.max_tokens.or(lower.max_tokens),
            model: self.model.or(lower.model),
            retries: self.retries.or(lower.retries),
            timeout_secs: self.timeout_secs.or(lower.timeout_secs),
            token_env: self.token_env.or(lower.token_env),
            image_root: self.image_root.or(lower.image_root),
            embedding_dim: self.embedding_dim.or(lower.embedding_dim),
            templates: self.templates.or(lower.templates),
        }
    }
}

/// Fully resolved settings; snapshotted into run manifests.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub mode: PromptMode,
    pub teacher_forcing: bool,
    pub grounding: bool,
    pub jobs: usize,
    pub temperature: f64,
    pub max_tokens: u32,
    pub model: String,
    pub retries: u32,
    pub timeout_secs: u64,
    pub token_env: String,
    pub image_root: Option<PathBuf>,
    pub embedding_dim: Option<usize>,
    pub templates: Option<PathBuf>,
}

impl RunConfig {
    /// Resolves `layered` (flags already merged over the file) against defaults.
    pub fn resolve(layered: FileConfig) -> Result<Self, String> {
        let mode = match layered.mode.as_deref() {
            None => PromptMode::Stepwise,
            Some(m) => PromptMode::parse(m).ok_or_else(|| format!("unknown mode {m:?} (stepwise, jall, jmeae)"))?,
        };
        let jobs = layered.jobs.unwrap_or(DEFAULT_MAX_IN_FLIGHT);
        if jobs == 0 {
            return Err("jobs must be at least 1".into());
        }
        let temperature = layered.temperature.unwrap_or(mee_core::gateway::DEFAULT_TEMPERATURE);
        if !temperature.is_finite() || temperature < 0.0 {
            return Err(format!("temperature {temperature} must be finite and non-negative"));
        }
        Ok(Self {
            mode,
            teacher_forcing: layered.teacher_forcing.unwrap_or(false),
            grounding: layered.grounding.unwrap_or(true),
            jobs,
            temperature,
            max_tokens: layered.max_tokens.unwrap_or(mee_core::gateway::DEFAULT_MAX_TOKENS),
            model: layered.model.unwrap_or_else(|| "default".into()),
            retries: layered.retries.unwrap_or(DEFAULT_RETRIES),
            timeout_secs: layered.timeout_secs.unwrap_or(DEFAULT_TIMEOUT_SECS),
            token_env: layered.token_env.unwrap_or_else(|| DEFAULT_TOKEN_ENV.into()),
            image_root: layered.image_root,
            embedding_dim: layered.embedding_dim,
            templates: layered.templates,
        })
    }

    pub fn extraction(&self) -> ExtractionConfig {
        ExtractionConfig {
            mode: self.mode,
            role_source: if self.teacher_forcing {
                RoleSource::Gold
            } else {
                RoleSource::Predicted
            },
            grounding: self.grounding,
            decode: DecodeParams {
                temperature: self.temperature,
                max_tokens: self.max_tokens,
            },
        }
    }

    /// Endpoint options minus the base URL. The token is read from `token_env`.
    pub fn http_options(&self) -> HttpOptions {
        let mut o = HttpOptions::new("");
        o.model = self.model.clone();
        o.token = std::env::var(&self.token_env).ok().filter(|t| !t.is_empty());
        o.retries = self.retries;
        o.timeout_secs = self.timeout_secs;
        o.max_in_flight = self.jobs;
        o.embedding_dim = self.embedding_dim;
        o.image_root = self.image_root.clone();
        o
    }
}
