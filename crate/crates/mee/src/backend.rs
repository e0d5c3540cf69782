use std::fs;
use std::path::Path;

use mee_core::gateway::{
    BackendError, Captioner, ChatVision, ChatVisionRequest, EmbedInput, Embedder, EmbeddingVector, Grounder, ImageRef,
    ScriptedBackend,
};
use mee_core::BoundingBox;
use serde::Serialize;

use crate::files::{sha256_hex, FileError};
use crate::http::{HttpBackend, HttpOptions};
use crate::script;

/// Either a live service endpoint or a script file.
pub enum Backend {
    Scripted(ScriptedBackend),
    Http(HttpBackend),
}

/// How a backend is recorded in run manifests.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BackendIdentity {
    Script { path: String, sha256: String },
    Http { base_url: String, model: String },
}

pub fn is_endpoint(spec: &str) -> bool {
    spec.starts_with("http://") || spec.starts_with("https://")
}

impl Backend {
    /// Opens `spec` as an endpoint URL or a script path.
    /// `opts` supplies everything but the base URL for endpoints.
    pub fn open(spec: &str, opts: &HttpOptions) -> Result<(Self, BackendIdentity), FileError> {
        if is_endpoint(spec) {
            let mut o = opts.clone();
            o.base_url = spec.trim_end_matches('/').to_string();
            let id = BackendIdentity::Http {
                base_url: o.base_url.clone(),
                model: o.model.clone(),
            };
            return Ok((Self::Http(HttpBackend::new(o)), id));
        }
        let path = Path::new(spec);
        let bytes = fs::read(path).map_err(|e| FileError {
            path: path.to_path_buf(),
            line: None,
            message: e.to_string(),
        })?;
        let backend = script::load_script(path)?;
        let id = BackendIdentity::Script {
            path: spec.to_string(),
            sha256: sha256_hex(&bytes),
        };
        Ok((Self::Scripted(backend), id))
    }
}

impl ChatVision for Backend {
    fn chat_vision(&self, request: &ChatVisionRequest) -> Result<String, BackendError> {
        match self {
            Self::Scripted(b) => b.chat_vision(request),
            Self::Http(b) => b.chat_vision(request),
        }
    }
}

impl Grounder for Backend {
    fn ground(&self, image: &ImageRef, description: &str) -> Result<BoundingBox, BackendError> {
        match self {
            Self::Scripted(b) => b.ground(image, description),
            Self::Http(b) => b.ground(image, description),
        }
    }
}

impl Embedder for Backend {
    fn embed(&self, input: EmbedInput<'_>) -> Result<EmbeddingVector, BackendError> {
        match self {
            Self::Scripted(b) => b.embed(input),
            Self::Http(b) => b.embed(input),
        }
    }
}

impl Captioner for Backend {
    fn caption_region(&self, image: &ImageRef, region: &BoundingBox) -> Result<String, BackendError> {
        match self {
            Self::Scripted(b) => b.caption_region(image, region),
            Self::Http(b) => b.caption_region(image, region),
        }
    }
}
