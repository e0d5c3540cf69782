//! Contracts of the four model services and a scripted backend.
//!
//! Scripted responses are keyed `"<service>|<key>"`:
//!
//! | service   | key                                             | response              |
//! |-----------|-------------------------------------------------|-----------------------|
//! | `chat`    | [`ChatVisionRequest::key`], e.g. `doc1\|etsgp`   | string                |
//! | `ground`  | `<image>\|<description>`                        | `[x1,y1,x2,y2]`/`null`|
//! | `embed`   | `text\|<payload>` or `image\|<image>`           | number array          |
//! | `caption` | `<image>\|<x1>,<y1>,<x2>,<y2>`                   | string                |
//!
//! A missing grounding key means "no region"; every other missing key is an error.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};

use crate::bbox::{BoundingBox, BoxError};
use crate::grammar::is_none_marker;

/// Captioning refuses crops smaller than this many pixels on either side.
pub const MIN_CROP_PX: f64 = 16.0;

/// Default decoding: greedy, short structured answers.
pub const DEFAULT_TEMPERATURE: f64 = 0.0;
pub const DEFAULT_MAX_TOKENS: u32 = 256;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BackendError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("no scripted response for {0:?}")]
    ScriptMiss(String),
    #[error("malformed service reply: {0}")]
    Malformed(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("no region found for {0:?}")]
    NoRegion(String),
    #[error("crop of {width}x{height} px is below the {MIN_CROP_PX}x{MIN_CROP_PX} minimum")]
    DegenerateCrop { width: f64, height: f64 },
    #[error("embedding has dimension {got}, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid embedding: {0}")]
    InvalidVector(&'static str),
    #[error("invalid box: {0}")]
    InvalidBox(#[from] BoxError),
}

impl BackendError {
    /// Whether retrying the same request could succeed.
    pub fn is_transient(&self) -> bool {
        matches!(self, Self::Transport(_))
    }
}

/// An image as the services see it: a local path or an `http(s)` URL.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ImageRef(pub String);

impl ImageRef {
    pub fn new(s: impl Into<String>) -> Self {
        Self(s.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn is_url(&self) -> bool {
        self.0.starts_with("http://") || self.0.starts_with("https://")
    }
}

impl fmt::Display for ImageRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecodeParams {
    pub temperature: f64,
    pub max_tokens: u32,
}

impl Default for DecodeParams {
    fn default() -> Self {
        Self {
            temperature: DEFAULT_TEMPERATURE,
            max_tokens: DEFAULT_MAX_TOKENS,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChatVisionRequest {
    /// Stable request identity; scripted backends look responses up by it.
    pub key: String,
    pub prompt: String,
    pub image: ImageRef,
    pub decode: DecodeParams,
}

#[derive(Debug, Clone, Copy)]
pub enum EmbedInput<'a> {
    Text(&'a str),
    Image(&'a ImageRef),
}

/// A unit-L2-norm embedding.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector(Vec<f64>);

impl EmbeddingVector {
    /// Normalizes `values` to unit length.
    pub fn normalized(values: Vec<f64>) -> Result<Self, BackendError> {
        if values.is_empty() {
            return Err(BackendError::InvalidVector("empty vector"));
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(BackendError::InvalidVector("non-finite entry"));
        }
        let norm = libm::sqrt(values.iter().map(|v| v * v).sum());
        if norm == 0.0 || !norm.is_finite() {
            return Err(BackendError::InvalidVector("zero norm"));
        }
        Ok(Self(values.into_iter().map(|v| v / norm).collect()))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        libm::sqrt(self.0.iter().map(|v| v * v).sum())
    }

    /// Cosine similarity, clamped to `[-1, 1]`.
    pub fn cosine(&self, other: &Self) -> Result<f64, BackendError> {
        if self.dim() != other.dim() {
            return Err(BackendError::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        let dot: f64 = self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum();
        Ok(dot.clamp(-1.0, 1.0))
    }
}

pub trait ChatVision {
    fn chat_vision(&self, request: &ChatVisionRequest) -> Result<String, BackendError>;
}

pub trait Grounder {
    /// Top-1 box for `description`, or [`BackendError::NoRegion`].
    fn ground(&self, image: &ImageRef, description: &str) -> Result<BoundingBox, BackendError>;
}

pub trait Embedder {
    fn embed(&self, input: EmbedInput<'_>) -> Result<EmbeddingVector, BackendError>;
}

pub trait Captioner {
    fn caption_region(&self, image: &ImageRef, region: &BoundingBox) -> Result<String, BackendError>;
}

/// Rejects crops below [`MIN_CROP_PX`] on either side.
pub fn check_crop(region: &BoundingBox) -> Result<(), BackendError> {
    if region.width() < MIN_CROP_PX || region.height() < MIN_CROP_PX {
        Err(BackendError::DegenerateCrop {
            width: region.width(),
            height: region.height(),
        })
    } else {
        Ok(())
    }
}

pub fn check_grounding_query(description: &str) -> Result<(), BackendError> {
    if description.trim().is_empty() || is_none_marker(description) {
        Err(BackendError::InvalidRequest(format!(
            "grounding query {description:?} is empty or None"
        )))
    } else {
        Ok(())
    }
}

/// Caption contract: trimmed and non-empty.
pub fn check_caption(caption: &str) -> Result<String, BackendError> {
    let caption = caption.trim();
    if caption.is_empty() {
        Err(BackendError::Malformed("empty caption".into()))
    } else {
        Ok(caption.to_string())
    }
}

pub fn caption_key(image: &ImageRef, region: &BoundingBox) -> String {
    format!(
        "{}|{},{},{},{}",
        image,
        region.x1(),
        region.y1(),
        region.x2(),
        region.y2()
    )
}

/// A canned response.
#[derive(Debug, Clone, PartialEq)]
pub enum ScriptEntry {
    Text(String),
    Box([f64; 4]),
    Vector(Vec<f64>),
    Null,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Service {
    Chat,
    Ground,
    Embed,
    Caption,
}

impl Service {
    pub fn tag(self) -> &'static str {
        match self {
            Self::Chat => "chat",
            Self::Ground => "ground",
            Self::Embed => "embed",
            Self::Caption => "caption",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        match tag {
            "chat" => Some(Self::Chat),
            "ground" => Some(Self::Ground),
            "embed" => Some(Self::Embed),
            "caption" => Some(Self::Caption),
            _ => None,
        }
    }
}

/// Deterministic backend answering from a fixed table. Lookups are exact.
#[derive(Debug, Default)]
pub struct ScriptedBackend {
    table: BTreeMap<String, ScriptEntry>,
    embedding_dim: Option<usize>,
    calls: [AtomicUsize; 4],
}

impl ScriptedBackend {
    pub fn new() -> Self {
        Self::default()
    }

    /// Requires every embedding to have exactly `dim` entries.
    pub fn with_embedding_dim(mut self, dim: usize) -> Self {
        self.embedding_dim = Some(dim);
        self
    }

    /// Inserts under a full `"<service>|<key>"` string.
    pub fn insert_raw(&mut self, full_key: impl Into<String>, entry: ScriptEntry) {
        self.table.insert(full_key.into(), entry);
    }

    pub fn insert(&mut self, service: Service, key: &str, entry: ScriptEntry) {
        self.table.insert(format!("{}|{}", service.tag(), key), entry);
    }

    pub fn with(mut self, service: Service, key: &str, entry: ScriptEntry) -> Self {
        self.insert(service, key, entry);
        self
    }

    pub fn chat(self, key: &str, response: &str) -> Self {
        self.with(Service::Chat, key, ScriptEntry::Text(response.into()))
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    /// Calls served so far by `service`, including failed lookups.
    pub fn calls(&self, service: Service) -> usize {
        self.calls[service as usize].load(Ordering::Relaxed)
    }

    fn lookup(&self, service: Service, key: &str) -> Option<&ScriptEntry> {
        self.calls[service as usize].fetch_add(1, Ordering::Relaxed);
        self.table.get(&format!("{}|{}", service.tag(), key))
    }

    fn miss(service: Service, key: &str) -> BackendError {
        BackendError::ScriptMiss(format!("{}|{}", service.tag(), key))
    }

    fn wrong_kind(service: Service, key: &str) -> BackendError {
        BackendError::Malformed(format!(
            "scripted {}|{} has the wrong response kind",
            service.tag(),
            key
        ))
    }
}

impl ChatVision for ScriptedBackend {
    fn chat_vision(&self, request: &ChatVisionRequest) -> Result<String, BackendError> {
        if request.prompt.is_empty() {
            return Err(BackendError::InvalidRequest("empty prompt".into()));
        }
        match self.lookup(Service::Chat, &request.key) {
            Some(ScriptEntry::Text(s)) => Ok(s.clone()),
            Some(_) => Err(Self::wrong_kind(Service::Chat, &request.key)),
            None => Err(Self::miss(Service::Chat, &request.key)),
        }
    }
}

impl Grounder for ScriptedBackend {
    fn ground(&self, image: &ImageRef, description: &str) -> Result<BoundingBox, BackendError> {
        check_grounding_query(description)?;
        let key = format!("{image}|{description}");
        match self.lookup(Service::Ground, &key) {
            Some(ScriptEntry::Box(b)) => Ok(BoundingBox::try_from(*b)?),
            Some(ScriptEntry::Null) | None => Err(BackendError::NoRegion(description.to_string())),
            Some(_) => Err(Self::wrong_kind(Service::Ground, &key)),
        }
    }
}

impl Embedder for ScriptedBackend {
    fn embed(&self, input: EmbedInput<'_>) -> Result<EmbeddingVector, BackendError> {
        let key = match input {
            EmbedInput::Text("") => return Err(BackendError::InvalidRequest("empty text".into())),
            EmbedInput::Text(t) => format!("text|{t}"),
            EmbedInput::Image(i) => format!("image|{i}"),
        };
        match self.lookup(Service::Embed, &key) {
            Some(ScriptEntry::Vector(v)) => {
                if let Some(expected) = self.embedding_dim {
                    if v.len() != expected {
                        return Err(BackendError::DimensionMismatch { expected, got: v.len() });
                    }
                }
                EmbeddingVector::normalized(v.clone())
            }
            Some(_) => Err(Self::wrong_kind(Service::Embed, &key)),
            None => Err(Self::miss(Service::Embed, &key)),
        }
    }
}

impl Captioner for ScriptedBackend {
    fn caption_region(&self, image: &ImageRef, region: &BoundingBox) -> Result<String, BackendError> {
        check_crop(region)?;
        let key = caption_key(image, region);
        match self.lookup(Service::Caption, &key) {
            Some(ScriptEntry::Text(s)) => check_caption(s),
            Some(_) => Err(Self::wrong_kind(Service::Caption, &key)),
            None => Err(Self::miss(Service::Caption, &key)),
        }
    }
}

impl<T: ChatVision + ?Sized> ChatVision for &T {
    fn chat_vision(&self, request: &ChatVisionRequest) -> Result<String, BackendError> {
        (**self).chat_vision(request)
    }
}

impl<T: Grounder + ?Sized> Grounder for &T {
    fn ground(&self, image: &ImageRef, description: &str) -> Result<BoundingBox, BackendError> {
        (**self).ground(image, description)
    }
}

impl<T: Embedder + ?Sized> Embedder for &T {
    fn embed(&self, input: EmbedInput<'_>) -> Result<EmbeddingVector, BackendError> {
        (**self).embed(input)
    }
}

impl<T: Captioner + ?Sized> Captioner for &T {
    fn caption_region(&self, image: &ImageRef, region: &BoundingBox) -> Result<String, BackendError> {
        (**self).caption_region(image, region)
    }
}
