//! REST clients for live model services.
//!
//! | service  | request                                                       | reply                          |
//! |----------|---------------------------------------------------------------|--------------------------------|
//! | chat     | `POST {base}/v1/chat/completions` (text + image_url content)  | `choices[0].message.content`   |
//! | embed    | `POST {base}/v1/embeddings` `{model, input}`                  | `data[0].embedding`            |
//! | ground   | `POST {base}/ground` `{image, query}`                         | `{box:[x1,y1,x2,y2]}` or 404   |
//! | caption  | `POST {base}/caption` `{image}` (pre-cropped)                 | `{caption}`                    |
//!
//! Images travel as data URIs; `http(s)` image references are passed through
//! to the chat endpoint unchanged. Transport failures, timeouts, 429 and 5xx
//! replies are retried up to the configured cap. All requests are read-only.

use std::io::Cursor;
use std::path::PathBuf;
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use base64::Engine;
use image::{GenericImageView, ImageFormat, ImageReader};
use mee_core::gateway::{
    check_caption, check_crop, check_grounding_query, BackendError, Captioner, ChatVision, ChatVisionRequest,
    EmbedInput, Embedder, EmbeddingVector, Grounder, ImageRef,
};
use mee_core::BoundingBox;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

pub const DEFAULT_TIMEOUT_SECS: u64 = 60;
pub const DEFAULT_MAX_IN_FLIGHT: usize = 4;
pub const DEFAULT_RETRIES: u32 = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HttpOptions {
    pub base_url: String,
    pub model: String,
    #[serde(skip)]
    pub token: Option<String>,
    pub retries: u32,
    pub timeout_secs: u64,
    pub max_in_flight: usize,
    pub embedding_dim: Option<usize>,
    /// Base directory for relative image paths.
    pub image_root: Option<PathBuf>,
    /// Base delay of the exponential retry backoff.
    pub backoff_ms: u64,
}

impl HttpOptions {
    pub fn new(base_url: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            model: "default".into(),
            token: None,
            retries: DEFAULT_RETRIES,
            timeout_secs: DEFAULT_TIMEOUT_SECS,
            max_in_flight: DEFAULT_MAX_IN_FLIGHT,
            embedding_dim: None,
            image_root: None,
            backoff_ms: 200,
        }
    }
}

/// Counting semaphore bounding in-flight requests.
struct Gate {
    free: Mutex<usize>,
    cv: Condvar,
}

struct Permit<'a>(&'a Gate);

impl Gate {
    fn new(n: usize) -> Self {
        Self {
            free: Mutex::new(n.max(1)),
            cv: Condvar::new(),
        }
    }

    fn acquire(&self) -> Permit<'_> {
        let mut free = self.free.lock().unwrap_or_else(|e| e.into_inner());
        while *free == 0 {
            free = self.cv.wait(free).unwrap_or_else(|e| e.into_inner());
        }
        *free -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap_or_else(|e| e.into_inner()) += 1;
        self.0.cv.notify_one();
    }
}

struct Reply {
    status: u16,
    body: Value,
}

pub struct HttpBackend {
    opts: HttpOptions,
    agent: ureq::Agent,
    gate: Gate,
}

impl HttpBackend {
    pub fn new(opts: HttpOptions) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(opts.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        let gate = Gate::new(opts.max_in_flight);
        Self { opts, agent, gate }
    }

    pub fn options(&self) -> &HttpOptions {
        &self.opts
    }

    fn attempt(&self, url: &str, body: &Value) -> Result<Reply, (bool, BackendError)> {
        let _permit = self.gate.acquire();
        let mut req = self.agent.post(url);
        if let Some(token) = &self.opts.token {
            req = req.header("Authorization", format!("Bearer {token}"));
        }
        let mut resp = req.send_json(body).map_err(|e| {
            let transient = !matches!(e, ureq::Error::BadUri(_) | ureq::Error::Json(_));
            (transient, BackendError::Transport(format!("{url}: {e}")))
        })?;
        let status = resp.status().as_u16();
        if status == 429 || status >= 500 {
            return Err((true, BackendError::Transport(format!("{url}: HTTP {status}"))));
        }
        let text = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| (true, BackendError::Transport(format!("{url}: {e}"))))?;
        let body = if text.trim().is_empty() {
            Value::Null
        } else {
            serde_json::from_str(&text)
                .map_err(|e| (false, BackendError::Malformed(format!("{url}: reply is not JSON: {e}"))))?
        };
        Ok(Reply { status, body })
    }

    fn post(&self, path: &str, body: &Value) -> Result<Reply, BackendError> {
        let url = format!("{}{}", self.opts.base_url, path);
        let mut attempt = 0;
        loop {
            match self.attempt(&url, body) {
                Ok(reply) => return Ok(reply),
                Err((true, e)) if attempt < self.opts.retries => {
                    log::warn!("retrying after {e}");
                    std::thread::sleep(Duration::from_millis(self.opts.backoff_ms << attempt.min(6)));
                    attempt += 1;
                }
                Err((_, e)) => return Err(e),
            }
        }
    }

    fn expect_ok(reply: Reply, path: &str) -> Result<Value, BackendError> {
        if (200..300).contains(&reply.status) {
            Ok(reply.body)
        } else {
            Err(BackendError::Malformed(format!(
                "{path}: HTTP {}: {}",
                reply.status, reply.body
            )))
        }
    }

    fn image_bytes(&self, image: &ImageRef) -> Result<Vec<u8>, BackendError> {
        let s = image.as_str();
        if let Some(rest) = s.strip_prefix("data:") {
            let (_, payload) = rest
                .split_once(";base64,")
                .ok_or_else(|| BackendError::InvalidRequest(format!("unsupported data URI for {}", short(s))))?;
            return base64::engine::general_purpose::STANDARD
                .decode(payload)
                .map_err(|e| BackendError::InvalidRequest(format!("bad base64 image: {e}")));
        }
        if image.is_url() {
            let _permit = self.gate.acquire();
            let mut resp = self
                .agent
                .get(s)
                .call()
                .map_err(|e| BackendError::Transport(format!("{s}: {e}")))?;
            if !resp.status().is_success() {
                return Err(BackendError::InvalidRequest(format!("{s}: HTTP {}", resp.status())));
            }
            return resp
                .body_mut()
                .read_to_vec()
                .map_err(|e| BackendError::Transport(format!("{s}: {e}")));
        }
        let path = match &self.opts.image_root {
            Some(root) => root.join(s),
            None => PathBuf::from(s),
        };
        std::fs::read(&path).map_err(|e| BackendError::InvalidRequest(format!("image {}: {e}", path.display())))
    }

    fn data_uri(bytes: &[u8]) -> String {
        let mime = image::guess_format(bytes)
            .map(|f| f.to_mime_type())
            .unwrap_or("application/octet-stream");
        format!(
            "data:{mime};base64,{}",
            base64::engine::general_purpose::STANDARD.encode(bytes)
        )
    }

    fn image_url(&self, image: &ImageRef) -> Result<String, BackendError> {
        if image.is_url() || image.as_str().starts_with("data:") {
            Ok(image.to_string())
        } else {
            Ok(Self::data_uri(&self.image_bytes(image)?))
        }
    }
}

fn short(s: &str) -> &str {
    &s[..s.char_indices().nth(40).map_or(s.len(), |(i, _)| i)]
}

fn decode_image(bytes: &[u8]) -> Result<image::DynamicImage, BackendError> {
    ImageReader::new(Cursor::new(bytes))
        .with_guessed_format()
        .map_err(|e| BackendError::InvalidRequest(format!("unreadable image: {e}")))?
        .decode()
        .map_err(|e| BackendError::InvalidRequest(format!("undecodable image: {e}")))
}

fn image_dimensions(bytes: &[u8]) -> Result<(u32, u32), BackendError> {
    ImageReader::new(Cursor::new(bytes))
        .with_guessed_format()
        .map_err(|e| BackendError::InvalidRequest(format!("unreadable image: {e}")))?
        .into_dimensions()
        .map_err(|e| BackendError::InvalidRequest(format!("undecodable image: {e}")))
}

#[derive(Deserialize)]
struct ChatReply {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatMessage,
}

#[derive(Deserialize)]
struct ChatMessage {
    content: String,
}

#[derive(Deserialize)]
struct EmbedReply {
    data: Vec<EmbedDatum>,
}

#[derive(Deserialize)]
struct EmbedDatum {
    embedding: Vec<f64>,
}

#[derive(Deserialize)]
struct GroundReply {
    #[serde(rename = "box")]
    bbox: Option<[f64; 4]>,
}

#[derive(Deserialize)]
struct CaptionReply {
    caption: String,
}

fn parse<T: for<'de> Deserialize<'de>>(path: &str, body: Value) -> Result<T, BackendError> {
    serde_json::from_value(body).map_err(|e| BackendError::Malformed(format!("{path}: {e}")))
}

impl ChatVision for HttpBackend {
    fn chat_vision(&self, request: &ChatVisionRequest) -> Result<String, BackendError> {
        if request.prompt.is_empty() {
            return Err(BackendError::InvalidRequest("empty prompt".into()));
        }
        let path = "/v1/chat/completions";
        let body = json!({
            "model": self.opts.model,
            "temperature": request.decode.temperature,
            "max_tokens": request.decode.max_tokens,
            "messages": [{
                "role": "user",
                "content": [
                    {"type": "text", "text": request.prompt},
                    {"type": "image_url", "image_url": {"url": self.image_url(&request.image)?}},
                ],
            }],
        });
        let reply: ChatReply = parse(path, Self::expect_ok(self.post(path, &body)?, path)?)?;
        reply
            .choices
            .into_iter()
            .next()
            .map(|c| c.message.content)
            .ok_or_else(|| BackendError::Malformed(format!("{path}: no choices")))
    }
}

impl Embedder for HttpBackend {
    fn embed(&self, input: EmbedInput<'_>) -> Result<EmbeddingVector, BackendError> {
        let payload = match input {
            EmbedInput::Text("") => return Err(BackendError::InvalidRequest("empty text".into())),
            EmbedInput::Text(t) => t.to_string(),
            EmbedInput::Image(i) => self.image_url(i)?,
        };
        let path = "/v1/embeddings";
        let body = json!({"model": self.opts.model, "input": payload});
        let reply: EmbedReply = parse(path, Self::expect_ok(self.post(path, &body)?, path)?)?;
        let values = reply
            .data
            .into_iter()
            .next()
            .ok_or_else(|| BackendError::Malformed(format!("{path}: no data")))?
            .embedding;
        if let Some(expected) = self.opts.embedding_dim {
            if values.len() != expected {
                return Err(BackendError::DimensionMismatch {
                    expected,
                    got: values.len(),
                });
            }
        }
        EmbeddingVector::normalized(values)
    }
}

impl Grounder for HttpBackend {
    /// The returned box is clamped to the image.
    fn ground(&self, image: &ImageRef, description: &str) -> Result<BoundingBox, BackendError> {
        check_grounding_query(description)?;
        let bytes = self.image_bytes(image)?;
        let (w, h) = image_dimensions(&bytes)?;
        let path = "/ground";
        let body = json!({"image": Self::data_uri(&bytes), "query": description});
        let reply = self.post(path, &body)?;
        if reply.status == 404 {
            return Err(BackendError::NoRegion(description.to_string()));
        }
        let reply: GroundReply = parse(path, Self::expect_ok(reply, path)?)?;
        let raw = reply
            .bbox
            .ok_or_else(|| BackendError::NoRegion(description.to_string()))?;
        Ok(BoundingBox::try_from(raw)?.clamp_to(f64::from(w), f64::from(h))?)
    }
}

impl Captioner for HttpBackend {
    fn caption_region(&self, image: &ImageRef, region: &BoundingBox) -> Result<String, BackendError> {
        check_crop(region)?;
        let full = decode_image(&self.image_bytes(image)?)?;
        let (w, h) = full.dimensions();
        let region = region.clamp_to(f64::from(w), f64::from(h))?;
        check_crop(&region)?;
        let x = region.x1().floor() as u32;
        let y = region.y1().floor() as u32;
        let cw = (region.x2().ceil() as u32).min(w) - x;
        let ch = (region.y2().ceil() as u32).min(h) - y;
        let mut png = Vec::new();
        full.crop_imm(x, y, cw, ch)
            .write_to(&mut Cursor::new(&mut png), ImageFormat::Png)
            .map_err(|e| BackendError::InvalidRequest(format!("cannot encode crop: {e}")))?;
        let path = "/caption";
        let body = json!({"image": Self::data_uri(&png)});
        let reply: CaptionReply = parse(path, Self::expect_ok(self.post(path, &body)?, path)?)?;
        check_caption(&reply.caption)
    }
}
