//! HTTP backend against an in-process stub server.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::thread;

use mee::http::{HttpBackend, HttpOptions};
use mee_core::gateway::{
    BackendError, ChatVision, ChatVisionRequest, DecodeParams, EmbedInput, Embedder, Grounder, ImageRef,
};
use mee_core::BoundingBox;
use serde_json::{json, Value};

#[derive(Debug, Clone)]
struct Seen {
    path: String,
    authorization: Option<String>,
    body: Value,
}

type Responder = dyn Fn(usize, &Seen) -> (u16, String) + Send + Sync;

/// Serves requests until the test ends; every reply closes the connection.
fn serve(respond: Box<Responder>) -> (String, Arc<Mutex<Vec<Seen>>>) {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}", listener.local_addr().unwrap());
    let seen = Arc::new(Mutex::new(Vec::new()));
    let log = Arc::clone(&seen);
    thread::spawn(move || {
        for stream in listener.incoming() {
            let mut stream = stream.unwrap();
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut line = String::new();
            reader.read_line(&mut line).unwrap();
            let path = line.split_whitespace().nth(1).unwrap_or_default().to_string();
            let (mut len, mut authorization) = (0, None);
            loop {
                let mut h = String::new();
                reader.read_line(&mut h).unwrap();
                let h = h.trim_end();
                if h.is_empty() {
                    break;
                }
                let (k, v) = h.split_once(':').unwrap();
                match k.to_ascii_lowercase().as_str() {
                    "content-length" => len = v.trim().parse().unwrap(),
                    "authorization" => authorization = Some(v.trim().to_string()),
                    _ => {}
                }
            }
            let mut body = vec![0; len];
            reader.read_exact(&mut body).unwrap();
            let req = Seen {
                path,
                authorization,
                body: serde_json::from_slice(&body).unwrap_or(Value::Null),
            };
            let n = {
                let mut log = log.lock().unwrap();
                log.push(req.clone());
                log.len() - 1
            };
            let (status, payload) = respond(n, &req);
            let _ = write!(
                stream,
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{payload}",
                payload.len()
            );
        }
    });
    (url, seen)
}

fn options(url: &str, root: &std::path::Path) -> HttpOptions {
    let mut o = HttpOptions::new(url);
    o.image_root = Some(root.to_path_buf());
    o.backoff_ms = 1;
    o.retries = 2;
    o.timeout_secs = 5;
    o
}

fn png(dir: &std::path::Path) {
    image::RgbImage::new(100, 50).save(dir.join("img.png")).unwrap();
}

fn chat_request() -> ChatVisionRequest {
    ChatVisionRequest {
        key: "d|etsgp".into(),
        prompt: "Find events.".into(),
        image: ImageRef::new("img.png"),
        decode: DecodeParams::default(),
    }
}

#[test]
fn chat_returns_content_verbatim_and_sends_token() {
    let dir = tempfile::tempdir().unwrap();
    png(dir.path());
    let reply = json!({"choices": [{"message": {"content": "Attack; fight <seg> Die; killed"}}]}).to_string();
    let (url, seen) = serve(Box::new(move |_, _| (200, reply.clone())));
    let mut o = options(&url, dir.path());
    o.token = Some("s3cret".into());
    o.model = "tiny".into();
    let out = HttpBackend::new(o).chat_vision(&chat_request()).unwrap();
    assert_eq!(out, "Attack; fight <seg> Die; killed");
    let seen = seen.lock().unwrap();
    assert_eq!(seen[0].path, "/v1/chat/completions");
    assert_eq!(seen[0].authorization.as_deref(), Some("Bearer s3cret"));
    assert_eq!(seen[0].body["model"], "tiny");
}

#[test]
fn server_errors_are_retried() {
    let dir = tempfile::tempdir().unwrap();
    png(dir.path());
    let reply = json!({"choices": [{"message": {"content": "None"}}]}).to_string();
    let (url, seen) = serve(Box::new(move |n, _| {
        if n == 0 {
            (503, "{}".into())
        } else {
            (200, reply.clone())
        }
    }));
    let out = HttpBackend::new(options(&url, dir.path()))
        .chat_vision(&chat_request())
        .unwrap();
    assert_eq!(out, "None");
    assert_eq!(seen.lock().unwrap().len(), 2);
}

#[test]
fn retries_are_bounded() {
    let dir = tempfile::tempdir().unwrap();
    png(dir.path());
    let (url, seen) = serve(Box::new(|_, _| (500, "{}".into())));
    let err = HttpBackend::new(options(&url, dir.path()))
        .chat_vision(&chat_request())
        .unwrap_err();
    assert!(matches!(err, BackendError::Transport(_)), "{err:?}");
    assert_eq!(seen.lock().unwrap().len(), 3);
}

#[test]
fn grounding_maps_404_to_no_region_and_clamps_boxes() {
    let dir = tempfile::tempdir().unwrap();
    png(dir.path());
    let (url, seen) = serve(Box::new(|_, req| {
        if req.body["query"] == "nothing" {
            (404, "{}".into())
        } else {
            (200, json!({"box": [-5.0, 10.0, 500.0, 40.0]}).to_string())
        }
    }));
    let backend = HttpBackend::new(options(&url, dir.path()));
    let image = ImageRef::new("img.png");
    assert!(matches!(
        backend.ground(&image, "nothing"),
        Err(BackendError::NoRegion(_))
    ));
    let b = backend.ground(&image, "a soldier").unwrap();
    assert_eq!(b, BoundingBox::new(0.0, 10.0, 100.0, 40.0).unwrap());
    let seen = seen.lock().unwrap();
    assert_eq!(seen[1].path, "/ground");
    assert!(seen[1].body["image"]
        .as_str()
        .unwrap()
        .starts_with("data:image/png;base64,"));
}

#[test]
fn embeddings_are_normalized_and_dimension_checked() {
    let dir = tempfile::tempdir().unwrap();
    let (url, _) = serve(Box::new(|_, _| {
        (200, json!({"data": [{"embedding": [3.0, 4.0]}]}).to_string())
    }));
    let v = HttpBackend::new(options(&url, dir.path()))
        .embed(EmbedInput::Text("soldiers"))
        .unwrap();
    assert_eq!(v.values(), &[0.6, 0.8]);

    let mut o = options(&url, dir.path());
    o.embedding_dim = Some(3);
    let err = HttpBackend::new(o).embed(EmbedInput::Text("soldiers")).unwrap_err();
    assert!(
        matches!(err, BackendError::DimensionMismatch { expected: 3, got: 2 }),
        "{err:?}"
    );
}

#[test]
fn malformed_replies_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    png(dir.path());
    let (url, _) = serve(Box::new(|_, _| (200, json!({"choices": []}).to_string())));
    let err = HttpBackend::new(options(&url, dir.path()))
        .chat_vision(&chat_request())
        .unwrap_err();
    assert!(matches!(err, BackendError::Malformed(_)), "{err:?}");
}
