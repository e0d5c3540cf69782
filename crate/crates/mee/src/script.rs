//! Script files for the deterministic backend.
//!
//! A script file is a JSON object mapping `"<service>|<key>"` to a response:
//! a string for `chat` and `caption`, `[x1,y1,x2,y2]` or `null` for `ground`,
//! and a number array for `embed`. Key construction per service is
//! documented on [`mee_core::gateway`].

use std::collections::BTreeMap;
use std::path::Path;

use mee_core::gateway::{ScriptEntry, ScriptedBackend, Service};
use serde_json::Value;

use crate::files::{self, FileError};

fn entry_for(service: Service, value: &Value) -> Result<ScriptEntry, String> {
    let numbers = |items: &[Value]| -> Result<Vec<f64>, String> {
        items
            .iter()
            .map(|v| v.as_f64().ok_or_else(|| format!("expected a number, found {v}")))
            .collect()
    };
    match (service, value) {
        (Service::Chat | Service::Caption, Value::String(s)) => Ok(ScriptEntry::Text(s.clone())),
        (Service::Ground, Value::Null) => Ok(ScriptEntry::Null),
        (Service::Ground, Value::Array(items)) => {
            let v = numbers(items)?;
            let b: [f64; 4] = v
                .try_into()
                .map_err(|v: Vec<f64>| format!("a box needs 4 numbers, found {}", v.len()))?;
            Ok(ScriptEntry::Box(b))
        }
        (Service::Embed, Value::Array(items)) => Ok(ScriptEntry::Vector(numbers(items)?)),
        (s, v) => Err(format!("{v} is not a valid {} response", s.tag())),
    }
}

/// Builds a scripted backend from an in-memory script table.
pub fn backend_from_table(table: &BTreeMap<String, Value>) -> Result<ScriptedBackend, String> {
    let mut backend = ScriptedBackend::new();
    for (full_key, value) in table {
        let (tag, key) = full_key
            .split_once('|')
            .ok_or_else(|| format!("key {full_key:?} lacks a \"<service>|\" prefix"))?;
        let service = Service::from_tag(tag).ok_or_else(|| format!("key {full_key:?}: unknown service {tag:?}"))?;
        let entry = entry_for(service, value).map_err(|e| format!("key {full_key:?}: {e}"))?;
        backend.insert(service, key, entry);
    }
    Ok(backend)
}

pub fn load_script(path: &Path) -> Result<ScriptedBackend, FileError> {
    let table: BTreeMap<String, Value> = files::read_json(path)?;
    backend_from_table(&table).map_err(|message| FileError {
        path: path.to_path_buf(),
        line: None,
        message,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use mee_core::gateway::{ChatVision, ChatVisionRequest, DecodeParams, EmbedInput, Embedder, Grounder, ImageRef};
    use serde_json::json;

    fn table(v: Value) -> BTreeMap<String, Value> {
        serde_json::from_value(v).unwrap()
    }

    #[test]
    fn loads_every_service() {
        let b = backend_from_table(&table(json!({
            "chat|doc1|etsgp": "Attack; fight",
            "ground|img1|machine gun": [120, 80, 360, 240],
            "ground|img1|sky": null,
            "embed|text|s1": [3.0, 4.0],
            "caption|img7|0,0,20,20": "machine gun"
        })))
        .unwrap();
        assert_eq!(b.len(), 5);
        let req = ChatVisionRequest {
            key: "doc1|etsgp".into(),
            prompt: "p".into(),
            image: ImageRef::new("img1"),
            decode: DecodeParams::default(),
        };
        assert_eq!(b.chat_vision(&req).unwrap(), "Attack; fight");
        let bx = b.ground(&ImageRef::new("img1"), "machine gun").unwrap();
        assert_eq!(bx.to_array(), [120.0, 80.0, 360.0, 240.0]);
        assert!(b.ground(&ImageRef::new("img1"), "sky").is_err());
        let v = b.embed(EmbedInput::Text("s1")).unwrap();
        assert!((v.values()[0] - 0.6).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_entries() {
        for bad in [
            json!({"nokey": "x"}),
            json!({"video|k": "x"}),
            json!({"chat|k": 3}),
            json!({"ground|i|d": [1, 2, 3]}),
            json!({"embed|text|x": ["a"]}),
        ] {
            assert!(backend_from_table(&table(bad)).is_err());
        }
    }
}
