use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::Value;

use crate::backend::BackendIdentity;

/// Per-document call accounting of an extraction run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DocumentCalls {
    pub doc_id: String,
    pub chat_calls: usize,
    pub ground_calls: usize,
    pub events: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Written next to every command's output. Apart from the two timestamps,
/// identical inputs and scripted backends give byte-identical manifests.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: String,
    pub command: String,
    pub template_version: &'static str,
    pub config: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub schema_sha256: Option<String>,
    pub backends: BTreeMap<String, BackendIdentity>,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    pub counts: BTreeMap<String, usize>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub documents: Vec<DocumentCalls>,
    pub started_at: String,
    pub finished_at: String,
}

pub fn now_rfc3339() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

impl RunManifest {
    pub fn start(command: &str) -> Self {
        Self {
            tool: concat!("mee ", env!("CARGO_PKG_VERSION")).into(),
            command: command.into(),
            template_version: mee_core::prompt::TEMPLATE_VERSION,
            config: Value::Null,
            schema_sha256: None,
            backends: BTreeMap::new(),
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
            counts: BTreeMap::new(),
            documents: Vec::new(),
            started_at: now_rfc3339(),
            finished_at: String::new(),
        }
    }

    pub fn input(&mut self, name: &str, path: impl AsRef<std::path::Path>) {
        self.inputs.insert(name.into(), path.as_ref().display().to_string());
    }

    pub fn output(&mut self, name: &str, path: impl AsRef<std::path::Path>) {
        self.outputs.insert(name.into(), path.as_ref().display().to_string());
    }

    pub fn finish(&mut self) {
        self.finished_at = now_rfc3339();
    }
}
