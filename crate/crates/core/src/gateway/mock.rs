//! Scripted backend: completions looked up by (role, sha256 of prompt).
//!
//! Script lines look like
//! `{"match": {"role": "blank_filler", "prompt_sha256": "…"}, "completion": "…"}`.

use std::collections::HashMap;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};

use serde::{Deserialize, Serialize};

use super::{sha256_hex, Backend, BackendError, GatewayError, GenerationRequest, Role};
use crate::jsonl;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MockMatch {
    pub role: Role,
    pub prompt_sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MockEntry {
    #[serde(rename = "match")]
    pub matcher: MockMatch,
    pub completion: String,
}

impl MockEntry {
    pub fn for_prompt(role: Role, prompt: &str, completion: impl Into<String>) -> Self {
        MockEntry {
            matcher: MockMatch {
                role,
                prompt_sha256: sha256_hex(prompt.as_bytes()),
            },
            completion: completion.into(),
        }
    }
}

#[derive(Debug)]
pub struct MockBackend {
    table: HashMap<MockMatch, String>,
    model_id: String,
    calls: AtomicUsize,
}

impl MockBackend {
    /// Builds a backend from entries. Repeated matches must agree.
    pub fn from_entries(entries: Vec<MockEntry>) -> Result<Self, GatewayError> {
        let digest = sha256_hex(jsonl::to_string(&entries).as_bytes());
        Self::build(entries, digest)
    }

    pub fn from_file(path: &Path) -> Result<Self, GatewayError> {
        let bytes = std::fs::read(path).map_err(|e| GatewayError::Script(format!("{}: {e}", path.display())))?;
        let entries: Vec<MockEntry> = jsonl::read(path).map_err(|e| GatewayError::Script(e.to_string()))?;
        Self::build(entries, sha256_hex(&bytes))
    }

    fn build(entries: Vec<MockEntry>, digest: String) -> Result<Self, GatewayError> {
        let mut table = HashMap::with_capacity(entries.len());
        for e in entries {
            if let Some(prev) = table.get(&e.matcher) {
                if prev != &e.completion {
                    return Err(GatewayError::Script(format!(
                        "conflicting completions for {} {}",
                        e.matcher.role, e.matcher.prompt_sha256
                    )));
                }
                continue;
            }
            table.insert(e.matcher, e.completion);
        }
        Ok(MockBackend {
            table,
            model_id: format!("mock:{digest}"),
            calls: AtomicUsize::new(0),
        })
    }

    /// Number of `complete` calls served so far.
    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::Relaxed)
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }
}

impl Backend for MockBackend {
    fn model_id(&self) -> String {
        self.model_id.clone()
    }

    fn complete(&self, request: &GenerationRequest) -> Result<String, BackendError> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        let key = MockMatch {
            role: request.role,
            prompt_sha256: request.prompt_sha256(),
        };
        self.table.get(&key).cloned().ok_or(BackendError::Unscripted {
            role: key.role,
            prompt_sha256: key.prompt_sha256,
        })
    }
}
