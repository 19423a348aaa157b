use std::time::Duration;

use reqwest::blocking::Client;
use reqwest::StatusCode;
use serde_json::{json, Value};

use super::{Backend, BackendError, GenerationRequest, Role};

const DEFAULT_BODY_CAP: usize = 4 << 20;

/// POSTs a JSON body and decodes a JSON reply, classifying failures.
pub(crate) fn post_json(
    client: &Client,
    url: &str,
    api_key: Option<&str>,
    body: &Value,
    body_cap: usize,
) -> Result<Value, BackendError> {
    let mut req = client.post(url).json(body);
    if let Some(key) = api_key {
        req = req.bearer_auth(key);
    }
    let resp = req.send().map_err(|e| BackendError::Transient(format!("{url}: {e}")))?;
    let status = resp.status();
    if let Some(len) = resp.content_length() {
        if len as usize > body_cap {
            return Err(BackendError::TooLong {
                bytes: len as usize,
                cap: body_cap,
            });
        }
    }
    let bytes = resp
        .bytes()
        .map_err(|e| BackendError::Transient(format!("{url}: reading body: {e}")))?;
    if bytes.len() > body_cap {
        return Err(BackendError::TooLong {
            bytes: bytes.len(),
            cap: body_cap,
        });
    }
    let snippet = || String::from_utf8_lossy(&bytes[..bytes.len().min(200)]).into_owned();
    match status {
        s if s.is_success() => {}
        StatusCode::UNAUTHORIZED | StatusCode::FORBIDDEN => {
            return Err(BackendError::Auth(format!("{status}: {}", snippet())))
        }
        StatusCode::TOO_MANY_REQUESTS | StatusCode::REQUEST_TIMEOUT => {
            return Err(BackendError::Transient(format!("{status}")))
        }
        s if s.is_server_error() => return Err(BackendError::Transient(format!("{status}"))),
        _ => return Err(BackendError::Fatal(format!("{status}: {}", snippet()))),
    }
    serde_json::from_slice(&bytes).map_err(|e| BackendError::Fatal(format!("response is not JSON: {e}")))
}

/// Client for an OpenAI-compatible `/chat/completions` endpoint. The prompt
/// is sent as a single user message.
#[derive(Debug, Clone)]
pub struct HttpBackend {
    client: Client,
    url: String,
    model: String,
    filler_model: Option<String>,
    api_key: Option<String>,
    body_cap: usize,
}

impl HttpBackend {
    /// `endpoint` is either the full completions URL or a base URL to which
    /// `/chat/completions` is appended.
    pub fn new(endpoint: &str, model: impl Into<String>, api_key: Option<String>) -> Self {
        let trimmed = endpoint.trim_end_matches('/');
        let url = if trimmed.ends_with("/chat/completions") {
            trimmed.to_string()
        } else {
            format!("{trimmed}/chat/completions")
        };
        HttpBackend {
            client: Client::builder()
                .timeout(Duration::from_secs(120))
                .build()
                .expect("http client builds"),
            url,
            model: model.into(),
            filler_model: None,
            api_key,
            body_cap: DEFAULT_BODY_CAP,
        }
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.client = Client::builder().timeout(timeout).build().expect("http client builds");
        self
    }

    /// Serves blank-filler requests with a different model.
    pub fn with_filler_model(mut self, model: impl Into<String>) -> Self {
        self.filler_model = Some(model.into());
        self
    }

    fn model_for(&self, role: Role) -> &str {
        match (role, &self.filler_model) {
            (Role::BlankFiller, Some(m)) => m,
            _ => &self.model,
        }
    }

    pub fn with_body_cap(mut self, bytes: usize) -> Self {
        self.body_cap = bytes;
        self
    }

    pub fn url(&self) -> &str {
        &self.url
    }
}

impl Backend for HttpBackend {
    fn model_id(&self) -> String {
        match &self.filler_model {
            Some(f) => format!("http:{}+{f}", self.model),
            None => format!("http:{}", self.model),
        }
    }

    fn complete(&self, request: &GenerationRequest) -> Result<String, BackendError> {
        let mut body = json!({
            "model": self.model_for(request.role),
            "messages": [{"role": "user", "content": request.prompt}],
            "max_tokens": request.max_new_tokens,
            "temperature": request.temperature,
        });
        if !request.stop_sequences.is_empty() {
            body["stop"] = json!(request.stop_sequences);
        }
        let reply = post_json(&self.client, &self.url, self.api_key.as_deref(), &body, self.body_cap)?;
        reply
            .pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| BackendError::Fatal("missing choices[0].message.content".into()))
    }
}
