use std::time::Duration;

use reqwest::blocking::Client;
use serde::Serialize;
use serde_json::{json, Value};

use super::PipelineError;
use crate::corpus::Label12;
use crate::gateway::{post_json, with_retries, BackendError, RetryPolicy};
use crate::metrics::word_overlap;

pub const SEP: &str = " [SEP] ";

/// The (label, reason, refill) triple judged by a verifier.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VerifierInput {
    pub label: Label12,
    pub reason: String,
    pub refill: String,
    pub encoded: String,
}

impl VerifierInput {
    pub fn new(label: Label12, reason: impl Into<String>, refill: impl Into<String>) -> Result<Self, PipelineError> {
        let (reason, refill) = (reason.into(), refill.into());
        for (what, part) in [("reason", &reason), ("refill", &refill)] {
            if part.trim().is_empty() {
                return Err(PipelineError::InvalidVerifierInput(format!("empty {what}")));
            }
            if part.contains(SEP) {
                return Err(PipelineError::InvalidVerifierInput(format!(
                    "{what} contains the separator"
                )));
            }
        }
        let encoded = format!("{}{SEP}{reason}{SEP}{refill}", label.name());
        Ok(VerifierInput {
            label,
            reason,
            refill,
            encoded,
        })
    }
}

/// Scores how well a reason and its refill agree, in [0, 1].
pub trait Verifier: Send + Sync {
    /// Short identifier recorded in run summaries.
    fn id(&self) -> String;
    fn score(&self, input: &VerifierInput) -> Result<f64, PipelineError>;
}

/// Word-level Jaccard similarity between reason and refill.
#[derive(Debug, Clone, Copy, Default)]
pub struct LexicalBaseline;

impl Verifier for LexicalBaseline {
    fn id(&self) -> String {
        "lexical".into()
    }

    fn score(&self, input: &VerifierInput) -> Result<f64, PipelineError> {
        Ok(word_overlap(&input.reason, &input.refill))
    }
}

/// Client for an external entailment scorer: POST `{"text": encoded}`,
/// reply `{"score": p}`.
#[derive(Debug, Clone)]
pub struct RemoteScorer {
    client: Client,
    url: String,
    api_key: Option<String>,
    retry: RetryPolicy,
}

impl RemoteScorer {
    pub fn new(url: impl Into<String>, api_key: Option<String>) -> Self {
        RemoteScorer {
            client: Client::builder()
                .timeout(Duration::from_secs(60))
                .build()
                .expect("http client builds"),
            url: url.into(),
            api_key,
            retry: RetryPolicy::default(),
        }
    }

    pub fn with_retry(mut self, retry: RetryPolicy) -> Self {
        self.retry = retry;
        self
    }
}

impl Verifier for RemoteScorer {
    fn id(&self) -> String {
        format!("remote:{}", self.url)
    }

    fn score(&self, input: &VerifierInput) -> Result<f64, PipelineError> {
        let body = json!({ "text": input.encoded });
        let score = with_retries(&self.retry, || {
            let reply = post_json(&self.client, &self.url, self.api_key.as_deref(), &body, 1 << 16)?;
            match reply.get("score").and_then(Value::as_f64) {
                Some(s) if (0.0..=1.0).contains(&s) => Ok(s),
                Some(s) => Err(BackendError::Fatal(format!("score {s} outside [0, 1]"))),
                None => Err(BackendError::Fatal("reply lacks a numeric \"score\"".into())),
            }
        })?;
        Ok(score)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::http_test_server::{serve, Reply};
    use crate::gateway::GatewayError;

    #[test]
    fn encoding_and_invariants() {
        let v = VerifierInput::new(Label12::DataSecurity, "we use ssl", "encryption").unwrap();
        assert_eq!(v.encoded, "Data Security [SEP] we use ssl [SEP] encryption");
        assert_eq!(v.encoded.matches(SEP).count(), 2);
        assert!(VerifierInput::new(Label12::DataSecurity, " ", "x").is_err());
        assert!(VerifierInput::new(Label12::DataSecurity, "x", "").is_err());
        assert!(VerifierInput::new(Label12::DataSecurity, "a [SEP] b", "x").is_err());
    }

    #[test]
    fn lexical_examples() {
        let s = |r: &str, f: &str| {
            LexicalBaseline
                .score(&VerifierInput::new(Label12::DataSecurity, r, f).unwrap())
                .unwrap()
        };
        assert_eq!(s("we use ssl", "we use ssl"), 1.0);
        assert_eq!(s("we use ssl", "third party cookies"), 0.0);
        assert_eq!(s("we collect email address", "we collect your email"), 0.6);
    }

    fn fast() -> RetryPolicy {
        RetryPolicy {
            max_retries: 1,
            initial_backoff: Duration::from_millis(1),
        }
    }

    #[test]
    fn remote_round_trip() {
        let (url, seen) = serve(vec![
            Reply {
                status: 502,
                body: "{}".into(),
            },
            Reply {
                status: 200,
                body: "{\"score\": 0.75}".into(),
            },
        ]);
        let r = RemoteScorer::new(url, Some("k".into())).with_retry(fast());
        let input = VerifierInput::new(Label12::DoNotTrack, "dnt", "signals").unwrap();
        assert_eq!(r.score(&input).unwrap(), 0.75);
        let seen = seen.lock().unwrap();
        let body: Value = serde_json::from_str(&seen[1].1).unwrap();
        assert_eq!(body, json!({"text": "Do Not Track [SEP] dnt [SEP] signals"}));
    }

    #[test]
    fn remote_rejects_bad_scores() {
        let input = VerifierInput::new(Label12::DoNotTrack, "dnt", "signals").unwrap();
        for body in ["{\"score\": 1.5}", "{\"p\": 0.2}"] {
            let (url, _) = serve(vec![Reply {
                status: 200,
                body: body.into(),
            }]);
            let err = RemoteScorer::new(url, None)
                .with_retry(fast())
                .score(&input)
                .unwrap_err();
            assert!(matches!(err, PipelineError::Gateway(GatewayError::InvalidResponse(_))));
        }
        let (url, _) = serve(vec![Reply {
            status: 503,
            body: "{}".into(),
        }]);
        let err = RemoteScorer::new(url, None)
            .with_retry(fast())
            .score(&input)
            .unwrap_err();
        assert!(matches!(
            err,
            PipelineError::Gateway(GatewayError::BackendUnavailable { attempts: 2, .. })
        ));
    }
}
