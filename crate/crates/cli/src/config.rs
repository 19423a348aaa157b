//! Run configuration: a flat `key = value` file, overridden by flags.
//!
//! Blank lines and lines starting with `#` are ignored. Unknown keys are
//! rejected so that typos do not silently fall back to defaults.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use polifilter_core::gateway::{Decoding, RetryPolicy};

pub const KEYS: &[&str] = &[
    "corpus",
    "raw_dir",
    "mapping",
    "seed",
    "train_policies",
    "test_policies",
    "train_list",
    "test_list",
    "endpoint",
    "model",
    "filler_model",
    "mock_script",
    "verifier",
    "threshold",
    "max_new_tokens",
    "temperature",
    "concurrency",
    "max_retries",
    "timeout_secs",
    "cache_dir",
    "out_dir",
];

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}:{line}: {message}")]
    Syntax {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("cannot read config {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("config key `{key}`: {message}")]
    Value { key: String, message: String },
    #[error("{0}")]
    Conflict(String),
    #[error("missing setting `{0}`")]
    Missing(&'static str),
}

fn value_err(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Value {
        key: key.to_string(),
        message: message.into(),
    }
}

/// Raw settings before validation. Later inserts win.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

impl Settings {
    pub fn parse(text: &str, origin: &Path) -> Result<Self, ConfigError> {
        let mut s = Settings::default();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let syntax = |message: &str| ConfigError::Syntax {
                path: origin.to_path_buf(),
                line: i + 1,
                message: message.to_string(),
            };
            let (k, v) = line.split_once('=').ok_or_else(|| syntax("expected `key = value`"))?;
            let k = k.trim();
            if k.is_empty() {
                return Err(syntax("empty key"));
            }
            if s.values.contains_key(k) {
                return Err(syntax(&format!("key `{k}` given twice")));
            }
            s.set(k, v.trim())?;
        }
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text, path)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        if !KEYS.contains(&key) {
            return Err(ConfigError::UnknownKey(key.to_string()));
        }
        self.values.insert(key.to_string(), value.to_string());
        Ok(())
    }

    /// Applies a flag. A flag that picks one alternative of an exclusive
    /// group drops the other alternative coming from the file.
    pub fn override_with(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let rivals: &[&str] = match key {
            "endpoint" => &["mock_script"],
            "mock_script" => &["endpoint"],
            "train_policies" | "test_policies" => &["train_list", "test_list"],
            "train_list" | "test_list" => &["train_policies", "test_policies"],
            _ => &[],
        };
        for r in rivals {
            self.values.remove(*r);
        }
        self.set(key, value)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    fn parsed<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError>
    where
        T::Err: std::fmt::Display,
    {
        self.get(key)
            .map(|v| v.parse::<T>().map_err(|e| value_err(key, format!("`{v}`: {e}"))))
            .transpose()
    }

    fn path(&self, key: &str) -> Option<PathBuf> {
        self.get(key).filter(|v| !v.is_empty()).map(PathBuf::from)
    }

    fn list(&self, key: &str) -> Option<Vec<String>> {
        self.get(key).map(|v| {
            v.split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(str::to_string)
                .collect()
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SplitSpec {
    /// Seeded split; missing counts are derived from the corpus size.
    Counts {
        train: Option<usize>,
        test: Option<usize>,
    },
    Lists {
        train: Vec<String>,
        test: Vec<String>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum BackendSpec {
    Http {
        endpoint: String,
        model: String,
        filler_model: Option<String>,
    },
    Mock(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub enum VerifierSpec {
    Lexical,
    Remote(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub corpus: Option<PathBuf>,
    pub raw_dir: Option<PathBuf>,
    pub mapping: Option<PathBuf>,
    pub seed: u64,
    pub split: SplitSpec,
    pub backend: Option<BackendSpec>,
    pub verifier: VerifierSpec,
    pub threshold: f64,
    pub decoding: Decoding,
    pub concurrency: usize,
    pub retry: RetryPolicy,
    pub timeout: Duration,
    /// `None` disables the response cache.
    pub cache_dir: Option<PathBuf>,
    pub out_dir: PathBuf,
}

impl RunConfig {
    pub fn from_settings(s: &Settings) -> Result<Self, ConfigError> {
        let split = match (s.list("train_list"), s.list("test_list")) {
            (None, None) => SplitSpec::Counts {
                train: s.parsed("train_policies")?,
                test: s.parsed("test_policies")?,
            },
            (Some(train), Some(test)) => {
                if s.get("train_policies").is_some() || s.get("test_policies").is_some() {
                    return Err(ConfigError::Conflict(
                        "give either policy counts or policy lists, not both".into(),
                    ));
                }
                SplitSpec::Lists { train, test }
            }
            _ => {
                return Err(ConfigError::Conflict(
                    "train_list and test_list must be given together".into(),
                ))
            }
        };

        let backend = match (s.get("endpoint"), s.path("mock_script")) {
            (Some(_), Some(_)) => {
                return Err(ConfigError::Conflict(
                    "exactly one backend: set either `endpoint` or `mock_script`".into(),
                ))
            }
            (Some(endpoint), None) => Some(BackendSpec::Http {
                endpoint: endpoint.to_string(),
                model: s.get("model").ok_or(ConfigError::Missing("model"))?.to_string(),
                filler_model: s.get("filler_model").map(str::to_string),
            }),
            (None, Some(path)) => Some(BackendSpec::Mock(path)),
            (None, None) => None,
        };

        let verifier = match s.get("verifier") {
            None | Some("lexical") => VerifierSpec::Lexical,
            Some(url) if url.starts_with("http://") || url.starts_with("https://") => {
                VerifierSpec::Remote(url.to_string())
            }
            Some(other) => {
                return Err(value_err(
                    "verifier",
                    format!("`{other}` is neither `lexical` nor an http(s) URL"),
                ))
            }
        };

        let threshold = s
            .parsed::<f64>("threshold")?
            .unwrap_or(polifilter_core::pipeline::DEFAULT_THRESHOLD);
        if !(0.0..=1.0).contains(&threshold) {
            return Err(value_err("threshold", format!("{threshold} is outside [0, 1]")));
        }
        let concurrency = s.parsed::<usize>("concurrency")?.unwrap_or(4);
        if concurrency == 0 {
            return Err(value_err("concurrency", "must be at least 1"));
        }

        let mut decoding = Decoding::default();
        if let Some(n) = s.parsed("max_new_tokens")? {
            decoding.max_new_tokens = n;
        }
        if let Some(t) = s.parsed("temperature")? {
            decoding.temperature = t;
        }
        let mut retry = RetryPolicy::default();
        if let Some(n) = s.parsed("max_retries")? {
            retry.max_retries = n;
        }

        let out_dir = s.path("out_dir").unwrap_or_else(|| PathBuf::from("."));
        let cache_dir = match s.get("cache_dir") {
            None => Some(out_dir.join("cache")),
            Some("") | Some("none") => None,
            Some(dir) => Some(PathBuf::from(dir)),
        };

        Ok(RunConfig {
            corpus: s.path("corpus"),
            raw_dir: s.path("raw_dir"),
            mapping: s.path("mapping"),
            seed: s.parsed("seed")?.unwrap_or(0),
            split,
            backend,
            verifier,
            threshold,
            decoding,
            concurrency,
            retry,
            timeout: Duration::from_secs(s.parsed("timeout_secs")?.unwrap_or(60)),
            cache_dir,
            out_dir,
        })
    }

    pub fn corpus(&self) -> Result<&Path, ConfigError> {
        self.corpus.as_deref().ok_or(ConfigError::Missing("corpus"))
    }

    pub fn backend(&self) -> Result<&BackendSpec, ConfigError> {
        self.backend
            .as_ref()
            .ok_or(ConfigError::Missing("endpoint` or `mock_script"))
    }
}
