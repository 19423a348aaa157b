use polifilter_core::corpus::CorpusError;
use polifilter_core::gateway::GatewayError;
use polifilter_core::jsonl::JsonlError;
use polifilter_core::metrics::MetricsError;
use polifilter_core::pipeline::PipelineError;

use crate::config::ConfigError;

/// Failure of a subcommand, split by exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad input, configuration or local files. Exit code 2.
    #[error("{0}")]
    Input(String),
    /// The generation or scoring service failed. Exit code 3.
    #[error("{0}")]
    Backend(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 2,
            CliError::Backend(_) => 3,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<JsonlError> for CliError {
    fn from(e: JsonlError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<GatewayError> for CliError {
    fn from(e: GatewayError) -> Self {
        match e {
            GatewayError::Script(_) | GatewayError::InvalidRequest(_) | GatewayError::Cache(_) => {
                CliError::Input(e.to_string())
            }
            _ => CliError::Backend(e.to_string()),
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Gateway(g) => g.into(),
            PipelineError::Jsonl(j) => j.into(),
            PipelineError::Io { .. } | PipelineError::InvalidThreshold(_) => CliError::Input(e.to_string()),
            _ => CliError::Backend(e.to_string()),
        }
    }
}

pub fn io_error(path: &std::path::Path, e: std::io::Error) -> CliError {
    CliError::Input(format!("{}: {e}", path.display()))
}
