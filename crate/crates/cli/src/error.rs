use serde_json::json;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("cannot parse {what}: {source}")]
    Parse { what: String, source: serde_json::Error },
    #[error("{0}")]
    Config(String),
    #[error("i/o error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error(transparent)]
    Verifier(#[from] lorentz_synth::Error),
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Parse { .. } => "parse_error",
            CliError::Config(_) => "invalid_config",
            CliError::Io { .. } => "io_error",
            CliError::Verifier(e) => match e {
                lorentz_synth::Error::InvalidInput(_) => "invalid_input",
                lorentz_synth::Error::DegenerateMetric(_) => "degenerate_metric",
                lorentz_synth::Error::NoGeodesic(_) => "no_geodesic",
                lorentz_synth::Error::HypothesisViolated(_) => "hypothesis_violated",
                lorentz_synth::Error::UnsupportedModel(_) => "unsupported_model",
            },
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        json!({"error": {"kind": self.kind(), "message": self.to_string()}})
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub fn io_err(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io { path: path.display().to_string(), source }
}
