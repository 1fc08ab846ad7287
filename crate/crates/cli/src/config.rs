//! Experiment configs: `{"command", "model", "parameters", "output_dir", "seed"}`.
//! Every field is optional; parameters are overlaid on per-command defaults
//! and the fully resolved map is what gets hashed.

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::error::{io_err, CliError, CliResult};

#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub command: Option<String>,
    pub model: Option<Value>,
    #[serde(default)]
    pub parameters: Map<String, Value>,
    pub output_dir: Option<PathBuf>,
    pub seed: Option<u64>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        serde_json::from_str(&text).map_err(|source| CliError::Parse { what: path.display().to_string(), source })
    }
}

/// Defaults overlaid with the user's keys, then validated by deserializing.
pub fn resolve<P: Serialize + DeserializeOwned>(defaults: P, overrides: &Map<String, Value>) -> CliResult<(P, Value)> {
    let mut base = match serde_json::to_value(defaults) {
        Ok(Value::Object(m)) => m,
        _ => return Err(CliError::Config("parameters must form an object".into())),
    };
    for (k, v) in overrides {
        if !base.contains_key(k) {
            return Err(CliError::Config(format!("unknown parameter `{k}`")));
        }
        base.insert(k.clone(), v.clone());
    }
    let value = Value::Object(base);
    let params = serde_json::from_value(value.clone())
        .map_err(|source| CliError::Parse { what: "parameters".into(), source })?;
    Ok((params, value))
}

pub fn model_from<T: DeserializeOwned>(model: &Option<Value>, default: impl FnOnce() -> CliResult<T>) -> CliResult<T> {
    match model {
        Some(v) => serde_json::from_value(v.clone()).map_err(|source| CliError::Parse { what: "model".into(), source }),
        None => default(),
    }
}

/// SHA-256 of the canonical (key-sorted, compact) JSON encoding.
pub fn config_hash(resolved: &Value) -> String {
    let text = serde_json::to_string(resolved).expect("values serialize");
    let digest = Sha256::digest(text.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}
