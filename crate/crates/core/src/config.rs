//! Config files and dotted-path overrides.
//!
//! A config file is JSON:
//!
//! ```json
//! {
//!   "preset": "T1",
//!   "calibration": { ... },
//!   "overrides": { "tag.period_ms": 200, "n_runs": 100 }
//! }
//! ```
//!
//! Either `preset` or a full inline `config` (an [`ExperimentConfig`]) is
//! required. Overrides address the serialized config by dotted path; pipeline
//! stages are addressed by name (`pipeline.stop_dispatch_network.distribution.shift`).
//! When the base is a preset and no `pipeline.*` key is overridden, the
//! pipeline is rebuilt from the calibration after overrides, so changing
//! `tag.period_ms` also moves the period-dependent stages.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::calibration::Calibration;
use crate::harness::{ExperimentConfig, HarnessError};
use crate::presets::{preset_with, UnknownPreset};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("config needs either `preset` or `config`")]
    MissingBase,
    #[error("config has both `preset` and `config`; pick one")]
    AmbiguousBase,
    #[error(transparent)]
    Preset(#[from] UnknownPreset),
    #[error("bad override `{0}`: expected key=value")]
    OverrideSyntax(String),
    #[error("unknown config field `{0}`")]
    UnknownField(String),
    #[error("field `{field}`: {message}")]
    Field { field: String, message: String },
    #[error(transparent)]
    Invalid(#[from] HarnessError),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default)]
    pub preset: Option<String>,
    #[serde(default)]
    pub config: Option<ExperimentConfig>,
    #[serde(default)]
    pub calibration: Option<Calibration>,
    #[serde(default)]
    pub overrides: BTreeMap<String, Value>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|e| ConfigError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })
    }
}

/// Splits `key=value`. The value is parsed as JSON, falling back to a plain
/// string (`agv.name=R1` works without quotes).
pub fn parse_override(text: &str) -> Result<(String, Value), ConfigError> {
    let (key, raw) = text
        .split_once('=')
        .ok_or_else(|| ConfigError::OverrideSyntax(text.to_string()))?;
    let key = key.trim();
    if key.is_empty() {
        return Err(ConfigError::OverrideSyntax(text.to_string()));
    }
    let value = serde_json::from_str(raw.trim()).unwrap_or_else(|_| Value::String(raw.to_string()));
    Ok((key.to_string(), value))
}

/// Sets `path` inside `root`. Every segment except the last must exist; the
/// last must exist too unless the parent is the free-form `labels` map.
pub fn set_path(root: &mut Value, path: &str, value: Value) -> Result<(), ConfigError> {
    let unknown = || ConfigError::UnknownField(path.to_string());
    let segs: Vec<&str> = path.split('.').collect();
    let (last, parents) = segs.split_last().ok_or_else(unknown)?;
    let mut node = root;
    for seg in parents {
        node = match node {
            Value::Object(map) => map.get_mut(*seg).ok_or_else(unknown)?,
            Value::Array(items) => match seg.parse::<usize>() {
                Ok(i) => items.get_mut(i).ok_or_else(unknown)?,
                Err(_) => items
                    .iter_mut()
                    .find(|it| it.get("name").and_then(Value::as_str) == Some(*seg))
                    .ok_or_else(unknown)?,
            },
            _ => return Err(unknown()),
        };
    }
    let free_form = parents.last() == Some(&"labels");
    match node {
        Value::Object(map) if free_form || map.contains_key(*last) => {
            map.insert(last.to_string(), value);
            Ok(())
        }
        Value::Array(items) => {
            let slot = match last.parse::<usize>() {
                Ok(i) => items.get_mut(i),
                Err(_) => None,
            };
            *slot.ok_or_else(unknown)? = value;
            Ok(())
        }
        _ => Err(unknown()),
    }
}

/// Everything that goes into a resolved config, in precedence order:
/// file overrides, then `set`, then `runs`/`seed`.
#[derive(Debug, Clone, Default)]
pub struct ConfigRequest {
    pub preset: Option<String>,
    pub file: Option<ConfigFile>,
    pub set: Vec<(String, Value)>,
    pub runs: Option<u64>,
    pub seed: Option<u64>,
}

pub fn resolve(req: &ConfigRequest) -> Result<ExperimentConfig, ConfigError> {
    let file = req.file.clone().unwrap_or_default();
    let preset_id = req.preset.clone().or(file.preset.clone());
    if req.preset.is_some() && file.config.is_some() {
        return Err(ConfigError::AmbiguousBase);
    }
    if file.preset.is_some() && file.config.is_some() {
        return Err(ConfigError::AmbiguousBase);
    }
    let calibration = file.calibration.clone().unwrap_or_default();
    let (base, from_preset) = match (preset_id, file.config) {
        (Some(id), None) => (preset_with(&id, &calibration)?, true),
        (None, Some(cfg)) => (cfg, false),
        (None, None) => return Err(ConfigError::MissingBase),
        (Some(_), Some(_)) => return Err(ConfigError::AmbiguousBase),
    };

    let mut overrides: Vec<(String, Value)> = file.overrides.into_iter().collect();
    overrides.extend(req.set.iter().cloned());
    if let Some(n) = req.runs {
        overrides.push(("n_runs".into(), n.into()));
    }
    if let Some(s) = req.seed {
        overrides.push(("seed".into(), s.into()));
    }

    let mut value = serde_json::to_value(&base).map_err(|e| ConfigError::Field {
        field: "<root>".into(),
        message: e.to_string(),
    })?;
    let mut touched_pipeline = false;
    for (key, v) in &overrides {
        touched_pipeline |= key == "pipeline" || key.starts_with("pipeline.");
        set_path(&mut value, key, v.clone())?;
    }
    let mut cfg: ExperimentConfig = serde_json::from_value(value).map_err(|e| ConfigError::Field {
        field: overrides.iter().map(|(k, _)| k.as_str()).collect::<Vec<_>>().join(", "),
        message: e.to_string(),
    })?;
    if from_preset && !touched_pipeline {
        cfg.pipeline = calibration.pipeline_for(
            &cfg.agv.name,
            cfg.tag.period_ms,
            cfg.server_contention,
            cfg.tag.random_offset,
        );
    }
    cfg.validate()?;
    Ok(cfg)
}
