//! JSON artifacts with an embedded provenance record.

use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::{Map, Value};
use specline::signal::GENERATOR_ID;

/// Field excluded when comparing artifacts across runs.
pub const TIMESTAMP_FIELD: &str = "generated_at";

#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub generator: &'static str,
    pub master_seed: Option<u64>,
    pub config: Value,
    pub generated_at: u64,
}

impl Provenance {
    pub fn new(command: &'static str, master_seed: Option<u64>, config: impl Serialize) -> Result<Self> {
        Ok(Self {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command,
            generator: GENERATOR_ID,
            master_seed,
            config: serde_json::to_value(config)?,
            generated_at: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
        })
    }
}

/// `payload` (a JSON object) with a `provenance` member appended.
pub fn with_provenance(payload: impl Serialize, provenance: &Provenance) -> Result<Value> {
    let mut obj = match serde_json::to_value(payload)? {
        Value::Object(m) => m,
        other => {
            let mut m = Map::new();
            m.insert("value".into(), other);
            m
        }
    };
    obj.insert("provenance".into(), serde_json::to_value(provenance)?);
    Ok(Value::Object(obj))
}

pub fn write_json(path: &Path, value: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

/// Copy of `value` with every timestamp field removed, for run-to-run comparison.
pub fn strip_timestamps(value: &Value) -> Value {
    match value {
        Value::Object(m) => Value::Object(
            m.iter()
                .filter(|(k, _)| k.as_str() != TIMESTAMP_FIELD)
                .map(|(k, v)| (k.clone(), strip_timestamps(v)))
                .collect(),
        ),
        Value::Array(a) => Value::Array(a.iter().map(strip_timestamps).collect()),
        other => other.clone(),
    }
}
