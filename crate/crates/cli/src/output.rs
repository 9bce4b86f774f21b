//! Output files. Every CSV opens with `#` lines naming the build and the
//! resolved configuration; every JSON file carries both as fields. Nothing
//! time-dependent is written, so reruns with the same inputs are
//! byte-identical.

use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{Map, Value};

use crate::config::RunConfig;
use crate::error::{io_error, CliError, CliResult, EXIT_FAILURE};

pub const VERSION: &str = env!("LEAFNET_VERSION");

pub struct Output {
    dir: PathBuf,
    config: Value,
}

impl Output {
    /// Creates the output directory.
    pub fn create(cfg: &RunConfig) -> CliResult<Self> {
        let dir = cfg.out_dir();
        std::fs::create_dir_all(&dir).map_err(|e| io_error(&dir, e))?;
        Ok(Output { dir, config: config_value(cfg) })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// The comment lines without their `# ` prefix.
    pub fn comments(&self) -> Vec<String> {
        provenance_comments(&self.config)
    }

    pub fn write_csv(&self, name: &str, body: &str) -> CliResult<PathBuf> {
        let path = self.path(name);
        write_csv(&path, &self.config, body)?;
        Ok(path)
    }

    pub fn write_json(&self, name: &str, payload: &impl Serialize) -> CliResult<PathBuf> {
        let path = self.path(name);
        write_json(&path, &self.config, payload)?;
        Ok(path)
    }
}

pub fn config_value(cfg: &RunConfig) -> Value {
    serde_json::to_value(cfg).expect("config serializes")
}

pub fn provenance_comments(config: &Value) -> Vec<String> {
    vec![format!("leafnet {VERSION}"), format!("config {config}")]
}

pub fn write_csv(path: &Path, config: &Value, body: &str) -> CliResult<()> {
    let mut text = String::new();
    for c in provenance_comments(config) {
        text.push_str("# ");
        text.push_str(&c);
        text.push('\n');
    }
    text.push_str(body);
    std::fs::write(path, text).map_err(|e| io_error(path, e))
}

/// Writes `payload` (which must serialize to an object) with
/// `leafnet_version` and `config` fields added.
pub fn write_json(path: &Path, config: &Value, payload: &impl Serialize) -> CliResult<()> {
    let mut map = Map::new();
    map.insert("leafnet_version".into(), Value::String(VERSION.into()));
    map.insert("config".into(), config.clone());
    match serde_json::to_value(payload) {
        Ok(Value::Object(fields)) => map.extend(fields),
        Ok(other) => {
            map.insert("result".into(), other);
        }
        Err(e) => return Err(CliError::new(EXIT_FAILURE, "output", e.to_string())),
    }
    let mut text = serde_json::to_string_pretty(&Value::Object(map)).expect("value serializes");
    text.push('\n');
    std::fs::write(path, text).map_err(|e| io_error(path, e))
}
