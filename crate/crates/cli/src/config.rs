//! Run configuration: defaults, then a config file, then `--set` pairs, then
//! command-line flags. Keys are dotted paths into [`RunConfig`]
//! (`train.lr0`, `arch.pool.window`); unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use leafnet::dataio::{Delimiter, TableMode};
use leafnet::interpret::{ActMaxConfig, TsneConfig};
use leafnet::model::{ArchConfig, BranchSpec, PoolSpec};
use leafnet::shallow::SvmConfig;
use leafnet::training::{CrossvalConfig, Pipeline, TrainConfig};

use crate::error::{CliError, CliResult, Context};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    F32,
    F64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum DelimiterChoice {
    Auto,
    Comma,
    Tab,
    Whitespace,
}

impl From<DelimiterChoice> for Delimiter {
    fn from(d: DelimiterChoice) -> Self {
        match d {
            DelimiterChoice::Auto => Delimiter::Auto,
            DelimiterChoice::Comma => Delimiter::Comma,
            DelimiterChoice::Tab => Delimiter::Tab,
            DelimiterChoice::Whitespace => Delimiter::Whitespace,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TableChoice {
    Single,
    Concat,
}

impl From<TableChoice> for TableMode {
    fn from(t: TableChoice) -> Self {
        match t {
            TableChoice::Single => TableMode::Single,
            TableChoice::Concat => TableMode::Concat,
        }
    }
}

/// Where samples come from. `path` is a canonical dataset CSV or a
/// UCR-style delimited file; `tables` are feature tables and take
/// precedence when given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub path: Option<PathBuf>,
    /// Held-out test file for `train`; its labels follow the training classes.
    pub test_path: Option<PathBuf>,
    pub tables: Vec<PathBuf>,
    pub table_mode: TableChoice,
    pub delimiter: DelimiterChoice,
    /// Z-normalize every sample independently after loading.
    pub z_normalize: bool,
    /// Drop classes with fewer samples than this (0 keeps everything).
    pub min_class_size: usize,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            path: None,
            test_path: None,
            tables: Vec::new(),
            table_mode: TableChoice::Single,
            delimiter: DelimiterChoice::Auto,
            z_normalize: false,
            min_class_size: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtractConfig {
    /// Directory of PGM/PBM silhouettes.
    pub masks: Option<PathBuf>,
    /// Directory of `x,y` contour CSVs.
    pub contours: Option<PathBuf>,
    /// Samples per contour series.
    pub length: usize,
}

impl Default for ExtractConfig {
    fn default() -> Self {
        ExtractConfig { masks: None, contours: None, length: 128 }
    }
}

/// Network shape minus the two sizes that come from the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchTemplate {
    pub branches: Vec<BranchSpec>,
    pub pool: PoolSpec,
    pub fc_units: Vec<usize>,
    pub noise_std: f64,
    pub dropout_rate: f64,
    pub bn_epsilon: f64,
    pub bn_momentum: f64,
    pub prelu_per_channel: bool,
}

impl Default for ArchTemplate {
    fn default() -> Self {
        let s = ArchConfig::standard(0, 0);
        ArchTemplate {
            branches: s.branches,
            pool: s.pool,
            fc_units: s.fc_units,
            noise_std: s.noise_std,
            dropout_rate: s.dropout_rate,
            bn_epsilon: s.bn_epsilon,
            bn_momentum: s.bn_momentum,
            prelu_per_channel: s.prelu_per_channel,
        }
    }
}

impl ArchTemplate {
    pub fn build(&self, input_length: usize, num_classes: usize) -> CliResult<ArchConfig> {
        let arch = ArchConfig {
            input_length,
            branches: self.branches.clone(),
            pool: self.pool,
            fc_units: self.fc_units.clone(),
            num_classes,
            noise_std: self.noise_std,
            dropout_rate: self.dropout_rate,
            bn_epsilon: self.bn_epsilon,
            bn_momentum: self.bn_momentum,
            prelu_per_channel: self.prelu_per_channel,
        };
        arch.layout().ctx("model")?;
        Ok(arch)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrossvalSection {
    pub k: usize,
    /// Seed of the fold assignment.
    pub seed: u64,
    /// Any of `net`, `net+knn`, `net+pca+svm`.
    pub pipelines: Vec<String>,
    pub knn_k: usize,
    pub pca_components: usize,
    pub svm: SvmConfig,
    pub standardize: bool,
    pub parallel: bool,
}

impl Default for CrossvalSection {
    fn default() -> Self {
        let d = CrossvalConfig::default();
        CrossvalSection {
            k: d.k,
            seed: d.seed,
            pipelines: vec!["net".into()],
            knn_k: 3,
            pca_components: 25,
            svm: SvmConfig::default(),
            standardize: d.standardize,
            parallel: d.parallel,
        }
    }
}

impl CrossvalSection {
    pub fn to_core(&self) -> CliResult<CrossvalConfig> {
        let pipelines = self
            .pipelines
            .iter()
            .map(|name| {
                Ok(match Pipeline::parse(name).ctx("config")? {
                    Pipeline::NetKnn { .. } => Pipeline::NetKnn { k: self.knn_k },
                    Pipeline::NetPcaSvm { .. } => Pipeline::NetPcaSvm {
                        components: self.pca_components,
                        svm: self.svm,
                    },
                    p => p,
                })
            })
            .collect::<CliResult<Vec<_>>>()?;
        if pipelines.is_empty() {
            return Err(CliError::config("crossval.pipelines is empty"));
        }
        Ok(CrossvalConfig {
            k: self.k,
            seed: self.seed,
            pipelines,
            standardize: self.standardize,
            parallel: self.parallel,
        })
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterpretConfig {
    /// Target class id; defaults to each sample's label (Grad-CAM) or to
    /// every class (activation maximization).
    pub class: Option<usize>,
    /// Sample ids to explain; empty means all.
    pub samples: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub precision: Precision,
    /// Independent training runs with seeds `train.seed + r`.
    pub repeats: usize,
    /// Weight file: written by `train`, read by the other commands.
    pub model: Option<PathBuf>,
    /// Output directory (output CSV file for `extract`).
    pub out: Option<PathBuf>,
    pub data: DataConfig,
    pub extract: ExtractConfig,
    pub arch: ArchTemplate,
    pub train: TrainConfig,
    pub crossval: CrossvalSection,
    pub interpret: InterpretConfig,
    pub actmax: ActMaxConfig,
    pub tsne: TsneConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            precision: Precision::F64,
            repeats: 1,
            model: None,
            out: None,
            data: DataConfig::default(),
            extract: ExtractConfig::default(),
            arch: ArchTemplate::default(),
            train: TrainConfig::default(),
            crossval: CrossvalSection::default(),
            interpret: InterpretConfig::default(),
            actmax: ActMaxConfig::default(),
            tsne: TsneConfig::default(),
        }
    }
}

pub const DEFAULT_OUT_DIR: &str = "leafnet-out";

impl RunConfig {
    /// Builds the configuration from an optional file and ordered overrides.
    pub fn resolve(file: Option<&Path>, overrides: &[(String, Value)]) -> CliResult<Self> {
        let mut tree = serde_json::to_value(RunConfig::default()).expect("defaults serialize");
        if let Some(path) = file {
            for (key, value) in read_config_file(path)? {
                set_key(&mut tree, &key, value)?;
            }
        }
        for (key, value) in overrides {
            set_key(&mut tree, key, value.clone())?;
        }
        let cfg: RunConfig = serde_json::from_value(tree).map_err(|e| CliError::config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> CliResult<()> {
        self.train.validate().ctx("config")?;
        if self.repeats == 0 {
            return Err(CliError::config("repeats must be at least 1"));
        }
        if self.crossval.k < 2 {
            return Err(CliError::config(format!("crossval.k must be at least 2, got {}", self.crossval.k)));
        }
        self.crossval.to_core()?;
        if self.extract.length < 8 {
            return Err(CliError::config(format!(
                "extract.length must be at least 8, got {}",
                self.extract.length
            )));
        }
        Ok(())
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
    }

    pub fn require_model(&self) -> CliResult<&Path> {
        self.model
            .as_deref()
            .ok_or_else(|| CliError::config("a weight file is required (--model or model=...)"))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

/// Parses a `--set`/key=value right-hand side: JSON when it parses as JSON,
/// otherwise a plain string.
pub fn parse_value(raw: &str) -> Value {
    serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()))
}

pub fn parse_assignment(text: &str) -> CliResult<(String, Value)> {
    let (key, value) = text
        .split_once('=')
        .ok_or_else(|| CliError::config(format!("expected KEY=VALUE, got {text:?}")))?;
    Ok((key.trim().to_string(), parse_value(value.trim())))
}

/// JSON files (by extension or a leading `{`) or `key = value` lines with
/// `#` comments.
fn read_config_file(path: &Path) -> CliResult<Vec<(String, Value)>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    let is_json = path.extension().is_some_and(|e| e == "json") || text.trim_start().starts_with('{');
    if is_json {
        let value: Value = serde_json::from_str(&text)
            .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        let mut pairs = Vec::new();
        flatten("", value, &mut pairs);
        return Ok(pairs);
    }
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
        .map(|(i, l)| {
            parse_assignment(l).map_err(|e| CliError::config(format!("{}:{}: {}", path.display(), i + 1, e.message)))
        })
        .collect()
}

/// Splits nested objects into dotted keys so a file may set single fields
/// of a section without restating the rest.
fn flatten(prefix: &str, value: Value, out: &mut Vec<(String, Value)>) {
    match value {
        Value::Object(map) if !map.is_empty() => {
            for (k, v) in map {
                let key = if prefix.is_empty() { k } else { format!("{prefix}.{k}") };
                flatten(&key, v, out);
            }
        }
        v => out.push((prefix.to_string(), v)),
    }
}

fn set_key(tree: &mut Value, key: &str, value: Value) -> CliResult<()> {
    let unknown = || CliError::config(format!("unknown configuration key {key:?}"));
    let mut node = tree;
    for part in key.split('.') {
        node = node.as_object_mut().and_then(|m| m.get_mut(part)).ok_or_else(unknown)?;
    }
    match (node.is_object(), value) {
        (true, Value::Object(map)) => {
            for (k, v) in map {
                set_key(node, &k, v)?;
            }
        }
        (_, value) => *node = value,
    }
    Ok(())
}
