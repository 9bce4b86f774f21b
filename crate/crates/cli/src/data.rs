//! Dataset and model loading shared by the subcommands.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use leafnet::dataio::{load_delimited, load_feature_table, read_canonical};
use leafnet::model::{self, ModelState};
use leafnet::{Dataset, Scalar};

use crate::config::{DataConfig, RunConfig};
use crate::error::{io_error, CliError, CliResult, Context, EXIT_DATA};
use crate::output::{write_json, VERSION};

/// Canonical files start (after comments) with an `id,label` header; any
/// other file is read as a delimited `label values...` table.
fn is_canonical(path: &Path) -> CliResult<bool> {
    let text = std::fs::read_to_string(path).map_err(|e| data_error(path, e))?;
    Ok(text
        .lines()
        .find(|l| !l.trim().is_empty() && !l.starts_with('#'))
        .is_some_and(|l| l.trim_start().starts_with("id,label")))
}

fn data_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::new(EXIT_DATA, "dataio", format!("{}: {e}", path.display()))
}

fn load_file(path: &Path, cfg: &DataConfig) -> CliResult<Dataset> {
    if is_canonical(path)? {
        read_canonical(path).ctx("dataio")
    } else {
        load_delimited(path, cfg.delimiter.into()).ctx("dataio")
    }
}

fn prepare(mut ds: Dataset, cfg: &DataConfig) -> Dataset {
    if cfg.min_class_size > 0 {
        let dropped = ds.drop_classes_below(cfg.min_class_size);
        if !dropped.is_empty() {
            log::warn!(
                "dropped {} classes with fewer than {} samples: {}",
                dropped.len(),
                cfg.min_class_size,
                dropped.join(", ")
            );
        }
        ds.manifest.labels = ds.label_mapping();
    }
    if cfg.z_normalize {
        ds.z_normalize_samples();
    }
    ds
}

/// The primary dataset: feature tables when given, otherwise `data.path`.
pub fn load_primary(cfg: &DataConfig) -> CliResult<Dataset> {
    let ds = if !cfg.tables.is_empty() {
        load_feature_table(&cfg.tables, cfg.table_mode.into()).ctx("dataio")?
    } else {
        let path = cfg
            .path
            .as_deref()
            .ok_or_else(|| CliError::config("no input data (--data, --table or data.path=...)"))?;
        load_file(path, cfg)?
    };
    if ds.is_empty() {
        return Err(CliError::new(EXIT_DATA, "dataio", "the dataset is empty"));
    }
    Ok(prepare(ds, cfg))
}

fn same_token(a: &str, b: &str) -> bool {
    match (a.parse::<f64>(), b.parse::<f64>()) {
        (Ok(x), Ok(y)) => x == y,
        _ => a == b,
    }
}

/// Labels `ds` with `classes`. Samples of classes outside `classes` are
/// removed when `drop_unknown` is set (classes dropped from the training
/// set by size), and are an error otherwise.
pub fn align(ds: &mut Dataset, classes: &[String], drop_unknown: bool) -> CliResult<()> {
    if drop_unknown {
        let known: Vec<bool> = ds
            .class_names
            .iter()
            .map(|n| classes.iter().any(|c| same_token(c, n)))
            .collect();
        let keep: Vec<usize> = (0..ds.len()).filter(|&i| known[ds.labels[i]]).collect();
        if keep.len() < ds.len() {
            log::warn!("ignoring {} samples of classes not in the training set", ds.len() - keep.len());
            *ds = ds.subset(&keep);
        }
    }
    ds.align_labels(classes).ctx("dataio")
}

/// The held-out test set for `train`, labelled like the training set.
pub fn load_test(cfg: &DataConfig, classes: &[String]) -> CliResult<Option<Dataset>> {
    let Some(path) = cfg.test_path.as_deref() else { return Ok(None) };
    let mut ds = load_file(path, cfg)?;
    if cfg.z_normalize {
        ds.z_normalize_samples();
    }
    align(&mut ds, classes, cfg.min_class_size > 0)?;
    if ds.is_empty() {
        return Err(CliError::new(EXIT_DATA, "dataio", format!("{}: no test samples", path.display())));
    }
    Ok(Some(ds))
}

/// Written next to every weight file: what the class ids mean and how the
/// model was trained.
#[derive(Debug, Serialize, Deserialize)]
pub struct ModelSidecar {
    pub class_names: Vec<String>,
    pub seed: u64,
}

pub fn sidecar_path(model: &Path) -> PathBuf {
    model.with_extension("json")
}

pub fn save_model<T: Scalar>(
    model: &ModelState<T>,
    path: &Path,
    class_names: &[String],
    seed: u64,
    run: &RunConfig,
) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    }
    model::save(model, path).ctx("model")?;
    let sidecar = ModelSidecar { class_names: class_names.to_vec(), seed };
    write_json(&sidecar_path(path), &crate::output::config_value(run), &sidecar)
}

pub struct LoadedModel<T> {
    pub model: ModelState<T>,
    /// From the sidecar, when there is one.
    pub class_names: Option<Vec<String>>,
}

pub fn load_model<T: Scalar>(path: &Path) -> CliResult<LoadedModel<T>> {
    let model = model::load::<T>(path).ctx("model")?;
    let side = sidecar_path(path);
    let class_names = if side.exists() {
        let text = std::fs::read_to_string(&side).map_err(|e| data_error(&side, e))?;
        let sidecar: ModelSidecar = serde_json::from_str::<serde_json::Value>(&text)
            .and_then(serde_json::from_value)
            .map_err(|e| CliError::new(EXIT_DATA, "model", format!("{}: {e}", side.display())))?;
        if sidecar.class_names.len() != model.config.num_classes {
            return Err(CliError::new(
                EXIT_DATA,
                "model",
                format!(
                    "{} lists {} classes but the model has {}",
                    side.display(),
                    sidecar.class_names.len(),
                    model.config.num_classes
                ),
            ));
        }
        Some(sidecar.class_names)
    } else {
        log::warn!("{} not found; class ids are taken from the data as-is", side.display());
        None
    };
    log::debug!("loaded {} (leafnet {VERSION})", path.display());
    Ok(LoadedModel { model, class_names })
}

/// Loads the primary dataset and checks it against `model`.
pub fn load_for_model<T: Scalar>(cfg: &DataConfig, loaded: &LoadedModel<T>) -> CliResult<Dataset> {
    let mut ds = load_primary(cfg)?;
    if let Some(names) = &loaded.class_names {
        align(&mut ds, names, false)?;
    }
    let expected = loaded.model.config.input_length;
    if ds.series_len() != expected {
        return Err(CliError::new(
            EXIT_DATA,
            "dataio",
            format!("series length {} does not match the model input length {expected}", ds.series_len()),
        ));
    }
    Ok(ds)
}
