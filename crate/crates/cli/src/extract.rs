//! `extract`: silhouettes or contour files to a canonical contour-distance
//! dataset.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use walkdir::WalkDir;

use leafnet::ccdc::{self, Mask, Series};
use leafnet::dataio::{sha256_hex, write_canonical, SourceEntry};
use leafnet::Dataset;

use crate::config::RunConfig;
use crate::error::{io_error, CliError, CliResult, Context, EXIT_DATA, EXIT_FAILURE};
use crate::output::{config_value, provenance_comments};

const MASK_EXTENSIONS: [&str; 3] = ["pgm", "pbm", "pnm"];
const CONTOUR_EXTENSIONS: [&str; 2] = ["csv", "txt"];

#[derive(Clone, Copy)]
enum Source {
    Masks,
    Contours,
}

/// Files under `root` with one of `extensions`, in sorted path order.
fn collect(root: &Path, extensions: &[&str]) -> CliResult<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in WalkDir::new(root).sort_by_file_name() {
        let entry = entry.map_err(|e| CliError::new(EXIT_DATA, "extract", e.to_string()))?;
        let matches = entry
            .path()
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| extensions.iter().any(|x| x.eq_ignore_ascii_case(e)));
        if entry.file_type().is_file() && matches {
            files.push(entry.into_path());
        }
    }
    Ok(files)
}

/// Sample id and class token. Files inside a subdirectory take its name as
/// their class; files directly under the root need a `class_rest` stem.
fn identify(root: &Path, file: &Path) -> Result<(String, String), String> {
    let rel = file.strip_prefix(root).unwrap_or(file);
    let id = rel.with_extension("").to_string_lossy().replace('\\', "/");
    let mut parts = rel.components();
    let first = parts.next().map(|c| c.as_os_str().to_string_lossy().into_owned());
    if parts.next().is_some() {
        return Ok((id, first.unwrap_or_default()));
    }
    let stem = rel.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    match stem.split_once('_') {
        Some((label, _)) if !label.is_empty() => Ok((id, label.to_string())),
        _ => Err("cannot infer the class: put the file in a class directory or name it <class>_<name>".into()),
    }
}

struct Extracted {
    series: Series,
    label: String,
    source: SourceEntry,
}

fn extract_one(root: &Path, file: &Path, source: Source, n: usize) -> Result<Extracted, String> {
    let (id, label) = identify(root, file)?;
    let bytes = std::fs::read(file).map_err(|e| e.to_string())?;
    let series = match source {
        Source::Masks => {
            let mask = Mask::read(file).map_err(|e| e.to_string())?;
            ccdc::extract_from_mask(&mask, n, id.clone())
        }
        Source::Contours => {
            let points = ccdc::read_contour_csv(file).map_err(|e| e.to_string())?;
            ccdc::extract_from_contour(&points, n, id.clone())
        }
    }
    .map_err(|e| e.to_string())?;
    let source = SourceEntry { path: id, sha256: sha256_hex(&bytes), rows: 1 };
    Ok(Extracted { series, label, source })
}

pub fn run(cfg: &RunConfig) -> CliResult<()> {
    let (root, source, extensions) = match (&cfg.extract.masks, &cfg.extract.contours) {
        (Some(m), None) => (m, Source::Masks, &MASK_EXTENSIONS[..]),
        (None, Some(c)) => (c, Source::Contours, &CONTOUR_EXTENSIONS[..]),
        _ => return Err(CliError::config("give exactly one of --masks or --contours")),
    };
    if !root.is_dir() {
        return Err(CliError::config(format!("{} is not a directory", root.display())));
    }
    let files = collect(root, extensions)?;
    if files.is_empty() {
        return Err(CliError::config(format!("no inputs under {}", root.display())));
    }
    let n = cfg.extract.length;
    let results: Vec<Result<Extracted, String>> =
        files.par_iter().map(|f| extract_one(root, f, source, n)).collect();

    let mut samples = Vec::new();
    let mut tokens = Vec::new();
    let mut sources = Vec::new();
    let mut failed = Vec::new();
    for (file, result) in files.iter().zip(results) {
        match result {
            Ok(x) => {
                samples.push(x.series);
                tokens.push(x.label);
                sources.push(x.source);
            }
            Err(msg) => failed.push(format!("{}: {msg}", file.display())),
        }
    }
    for f in &failed {
        eprintln!("leafnet: extract: {f}");
    }
    if samples.is_empty() {
        return Err(CliError::new(EXIT_DATA, "extract", format!("all {} inputs failed", files.len())));
    }

    let mut ds = Dataset::from_tokens(samples, &tokens).ctx("extract")?;
    ds.manifest.sources = sources;
    let out = cfg.out.clone().unwrap_or_else(|| PathBuf::from(crate::config::DEFAULT_OUT_DIR).join("ccdc.csv"));
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    }
    write_canonical(&ds, &out, &provenance_comments(&config_value(cfg))).ctx("output")?;
    log::info!("wrote {} series in {} classes to {}", ds.len(), ds.num_classes(), out.display());
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::new(
            EXIT_FAILURE,
            "extract",
            format!("{} of {} inputs failed; the rest were written to {}", failed.len(), files.len(), out.display()),
        ))
    }
}
