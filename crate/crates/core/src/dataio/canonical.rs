//! Canonical dataset form: a CSV of `id,label,v0..v{L-1}` rows plus a JSON
//! manifest at `<csv>.manifest.json` holding class names, source files and
//! the SHA-256 of the CSV. Values use the shortest representation that
//! parses back to the same `f64`, so round trips are exact. Lines starting
//! with `#` are comments.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ccdc::Series;
use crate::error::{Error, Result};

use super::{Dataset, LabelMapping};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceEntry {
    pub path: String,
    pub sha256: String,
    pub rows: usize,
}

/// Provenance of a dataset.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub sources: Vec<SourceEntry>,
    pub labels: Vec<LabelMapping>,
    /// Sample ids dropped while joining tables.
    #[serde(default)]
    pub excluded: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct ManifestFile {
    csv_sha256: String,
    rows: usize,
    series_len: usize,
    #[serde(flatten)]
    manifest: Manifest,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

pub fn manifest_path(csv: &Path) -> PathBuf {
    let mut name = csv.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

/// Writes the CSV and its manifest. `comments` become leading `# ` lines.
pub fn write_canonical(ds: &Dataset, path: &Path, comments: &[String]) -> Result<()> {
    let mut out = String::new();
    for c in comments {
        for line in c.lines() {
            let _ = writeln!(out, "# {line}");
        }
    }
    out.push_str("id,label");
    for j in 0..ds.series_len() {
        let _ = write!(out, ",v{j}");
    }
    out.push('\n');
    for (s, l) in ds.samples.iter().zip(&ds.labels) {
        if s.id.contains([',', '\n', '\r']) || s.id.starts_with('#') {
            return Err(Error::Validation(format!("sample id {:?} cannot be written to CSV", s.id)));
        }
        let _ = write!(out, "{},{l}", s.id);
        for v in &s.values {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    std::fs::write(path, &out).map_err(|e| Error::io(path, e))?;
    let mut manifest = ds.manifest.clone();
    manifest.labels = ds.label_mapping();
    let file = ManifestFile {
        csv_sha256: sha256_hex(out.as_bytes()),
        rows: ds.len(),
        series_len: ds.series_len(),
        manifest,
    };
    let mpath = manifest_path(path);
    let json = serde_json::to_string_pretty(&file).expect("manifest serializes");
    std::fs::write(&mpath, json + "\n").map_err(|e| Error::io(&mpath, e))
}

/// Reads a canonical CSV. When the manifest is present its checksum is
/// verified and class names are restored from it.
pub fn read_canonical(path: &Path) -> Result<Dataset> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let text = std::str::from_utf8(&bytes).map_err(|_| Error::Input(format!("{}: not UTF-8 text", path.display())))?;
    let mpath = manifest_path(path);
    let manifest: Option<ManifestFile> = match std::fs::read(&mpath) {
        Ok(m) => Some(
            serde_json::from_slice(&m).map_err(|e| Error::Input(format!("{}: {e}", mpath.display())))?,
        ),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => None,
        Err(e) => return Err(Error::io(&mpath, e)),
    };
    if let Some(m) = &manifest {
        if m.csv_sha256 != sha256_hex(&bytes) {
            return Err(Error::Validation(format!("{} does not match its manifest checksum", path.display())));
        }
    }
    let mut samples = Vec::new();
    let mut labels = Vec::new();
    let mut header_seen = false;
    for (i, line) in text.lines().enumerate() {
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        if !header_seen {
            header_seen = true;
            if !line.starts_with("id,label") {
                return Err(Error::Parse {
                    line: i + 1,
                    column: None,
                    msg: "expected header starting with id,label".into(),
                });
            }
            continue;
        }
        let mut fields = line.split(',');
        let id = fields.next().unwrap_or_default().to_string();
        let label = fields.next().and_then(|f| f.parse::<usize>().ok()).ok_or_else(|| Error::Parse {
            line: i + 1,
            column: Some(2),
            msg: "label must be a class index".into(),
        })?;
        let values = fields
            .enumerate()
            .map(|(c, f)| {
                f.parse::<f64>().map_err(|_| Error::Parse {
                    line: i + 1,
                    column: Some(c + 3),
                    msg: format!("not a number: {f:?}"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        samples.push(Series { id, values });
        labels.push(label);
    }
    let class_names = match &manifest {
        Some(m) => m.manifest.labels.iter().map(|l| l.token.clone()).collect(),
        None => (0..labels.iter().max().map_or(0, |m| m + 1)).map(|c| c.to_string()).collect(),
    };
    let mut ds = Dataset::new(samples, labels, class_names)?;
    if let Some(m) = manifest {
        ds.manifest = m.manifest;
    }
    Ok(ds)
}
