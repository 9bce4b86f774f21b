use std::collections::HashMap;
use std::path::{Path, PathBuf};

use crate::ccdc::Series;
use crate::error::{Error, Result};

use super::canonical::{sha256_hex, Manifest, SourceEntry};
use super::delimited::dense_labels;
use super::Dataset;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TableMode {
    /// Exactly one table.
    Single,
    /// Several tables describing the same samples, joined by sample id and
    /// concatenated in the order given.
    Concat,
}

struct Row {
    id: String,
    label: String,
    values: Vec<f64>,
}

/// Parses a comma-separated feature table. With an `id,label,...` header
/// the ids come from the first column; otherwise each row is
/// `label,values...` and the id is `label#k` for the k-th row of that label.
fn parse_table(text: &str) -> Result<Vec<Row>> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#')).peekable();
    let has_ids = lines
        .peek()
        .is_some_and(|(_, l)| l.split(',').next().is_some_and(|f| f.trim().eq_ignore_ascii_case("id")));
    if has_ids {
        lines.next();
    }
    let skip = if has_ids { 2 } else { 1 };
    let mut ordinals: HashMap<String, usize> = HashMap::new();
    let mut rows = Vec::new();
    let mut width = None;
    for (i, line) in lines {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() <= skip || width.is_some_and(|w| w != fields.len()) {
            return Err(Error::Parse {
                line: i + 1,
                column: None,
                msg: format!("ragged row with {} fields", fields.len()),
            });
        }
        width = Some(fields.len());
        let values = fields[skip..]
            .iter()
            .enumerate()
            .map(|(c, f)| {
                f.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| Error::Parse {
                    line: i + 1,
                    column: Some(c + skip + 1),
                    msg: format!("not a finite number: {f:?}"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let label = fields[skip - 1].to_string();
        let id = if has_ids {
            fields[0].to_string()
        } else {
            let k = ordinals.entry(label.clone()).or_default();
            *k += 1;
            format!("{label}#{}", *k - 1)
        };
        rows.push(Row { id, label, values });
    }
    Ok(rows)
}

fn read_table(path: &Path) -> Result<(Vec<Row>, SourceEntry)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let text = std::str::from_utf8(&bytes).map_err(|_| Error::Input(format!("{}: not UTF-8 text", path.display())))?;
    let rows = parse_table(text).map_err(|e| match e {
        Error::Parse { line, column, msg } => Error::Parse {
            line,
            column,
            msg: format!("{}: {msg}", path.display()),
        },
        e => e,
    })?;
    let entry = SourceEntry {
        path: path.display().to_string(),
        sha256: sha256_hex(&bytes),
        rows: rows.len(),
    };
    Ok((rows, entry))
}

/// Loads precomputed per-sample feature vectors.
///
/// In concat mode a sample missing from any table is excluded with a
/// warning and listed in `manifest.excluded`; a sample whose label differs
/// between tables is a join error.
pub fn load_feature_table(paths: &[PathBuf], mode: TableMode) -> Result<Dataset> {
    match (mode, paths.len()) {
        (TableMode::Single, 1) | (TableMode::Concat, 2..) => {}
        (TableMode::Single, n) => return Err(Error::Usage(format!("single mode takes one table, got {n}"))),
        (TableMode::Concat, n) => return Err(Error::Usage(format!("concat mode needs at least two tables, got {n}"))),
    }
    let mut tables = Vec::with_capacity(paths.len());
    let mut sources = Vec::with_capacity(paths.len());
    for p in paths {
        let (rows, entry) = read_table(p)?;
        tables.push(rows);
        sources.push(entry);
    }
    let lookups: Vec<HashMap<&str, &Row>> = tables[1..]
        .iter()
        .map(|t| t.iter().map(|r| (r.id.as_str(), r)).collect())
        .collect();
    let mut excluded: Vec<String> = Vec::new();
    let mut tokens = Vec::new();
    let mut samples = Vec::new();
    for row in &tables[0] {
        let parts: Option<Vec<&Row>> = lookups.iter().map(|l| l.get(row.id.as_str()).copied()).collect();
        let Some(parts) = parts else {
            excluded.push(row.id.clone());
            continue;
        };
        let mut values = row.values.clone();
        for p in parts {
            if p.label != row.label {
                return Err(Error::Join(format!(
                    "sample {:?} labelled {:?} and {:?} in different tables",
                    row.id, row.label, p.label
                )));
            }
            values.extend_from_slice(&p.values);
        }
        tokens.push(row.label.clone());
        samples.push(Series { id: row.id.clone(), values });
    }
    for (t, rows) in tables.iter().enumerate().skip(1) {
        let first: HashMap<&str, ()> = tables[0].iter().map(|r| (r.id.as_str(), ())).collect();
        excluded.extend(
            rows.iter()
                .filter(|r| !first.contains_key(r.id.as_str()))
                .map(|r| r.id.clone())
                .inspect(|id| log::debug!("{id} absent from table 0 (seen in table {t})")),
        );
    }
    excluded.sort();
    excluded.dedup();
    if !excluded.is_empty() {
        log::warn!(
            "excluded {} sample(s) not present in every table: {}",
            excluded.len(),
            excluded.join(", ")
        );
    }
    if samples.is_empty() {
        return Err(Error::Join(format!("no sample id is shared by all tables; missing: {}", excluded.join(", "))));
    }
    let (labels, names) = dense_labels(&tokens);
    let mut ds = Dataset::new(samples, labels, names)?;
    ds.manifest = Manifest {
        sources,
        labels: ds.label_mapping(),
        excluded,
    };
    Ok(ds)
}
