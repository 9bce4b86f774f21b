use std::path::Path;

use crate::ccdc::Series;
use crate::error::{Error, Result};

use super::canonical::{sha256_hex, Manifest, SourceEntry};
use super::Dataset;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Delimiter {
    /// Comma if the first line has one, else tab, else runs of whitespace.
    Auto,
    Comma,
    Tab,
    Whitespace,
}

impl Delimiter {
    fn resolve(self, first_line: &str) -> Delimiter {
        match self {
            Delimiter::Auto if first_line.contains(',') => Delimiter::Comma,
            Delimiter::Auto if first_line.contains('\t') => Delimiter::Tab,
            Delimiter::Auto => Delimiter::Whitespace,
            d => d,
        }
    }

    fn split(self, line: &str) -> Vec<&str> {
        match self {
            Delimiter::Comma => line.split(',').map(str::trim).collect(),
            Delimiter::Tab => line.split('\t').map(str::trim).collect(),
            _ => line.split_whitespace().collect(),
        }
    }
}

/// Orders label tokens numerically when they all parse as numbers
/// (so "1" and "1.0" are one class), lexicographically otherwise.
pub(crate) fn dense_labels(tokens: &[String]) -> (Vec<usize>, Vec<String>) {
    let numeric: Option<Vec<f64>> = tokens.iter().map(|t| t.parse::<f64>().ok()).collect();
    let keys: Vec<String> = match &numeric {
        Some(values) => values.iter().map(|v| format!("{v:e}")).collect(),
        None => tokens.to_vec(),
    };
    let mut classes: Vec<(usize, &String)> = tokens.iter().enumerate().map(|(i, _)| (i, &keys[i])).collect();
    match &numeric {
        Some(values) => classes.sort_by(|a, b| values[a.0].total_cmp(&values[b.0]).then(a.0.cmp(&b.0))),
        None => classes.sort_by(|a, b| a.1.cmp(b.1).then(a.0.cmp(&b.0))),
    }
    classes.dedup_by(|a, b| a.1 == b.1);
    let ids = keys
        .iter()
        .map(|k| classes.iter().position(|(_, c)| *c == k).expect("present"))
        .collect();
    (ids, classes.into_iter().map(|(i, _)| tokens[i].clone()).collect())
}

/// Parses UCR-style rows: a class label followed by the series values.
/// Blank lines are skipped; sample ids are `{source}#{row}`.
pub fn parse_delimited(text: &str, delimiter: Delimiter, source: &str) -> Result<Dataset> {
    let first = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
    let delim = delimiter.resolve(first);
    let mut tokens = Vec::new();
    let mut samples = Vec::new();
    let mut width = None;
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let line_no = i + 1;
        let fields = delim.split(line);
        if fields.len() < 2 {
            return Err(Error::Parse {
                line: line_no,
                column: None,
                msg: "row needs a label and at least one value".into(),
            });
        }
        match width {
            None => width = Some(fields.len()),
            Some(w) if w != fields.len() => {
                return Err(Error::Parse {
                    line: line_no,
                    column: None,
                    msg: format!("ragged row: {} fields, expected {w}", fields.len()),
                })
            }
            _ => {}
        }
        let values = fields[1..]
            .iter()
            .enumerate()
            .map(|(c, f)| {
                f.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| Error::Parse {
                    line: line_no,
                    column: Some(c + 2),
                    msg: format!("not a finite number: {f:?}"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        tokens.push(fields[0].to_string());
        samples.push(Series {
            id: format!("{source}#{}", samples.len()),
            values,
        });
    }
    if samples.is_empty() {
        return Err(Error::Input(format!("{source}: no data rows")));
    }
    let (labels, names) = dense_labels(&tokens);
    Dataset::new(samples, labels, names)
}

/// Loads a UCR-style delimited file and records it in the manifest.
pub fn load_delimited(path: &Path, delimiter: Delimiter) -> Result<Dataset> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let text = String::from_utf8(bytes.clone())
        .map_err(|_| Error::Input(format!("{}: not UTF-8 text", path.display())))?;
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("row");
    let mut ds = parse_delimited(&text, delimiter, stem)?;
    ds.manifest = Manifest {
        sources: vec![SourceEntry {
            path: path.display().to_string(),
            sha256: sha256_hex(&bytes),
            rows: ds.len(),
        }],
        labels: ds.label_mapping(),
        excluded: Vec::new(),
    };
    Ok(ds)
}

/// Loads an explicit train/test split, numbering classes from the union of
/// both files' labels so the two share one mapping.
pub fn load_delimited_split(train: &Path, test: &Path, delimiter: Delimiter) -> Result<(Dataset, Dataset)> {
    let (mut a, mut b) = (load_delimited(train, delimiter)?, load_delimited(test, delimiter)?);
    let tokens: Vec<String> = a.class_names.iter().chain(&b.class_names).cloned().collect();
    let (ids, names) = dense_labels(&tokens);
    let (ids_a, ids_b) = ids.split_at(a.class_names.len());
    for (ds, ids) in [(&mut a, ids_a), (&mut b, ids_b)] {
        ds.labels.iter_mut().for_each(|l| *l = ids[*l]);
        ds.class_names = names.clone();
        ds.manifest.labels = ds.label_mapping();
    }
    if a.series_len() != b.series_len() {
        return Err(Error::Validation(format!(
            "train series have length {}, test series {}",
            a.series_len(),
            b.series_len()
        )));
    }
    Ok((a, b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_row_format() {
        let d = parse_delimited("2,0.5,0.3\n", Delimiter::Auto, "t").unwrap();
        assert_eq!(d.class_names, vec!["2"]);
        assert_eq!(d.samples[0].values, vec![0.5, 0.3]);
    }

    #[test]
    fn labels_remap_in_numeric_order() {
        let d = parse_delimited("7,1\n1,2\n3,3\n1,4\n", Delimiter::Comma, "t").unwrap();
        assert_eq!(d.labels, vec![2, 0, 1, 0]);
        assert_eq!(d.class_names, vec!["1", "3", "7"]);
        let m = d.label_mapping();
        assert_eq!((m[2].token.as_str(), m[2].id), ("7", 2));
    }

    #[test]
    fn numeric_order_not_lexicographic() {
        let d = parse_delimited("10 1\n9 2\n", Delimiter::Auto, "t").unwrap();
        assert_eq!(d.class_names, vec!["9", "10"]);
        let d = parse_delimited("1.0000000e+00\t1\n2.0000000e+00\t2\n", Delimiter::Auto, "t").unwrap();
        assert_eq!(d.labels, vec![0, 1]);
    }

    #[test]
    fn ragged_row_names_line() {
        match parse_delimited("1,2,3\n1,2,3\n2,1\n", Delimiter::Auto, "t") {
            Err(Error::Parse { line: 3, column: None, .. }) => {}
            r => panic!("{r:?}"),
        }
    }

    #[test]
    fn bad_token_names_column() {
        match parse_delimited("1,2,3\n1,x,3\n", Delimiter::Auto, "t") {
            Err(Error::Parse { line: 2, column: Some(2), .. }) => {}
            r => panic!("{r:?}"),
        }
    }

    #[test]
    fn split_shares_label_mapping() {
        let dir = tempfile::tempdir().unwrap();
        let (tr, te) = (dir.path().join("x_TRAIN.tsv"), dir.path().join("x_TEST.tsv"));
        std::fs::write(&tr, "3\t1\t2\n5\t3\t4\n").unwrap();
        std::fs::write(&te, "1\t0\t0\n5\t1\t1\n").unwrap();
        let (a, b) = load_delimited_split(&tr, &te, Delimiter::Auto).unwrap();
        assert_eq!(a.class_names, vec!["1", "3", "5"]);
        assert_eq!(a.labels, vec![1, 2]);
        assert_eq!(b.labels, vec![0, 2]);
        assert_eq!(a.class_names, b.class_names);
    }

    #[test]
    fn tab_and_whitespace_detected() {
        let a = parse_delimited("1\t0.5\t0.25\n", Delimiter::Auto, "t").unwrap();
        let b = parse_delimited("  1   0.5  0.25\n", Delimiter::Auto, "t").unwrap();
        assert_eq!(a.samples[0].values, b.samples[0].values);
    }
}
