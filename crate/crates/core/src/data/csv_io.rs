//! CSV dataset format: header `f0,...,f{D-1},label`, one sample per row,
//! decimal floats, `\n` line endings. Floats are written in Rust's shortest
//! round-trip form, so save/load reproduces every value exactly.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::LabeledDataset;
use crate::error::{Error, Result};
use crate::numerics::Matrix;

pub fn load_csv(path: impl AsRef<Path>) -> Result<LabeledDataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingFile(path.to_path_buf()),
        _ => Error::Io(e),
    })?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    read_csv(file, name).map_err(|e| match e {
        Error::EmptyFile(_) => Error::EmptyFile(path.to_path_buf()),
        other => other,
    })
}

pub fn read_csv<R: Read>(reader: R, name: impl Into<String>) -> Result<LabeledDataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let mut records = rdr.records();
    let header = match records.next() {
        Some(h) => h?,
        None => return Err(Error::EmptyFile(Default::default())),
    };
    let width = header.len();
    if width < 2 || header.get(width - 1).map(str::trim) != Some("label") {
        return Err(Error::InvalidHeader(format!(
            "expected feature columns followed by \"label\", got {:?}",
            header.iter().collect::<Vec<_>>()
        )));
    }
    let dim = width - 1;
    let mut data = Vec::new();
    let mut tokens = Vec::new();
    for record in records {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != width {
            return Err(Error::RaggedRow {
                line,
                expected: width,
                got: record.len(),
            });
        }
        for (column, cell) in record.iter().take(dim).enumerate() {
            let v: f64 = cell.trim().parse().map_err(|_| Error::NonNumeric {
                line,
                column,
                value: cell.to_string(),
            })?;
            if !v.is_finite() {
                return Err(Error::NonNumeric {
                    line,
                    column,
                    value: cell.to_string(),
                });
            }
            data.push(v);
        }
        tokens.push(record[dim].trim().to_string());
    }
    if tokens.is_empty() {
        return Err(Error::EmptyFile(Default::default()));
    }
    let class_names = ordered_classes(&tokens);
    let labels = tokens
        .iter()
        .map(|t| {
            class_names
                .binary_search_by(|c| compare_tokens(c, t))
                .expect("token collected above")
        })
        .collect();
    let features = Matrix::new(tokens.len(), dim, data)?;
    LabeledDataset::new(features, labels, class_names, None, name)
}

/// Distinct tokens, sorted numerically when every token is an integer and
/// lexicographically otherwise.
fn ordered_classes(tokens: &[String]) -> Vec<String> {
    let mut classes: Vec<String> = tokens.iter().cloned().collect::<BTreeSet<_>>().into_iter().collect();
    classes.sort_by(|a, b| compare_tokens(a, b));
    classes
}

fn compare_tokens(a: &str, b: &str) -> std::cmp::Ordering {
    match (a.parse::<i64>(), b.parse::<i64>()) {
        (Ok(x), Ok(y)) => x.cmp(&y).then_with(|| a.cmp(b)),
        (Ok(_), Err(_)) => std::cmp::Ordering::Less,
        (Err(_), Ok(_)) => std::cmp::Ordering::Greater,
        (Err(_), Err(_)) => a.cmp(b),
    }
}

pub fn save_csv(ds: &LabeledDataset, path: impl AsRef<Path>) -> Result<()> {
    let mut file = std::io::BufWriter::new(File::create(path)?);
    write_csv(ds, &mut file)?;
    file.flush()?;
    Ok(())
}

pub fn write_csv<W: Write>(ds: &LabeledDataset, writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    let mut header: Vec<String> = (0..ds.dim()).map(|i| format!("f{i}")).collect();
    header.push("label".into());
    w.write_record(&header)?;
    let mut row = Vec::with_capacity(ds.dim() + 1);
    for (features, &label) in ds.features().iter_rows().zip(ds.labels()) {
        row.clear();
        row.extend(features.iter().map(|v| v.to_string()));
        row.push(ds.class_names()[label].clone());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
