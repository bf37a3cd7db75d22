//! CSV ingestion and export.
//!
//! Header `f0,...,f{d-1},label`, one example per row, label a nonnegative
//! integer. Features are written with 17 significant digits.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::{Dataset, Example};
use crate::error::{Error, Result};
use crate::fmt::g17;

pub fn load_csv(path: &Path) -> Result<Dataset> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(file);
    let header = reader
        .headers()
        .map_err(|e| Error::Parse {
            line: 1,
            msg: e.to_string(),
        })?
        .clone();
    let width = header.len();
    if width < 2 || &header[width - 1] != "label" {
        return Err(Error::Schema(format!(
            "{}: header must end with `label`",
            path.display()
        )));
    }
    for (i, name) in header.iter().take(width - 1).enumerate() {
        if name != format!("f{i}") {
            return Err(Error::Schema(format!(
                "{}: header column {i} is `{name}`, expected `f{i}`",
                path.display()
            )));
        }
    }
    let d = width - 1;
    let mut examples = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line()),
            msg: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != width {
            return Err(Error::Schema(format!(
                "line {line}: {} cells, header has {width}",
                record.len()
            )));
        }
        let mut features = Vec::with_capacity(d);
        for (i, cell) in record.iter().take(d).enumerate() {
            let v: f64 = cell.trim().parse().map_err(|_| Error::Parse {
                line,
                msg: format!("feature f{i} `{cell}` is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line,
                    msg: format!("feature f{i} is not finite"),
                });
            }
            features.push(v);
        }
        let label_cell = record[d].trim();
        let label: usize = label_cell.parse().map_err(|_| Error::Parse {
            line,
            msg: format!("label `{label_cell}` is not a nonnegative integer"),
        })?;
        examples.push(Example::new(features, label));
    }
    let k = examples.iter().map(|e| e.label + 1).max().unwrap_or(0);
    let name = path
        .file_stem()
        .map_or_else(|| "csv".to_string(), |s| s.to_string_lossy().into_owned());
    Dataset::new(name, examples, d, k)
}

pub fn save_csv(ds: &Dataset, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut write = || -> std::io::Result<()> {
        let header: Vec<String> = (0..ds.dim()).map(|i| format!("f{i}")).collect();
        writeln!(w, "{},label", header.join(","))?;
        for e in ds.examples() {
            for v in &e.features {
                write!(w, "{},", g17(*v))?;
            }
            writeln!(w, "{}", e.label)?;
        }
        w.flush()
    };
    write().map_err(|e| Error::io(path, e))
}
