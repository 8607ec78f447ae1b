//! Plain CSV tables: one header row, string cells.

use std::path::Path;

use crate::error::{HarnessError, Result};

pub fn write_table<I, R>(path: &Path, header: &[String], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator,
    R::Item: AsRef<[u8]>,
{
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_table(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut r = csv::Reader::from_path(path).map_err(|e| HarnessError::Artifact {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let header = r.headers()?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        rows.push(rec?.iter().map(str::to_string).collect());
    }
    Ok((header, rows))
}

/// Column of `rows` named `name`, parsed as numbers.
pub fn column(path: &Path, header: &[String], rows: &[Vec<String>], name: &str) -> Result<Vec<f64>> {
    let idx = header.iter().position(|h| h == name).ok_or_else(|| HarnessError::Artifact {
        path: path.to_path_buf(),
        message: format!("no column `{name}`"),
    })?;
    rows.iter()
        .enumerate()
        .map(|(n, r)| {
            r.get(idx).and_then(|s| s.parse().ok()).ok_or_else(|| HarnessError::Artifact {
                path: path.to_path_buf(),
                message: format!("row {}: bad `{name}` value", n + 1),
            })
        })
        .collect()
}
