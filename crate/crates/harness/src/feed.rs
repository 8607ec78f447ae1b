//! Long-form field grids consumed by the plotting scripts.
//!
//! One file per quantity, `figures/fields_<q>.csv`, with columns
//! `t, x[, y], hf, mf, lf, abs_err_mf, abs_err_lf`. The `lf` column is the
//! trained `K_LF` surrogate evaluated on the HF grid.

use std::path::{Path, PathBuf};

use crate::data::fmt_f64;
use crate::error::{HarnessError, Result};
use crate::io::{column, read_table, write_table};

/// Reads `predictions.csv` from a run directory and writes the feed files
/// into `<run>/figures/`. Returns the written paths.
pub fn dump_figures(run_dir: &Path) -> Result<Vec<PathBuf>> {
    let src = run_dir.join("predictions.csv");
    let (header, rows) = read_table(&src)?;
    let has_y = header.iter().any(|h| h == "y");
    let quantities: Vec<String> = header
        .iter()
        .filter_map(|h| h.strip_prefix("hf_").map(str::to_string))
        .collect();
    if quantities.is_empty() {
        return Err(HarnessError::Artifact {
            path: src,
            message: "no hf_* columns".into(),
        });
    }
    let t = column(&src, &header, &rows, "t")?;
    let x = column(&src, &header, &rows, "x")?;
    let y = if has_y { Some(column(&src, &header, &rows, "y")?) } else { None };

    let out_dir = run_dir.join("figures");
    let mut written = Vec::new();
    for q in &quantities {
        let hf = column(&src, &header, &rows, &format!("hf_{q}"))?;
        let mf = column(&src, &header, &rows, &format!("mf_{q}"))?;
        let lf = column(&src, &header, &rows, &format!("lf_{q}"))?;
        let mut head: Vec<String> = vec!["t".into(), "x".into()];
        if has_y {
            head.push("y".into());
        }
        head.extend(["hf", "mf", "lf", "abs_err_mf", "abs_err_lf"].map(String::from));
        let lines = (0..rows.len()).map(|i| {
            let mut r = vec![fmt_f64(t[i]), fmt_f64(x[i])];
            if let Some(y) = &y {
                r.push(fmt_f64(y[i]));
            }
            r.extend([hf[i], mf[i], lf[i], (mf[i] - hf[i]).abs(), (lf[i] - hf[i]).abs()].map(fmt_f64));
            r
        });
        let path = out_dir.join(format!("fields_{q}.csv"));
        write_table(&path, &head, lines)?;
        written.push(path);
    }
    Ok(written)
}
