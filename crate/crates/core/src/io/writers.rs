//! CSV writers. Numbers use `.` as the decimal separator and round-trip
//! exactly; every line ends in `\n`.

use std::fmt::Write as _;
use std::path::Path;

use crate::engine::IterationDiagnostics;
use crate::error::{Error, Result};
use crate::simulate::PredictionGrid;

/// Shortest representation that parses back to the same `f64`.
pub fn num(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || (1e-4..1e15).contains(&a) || !x.is_finite() {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

fn join(xs: impl IntoIterator<Item = String>) -> String {
    xs.into_iter().collect::<Vec<_>>().join(",")
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Header line of a grid CSV.
pub fn grid_header(grid: &PredictionGrid) -> String {
    let list = |v: &[f64]| v.iter().map(|x| num(*x)).collect::<Vec<_>>().join(" ");
    let counts = grid.counts.iter().map(usize::to_string).collect::<Vec<_>>().join(" ");
    format!(
        "# origin={} cell_size={} counts={}",
        list(&grid.origin),
        list(&grid.cell_size),
        counts
    )
}

/// One grid row per line, `counts[0]` values each, in cell order.
pub fn format_grid(grid: &PredictionGrid, values: &[f64]) -> String {
    assert_eq!(values.len(), grid.len(), "one value per grid cell");
    let mut s = grid_header(grid);
    s.push('\n');
    for row in values.chunks(grid.counts[0]) {
        s.push_str(&join(row.iter().map(|x| num(*x))));
        s.push('\n');
    }
    s
}

pub fn write_grid(path: &Path, grid: &PredictionGrid, values: &[f64]) -> Result<()> {
    write_text(path, &format_grid(grid, values))
}

/// Parses a file produced by [`format_grid`].
pub fn parse_grid(text: &str) -> std::result::Result<(PredictionGrid, Vec<f64>), String> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .and_then(|h| h.strip_prefix("# "))
        .ok_or("missing grid header")?;
    let mut origin = None;
    let mut cell = None;
    let mut counts = None;
    let mut key = "";
    let mut vals: Vec<&str> = Vec::new();
    let mut flush = |key: &str, vals: &mut Vec<&str>| -> std::result::Result<(), String> {
        let floats = || -> std::result::Result<Vec<f64>, String> {
            vals.iter()
                .map(|v| v.parse::<f64>().map_err(|e| e.to_string()))
                .collect()
        };
        match key {
            "" => {}
            "origin" => origin = Some(floats()?),
            "cell_size" => cell = Some(floats()?),
            "counts" => {
                counts = Some(
                    vals.iter()
                        .map(|v| v.parse::<usize>().map_err(|e| e.to_string()))
                        .collect::<std::result::Result<Vec<_>, _>>()?,
                )
            }
            other => return Err(format!("unknown grid header field '{other}'")),
        }
        vals.clear();
        Ok(())
    };
    for tok in header.split_ascii_whitespace() {
        match tok.split_once('=') {
            Some((k, v)) => {
                flush(key, &mut vals)?;
                key = k;
                vals.push(v);
            }
            None => vals.push(tok),
        }
    }
    flush(key, &mut vals)?;
    let grid = PredictionGrid::new(
        origin.ok_or("header lacks origin")?,
        cell.ok_or("header lacks cell_size")?,
        counts.ok_or("header lacks counts")?,
    )
    .map_err(|e| e.to_string())?;
    let mut values = Vec::with_capacity(grid.len());
    for line in lines {
        for v in line.split(',') {
            values.push(v.parse::<f64>().map_err(|e| format!("'{v}': {e}"))?);
        }
    }
    if values.len() != grid.len() {
        return Err(format!("{} values for {} cells", values.len(), grid.len()));
    }
    Ok((grid, values))
}

pub const DIAGNOSTICS_HEADER: &str =
    "k,n,gamma,d_l1,r_star,h_star,j_star,zero_weight_count,localization_fallbacks,tuning_fallback";

pub fn format_diagnostics(diagnostics: &[IterationDiagnostics]) -> String {
    let mut s = format!("{DIAGNOSTICS_HEADER}\n");
    for d in diagnostics {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{}",
            d.k,
            d.n,
            num(d.gamma),
            num(d.d_l1),
            num(d.r_star),
            num(d.h_star),
            num(d.j_star),
            d.zero_weight_count,
            d.localization_fallbacks,
            d.tuning_fallback
        );
    }
    s
}

/// Header of column names, then one row per sample.
pub fn format_table(names: &[String], rows: &[Vec<f64>]) -> String {
    let mut s = names.join(",");
    s.push('\n');
    for r in rows {
        s.push_str(&join(r.iter().map(|x| num(*x))));
        s.push('\n');
    }
    s
}

/// Per-column mean and sample standard deviation.
pub fn format_summary(names: &[String], rows: &[Vec<f64>]) -> String {
    let n = rows.len() as f64;
    let mut s = String::from("parameter,mean,sd\n");
    for (j, name) in names.iter().enumerate() {
        let mean = rows.iter().map(|r| r[j]).sum::<f64>() / n;
        let var = rows.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
        let _ = writeln!(s, "{name},{},{}", num(mean), num(var.sqrt()));
    }
    s
}
