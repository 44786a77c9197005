use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::check_full_row_rank;
use crate::model::{Dataset, Locations};

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        message: message.into(),
    }
}

fn open(path: &Path, has_headers: bool) -> Result<csv::Reader<std::fs::File>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(has_headers)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(file))
}

fn record_line(rec: &csv::StringRecord) -> usize {
    rec.position().map_or(0, |p| p.line() as usize)
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    parse_err(path, line, e.to_string())
}

fn parse_f64(path: &Path, line: usize, field: &str, what: &str) -> Result<f64> {
    let v: f64 = field
        .parse()
        .map_err(|_| parse_err(path, line, format!("{what} '{field}' is not a number")))?;
    if !v.is_finite() {
        return Err(parse_err(path, line, format!("{what} '{field}' is not finite")));
    }
    Ok(v)
}

/// Reads `d` coordinate columns and one value column after a header row.
pub fn load_observations(path: &Path, d: usize) -> Result<Dataset> {
    let mut rdr = open(path, true)?;
    let header = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
    if header.len() != d + 1 {
        return Err(parse_err(
            path,
            1,
            format!(
                "header has {} columns, expected {} coordinates and 1 value",
                header.len(),
                d
            ),
        ));
    }
    let mut coords = Vec::new();
    let mut values = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = record_line(&rec);
        if rec.len() != d + 1 {
            return Err(parse_err(
                path,
                line,
                format!("expected {} columns, found {}", d + 1, rec.len()),
            ));
        }
        for k in 0..d {
            coords.push(parse_f64(path, line, &rec[k], "coordinate")?);
        }
        values.push(parse_f64(path, line, &rec[d], "value")?);
    }
    if values.is_empty() {
        return Err(parse_err(path, 2, "no observations"));
    }
    let locations = Locations::new(d, coords)?;
    if let Some((i, j)) = locations.first_duplicate() {
        log::warn!(
            "{}: observations {} and {} share a location; only the nugget separates them",
            path.display(),
            i + 1,
            j + 1
        );
    }
    Dataset::new(locations, values)
}

/// Reads `d` coordinate columns after a header row: the support points of
/// linear data.
pub fn load_locations(path: &Path, d: usize) -> Result<Locations> {
    let rows = read_table(path, d, "coordinate")?;
    Locations::new(d, rows.into_iter().flatten().collect())
}

/// Reads one value per row after a header row: the observed functionals `z`.
pub fn load_values(path: &Path) -> Result<Vec<f64>> {
    Ok(read_table(path, 1, "value")?.into_iter().flatten().collect())
}

fn read_table(path: &Path, cols: usize, what: &str) -> Result<Vec<Vec<f64>>> {
    let mut rdr = open(path, true)?;
    let header = rdr.headers().map_err(|e| csv_err(path, e))?.clone();
    if header.len() != cols {
        return Err(parse_err(
            path,
            1,
            format!("header has {} columns, expected {cols}", header.len()),
        ));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = record_line(&rec);
        if rec.len() != cols {
            return Err(parse_err(
                path,
                line,
                format!("expected {cols} columns, found {}", rec.len()),
            ));
        }
        rows.push(
            rec.iter()
                .map(|f| parse_f64(path, line, f, what))
                .collect::<Result<Vec<_>>>()?,
        );
    }
    if rows.is_empty() {
        return Err(parse_err(path, 2, "no observations"));
    }
    Ok(rows)
}

/// Reads `row,col,weight` triplets into an `m × n` matrix, `m` being one past
/// the largest row index. Repeated entries are summed.
pub fn load_h_matrix(path: &Path, n: usize) -> Result<DMatrix<f64>> {
    let mut rdr = open(path, false)?;
    let mut triplets = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let line = record_line(&rec);
        if rec.len() != 3 {
            return Err(parse_err(
                path,
                line,
                format!("expected row,col,weight, found {} fields", rec.len()),
            ));
        }
        let index = |s: &str, what: &str| -> Result<usize> {
            s.parse()
                .map_err(|_| parse_err(path, line, format!("{what} index '{s}' is not a non-negative integer")))
        };
        let (i, j) = (index(&rec[0], "row")?, index(&rec[1], "column")?);
        if j >= n {
            return Err(parse_err(
                path,
                line,
                format!("column {j} out of range for {n} locations"),
            ));
        }
        triplets.push((i, j, parse_f64(path, line, &rec[2], "weight")?));
    }
    let m = triplets.iter().map(|t| t.0 + 1).max().unwrap_or(0);
    if m == 0 {
        return Err(parse_err(path, 1, "no matrix entries"));
    }
    let mut h = DMatrix::zeros(m, n);
    for (i, j, w) in triplets {
        h[(i, j)] += w;
    }
    check_full_row_rank(&h)?;
    Ok(h)
}
