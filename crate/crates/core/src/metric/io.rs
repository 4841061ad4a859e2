use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::{MetricSpace, Norm};
use crate::error::{Error, Result};

fn parse_rows(text: &str) -> Result<Vec<Vec<String>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
        rows.push(rec.iter().map(str::to_owned).collect());
    }
    Ok(rows)
}

fn parse_f64(s: &str, row: usize) -> Result<f64> {
    s.parse::<f64>()
        .map_err(|_| Error::Parse(format!("row {row}: `{s}` is not a number")))
}

/// Reads a header-free `n × n` distance matrix and validates it.
pub fn read_matrix_csv(path: impl AsRef<Path>) -> Result<MetricSpace> {
    let mut text = String::new();
    File::open(path)?.read_to_string(&mut text)?;
    let rows = parse_rows(&text)?
        .into_iter()
        .enumerate()
        .map(|(i, r)| {
            r.iter()
                .map(|s| parse_f64(s, i))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    MetricSpace::from_rows(rows)
}

/// Writes the distance table as header-free CSV.
pub fn write_matrix_csv(space: &MetricSpace, path: impl AsRef<Path>) -> Result<()> {
    let n = space.n();
    let table = space.to_table();
    let mut out = String::new();
    for i in 0..n {
        let row: Vec<String> = table[i * n..(i + 1) * n]
            .iter()
            .map(f64::to_string)
            .collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    File::create(path)?.write_all(out.as_bytes())?;
    Ok(())
}

/// Reads a points file with columns `x0..x{dim-1}`. A header row is optional.
pub fn read_points_csv(path: impl AsRef<Path>, norm: Norm) -> Result<MetricSpace> {
    let mut text = String::new();
    File::open(path)?.read_to_string(&mut text)?;
    let mut rows = parse_rows(&text)?;
    if rows
        .first()
        .is_some_and(|r| r.iter().any(|c| c.parse::<f64>().is_err()))
    {
        rows.remove(0);
    }
    let points = rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            r.iter()
                .map(|s| parse_f64(s, i))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    MetricSpace::from_points(&points, norm)
}

/// Writes coordinates with an `x0,x1,...` header. Fails for table-backed spaces.
pub fn write_points_csv(space: &MetricSpace, path: impl AsRef<Path>) -> Result<()> {
    let (points, _) = space
        .points()
        .ok_or_else(|| Error::Usage("space has no coordinates".into()))?;
    let dim = points.first().map_or(0, Vec::len);
    let mut out = (0..dim)
        .map(|d| format!("x{d}"))
        .collect::<Vec<_>>()
        .join(",");
    out.push('\n');
    for p in &points {
        out.push_str(&p.iter().map(f64::to_string).collect::<Vec<_>>().join(","));
        out.push('\n');
    }
    File::create(path)?.write_all(out.as_bytes())?;
    Ok(())
}
