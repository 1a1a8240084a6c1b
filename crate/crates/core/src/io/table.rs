//! CSV tables: optimization history, tensors, measures and contour polylines.

use std::path::Path;

use serde::Serialize;

use super::write_atomic;
use crate::error::{Error, Result};
use crate::levelset::ContourLoop;
use crate::optimizer::ConvergenceRecord;

fn to_bytes<T: Serialize>(
    path: &Path,
    header: Option<&[&str]>,
    rows: impl IntoIterator<Item = T>,
) -> Result<Vec<u8>> {
    let err = |e: csv::Error| Error::format(path, e.to_string());
    let mut w = csv::WriterBuilder::new()
        .has_headers(header.is_none())
        .from_writer(Vec::new());
    if let Some(h) = header.filter(|h| !h.is_empty()) {
        w.write_record(h).map_err(err)?;
    }
    for row in rows {
        w.serialize(row).map_err(err)?;
    }
    w.into_inner()
        .map_err(|e| Error::format(path, e.to_string()))
}

/// `history.csv`, one [`ConvergenceRecord`] per row with its field names as header.
pub fn write_history(path: &Path, rows: &[ConvergenceRecord]) -> Result<()> {
    let bytes = if rows.is_empty() {
        to_bytes::<()>(path, Some(&ConvergenceRecord::COLUMNS), [])?
    } else {
        to_bytes(path, None, rows)?
    };
    write_atomic(path, &bytes)
}

pub fn read_history(path: &Path) -> Result<Vec<ConvergenceRecord>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| Error::format(path, e.to_string()))?;
    let header: Vec<String> = r
        .headers()
        .map_err(|e| Error::format(path, e.to_string()))?
        .iter()
        .map(str::to_owned)
        .collect();
    if header != ConvergenceRecord::COLUMNS {
        return Err(Error::format(path, format!("unexpected header {header:?}")));
    }
    r.deserialize()
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::format(path, e.to_string()))
}

/// A `d x d` tensor, one matrix row per line, no header.
pub fn write_tensor(path: &Path, t: &[[f64; 2]; 2]) -> Result<()> {
    write_atomic(path, &to_bytes(path, Some(&[]), t.iter())?)
}

pub fn read_tensor(path: &Path) -> Result<[[f64; 2]; 2]> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| Error::format(path, e.to_string()))?;
    let rows: Vec<[f64; 2]> = r
        .deserialize()
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::format(path, e.to_string()))?;
    match rows.as_slice() {
        [a, b] => Ok([*a, *b]),
        _ => Err(Error::format(
            path,
            format!("expected 2 rows, got {}", rows.len()),
        )),
    }
}

/// `perimeter,area` header and one row.
pub fn write_measures(path: &Path, perimeter: f64, area: f64) -> Result<()> {
    write_atomic(
        path,
        &to_bytes(path, Some(&["perimeter", "area"]), [(perimeter, area)])?,
    )
}

/// Closed polylines as `loop,x,y`; the first point of each loop is repeated at its end.
pub fn write_contours(path: &Path, loops: &[ContourLoop]) -> Result<()> {
    let rows = loops.iter().enumerate().flat_map(|(k, l)| {
        l.points
            .iter()
            .chain(l.points.first())
            .map(move |p| (k, p[0], p[1]))
    });
    write_atomic(path, &to_bytes(path, Some(&["loop", "x", "y"]), rows)?)
}
