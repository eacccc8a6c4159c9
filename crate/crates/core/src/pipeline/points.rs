//! Point clouds from CSV, one row per point.

use std::path::Path;

use super::features::{FLAG_COLUMNS, KEY_COLUMNS};
use crate::error::{Error, Result};
use crate::idim::PointCloud;

/// Reads numeric rows. A first row that does not parse as numbers is a
/// header; header columns naming row keys or flags are skipped, which lets a
/// feature CSV be read back as a point cloud.
pub fn read_point_cloud(path: &Path) -> Result<PointCloud> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_point_cloud(&text).map_err(|e| match e {
        Error::Domain(m) => Error::parse(path, m),
        other => other,
    })
}

pub fn parse_point_cloud(text: &str) -> Result<PointCloud> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut records = reader.records().peekable();
    let mut keep: Option<Vec<usize>> = None;
    if let Some(Ok(first)) = records.peek() {
        if first.iter().any(|f| f.parse::<f64>().is_err()) {
            keep = Some(
                first
                    .iter()
                    .enumerate()
                    .filter(|(_, name)| !KEY_COLUMNS.contains(name) && !FLAG_COLUMNS.contains(name))
                    .map(|(i, _)| i)
                    .collect(),
            );
            records.next();
        }
    }
    let mut rows = Vec::new();
    for (line, rec) in records.enumerate() {
        let rec = rec?;
        let fields: Vec<&str> = match &keep {
            Some(cols) => cols.iter().map(|&i| rec.get(i).unwrap_or("")).collect(),
            None => rec.iter().collect(),
        };
        let row = fields
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|_| Error::domain(format!("data row {}: '{f}' is not a number", line + 1)))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    PointCloud::from_rows(&rows)
}
