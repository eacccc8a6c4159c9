//! Sliding windows and the per-window feature table.

use rayon::prelude::*;
use serde::Serialize;

use super::ingest::NamedImage;
use crate::error::{Error, Result};
use crate::texture::{feature_names, feature_vector_for_patch, Aggregation, GlcmOffset, GrayImage};

/// Columns that identify a row rather than carry a feature value.
pub const KEY_COLUMNS: [&str; 4] = ["dataset", "image", "row", "col"];
pub const FLAG_COLUMNS: [&str; 2] = ["flag_correlation", "flag_info_correlation"];

#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    pub row: usize,
    pub col: usize,
    pub image: GrayImage,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatchSet {
    pub side: usize,
    pub stride: usize,
    pub patches: Vec<Patch>,
}

/// All `side x side` windows whose corners lie on the stride grid, in
/// row-major order.
pub fn extract_windows(img: &GrayImage, side: usize, stride: usize) -> Result<PatchSet> {
    if stride == 0 {
        return Err(Error::domain("stride must be at least 1"));
    }
    if side == 0 || side > img.width().min(img.height()) {
        return Err(Error::domain(format!(
            "window side {side} does not fit in a {}x{} image",
            img.height(),
            img.width()
        )));
    }
    let mut patches = Vec::new();
    for row in (0..=img.height() - side).step_by(stride) {
        for col in (0..=img.width() - side).step_by(stride) {
            patches.push(Patch {
                row,
                col,
                image: img.crop(row, col, side, side)?,
            });
        }
    }
    Ok(PatchSet {
        side,
        stride,
        patches,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureConfig {
    /// Window side; `None` uses each whole image as one window.
    pub window: Option<usize>,
    pub stride: usize,
    pub offsets: Vec<GlcmOffset>,
    pub aggregation: Aggregation,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            window: None,
            stride: 1,
            offsets: GlcmOffset::standard(true).to_vec(),
            aggregation: Aggregation::Average,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub image: String,
    pub row: usize,
    pub col: usize,
    pub values: Vec<f64>,
    pub flag_correlation: bool,
    pub flag_info_correlation: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    pub dataset: String,
    pub columns: Vec<String>,
    pub rows: Vec<FeatureRow>,
}

impl FeatureTable {
    pub fn vectors(&self) -> Vec<Vec<f64>> {
        self.rows.iter().map(|r| r.values.clone()).collect()
    }

    /// RFC 4180 CSV with floats in shortest round-trip form.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let header = KEY_COLUMNS
            .iter()
            .map(|s| s.to_string())
            .chain(self.columns.iter().cloned())
            .chain(FLAG_COLUMNS.iter().map(|s| s.to_string()));
        w.write_record(header)?;
        for r in &self.rows {
            let record = [
                self.dataset.clone(),
                r.image.clone(),
                r.row.to_string(),
                r.col.to_string(),
            ]
            .into_iter()
            .chain(r.values.iter().map(|v| v.to_string()))
            .chain([r.flag_correlation, r.flag_info_correlation].map(|f| u8::from(f).to_string()));
            w.write_record(record)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::domain(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

/// Feature vectors for every window of every image, in input order.
pub fn feature_table(dataset: &str, images: &[NamedImage], config: &FeatureConfig) -> Result<FeatureTable> {
    let per_image: Vec<Vec<FeatureRow>> = images
        .par_iter()
        .map(|named| {
            let side = config
                .window
                .unwrap_or_else(|| named.image.width().min(named.image.height()));
            let set = extract_windows(&named.image, side, config.stride)?;
            set.patches
                .par_iter()
                .map(|patch| {
                    let f = feature_vector_for_patch(&patch.image, &config.offsets, config.aggregation)?;
                    Ok(FeatureRow {
                        image: named.id.clone(),
                        row: patch.row,
                        col: patch.col,
                        values: f.values,
                        flag_correlation: f.flags.correlation,
                        flag_info_correlation: f.flags.info_correlation,
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    Ok(FeatureTable {
        dataset: dataset.to_string(),
        columns: feature_names(&config.offsets, config.aggregation),
        rows: per_image.into_iter().flatten().collect(),
    })
}
