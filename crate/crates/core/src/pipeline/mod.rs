//! Dataset ingestion, windowing, feature export and report generation.

pub mod commands;
pub mod features;
pub mod ingest;
pub mod output;
pub mod points;

pub use commands::*;
pub use features::{extract_windows, feature_table, FeatureConfig, FeatureRow, FeatureTable, Patch, PatchSet};
pub use ingest::{decode_file, ingest_images, IngestError, Ingested, NamedImage};
pub use output::{canonical_json, format_f64, rows_to_csv, ReportEnvelope};
pub use points::{parse_point_cloud, read_point_cloud};
