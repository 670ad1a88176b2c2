use std::path::{Path, PathBuf};

use serde::Serialize;
use vsr_core::{
    compare_models, ensure_unique_keys, parse_predictions, parse_value_model, ComparisonReport,
    FileFormat,
};

use super::ensure_out_dir;
use crate::error::CliError;
use crate::report::{write_json, SCHEMA_VERSION};

#[derive(Serialize)]
struct ComparisonFile {
    schema_version: &'static str,
    grid_step: f64,
    #[serde(flatten)]
    report: ComparisonReport,
}

/// Loads every predictions file, concatenates, and compares all model ids
/// found on the shared item set.
pub fn run(
    predictions: &[PathBuf],
    format: FileFormat,
    values: &Path,
    grid_step: f64,
    out: &Path,
) -> Result<(), CliError> {
    let mut records = Vec::new();
    for path in predictions {
        records.extend(parse_predictions(path, format)?);
    }
    ensure_unique_keys(&records)?;
    let model = parse_value_model(values)?;
    let report = compare_models(&records, &model, grid_step)?;
    ensure_out_dir(out)?;
    write_json(
        &out.join("comparison.json"),
        &ComparisonFile {
            schema_version: SCHEMA_VERSION,
            grid_step,
            report,
        },
    )
}
