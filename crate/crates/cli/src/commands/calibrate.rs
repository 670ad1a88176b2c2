use std::path::Path;

use serde::Serialize;
use vsr_core::{
    calibrate_records, confidence_samples, expected_calibration_error, fit_temperature,
    parse_predictions, FileFormat,
};

use super::ensure_out_dir;
use crate::error::CliError;
use crate::report::{write_json, SCHEMA_VERSION};

#[derive(Serialize)]
struct CalibrationReport {
    schema_version: &'static str,
    records: usize,
    temperature: f64,
    fit_nll: f64,
    nll_at_unit_temperature: f64,
    ece_before: f64,
    ece_after: f64,
    ece_bins: usize,
    at_search_bound: bool,
    warnings: Vec<String>,
}

pub fn run(
    predictions: &Path,
    format: FileFormat,
    bins: usize,
    out: &Path,
) -> Result<(), CliError> {
    let records = parse_predictions(predictions, format)?;
    let model = fit_temperature(&records)?;
    let ece_before = expected_calibration_error(&confidence_samples(&records), bins)?;
    let calibrated = calibrate_records(&records, &model)?;
    let ece_after = expected_calibration_error(&confidence_samples(&calibrated), bins)?;

    let mut warnings = Vec::new();
    if model.at_search_bound {
        warnings.push(
            "fitted temperature sits at the search boundary; inspect the input logits".to_string(),
        );
    }
    let report = CalibrationReport {
        schema_version: SCHEMA_VERSION,
        records: records.len(),
        temperature: model.temperature,
        fit_nll: model.fit_nll,
        nll_at_unit_temperature: model.nll_at_unit,
        ece_before,
        ece_after,
        ece_bins: bins,
        at_search_bound: model.at_search_bound,
        warnings,
    };
    ensure_out_dir(out)?;
    write_json(&out.join("calibration.json"), &report)
}
