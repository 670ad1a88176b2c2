use std::path::Path;

use serde::Serialize;
use vsr_core::{parse_value_model, theoretical_threshold, Label};

use super::ensure_out_dir;
use crate::error::CliError;
use crate::report::{write_json, SCHEMA_VERSION};

#[derive(Serialize)]
struct ThresholdReportFile {
    schema_version: &'static str,
    /// `gamma / (gamma + 1)` for positive predictions; null when v_tp = 0.
    tau_pos: Option<f64>,
    /// Same for negative predictions; null when v_tn = 0.
    tau_neg: Option<f64>,
    warnings: Vec<String>,
}

pub fn run(values: &Path, out: &Path) -> Result<(), CliError> {
    let model = parse_value_model(values)?;
    let mut warnings = Vec::new();
    let mut tau_for = |class: Label| match theoretical_threshold(&model, class) {
        Ok(tau) => Some(tau),
        Err(e) => {
            warnings.push(e.to_string());
            None
        }
    };
    let tau_pos = tau_for(Label::Pos);
    let tau_neg = tau_for(Label::Neg);
    if tau_pos.is_none() && tau_neg.is_none() {
        return Err(CliError::domain(
            "theoretical threshold undefined for both classes (v_tp = v_tn = 0)",
        ));
    }
    let report = ThresholdReportFile {
        schema_version: SCHEMA_VERSION,
        tau_pos,
        tau_neg,
        warnings,
    };
    ensure_out_dir(out)?;
    write_json(&out.join("thresholds.json"), &report)
}
