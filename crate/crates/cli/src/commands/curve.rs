use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use vsr_core::{
    calibrate_records, parse_predictions, parse_value_model, sweep, sweep_per_class,
    theoretical_threshold, CalibrationModel, FileFormat, Label, PerClassReport, PredictionRecord,
    ThresholdReport, ValueModel,
};

use super::ensure_out_dir;
use crate::error::CliError;
use crate::report::{fmt_opt, fmt_sig, write_json, write_text, SCHEMA_VERSION};
use crate::svg::LineChart;

#[derive(Serialize)]
struct CurveSummary {
    schema_version: &'static str,
    records: usize,
    grid_step: f64,
    per_class: bool,
    argmax: Option<ThresholdReport>,
    argmax_per_class: Option<PerClassReport>,
    theoretical_tau_pos: Option<f64>,
    theoretical_tau_neg: Option<f64>,
    warnings: Vec<String>,
}

fn counts_columns(report_counts: &vsr_core::OutcomeCounts) -> String {
    format!(
        "{},{},{},{},{},{},{},{}",
        report_counts.accepted.tp,
        report_counts.accepted.tn,
        report_counts.accepted.fp,
        report_counts.accepted.fn_,
        report_counts.rejected.tp,
        report_counts.rejected.tn,
        report_counts.rejected.fp,
        report_counts.rejected.fn_,
    )
}

fn apply_temperature_option(
    records: Vec<PredictionRecord>,
    temperature: Option<f64>,
) -> Result<Vec<PredictionRecord>, CliError> {
    match temperature {
        None => Ok(records),
        Some(t) => {
            if !(t > 0.0 && t.is_finite()) {
                return Err(CliError::domain(format!(
                    "temperature must be a positive number, got {t}"
                )));
            }
            let model = CalibrationModel {
                temperature: t,
                fit_nll: 0.0,
                nll_at_unit: 0.0,
                at_search_bound: false,
            };
            Ok(calibrate_records(&records, &model)?)
        }
    }
}

fn theoretical_or_warning(
    model: &ValueModel,
    class: Label,
    warnings: &mut Vec<String>,
) -> Option<f64> {
    match theoretical_threshold(model, class) {
        Ok(tau) => Some(tau),
        Err(e) => {
            warnings.push(e.to_string());
            None
        }
    }
}

pub fn run(
    predictions: &Path,
    format: FileFormat,
    values: &Path,
    grid_step: f64,
    per_class: bool,
    temperature: Option<f64>,
    out: &Path,
) -> Result<(), CliError> {
    let records = parse_predictions(predictions, format)?;
    let records = apply_temperature_option(records, temperature)?;
    let model = parse_value_model(values)?;
    ensure_out_dir(out)?;

    let mut warnings = Vec::new();
    let theoretical_tau_pos = theoretical_or_warning(&model, Label::Pos, &mut warnings);
    let theoretical_tau_neg = theoretical_or_warning(&model, Label::Neg, &mut warnings);

    if per_class {
        let curve = sweep_per_class(&records, &model, grid_step)?;
        let mut csv = String::from(
            "tau_pos,tau_neg,total_value,rejection_rate,accepted_accuracy,\
             accepted_tp,accepted_tn,accepted_fp,accepted_fn,\
             rejected_tp,rejected_tn,rejected_fp,rejected_fn\n",
        );
        for p in &curve.points {
            let _ = writeln!(
                csv,
                "{},{},{},{},{},{}",
                fmt_sig(p.tau_pos),
                fmt_sig(p.tau_neg),
                fmt_sig(p.total_value),
                fmt_sig(p.rejection_rate),
                fmt_opt(p.accepted_accuracy),
                counts_columns(&p.counts),
            );
        }
        write_text(&out.join("curve.csv"), &csv)?;
        let summary = CurveSummary {
            schema_version: SCHEMA_VERSION,
            records: records.len(),
            grid_step,
            per_class: true,
            argmax: None,
            argmax_per_class: Some(curve.argmax),
            theoretical_tau_pos,
            theoretical_tau_neg,
            warnings,
        };
        return write_json(&out.join("summary.json"), &summary);
    }

    let curve = sweep(&records, &model, grid_step)?;
    let mut csv = String::from(
        "tau,reject_all,total_value,rejection_rate,accepted_accuracy,\
         accepted_tp,accepted_tn,accepted_fp,accepted_fn,\
         rejected_tp,rejected_tn,rejected_fp,rejected_fn\n",
    );
    for p in &curve.points {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{}",
            fmt_sig(p.tau),
            p.reject_all,
            fmt_sig(p.total_value),
            fmt_sig(p.rejection_rate),
            fmt_opt(p.accepted_accuracy),
            counts_columns(&p.counts),
        );
    }
    write_text(&out.join("curve.csv"), &csv)?;

    // the sentinel shares tau = 1.0 with the last grid point; plot grid
    // points and mark the optimum
    let points: Vec<(f64, f64)> = curve
        .points
        .iter()
        .filter(|p| !p.reject_all)
        .map(|p| (p.tau, p.total_value))
        .collect();
    let chart = LineChart {
        title: "total value over rejection thresholds",
        x_label: "rejection threshold tau",
        y_label: "total value V(tau)",
        points: &points,
        marker: Some((curve.argmax.tau, curve.argmax.total_value)),
    };
    write_text(&out.join("curve.svg"), &chart.render())?;

    let summary = CurveSummary {
        schema_version: SCHEMA_VERSION,
        records: records.len(),
        grid_step,
        per_class: false,
        argmax: Some(curve.argmax),
        argmax_per_class: None,
        theoretical_tau_pos,
        theoretical_tau_neg,
        warnings,
    };
    write_json(&out.join("summary.json"), &summary)
}
