use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use vsr_core::{
    convergent_validity, normalized_responses, parse_survey, per_question_medians,
    scenario_value_table, AlphaMetric, Scale, ScenarioValueTable, SurveyResponse, ValidityReport,
};

use super::ensure_out_dir;
use crate::error::CliError;
use crate::report::{fmt_opt, fmt_sig, write_json, SCHEMA_VERSION};

#[derive(Serialize)]
struct ScenarioValuesFile {
    schema_version: &'static str,
    alpha_metric: AlphaMetric,
    tables: Vec<ScenarioValueTable>,
    warnings: Vec<String>,
}

#[derive(Serialize)]
struct ReliabilityFile {
    schema_version: &'static str,
    alpha_metric: AlphaMetric,
    scales: BTreeMap<Scale, ScaleReliability>,
}

#[derive(Serialize)]
struct ScaleReliability {
    scenarios: BTreeMap<vsr_core::Scenario, ScenarioAlpha>,
    overall_alpha: Option<f64>,
    overall_band: Option<vsr_core::ReliabilityBand>,
    warnings: Vec<String>,
}

#[derive(Serialize)]
struct ScenarioAlpha {
    alpha: Option<f64>,
    band: Option<vsr_core::ReliabilityBand>,
}

#[derive(Serialize)]
struct ValidityFile {
    schema_version: &'static str,
    #[serde(flatten)]
    report: ValidityReport,
}

fn scales_present(responses: &[SurveyResponse]) -> Vec<Scale> {
    let mut scales = Vec::new();
    for scale in [Scale::Me, Scale::S100] {
        if responses.iter().any(|r| !r.excluded && r.scale == scale) {
            scales.push(scale);
        }
    }
    scales
}

pub fn run(
    survey: &Path,
    scale_filter: Option<Scale>,
    validity_required: bool,
    metric: AlphaMetric,
    out: &Path,
) -> Result<(), CliError> {
    let responses = parse_survey(survey)?;
    let present = scales_present(&responses);
    let selected: Vec<Scale> = match scale_filter {
        Some(scale) => {
            if !present.contains(&scale) {
                return Err(CliError::domain(format!(
                    "no usable {scale} responses in {}",
                    survey.display()
                )));
            }
            vec![scale]
        }
        None => present.clone(),
    };
    if selected.is_empty() {
        return Err(CliError::domain("survey has no usable responses"));
    }

    let both_scales = scale_filter.is_none() && present.len() == 2;
    if validity_required && !both_scales {
        return Err(CliError::domain(
            "--validity needs both scales in the input and no --scale filter",
        ));
    }

    let mut warnings = Vec::new();
    let mut tables = Vec::new();
    for &scale in &selected {
        tables.push(scenario_value_table(&responses, scale, metric)?);
    }
    ensure_out_dir(out)?;

    // validity over paired per-question medians, when both scales exist
    let mut validity: Option<ValidityReport> = None;
    if both_scales {
        let me = per_question_medians(&normalized_responses(&responses, Scale::Me))?;
        let s100 = per_question_medians(&normalized_responses(&responses, Scale::S100))?;
        let me_medians: BTreeMap<String, f64> =
            me.into_iter().map(|(q, m)| (q, m.median)).collect();
        let s100_medians: BTreeMap<String, f64> =
            s100.into_iter().map(|(q, m)| (q, m.median)).collect();
        match convergent_validity(&me_medians, &s100_medians) {
            Ok(report) => validity = Some(report),
            Err(e) if !validity_required => {
                warnings.push(format!("validity skipped: {e}"));
            }
            Err(e) => return Err(e.into()),
        }
    }

    let mut csv = String::from("scale,scenario,value,alpha,band,questions\n");
    for table in &tables {
        for (scenario, stats) in &table.scenarios {
            let band = stats
                .band
                .map(|b| format!("{b:?}").to_lowercase())
                .unwrap_or_default();
            let _ = writeln!(
                csv,
                "{},{},{},{},{},{}",
                table.scale,
                scenario,
                fmt_sig(stats.value),
                fmt_opt(stats.alpha),
                band,
                stats.questions
            );
        }
    }
    crate::report::write_text(&out.join("scenario_values.csv"), &csv)?;

    write_json(
        &out.join("scenario_values.json"),
        &ScenarioValuesFile {
            schema_version: SCHEMA_VERSION,
            alpha_metric: metric,
            tables: tables.clone(),
            warnings,
        },
    )?;

    let scales = tables
        .iter()
        .map(|t| {
            (
                t.scale,
                ScaleReliability {
                    scenarios: t
                        .scenarios
                        .iter()
                        .map(|(s, stats)| {
                            (
                                *s,
                                ScenarioAlpha {
                                    alpha: stats.alpha,
                                    band: stats.band,
                                },
                            )
                        })
                        .collect(),
                    overall_alpha: t.overall_alpha,
                    overall_band: t.overall_band,
                    warnings: t.warnings.clone(),
                },
            )
        })
        .collect();
    write_json(
        &out.join("reliability.json"),
        &ReliabilityFile {
            schema_version: SCHEMA_VERSION,
            alpha_metric: metric,
            scales,
        },
    )?;

    if let Some(report) = validity {
        write_json(
            &out.join("validity.json"),
            &ValidityFile {
                schema_version: SCHEMA_VERSION,
                report,
            },
        )?;
    }
    Ok(())
}
