//! From raw survey responses to scenario values, reliability, and validity.
//!
//! The pipeline: convert stances to signed magnitudes (agree positive,
//! disagree negative, neutral zero), normalize each magnitude-estimation
//! participant to [-100, 100] by their own maximum, take per-question
//! medians across participants, and average the medians within each
//! scenario. Reliability comes from Krippendorff's alpha; validity from
//! rank correlations between the two scales.
//!
//! Excluded participants (failed attention or warm-up checks) are dropped
//! from every statistic here; ingest keeps them only so row counts reconcile.

mod alpha;
mod nonparam;
mod rank;

pub use alpha::{krippendorff_alpha, AlphaMetric, ReliabilityData};
pub use nonparam::{kruskal_wallis, mann_whitney_u, KruskalWallisResult, MannWhitneyResult};
pub use rank::{kendall_tau_b, spearman};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{Scale, Scenario, Stance, SurveyResponse};

#[derive(Debug, Error)]
pub enum SurveyError {
    #[error("input sequences have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("need at least {needed} values, got {got}")]
    TooFewValues { needed: usize, got: usize },
    #[error("correlation undefined on constant input")]
    ConstantInput,
    #[error("no data")]
    EmptyInput,
    #[error("group {0} is empty")]
    EmptyGroup(usize),
    #[error("need at least 2 groups, got {0}")]
    TooFewGroups(usize),
    #[error("question {0} has no usable responses")]
    EmptyQuestion(String),
    #[error("question {0} is mapped to more than one scenario")]
    QuestionScenarioConflict(String),
    #[error("the two scales cover different question sets")]
    QuestionSetMismatch,
    #[error("reliability needs at least 2 items with at least 2 ratings each")]
    InsufficientData,
    #[error("all ratings identical: expected disagreement is zero, alpha undefined")]
    ZeroExpectedDisagreement,
    #[error("non-finite value in input")]
    NonFiniteValue,
}

/// Signed magnitude of a response: agree maps to `+magnitude`, disagree to
/// `-magnitude`, neutral to exactly 0.
pub fn signed_value(stance: Stance, magnitude: Option<f64>) -> f64 {
    match stance {
        Stance::Neutral => 0.0,
        Stance::Agree => magnitude.unwrap_or(0.0),
        Stance::Disagree => -magnitude.unwrap_or(0.0),
    }
}

/// A response after sign conversion and (for ME) per-subject normalization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizedResponse {
    pub participant_id: String,
    pub question_id: String,
    pub scenario: Scenario,
    /// In [-100, 100]; neutral stances are exactly 0.
    pub signed_value: f64,
}

/// Normalizes one magnitude-estimation participant's responses: each signed
/// value is divided by the participant's maximum absolute signed value and
/// multiplied by 100. An all-neutral participant yields all zeros with no
/// division. Already-normalized input passes through unchanged.
pub fn normalize_me(responses: &[SurveyResponse]) -> Vec<NormalizedResponse> {
    debug_assert!(
        responses
            .windows(2)
            .all(|w| w[0].participant_id == w[1].participant_id),
        "normalize_me expects a single participant's responses"
    );
    debug_assert!(responses.iter().all(|r| r.scale == Scale::Me));
    let signed: Vec<f64> = responses
        .iter()
        .map(|r| signed_value(r.stance, r.magnitude))
        .collect();
    let max_abs = signed.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    signed
        .iter()
        .zip(responses)
        .map(|(&v, r)| {
            let normalized = if max_abs == 0.0 || max_abs == 100.0 {
                v
            } else {
                (v / max_abs) * 100.0
            };
            NormalizedResponse {
                participant_id: r.participant_id.clone(),
                question_id: r.question_id.clone(),
                scenario: r.scenario,
                signed_value: normalized,
            }
        })
        .collect()
}

/// Sign-converts and normalizes all non-excluded responses on one scale.
///
/// ME responses are normalized per participant; S100 responses pass through
/// sign conversion unchanged in magnitude, so both scales end up in
/// [-100, 100].
pub fn normalized_responses(responses: &[SurveyResponse], scale: Scale) -> Vec<NormalizedResponse> {
    let kept: Vec<&SurveyResponse> = responses
        .iter()
        .filter(|r| !r.excluded && r.scale == scale)
        .collect();
    match scale {
        Scale::S100 => kept
            .iter()
            .map(|r| NormalizedResponse {
                participant_id: r.participant_id.clone(),
                question_id: r.question_id.clone(),
                scenario: r.scenario,
                signed_value: signed_value(r.stance, r.magnitude),
            })
            .collect(),
        Scale::Me => {
            let mut by_participant: BTreeMap<&str, Vec<SurveyResponse>> = BTreeMap::new();
            for r in kept {
                by_participant
                    .entry(r.participant_id.as_str())
                    .or_default()
                    .push(r.clone());
            }
            by_participant
                .values()
                .flat_map(|group| normalize_me(group))
                .collect()
        }
    }
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

/// Median of one question's responses across participants, with the scenario
/// the question belongs to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionMedian {
    pub scenario: Scenario,
    pub median: f64,
    pub responses: usize,
}

/// Per-question medians across participants, keyed by question id.
///
/// Fails with [`SurveyError::QuestionScenarioConflict`] if a question id
/// appears under two scenarios.
pub fn per_question_medians(
    normalized: &[NormalizedResponse],
) -> Result<BTreeMap<String, QuestionMedian>, SurveyError> {
    let mut values: BTreeMap<&str, (Scenario, Vec<f64>)> = BTreeMap::new();
    for r in normalized {
        let entry = values
            .entry(r.question_id.as_str())
            .or_insert((r.scenario, Vec::new()));
        if entry.0 != r.scenario {
            return Err(SurveyError::QuestionScenarioConflict(r.question_id.clone()));
        }
        entry.1.push(r.signed_value);
    }
    let mut out = BTreeMap::new();
    for (qid, (scenario, mut vals)) in values {
        vals.sort_by(f64::total_cmp);
        out.insert(
            qid.to_string(),
            QuestionMedian {
                scenario,
                median: median(&vals),
                responses: vals.len(),
            },
        );
    }
    Ok(out)
}

/// Scenario values: the arithmetic mean of each scenario's per-question
/// medians. Scenarios with no questions in the input are absent from the map.
pub fn scenario_values(
    normalized: &[NormalizedResponse],
) -> Result<BTreeMap<Scenario, f64>, SurveyError> {
    let medians = per_question_medians(normalized)?;
    let mut sums: BTreeMap<Scenario, (f64, usize)> = BTreeMap::new();
    for q in medians.values() {
        let entry = sums.entry(q.scenario).or_insert((0.0, 0));
        entry.0 += q.median;
        entry.1 += 1;
    }
    Ok(sums
        .into_iter()
        .map(|(scenario, (sum, count))| (scenario, sum / count as f64))
        .collect())
}

/// Reliability interpretation bands for Krippendorff's alpha.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReliabilityBand {
    /// alpha >= 0.8
    Reliable,
    /// 0.6 <= alpha < 0.8
    Tentative,
    /// alpha < 0.6
    Unreliable,
}

impl ReliabilityBand {
    pub fn of(alpha: f64) -> ReliabilityBand {
        if alpha >= 0.8 {
            ReliabilityBand::Reliable
        } else if alpha >= 0.6 {
            ReliabilityBand::Tentative
        } else {
            ReliabilityBand::Unreliable
        }
    }
}

/// Value and reliability of one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioStats {
    pub value: f64,
    /// None when alpha is undefined for this scenario (with a warning).
    pub alpha: Option<f64>,
    pub band: Option<ReliabilityBand>,
    pub questions: usize,
}

/// Per-scenario values and reliabilities for one scale, plus the overall
/// alpha across the full participants-by-questions matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioValueTable {
    pub scale: Scale,
    pub scenarios: BTreeMap<Scenario, ScenarioStats>,
    pub overall_alpha: Option<f64>,
    pub overall_band: Option<ReliabilityBand>,
    pub warnings: Vec<String>,
}

/// Builds the full per-scale table: normalization, per-question medians,
/// scenario values, and per-scenario plus overall alpha.
///
/// A question whose responses all come from excluded participants is an
/// [`SurveyError::EmptyQuestion`] error; an alpha that is undefined
/// (insufficient data or zero expected disagreement) becomes a `None`
/// entry with a warning instead of an error.
pub fn scenario_value_table(
    responses: &[SurveyResponse],
    scale: Scale,
    metric: AlphaMetric,
) -> Result<ScenarioValueTable, SurveyError> {
    // questions seen anywhere in the input on this scale, usable or not
    let mut all_questions: BTreeMap<&str, bool> = BTreeMap::new();
    for r in responses.iter().filter(|r| r.scale == scale) {
        *all_questions.entry(r.question_id.as_str()).or_insert(false) |= !r.excluded;
    }
    if let Some((qid, _)) = all_questions.iter().find(|(_, usable)| !**usable) {
        return Err(SurveyError::EmptyQuestion(qid.to_string()));
    }
    if all_questions.is_empty() {
        return Err(SurveyError::EmptyInput);
    }

    let normalized = normalized_responses(responses, scale);
    let medians = per_question_medians(&normalized)?;
    let values = scenario_values(&normalized)?;

    let mut warnings = Vec::new();
    let mut scenarios = BTreeMap::new();
    for (&scenario, &value) in &values {
        let question_ids: Vec<&str> = medians
            .iter()
            .filter(|(_, q)| q.scenario == scenario)
            .map(|(qid, _)| qid.as_str())
            .collect();
        let data =
            ReliabilityData::from_normalized(normalized.iter().filter(|r| r.scenario == scenario));
        let alpha = match krippendorff_alpha(&data, metric) {
            Ok(a) => Some(a),
            Err(e) => {
                warnings.push(format!("alpha for scenario {scenario} unavailable: {e}"));
                None
            }
        };
        scenarios.insert(
            scenario,
            ScenarioStats {
                value,
                alpha,
                band: alpha.map(ReliabilityBand::of),
                questions: question_ids.len(),
            },
        );
    }

    let overall_data = ReliabilityData::from_normalized(normalized.iter());
    let overall_alpha = match krippendorff_alpha(&overall_data, metric) {
        Ok(a) => Some(a),
        Err(e) => {
            warnings.push(format!("overall alpha unavailable: {e}"));
            None
        }
    };
    Ok(ScenarioValueTable {
        scale,
        scenarios,
        overall_alpha,
        overall_band: overall_alpha.map(ReliabilityBand::of),
        warnings,
    })
}

/// Convergent validity between the two scales' per-question medians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidityReport {
    pub spearman: f64,
    pub kendall_tau_b: f64,
    pub mann_whitney_p: f64,
    pub questions: usize,
}

/// Correlates paired per-question medians from the two scales.
///
/// Both maps must cover exactly the same question ids.
pub fn convergent_validity(
    me_medians: &BTreeMap<String, f64>,
    s100_medians: &BTreeMap<String, f64>,
) -> Result<ValidityReport, SurveyError> {
    if me_medians.len() != s100_medians.len() || !me_medians.keys().eq(s100_medians.keys()) {
        return Err(SurveyError::QuestionSetMismatch);
    }
    let me: Vec<f64> = me_medians.values().copied().collect();
    let s100: Vec<f64> = s100_medians.values().copied().collect();
    let mwu = mann_whitney_u(&me, &s100)?;
    Ok(ValidityReport {
        spearman: spearman(&me, &s100)?,
        kendall_tau_b: kendall_tau_b(&me, &s100)?,
        mann_whitney_p: mwu.p_value,
        questions: me.len(),
    })
}
