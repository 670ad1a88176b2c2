//! Parsing and validation of input files into the core data model.
//!
//! Three inputs feed the pipeline: classifier prediction records
//! (CSV or JSON), survey responses (CSV), and value models (JSON).
//! All parsers are strict: a row that violates a domain invariant is an
//! error, not a silently-dropped record. Parsing is deterministic and
//! order-preserving.

use std::collections::HashSet;
use std::fmt;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors raised while parsing input files.
#[derive(Debug, Error)]
pub enum IngestError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed row at line {line}: {reason}")]
    MalformedRow { line: u64, reason: String },
    #[error("duplicate key ({model_id}, {item_id}) at line {line}")]
    DuplicateKey {
        model_id: String,
        item_id: String,
        line: u64,
    },
    #[error("probability {value} out of range [0, 1] at line {line}")]
    OutOfRangeProbability { value: f64, line: u64 },
    #[error("non-finite score at line {line}")]
    NonFiniteScore { line: u64 },
    #[error("stance is {stance} but magnitude is missing at line {line}")]
    MagnitudeMissingForNonNeutral { stance: Stance, line: u64 },
    #[error("stance is neutral but magnitude is present at line {line}")]
    MagnitudePresentForNeutral { line: u64 },
    #[error("magnitude {value} out of range for scale {scale} at line {line}")]
    MagnitudeOutOfRange { value: f64, scale: Scale, line: u64 },
    #[error("value model sign violation: {field}")]
    SignViolation { field: &'static str },
    #[error("value model is all zeros")]
    AllZero,
    #[error("invalid value model json: {0}")]
    Json(#[from] serde_json::Error),
}

/// Binary class label. `Pos` is the positive class (e.g. "hateful").
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Neg,
    Pos,
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Label::Neg => write!(f, "neg"),
            Label::Pos => write!(f, "pos"),
        }
    }
}

/// Classifier output for one item: either a raw logit pair or a single
/// positive-class probability.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scores {
    Logits { neg: f64, pos: f64 },
    Probability { p_pos: f64 },
}

/// One classifier output on one item.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRecord {
    pub model_id: String,
    pub item_id: String,
    pub scores: Scores,
    pub true_label: Label,
}

impl PredictionRecord {
    /// Predicted label: argmax class. Ties break to `Pos` for determinism.
    pub fn predicted_label(&self) -> Label {
        match self.scores {
            Scores::Logits { neg, pos } => {
                if pos >= neg {
                    Label::Pos
                } else {
                    Label::Neg
                }
            }
            Scores::Probability { p_pos } => {
                if p_pos >= 0.5 {
                    Label::Pos
                } else {
                    Label::Neg
                }
            }
        }
    }

    /// Confidence in the predicted class, in [0.5, 1].
    ///
    /// For probability records this is `max(p_pos, 1 - p_pos)`; for logit
    /// records it is the softmax maximum at unit temperature.
    pub fn confidence(&self) -> f64 {
        let (c_neg, c_pos) = self.probability_pair();
        c_pos.max(c_neg)
    }

    /// Class probabilities `(c_neg, c_pos)` at unit temperature.
    pub fn probability_pair(&self) -> (f64, f64) {
        match self.scores {
            Scores::Logits { neg, pos } => softmax_pair(neg, pos),
            Scores::Probability { p_pos } => (1.0 - p_pos, p_pos),
        }
    }

    /// True when the predicted label matches the true label.
    pub fn is_correct(&self) -> bool {
        self.predicted_label() == self.true_label
    }
}

/// Numerically stable two-class softmax.
///
/// Extreme logit gaps would underflow one component to exactly 0; both
/// components are floored at 1e-15 so the result is always a valid
/// distribution with each side strictly inside (0, 1).
pub(crate) fn softmax_pair(z_neg: f64, z_pos: f64) -> (f64, f64) {
    const FLOOR: f64 = 1e-15;
    let m = z_neg.max(z_pos);
    let e_neg = (z_neg - m).exp();
    let e_pos = (z_pos - m).exp();
    let sum = e_neg + e_pos;
    let c_neg = e_neg / sum;
    let c_pos = e_pos / sum;
    if c_neg < FLOOR {
        (FLOOR, 1.0 - FLOOR)
    } else if c_pos < FLOOR {
        (1.0 - FLOOR, FLOOR)
    } else {
        (c_neg, c_pos)
    }
}

/// The five scenario values: positive for correct outcomes, negative
/// (costs) for incorrect outcomes and for rejection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValueModel {
    pub v_tp: f64,
    pub v_tn: f64,
    pub v_fp: f64,
    pub v_fn: f64,
    pub v_r: f64,
}

impl ValueModel {
    /// Builds a validated value model.
    ///
    /// Correct-outcome values must be >= 0 (zero is permitted for the
    /// baseline-expectation variant), incorrect-outcome and rejection
    /// values must be <= 0, and at least one value must be nonzero.
    pub fn new(v_tp: f64, v_tn: f64, v_fp: f64, v_fn: f64, v_r: f64) -> Result<Self, IngestError> {
        let model = ValueModel {
            v_tp,
            v_tn,
            v_fp,
            v_fn,
            v_r,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<(), IngestError> {
        for (field, v) in [
            ("v_tp", self.v_tp),
            ("v_tn", self.v_tn),
            ("v_fp", self.v_fp),
            ("v_fn", self.v_fn),
            ("v_r", self.v_r),
        ] {
            if !v.is_finite() {
                return Err(IngestError::SignViolation { field });
            }
        }
        if self.v_tp < 0.0 {
            return Err(IngestError::SignViolation { field: "v_tp" });
        }
        if self.v_tn < 0.0 {
            return Err(IngestError::SignViolation { field: "v_tn" });
        }
        if self.v_fp > 0.0 {
            return Err(IngestError::SignViolation { field: "v_fp" });
        }
        if self.v_fn > 0.0 {
            return Err(IngestError::SignViolation { field: "v_fn" });
        }
        if self.v_r > 0.0 {
            return Err(IngestError::SignViolation { field: "v_r" });
        }
        if self.v_tp == 0.0
            && self.v_tn == 0.0
            && self.v_fp == 0.0
            && self.v_fn == 0.0
            && self.v_r == 0.0
        {
            return Err(IngestError::AllZero);
        }
        Ok(())
    }

    /// All five values multiplied by `c`.
    pub fn scaled(&self, c: f64) -> ValueModel {
        ValueModel {
            v_tp: self.v_tp * c,
            v_tn: self.v_tn * c,
            v_fp: self.v_fp * c,
            v_fn: self.v_fn * c,
            v_r: self.v_r * c,
        }
    }
}

/// Measurement scale used by a survey participant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    /// Magnitude estimation: any positive number, normalized per subject.
    Me,
    /// Bounded 1..=100 scale.
    S100,
}

impl fmt::Display for Scale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scale::Me => write!(f, "me"),
            Scale::S100 => write!(f, "s100"),
        }
    }
}

/// Machine-decision scenario a survey question presents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    Tp,
    Tn,
    Fp,
    Fn,
    Rej,
}

impl Scenario {
    pub const ALL: [Scenario; 5] = [
        Scenario::Tp,
        Scenario::Tn,
        Scenario::Fp,
        Scenario::Fn,
        Scenario::Rej,
    ];
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scenario::Tp => write!(f, "tp"),
            Scenario::Tn => write!(f, "tn"),
            Scenario::Fp => write!(f, "fp"),
            Scenario::Fn => write!(f, "fn"),
            Scenario::Rej => write!(f, "rej"),
        }
    }
}

/// Participant stance toward the machine decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stance {
    Agree,
    Neutral,
    Disagree,
}

impl fmt::Display for Stance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Stance::Agree => write!(f, "agree"),
            Stance::Neutral => write!(f, "neutral"),
            Stance::Disagree => write!(f, "disagree"),
        }
    }
}

/// Participant's own hatefulness judgment of the post shown.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HatefulJudgment {
    Hateful,
    NotHateful,
}

/// One participant's judgment of one scenario question.
#[derive(Debug, Clone, PartialEq)]
pub struct SurveyResponse {
    pub participant_id: String,
    pub scale: Scale,
    pub question_id: String,
    pub scenario: Scenario,
    pub hateful_judgment: HatefulJudgment,
    pub stance: Stance,
    /// Present iff stance is not neutral; positive.
    pub magnitude: Option<f64>,
    /// Failed attention or warm-up checks; retained but skipped by statistics.
    pub excluded: bool,
}

/// Input file format for prediction records.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FileFormat {
    Csv,
    Json,
}

// ── predictions ──────────────────────────────────────────────────────────

/// Raw row shared by the CSV and JSON prediction schemas.
///
/// `score_a` holds the negative-class logit (or `p_pos` for probability
/// records); `score_b` holds the positive-class logit and stays empty for
/// probability records.
#[derive(Debug, Serialize, Deserialize)]
struct PredictionRow {
    model_id: String,
    item_id: String,
    score_kind: String,
    score_a: f64,
    score_b: Option<f64>,
    true_label: String,
}

fn parse_label(s: &str, line: u64) -> Result<Label, IngestError> {
    match s.trim().to_ascii_lowercase().as_str() {
        "pos" => Ok(Label::Pos),
        "neg" => Ok(Label::Neg),
        other => Err(IngestError::MalformedRow {
            line,
            reason: format!("unknown label {other:?} (expected pos or neg)"),
        }),
    }
}

fn record_from_row(row: PredictionRow, line: u64) -> Result<PredictionRecord, IngestError> {
    let true_label = parse_label(&row.true_label, line)?;
    let scores = match row.score_kind.trim().to_ascii_lowercase().as_str() {
        "probability" => {
            if row.score_b.is_some() {
                return Err(IngestError::MalformedRow {
                    line,
                    reason: "probability records must leave score_b empty".into(),
                });
            }
            let p = row.score_a;
            if !p.is_finite() {
                return Err(IngestError::NonFiniteScore { line });
            }
            if !(0.0..=1.0).contains(&p) {
                return Err(IngestError::OutOfRangeProbability { value: p, line });
            }
            Scores::Probability { p_pos: p }
        }
        "raw_logits" => {
            let pos = row.score_b.ok_or_else(|| IngestError::MalformedRow {
                line,
                reason: "raw_logits records require score_b".into(),
            })?;
            if !row.score_a.is_finite() || !pos.is_finite() {
                return Err(IngestError::NonFiniteScore { line });
            }
            Scores::Logits {
                neg: row.score_a,
                pos,
            }
        }
        other => {
            return Err(IngestError::MalformedRow {
                line,
                reason: format!("unknown score_kind {other:?}"),
            })
        }
    };
    Ok(PredictionRecord {
        model_id: row.model_id,
        item_id: row.item_id,
        scores,
        true_label,
    })
}

/// Enforces the (model_id, item_id) uniqueness invariant over a combined
/// record set, e.g. after concatenating several files.
pub fn ensure_unique_keys(records: &[PredictionRecord]) -> Result<(), IngestError> {
    let mut seen = HashSet::with_capacity(records.len());
    for (i, r) in records.iter().enumerate() {
        if !seen.insert((r.model_id.as_str(), r.item_id.as_str())) {
            return Err(IngestError::DuplicateKey {
                model_id: r.model_id.clone(),
                item_id: r.item_id.clone(),
                line: i as u64 + 2,
            });
        }
    }
    Ok(())
}

/// Parses prediction records from a file. Row order is preserved.
pub fn parse_predictions(
    path: impl AsRef<Path>,
    format: FileFormat,
) -> Result<Vec<PredictionRecord>, IngestError> {
    let file = File::open(path)?;
    parse_predictions_reader(file, format)
}

/// Parses prediction records from any reader.
pub fn parse_predictions_reader(
    reader: impl Read,
    format: FileFormat,
) -> Result<Vec<PredictionRecord>, IngestError> {
    let records = match format {
        FileFormat::Csv => {
            let mut csv = csv::ReaderBuilder::new()
                .has_headers(true)
                .from_reader(reader);
            let mut out = Vec::new();
            for result in csv.deserialize::<PredictionRow>() {
                let line = out.len() as u64 + 2; // 1-based, after the header
                let row = result.map_err(|e| IngestError::MalformedRow {
                    line,
                    reason: e.to_string(),
                })?;
                out.push(record_from_row(row, line)?);
            }
            out
        }
        FileFormat::Json => {
            let rows: Vec<PredictionRow> = serde_json::from_reader(reader)?;
            rows.into_iter()
                .enumerate()
                .map(|(i, row)| record_from_row(row, i as u64 + 1))
                .collect::<Result<Vec<_>, _>>()?
        }
    };
    ensure_unique_keys(&records)?;
    Ok(records)
}

/// Writes prediction records in the CSV schema accepted by
/// [`parse_predictions`]. Floats use the shortest round-trip representation,
/// so parse-write-parse is lossless.
pub fn write_predictions_csv(
    mut writer: impl Write,
    records: &[PredictionRecord],
) -> Result<(), IngestError> {
    writeln!(
        writer,
        "model_id,item_id,score_kind,score_a,score_b,true_label"
    )?;
    for r in records {
        let (kind, a, b) = match r.scores {
            Scores::Probability { p_pos } => ("probability", p_pos, String::new()),
            Scores::Logits { neg, pos } => ("raw_logits", neg, format!("{pos}")),
        };
        writeln!(
            writer,
            "{},{},{},{},{},{}",
            csv_field(&r.model_id),
            csv_field(&r.item_id),
            kind,
            a,
            b,
            r.true_label
        )?;
    }
    Ok(())
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

// ── survey ───────────────────────────────────────────────────────────────

#[derive(Debug, Deserialize)]
struct SurveyRow {
    participant_id: String,
    scale: String,
    question_id: String,
    scenario: String,
    hateful_judgment: String,
    stance: String,
    magnitude: Option<f64>,
    excluded: bool,
}

fn survey_from_row(row: SurveyRow, line: u64) -> Result<SurveyResponse, IngestError> {
    let scale = match row.scale.trim().to_ascii_lowercase().as_str() {
        "me" => Scale::Me,
        "s100" => Scale::S100,
        other => {
            return Err(IngestError::MalformedRow {
                line,
                reason: format!("unknown scale {other:?} (expected me or s100)"),
            })
        }
    };
    let scenario = match row.scenario.trim().to_ascii_lowercase().as_str() {
        "tp" => Scenario::Tp,
        "tn" => Scenario::Tn,
        "fp" => Scenario::Fp,
        "fn" => Scenario::Fn,
        "rej" => Scenario::Rej,
        other => {
            return Err(IngestError::MalformedRow {
                line,
                reason: format!("unknown scenario {other:?}"),
            })
        }
    };
    let hateful_judgment = match row.hateful_judgment.trim().to_ascii_lowercase().as_str() {
        "hateful" => HatefulJudgment::Hateful,
        "not_hateful" => HatefulJudgment::NotHateful,
        other => {
            return Err(IngestError::MalformedRow {
                line,
                reason: format!("unknown hateful_judgment {other:?}"),
            })
        }
    };
    let stance = match row.stance.trim().to_ascii_lowercase().as_str() {
        "agree" => Stance::Agree,
        "neutral" => Stance::Neutral,
        "disagree" => Stance::Disagree,
        other => {
            return Err(IngestError::MalformedRow {
                line,
                reason: format!("unknown stance {other:?}"),
            })
        }
    };
    match (stance, row.magnitude) {
        (Stance::Neutral, Some(_)) => return Err(IngestError::MagnitudePresentForNeutral { line }),
        (Stance::Neutral, None) => {}
        (s, None) => return Err(IngestError::MagnitudeMissingForNonNeutral { stance: s, line }),
        (_, Some(m)) => {
            if !m.is_finite() || m <= 0.0 {
                return Err(IngestError::MalformedRow {
                    line,
                    reason: format!("magnitude must be a positive finite number, got {m}"),
                });
            }
            if scale == Scale::S100 && !(1.0..=100.0).contains(&m) {
                return Err(IngestError::MagnitudeOutOfRange {
                    value: m,
                    scale,
                    line,
                });
            }
        }
    }
    Ok(SurveyResponse {
        participant_id: row.participant_id,
        scale,
        question_id: row.question_id,
        scenario,
        hateful_judgment,
        stance,
        magnitude: row.magnitude,
        excluded: row.excluded,
    })
}

/// Parses survey responses. Rows flagged `excluded` are kept in memory so
/// counts reconcile, but downstream statistics skip them.
pub fn parse_survey(path: impl AsRef<Path>) -> Result<Vec<SurveyResponse>, IngestError> {
    let file = File::open(path)?;
    parse_survey_reader(file)
}

/// Parses survey responses from any reader.
pub fn parse_survey_reader(reader: impl Read) -> Result<Vec<SurveyResponse>, IngestError> {
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let mut out = Vec::new();
    for result in csv.deserialize::<SurveyRow>() {
        let line = out.len() as u64 + 2;
        let row = result.map_err(|e| IngestError::MalformedRow {
            line,
            reason: e.to_string(),
        })?;
        out.push(survey_from_row(row, line)?);
    }
    Ok(out)
}

/// Writes survey responses in the CSV schema accepted by [`parse_survey`].
pub fn write_survey_csv(
    mut writer: impl Write,
    responses: &[SurveyResponse],
) -> Result<(), IngestError> {
    writeln!(
        writer,
        "participant_id,scale,question_id,scenario,hateful_judgment,stance,magnitude,excluded"
    )?;
    for r in responses {
        let judgment = match r.hateful_judgment {
            HatefulJudgment::Hateful => "hateful",
            HatefulJudgment::NotHateful => "not_hateful",
        };
        let magnitude = r.magnitude.map(|m| format!("{m}")).unwrap_or_default();
        writeln!(
            writer,
            "{},{},{},{},{},{},{},{}",
            csv_field(&r.participant_id),
            r.scale,
            csv_field(&r.question_id),
            r.scenario,
            judgment,
            r.stance,
            magnitude,
            r.excluded
        )?;
    }
    Ok(())
}

// ── value model ──────────────────────────────────────────────────────────

/// Parses and validates a value model from a JSON file with keys
/// `v_tp, v_tn, v_fp, v_fn, v_r`.
pub fn parse_value_model(path: impl AsRef<Path>) -> Result<ValueModel, IngestError> {
    let file = File::open(path)?;
    parse_value_model_reader(file)
}

/// Parses a value model from any reader.
pub fn parse_value_model_reader(reader: impl Read) -> Result<ValueModel, IngestError> {
    let model: ValueModel = serde_json::from_reader(reader)?;
    model.validate()?;
    Ok(model)
}
