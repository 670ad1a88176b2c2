//! The reject option and the total-value function over rejection thresholds.
//!
//! A prediction is accepted when its confidence reaches the threshold for its
//! predicted class, otherwise it is rejected and deferred to a human. The
//! total value delivered at threshold `tau` is
//!
//! ```text
//! V(tau) = sum over accepted outcomes p of (V_p - V_r) * N_p
//!        + sum over rejected outcomes q of (V_r - V_q) * N_q
//! ```
//!
//! so every accepted decision is credited against the rejection cost and
//! every rejected decision is charged the rejection cost against what the
//! outcome would have been worth.
//!
//! Two threshold notions coexist:
//! * the empirical argmax of `V(tau)` over a grid (see [`sweep`]);
//! * the closed-form threshold `gamma / (gamma + 1)` for a calibrated
//!   classifier, where `gamma` is the cost-to-value ratio of a class
//!   (see [`theoretical_threshold`]).

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{Label, PredictionRecord, ValueModel};

#[derive(Debug, Error)]
pub enum RejectError {
    #[error("no records")]
    EmptyInput,
    #[error("grid step {0} outside (0, 0.25]")]
    BadStep(f64),
    #[error("threshold {0} outside [0.5, 1]")]
    InvalidThreshold(f64),
    #[error("theoretical threshold undefined: correct value for class {0} is zero")]
    UndefinedGamma(Label),
    #[error("need at least 2 models to compare, got {0}")]
    TooFewModels(usize),
    #[error("models {a} and {b} were evaluated on different item sets")]
    ItemSetMismatch { a: String, b: String },
}

/// Confusion-matrix cell of a single accepted prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Outcome {
    Tp,
    Tn,
    Fp,
    Fn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Accept,
    Reject,
}

/// Per-class rejection thresholds in [0.5, 1], plus an explicit reject-all
/// sentinel that rejects every decision regardless of confidence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RejectionPolicy {
    tau_pos: f64,
    tau_neg: f64,
    reject_all: bool,
}

impl RejectionPolicy {
    /// Single threshold applied to both classes.
    pub fn single(tau: f64) -> Result<Self, RejectError> {
        Self::per_class(tau, tau)
    }

    /// Distinct thresholds for positive and negative predictions.
    pub fn per_class(tau_pos: f64, tau_neg: f64) -> Result<Self, RejectError> {
        for tau in [tau_pos, tau_neg] {
            if !(0.5..=1.0).contains(&tau) {
                return Err(RejectError::InvalidThreshold(tau));
            }
        }
        Ok(RejectionPolicy {
            tau_pos,
            tau_neg,
            reject_all: false,
        })
    }

    /// The sentinel policy: every decision is rejected.
    pub fn reject_all() -> Self {
        RejectionPolicy {
            tau_pos: 1.0,
            tau_neg: 1.0,
            reject_all: true,
        }
    }

    pub fn tau_pos(&self) -> f64 {
        self.tau_pos
    }

    pub fn tau_neg(&self) -> f64 {
        self.tau_neg
    }

    pub fn is_reject_all(&self) -> bool {
        self.reject_all
    }

    fn tau_for(&self, label: Label) -> f64 {
        match label {
            Label::Pos => self.tau_pos,
            Label::Neg => self.tau_neg,
        }
    }
}

/// Accept iff the confidence reaches the threshold for the predicted class
/// (`c >= tau`, boundary inclusive) and the sentinel is off.
pub fn decide(confidence: f64, predicted: Label, policy: &RejectionPolicy) -> Decision {
    if policy.reject_all || confidence < policy.tau_for(predicted) {
        Decision::Reject
    } else {
        Decision::Accept
    }
}

/// Confusion-matrix cell of a record's (predicted, true) label pair.
pub fn classify_outcome(record: &PredictionRecord) -> Outcome {
    match (record.predicted_label(), record.true_label) {
        (Label::Pos, Label::Pos) => Outcome::Tp,
        (Label::Neg, Label::Neg) => Outcome::Tn,
        (Label::Pos, Label::Neg) => Outcome::Fp,
        (Label::Neg, Label::Pos) => Outcome::Fn,
    }
}

impl ValueModel {
    /// The scenario value of an outcome.
    pub fn value_of(&self, outcome: Outcome) -> f64 {
        match outcome {
            Outcome::Tp => self.v_tp,
            Outcome::Tn => self.v_tn,
            Outcome::Fp => self.v_fp,
            Outcome::Fn => self.v_fn,
        }
    }
}

/// Outcome counts for one side (accepted or rejected) of a policy.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeTally {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl OutcomeTally {
    pub fn get(&self, outcome: Outcome) -> u64 {
        match outcome {
            Outcome::Tp => self.tp,
            Outcome::Tn => self.tn,
            Outcome::Fp => self.fp,
            Outcome::Fn => self.fn_,
        }
    }

    fn add(&mut self, outcome: Outcome) {
        match outcome {
            Outcome::Tp => self.tp += 1,
            Outcome::Tn => self.tn += 1,
            Outcome::Fp => self.fp += 1,
            Outcome::Fn => self.fn_ += 1,
        }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }

    pub fn correct(&self) -> u64 {
        self.tp + self.tn
    }
}

/// Accepted and rejected outcome counts under one policy.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeCounts {
    pub accepted: OutcomeTally,
    pub rejected: OutcomeTally,
}

impl OutcomeCounts {
    pub fn total(&self) -> u64 {
        self.accepted.total() + self.rejected.total()
    }
}

/// Value, rejection rate, and accepted-prediction accuracy at one threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdReport {
    pub tau: f64,
    /// True for the sentinel point where every decision is rejected.
    pub reject_all: bool,
    pub total_value: f64,
    pub rejection_rate: f64,
    /// Absent when nothing was accepted; never reported as 0 or 1 in that case.
    pub accepted_accuracy: Option<f64>,
    pub counts: OutcomeCounts,
}

/// `V(tau)` over a threshold grid, with the optimal point singled out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueCurve {
    /// Reports at strictly increasing grid thresholds, then the sentinel.
    pub points: Vec<ThresholdReport>,
    /// The point with maximal total value; ties resolve to the smallest
    /// threshold (the sentinel loses all ties).
    pub argmax: ThresholdReport,
}

fn report_from_counts(
    tau: f64,
    reject_all: bool,
    counts: OutcomeCounts,
    model: &ValueModel,
) -> ThresholdReport {
    let mut total_value = 0.0;
    for outcome in [Outcome::Tp, Outcome::Tn, Outcome::Fp, Outcome::Fn] {
        let v = model.value_of(outcome);
        total_value += (v - model.v_r) * counts.accepted.get(outcome) as f64;
        total_value += (model.v_r - v) * counts.rejected.get(outcome) as f64;
    }
    let n = counts.total();
    let accepted_total = counts.accepted.total();
    let accepted_accuracy = if accepted_total == 0 {
        None
    } else {
        Some(counts.accepted.correct() as f64 / accepted_total as f64)
    };
    ThresholdReport {
        tau,
        reject_all,
        total_value,
        rejection_rate: counts.rejected.total() as f64 / n as f64,
        accepted_accuracy,
        counts,
    }
}

/// Evaluates one policy over a record set.
///
/// The total value accumulates per record in input order, term by term, so
/// it is bit-identical to a brute-force per-record evaluation of the value
/// formula. For per-class policies `tau` is reported as the positive-class
/// threshold; [`sweep_per_class`] reports both.
pub fn value_at(
    records: &[PredictionRecord],
    model: &ValueModel,
    policy: &RejectionPolicy,
) -> Result<ThresholdReport, RejectError> {
    if records.is_empty() {
        return Err(RejectError::EmptyInput);
    }
    let mut counts = OutcomeCounts::default();
    let mut total_value = 0.0;
    for record in records {
        let outcome = classify_outcome(record);
        let v = model.value_of(outcome);
        match decide(record.confidence(), record.predicted_label(), policy) {
            Decision::Accept => {
                counts.accepted.add(outcome);
                total_value += v - model.v_r;
            }
            Decision::Reject => {
                counts.rejected.add(outcome);
                total_value += model.v_r - v;
            }
        }
    }
    let mut report = report_from_counts(policy.tau_pos, policy.reject_all, counts, model);
    report.total_value = total_value;
    Ok(report)
}

/// Grid of thresholds `0.5, 0.5 + step, ..., 1.0`.
fn grid(step: f64) -> Vec<f64> {
    let mut taus = Vec::new();
    let mut i = 0u64;
    loop {
        let tau = 0.5 + i as f64 * step;
        if tau >= 1.0 - 1e-12 {
            break;
        }
        taus.push(tau);
        i += 1;
    }
    taus.push(1.0);
    taus
}

/// Records sorted by confidence with prefix outcome tallies, so the counts
/// at any threshold come from one binary search instead of a full pass.
struct SortedOutcomes {
    confidences: Vec<f64>,
    /// `prefix[i]` tallies the first `i` records in confidence order.
    prefix: Vec<OutcomeTally>,
}

impl SortedOutcomes {
    fn new<'a>(records: impl Iterator<Item = &'a PredictionRecord>) -> Self {
        let mut pairs: Vec<(f64, Outcome)> = records
            .map(|r| (r.confidence(), classify_outcome(r)))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut prefix = Vec::with_capacity(pairs.len() + 1);
        let mut tally = OutcomeTally::default();
        prefix.push(tally);
        for &(_, outcome) in &pairs {
            tally.add(outcome);
            prefix.push(tally);
        }
        SortedOutcomes {
            confidences: pairs.into_iter().map(|(c, _)| c).collect(),
            prefix,
        }
    }

    fn total(&self) -> OutcomeTally {
        *self.prefix.last().expect("prefix always has a root entry")
    }

    /// Tallies split into (rejected, accepted) at `tau`; accepted means
    /// confidence >= tau.
    fn split(&self, tau: f64) -> (OutcomeTally, OutcomeTally) {
        let cut = self.confidences.partition_point(|&c| c < tau);
        let rejected = self.prefix[cut];
        let all = self.total();
        let accepted = OutcomeTally {
            tp: all.tp - rejected.tp,
            tn: all.tn - rejected.tn,
            fp: all.fp - rejected.fp,
            fn_: all.fn_ - rejected.fn_,
        };
        (rejected, accepted)
    }
}

/// Computes `V(tau)` over the grid plus the reject-all sentinel.
///
/// The grid endpoint `tau = 1.0` follows the acceptance rule literally
/// (accept iff confidence >= 1.0); the sentinel realizes the reading where
/// the endpoint rejects everything. Both are reported.
pub fn sweep(
    records: &[PredictionRecord],
    model: &ValueModel,
    grid_step: f64,
) -> Result<ValueCurve, RejectError> {
    if records.is_empty() {
        return Err(RejectError::EmptyInput);
    }
    if !(grid_step > 0.0 && grid_step <= 0.25) {
        return Err(RejectError::BadStep(grid_step));
    }
    let sorted = SortedOutcomes::new(records.iter());
    let mut points: Vec<ThresholdReport> = grid(grid_step)
        .into_iter()
        .map(|tau| {
            let (rejected, accepted) = sorted.split(tau);
            report_from_counts(tau, false, OutcomeCounts { accepted, rejected }, model)
        })
        .collect();
    let sentinel_counts = OutcomeCounts {
        accepted: OutcomeTally::default(),
        rejected: sorted.total(),
    };
    points.push(report_from_counts(1.0, true, sentinel_counts, model));

    let argmax = points
        .iter()
        .max_by(|a, b| {
            a.total_value
                .partial_cmp(&b.total_value)
                .expect("total values are finite")
        })
        .expect("grid is never empty");
    // max_by returns the last maximum; rescan for the first to break ties
    // toward the smallest threshold.
    let argmax = points
        .iter()
        .find(|p| p.total_value == argmax.total_value)
        .expect("argmax value exists in points")
        .clone();
    Ok(ValueCurve { points, argmax })
}

/// One cell of a two-threshold sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerClassReport {
    pub tau_pos: f64,
    pub tau_neg: f64,
    pub total_value: f64,
    pub rejection_rate: f64,
    pub accepted_accuracy: Option<f64>,
    pub counts: OutcomeCounts,
}

/// `V(tau_pos, tau_neg)` over a two-dimensional grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerClassCurve {
    pub points: Vec<PerClassReport>,
    pub argmax: PerClassReport,
}

/// Sweeps independent thresholds for positive and negative predictions.
///
/// Cost grows quadratically with grid resolution; single-threshold sweeps
/// are the default everywhere else. Ties resolve to the first point in
/// row-major (tau_pos, then tau_neg) order, i.e. to smaller thresholds.
pub fn sweep_per_class(
    records: &[PredictionRecord],
    model: &ValueModel,
    grid_step: f64,
) -> Result<PerClassCurve, RejectError> {
    if records.is_empty() {
        return Err(RejectError::EmptyInput);
    }
    if !(grid_step > 0.0 && grid_step <= 0.25) {
        return Err(RejectError::BadStep(grid_step));
    }
    let pos = SortedOutcomes::new(records.iter().filter(|r| r.predicted_label() == Label::Pos));
    let neg = SortedOutcomes::new(records.iter().filter(|r| r.predicted_label() == Label::Neg));
    let taus = grid(grid_step);
    let n = records.len() as f64;
    let mut points = Vec::with_capacity(taus.len() * taus.len());
    for &tau_pos in &taus {
        let (rej_p, acc_p) = pos.split(tau_pos);
        for &tau_neg in &taus {
            let (rej_n, acc_n) = neg.split(tau_neg);
            let counts = OutcomeCounts {
                accepted: OutcomeTally {
                    tp: acc_p.tp + acc_n.tp,
                    tn: acc_p.tn + acc_n.tn,
                    fp: acc_p.fp + acc_n.fp,
                    fn_: acc_p.fn_ + acc_n.fn_,
                },
                rejected: OutcomeTally {
                    tp: rej_p.tp + rej_n.tp,
                    tn: rej_p.tn + rej_n.tn,
                    fp: rej_p.fp + rej_n.fp,
                    fn_: rej_p.fn_ + rej_n.fn_,
                },
            };
            let base = report_from_counts(tau_pos, false, counts, model);
            points.push(PerClassReport {
                tau_pos,
                tau_neg,
                total_value: base.total_value,
                rejection_rate: counts.rejected.total() as f64 / n,
                accepted_accuracy: base.accepted_accuracy,
                counts,
            });
        }
    }
    let best = points
        .iter()
        .map(|p| p.total_value)
        .fold(f64::NEG_INFINITY, f64::max);
    let argmax = points
        .iter()
        .find(|p| p.total_value == best)
        .expect("points non-empty")
        .clone();
    Ok(PerClassCurve { points, argmax })
}

/// Closed-form optimal threshold `gamma / (gamma + 1)` for a class, where
/// `gamma` is how many times worse the class's incorrect outcome is than its
/// correct outcome is good. Only the ratio matters, so the result is
/// invariant under jointly scaling both values.
pub fn theoretical_threshold(model: &ValueModel, class: Label) -> Result<f64, RejectError> {
    let (correct, incorrect) = match class {
        Label::Pos => (model.v_tp, model.v_fp),
        Label::Neg => (model.v_tn, model.v_fn),
    };
    if correct == 0.0 {
        return Err(RejectError::UndefinedGamma(class));
    }
    let gamma = incorrect.abs() / correct;
    Ok(gamma / (gamma + 1.0))
}

/// Per-model scores used for value-based model selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelComparison {
    pub model_id: String,
    /// Threshold of the value-optimal sweep point.
    pub tau_opt: f64,
    /// Whether the optimum is the reject-all sentinel.
    pub reject_all_opt: bool,
    /// Total value at the optimal threshold.
    pub value_at_opt: f64,
    pub rejection_rate_at_opt: f64,
    pub accepted_accuracy_at_opt: Option<f64>,
    /// Plain accuracy with every prediction accepted (tau = 0.5).
    pub accuracy: f64,
}

/// Ranking of models by delivered value versus by plain accuracy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub models: Vec<ModelComparison>,
    pub ranking_by_value: Vec<String>,
    pub ranking_by_accuracy: Vec<String>,
    /// The two rankings disagree on the top model.
    pub rankings_diverge: bool,
}

/// Compares every model present in `records` (grouped by `model_id`) on the
/// same item set: value at the optimal threshold versus plain accuracy.
///
/// Ties in either ranking break lexicographically by model id.
pub fn compare_models(
    records: &[PredictionRecord],
    model: &ValueModel,
    grid_step: f64,
) -> Result<ComparisonReport, RejectError> {
    let mut groups: Vec<(String, Vec<&PredictionRecord>)> = Vec::new();
    for record in records {
        match groups.iter_mut().find(|(id, _)| *id == record.model_id) {
            Some((_, group)) => group.push(record),
            None => groups.push((record.model_id.clone(), vec![record])),
        }
    }
    groups.sort_by(|a, b| a.0.cmp(&b.0));
    if groups.len() < 2 {
        return Err(RejectError::TooFewModels(groups.len()));
    }

    let item_sets: Vec<BTreeSet<&str>> = groups
        .iter()
        .map(|(_, g)| g.iter().map(|r| r.item_id.as_str()).collect())
        .collect();
    for i in 1..groups.len() {
        if item_sets[i] != item_sets[0] {
            return Err(RejectError::ItemSetMismatch {
                a: groups[0].0.clone(),
                b: groups[i].0.clone(),
            });
        }
    }

    let mut models = Vec::with_capacity(groups.len());
    for (model_id, group) in &groups {
        let owned: Vec<PredictionRecord> = group.iter().map(|&r| r.clone()).collect();
        let curve = sweep(&owned, model, grid_step)?;
        let accept_all = value_at(&owned, model, &RejectionPolicy::single(0.5)?)?;
        let accuracy = accept_all
            .accepted_accuracy
            .expect("tau = 0.5 accepts every binary prediction");
        models.push(ModelComparison {
            model_id: model_id.clone(),
            tau_opt: curve.argmax.tau,
            reject_all_opt: curve.argmax.reject_all,
            value_at_opt: curve.argmax.total_value,
            rejection_rate_at_opt: curve.argmax.rejection_rate,
            accepted_accuracy_at_opt: curve.argmax.accepted_accuracy,
            accuracy,
        });
    }

    let mut ranking_by_value: Vec<&ModelComparison> = models.iter().collect();
    ranking_by_value.sort_by(|a, b| {
        b.value_at_opt
            .total_cmp(&a.value_at_opt)
            .then_with(|| a.model_id.cmp(&b.model_id))
    });
    let mut ranking_by_accuracy: Vec<&ModelComparison> = models.iter().collect();
    ranking_by_accuracy.sort_by(|a, b| {
        b.accuracy
            .total_cmp(&a.accuracy)
            .then_with(|| a.model_id.cmp(&b.model_id))
    });
    let ranking_by_value: Vec<String> = ranking_by_value
        .iter()
        .map(|m| m.model_id.clone())
        .collect();
    let ranking_by_accuracy: Vec<String> = ranking_by_accuracy
        .iter()
        .map(|m| m.model_id.clone())
        .collect();
    let rankings_diverge = ranking_by_value[0] != ranking_by_accuracy[0];
    Ok(ComparisonReport {
        models,
        ranking_by_value,
        ranking_by_accuracy,
        rankings_diverge,
    })
}
