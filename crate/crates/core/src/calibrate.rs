//! Temperature scaling so that confidence approximates correctness
//! probability.
//!
//! A single scalar `T` divides the logits before the softmax. `T` is fitted
//! by minimizing the mean negative log-likelihood on a caller-supplied
//! fitting set; the argmax class is preserved for every `T > 0`, so
//! calibration never changes predictions, only confidences.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{softmax_pair, Label, PredictionRecord, Scores};

/// Search bounds for the temperature, in log space.
const LOG_T_MIN: f64 = -4.0;
const LOG_T_MAX: f64 = 4.0;
/// Absolute tolerance of the golden-section search, in log T.
const LOG_T_TOL: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum CalibrateError {
    #[error("need at least 2 records to fit a temperature, got {0}")]
    TooFewRecords(usize),
    #[error("fitting set contains only the {0} class")]
    SingleClassOnly(Label),
    #[error("record carries a probability, not raw logits; it cannot be re-calibrated")]
    ProbabilityKindUnsupported,
    #[error("no records")]
    EmptyInput,
    #[error("bins must be >= 1")]
    BadBins,
}

/// A fitted temperature together with the NLL it achieved.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationModel {
    /// Fitted temperature, always > 0.
    pub temperature: f64,
    /// Mean negative log-likelihood at the fitted temperature.
    pub fit_nll: f64,
    /// Mean negative log-likelihood at `T = 1` on the same fitting set.
    pub nll_at_unit: f64,
    /// The search hit a boundary of `T in [e^-4, e^4]`; worth a warning in
    /// reports, not an error.
    pub at_search_bound: bool,
}

fn logits_of(record: &PredictionRecord) -> Result<(f64, f64), CalibrateError> {
    match record.scores {
        Scores::Logits { neg, pos } => Ok((neg, pos)),
        Scores::Probability { .. } => Err(CalibrateError::ProbabilityKindUnsupported),
    }
}

/// Mean negative log-likelihood of `softmax(logits / T)` against true labels.
pub fn mean_nll(records: &[PredictionRecord], temperature: f64) -> Result<f64, CalibrateError> {
    if records.is_empty() {
        return Err(CalibrateError::EmptyInput);
    }
    let mut total = 0.0;
    for r in records {
        let (neg, pos) = logits_of(r)?;
        let (c_neg, c_pos) = softmax_pair(neg / temperature, pos / temperature);
        let p_true = match r.true_label {
            Label::Neg => c_neg,
            Label::Pos => c_pos,
        };
        total -= p_true.max(1e-300).ln();
    }
    Ok(total / records.len() as f64)
}

/// Fits the temperature by golden-section search on `log T`.
///
/// The NLL is smooth and unimodal in `log T` in practice; the search runs to
/// an absolute tolerance of 1e-6 in log space. The fit never returns a
/// temperature worse than `T = 1` on the fitting set.
pub fn fit_temperature(records: &[PredictionRecord]) -> Result<CalibrationModel, CalibrateError> {
    if records.len() < 2 {
        return Err(CalibrateError::TooFewRecords(records.len()));
    }
    let mut has_pos = false;
    let mut has_neg = false;
    for r in records {
        logits_of(r)?;
        match r.true_label {
            Label::Pos => has_pos = true,
            Label::Neg => has_neg = true,
        }
    }
    if !has_neg {
        return Err(CalibrateError::SingleClassOnly(Label::Pos));
    }
    if !has_pos {
        return Err(CalibrateError::SingleClassOnly(Label::Neg));
    }

    let nll_at = |log_t: f64| mean_nll(records, log_t.exp()).expect("records checked non-empty");

    let inv_phi = (5.0_f64.sqrt() - 1.0) / 2.0;
    let mut a = LOG_T_MIN;
    let mut b = LOG_T_MAX;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = nll_at(c);
    let mut fd = nll_at(d);
    while b - a > LOG_T_TOL {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = nll_at(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = nll_at(d);
        }
    }
    let log_t = 0.5 * (a + b);
    let mut temperature = log_t.exp();
    let mut fit_nll = nll_at(log_t);
    let nll_at_unit = mean_nll(records, 1.0)?;
    if nll_at_unit < fit_nll {
        temperature = 1.0;
        fit_nll = nll_at_unit;
    }
    let at_search_bound = (log_t - LOG_T_MIN).abs() < 1e-3 || (LOG_T_MAX - log_t).abs() < 1e-3;
    Ok(CalibrationModel {
        temperature,
        fit_nll,
        nll_at_unit,
        at_search_bound,
    })
}

/// Calibrated confidence pair `(c_neg, c_pos)` for one logit record.
///
/// The components are each in (0, 1), sum to 1, and the argmax class equals
/// the raw-logit argmax.
pub fn apply_temperature(
    record: &PredictionRecord,
    model: &CalibrationModel,
) -> Result<(f64, f64), CalibrateError> {
    let (neg, pos) = logits_of(record)?;
    Ok(softmax_pair(
        neg / model.temperature,
        pos / model.temperature,
    ))
}

/// Maps logit records to probability-kind records with calibrated `p_pos`.
pub fn calibrate_records(
    records: &[PredictionRecord],
    model: &CalibrationModel,
) -> Result<Vec<PredictionRecord>, CalibrateError> {
    records
        .iter()
        .map(|r| {
            let (_, c_pos) = apply_temperature(r, model)?;
            Ok(PredictionRecord {
                model_id: r.model_id.clone(),
                item_id: r.item_id.clone(),
                scores: Scores::Probability { p_pos: c_pos },
                true_label: r.true_label,
            })
        })
        .collect()
}

/// `(confidence, correct)` pairs for ECE, at unit temperature.
pub fn confidence_samples(records: &[PredictionRecord]) -> Vec<(f64, bool)> {
    records
        .iter()
        .map(|r| (r.confidence(), r.is_correct()))
        .collect()
}

/// Expected calibration error over equal-width confidence bins on [0.5, 1].
///
/// `ECE = sum over bins of (|bin| / N) * |bin accuracy - bin mean confidence|`.
pub fn expected_calibration_error(
    samples: &[(f64, bool)],
    bins: usize,
) -> Result<f64, CalibrateError> {
    if samples.is_empty() {
        return Err(CalibrateError::EmptyInput);
    }
    if bins == 0 {
        return Err(CalibrateError::BadBins);
    }
    let width = 0.5 / bins as f64;
    let mut conf_sum = vec![0.0; bins];
    let mut correct = vec![0usize; bins];
    let mut count = vec![0usize; bins];
    for &(confidence, is_correct) in samples {
        let idx = (((confidence - 0.5) / width) as usize).min(bins - 1);
        conf_sum[idx] += confidence;
        correct[idx] += usize::from(is_correct);
        count[idx] += 1;
    }
    let n = samples.len() as f64;
    let mut ece = 0.0;
    for i in 0..bins {
        if count[i] == 0 {
            continue;
        }
        let mean_conf = conf_sum[i] / count[i] as f64;
        let accuracy = correct[i] as f64 / count[i] as f64;
        ece += (count[i] as f64 / n) * (accuracy - mean_conf).abs();
    }
    Ok(ece)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn logit_record(neg: f64, pos: f64, truth: Label) -> PredictionRecord {
        PredictionRecord {
            model_id: "m".into(),
            item_id: format!("{neg}-{pos}-{truth}"),
            scores: Scores::Logits { neg, pos },
            true_label: truth,
        }
    }

    /// Synthetic records whose softmax confidence equals the empirical
    /// probability of being correct, with logits scaled by `scale`.
    fn calibrated_records(n: usize, scale: f64, seed: u64) -> Vec<PredictionRecord> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|i| {
                let confidence: f64 = rng.gen_range(0.5..1.0);
                let logit = (confidence / (1.0 - confidence)).ln();
                let predicted = if rng.gen_bool(0.5) {
                    Label::Pos
                } else {
                    Label::Neg
                };
                let truth = if rng.gen_bool(confidence) {
                    predicted
                } else {
                    match predicted {
                        Label::Pos => Label::Neg,
                        Label::Neg => Label::Pos,
                    }
                };
                let (neg, pos) = match predicted {
                    Label::Pos => (0.0, logit),
                    Label::Neg => (logit, 0.0),
                };
                PredictionRecord {
                    model_id: "m".into(),
                    item_id: format!("i{i}"),
                    scores: Scores::Logits {
                        neg: neg * scale,
                        pos: pos * scale,
                    },
                    true_label: truth,
                }
            })
            .collect()
    }

    #[test]
    fn calibrated_data_fits_near_unit_temperature() {
        let records = calibrated_records(10_000, 1.0, 7);
        let model = fit_temperature(&records).unwrap();
        assert!(
            (model.temperature - 1.0).abs() < 0.05,
            "T = {}",
            model.temperature
        );
        assert!(model.fit_nll <= model.nll_at_unit);
        assert!(!model.at_search_bound);
    }

    #[test]
    fn doubled_logits_fit_near_two() {
        let records = calibrated_records(10_000, 2.0, 7);
        let model = fit_temperature(&records).unwrap();
        assert!(
            (model.temperature - 2.0).abs() / 2.0 < 0.05,
            "T = {}",
            model.temperature
        );
    }

    #[test]
    fn single_class_is_rejected() {
        let records = vec![
            logit_record(0.0, 1.0, Label::Pos),
            logit_record(0.0, 2.0, Label::Pos),
        ];
        let err = fit_temperature(&records).unwrap_err();
        assert!(matches!(err, CalibrateError::SingleClassOnly(Label::Pos)));
    }

    #[test]
    fn probability_records_cannot_be_fitted() {
        let records = vec![
            PredictionRecord {
                model_id: "m".into(),
                item_id: "a".into(),
                scores: Scores::Probability { p_pos: 0.9 },
                true_label: Label::Pos,
            },
            PredictionRecord {
                model_id: "m".into(),
                item_id: "b".into(),
                scores: Scores::Probability { p_pos: 0.2 },
                true_label: Label::Neg,
            },
        ];
        assert!(matches!(
            fit_temperature(&records),
            Err(CalibrateError::ProbabilityKindUnsupported)
        ));
    }

    #[test]
    fn too_few_records() {
        let records = vec![logit_record(0.0, 1.0, Label::Pos)];
        assert!(matches!(
            fit_temperature(&records),
            Err(CalibrateError::TooFewRecords(1))
        ));
    }

    /// Dense-grid oracle: the golden-section minimum must agree with a brute
    /// grid scan of the NLL curve in log T.
    #[test]
    fn fit_matches_dense_grid_oracle() {
        for scale in [0.5, 1.0, 2.0, 4.0] {
            let records = calibrated_records(1_000, scale, 11);
            let model = fit_temperature(&records).unwrap();

            // Oracle: independent NLL evaluation on a dense grid.
            let oracle_nll = |t: f64| {
                let mut total = 0.0;
                for r in &records {
                    let (zn, zp) = match r.scores {
                        Scores::Logits { neg, pos } => (neg / t, pos / t),
                        _ => unreachable!(),
                    };
                    let m = zn.max(zp);
                    let en = (zn - m).exp();
                    let ep = (zp - m).exp();
                    let p = match r.true_label {
                        Label::Neg => en / (en + ep),
                        Label::Pos => ep / (en + ep),
                    };
                    total -= p.ln();
                }
                total / records.len() as f64
            };
            let points = 40_001;
            let mut best_t = 1.0;
            let mut best = f64::INFINITY;
            for i in 0..points {
                let log_t = LOG_T_MIN + (LOG_T_MAX - LOG_T_MIN) * i as f64 / (points - 1) as f64;
                let nll = oracle_nll(log_t.exp());
                if nll < best {
                    best = nll;
                    best_t = log_t.exp();
                }
            }
            assert!(
                (model.temperature - best_t).abs() < 1e-3,
                "scale {scale}: fitted {} vs grid {best_t}",
                model.temperature
            );
            assert!(model.fit_nll <= best + 1e-12);
        }
    }

    #[test]
    fn apply_temperature_hand_values() {
        let m = CalibrationModel {
            temperature: 1.0,
            fit_nll: 0.0,
            nll_at_unit: 0.0,
            at_search_bound: false,
        };
        // symmetric logits are 50/50 at any temperature
        let r = logit_record(0.0, 0.0, Label::Pos);
        for t in [0.1, 1.0, 7.3] {
            let model = CalibrationModel {
                temperature: t,
                ..m
            };
            assert_eq!(apply_temperature(&r, &model).unwrap(), (0.5, 0.5));
        }
        // softmax identity: (0, ln 3) at T = 1 -> (0.25, 0.75)
        let r = logit_record(0.0, 3.0_f64.ln(), Label::Pos);
        let (cn, cp) = apply_temperature(&r, &m).unwrap();
        assert_abs_diff_eq!(cn, 0.25, epsilon = 1e-12);
        assert_abs_diff_eq!(cp, 0.75, epsilon = 1e-12);
        // (0, ln 9) at T = 2 is the same distribution
        let r = logit_record(0.0, 9.0_f64.ln(), Label::Pos);
        let model = CalibrationModel {
            temperature: 2.0,
            ..m
        };
        let (cn, cp) = apply_temperature(&r, &model).unwrap();
        assert_abs_diff_eq!(cn, 0.25, epsilon = 1e-12);
        assert_abs_diff_eq!(cp, 0.75, epsilon = 1e-12);
    }

    #[test]
    fn argmax_invariance_and_distribution_validity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..500 {
            let neg = rng.gen_range(-30.0..30.0);
            let pos = rng.gen_range(-30.0..30.0);
            let r = logit_record(neg, pos, Label::Pos);
            let raw = r.predicted_label();
            for t in [0.02, 0.5, 1.0, 3.0, 50.0] {
                let model = CalibrationModel {
                    temperature: t,
                    fit_nll: 0.0,
                    nll_at_unit: 0.0,
                    at_search_bound: false,
                };
                let (cn, cp) = apply_temperature(&r, &model).unwrap();
                assert!((cn + cp - 1.0).abs() < 1e-12);
                assert!(cn > 0.0 && cn < 1.0 && cp > 0.0 && cp < 1.0);
                let calibrated = if cp >= cn { Label::Pos } else { Label::Neg };
                assert_eq!(calibrated, raw, "logits ({neg}, {pos}), T = {t}");
            }
        }
    }

    #[test]
    fn max_confidence_decays_monotonically_toward_half() {
        let r = logit_record(-1.3, 2.1, Label::Pos);
        let mut last = 1.0_f64;
        for i in 1..200 {
            let t = i as f64 * 0.5;
            let model = CalibrationModel {
                temperature: t,
                fit_nll: 0.0,
                nll_at_unit: 0.0,
                at_search_bound: false,
            };
            let (cn, cp) = apply_temperature(&r, &model).unwrap();
            let max = cn.max(cp);
            assert!(max < last, "T = {t}");
            assert!(max > 0.5);
            last = max;
        }
        assert!(last - 0.5 < 0.01);
    }

    #[test]
    fn ece_hand_values() {
        // perfectly confident and correct
        let all_good: Vec<(f64, bool)> = (0..10).map(|_| (1.0, true)).collect();
        assert_eq!(expected_calibration_error(&all_good, 10).unwrap(), 0.0);
        // perfectly confident and always wrong
        let all_bad: Vec<(f64, bool)> = (0..10).map(|_| (1.0, false)).collect();
        assert_eq!(expected_calibration_error(&all_bad, 10).unwrap(), 1.0);
        // (0.8 correct) + (0.8 wrong) in one bin: |0.5 - 0.8| = 0.3
        let mixed = vec![(0.8, true), (0.8, false)];
        assert_abs_diff_eq!(
            expected_calibration_error(&mixed, 1).unwrap(),
            0.3,
            epsilon = 1e-15
        );
    }

    #[test]
    fn ece_rejects_empty_and_zero_bins() {
        assert!(matches!(
            expected_calibration_error(&[], 5),
            Err(CalibrateError::EmptyInput)
        ));
        assert!(matches!(
            expected_calibration_error(&[(0.9, true)], 0),
            Err(CalibrateError::BadBins)
        ));
    }

    #[test]
    fn calibrate_records_produces_probability_records() {
        let records = calibrated_records(100, 2.0, 5);
        let model = fit_temperature(&records).unwrap();
        let calibrated = calibrate_records(&records, &model).unwrap();
        assert_eq!(calibrated.len(), records.len());
        for (raw, cal) in records.iter().zip(&calibrated) {
            assert!(matches!(cal.scores, Scores::Probability { .. }));
            assert_eq!(raw.predicted_label(), cal.predicted_label());
            assert_eq!(raw.item_id, cal.item_id);
        }
    }
}
