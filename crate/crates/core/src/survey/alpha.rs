//! Krippendorff's alpha: chance-corrected inter-rater reliability.
//!
//! `alpha = 1 - D_o / D_e`, where the observed disagreement `D_o` averages
//! pairwise distances within items and the expected disagreement `D_e`
//! averages distances over all pairable values regardless of item. Items
//! with fewer than two ratings cannot form pairs and are skipped. Alpha is
//! 1 at perfect agreement, 0 at chance level, and negative under systematic
//! disagreement.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{NormalizedResponse, SurveyError};

/// Distance function between two rating values.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlphaMetric {
    /// 0 when equal, 1 otherwise.
    Nominal,
    /// Squared difference of cumulative rank positions.
    Ordinal,
    /// Squared difference. The default for normalized survey values.
    #[default]
    Interval,
    /// Squared relative difference; requires non-negative ratings.
    Ratio,
}

/// A raters-by-items matrix with missing entries.
#[derive(Debug, Clone, PartialEq)]
pub struct ReliabilityData {
    /// `values[rater][item]`; `None` marks a missing rating.
    values: Vec<Vec<Option<f64>>>,
}

impl ReliabilityData {
    /// Builds from an explicit matrix. Rows must share one length and all
    /// present values must be finite.
    pub fn new(values: Vec<Vec<Option<f64>>>) -> Result<Self, SurveyError> {
        if let Some(first) = values.first() {
            let width = first.len();
            for row in &values {
                if row.len() != width {
                    return Err(SurveyError::LengthMismatch(width, row.len()));
                }
            }
        }
        if values.iter().flatten().flatten().any(|v| !v.is_finite()) {
            return Err(SurveyError::NonFiniteValue);
        }
        Ok(ReliabilityData { values })
    }

    /// Participants-by-questions matrix from normalized responses; cells a
    /// participant never answered stay missing.
    pub fn from_normalized<'a>(
        responses: impl Iterator<Item = &'a NormalizedResponse>,
    ) -> ReliabilityData {
        let responses: Vec<&NormalizedResponse> = responses.collect();
        let mut participants: Vec<&str> = Vec::new();
        let mut questions: Vec<&str> = Vec::new();
        for r in &responses {
            if !participants.contains(&r.participant_id.as_str()) {
                participants.push(&r.participant_id);
            }
            if !questions.contains(&r.question_id.as_str()) {
                questions.push(&r.question_id);
            }
        }
        participants.sort_unstable();
        questions.sort_unstable();
        let mut values = vec![vec![None; questions.len()]; participants.len()];
        for r in &responses {
            let row = participants
                .binary_search(&r.participant_id.as_str())
                .expect("participant listed above");
            let col = questions
                .binary_search(&r.question_id.as_str())
                .expect("question listed above");
            values[row][col] = Some(r.signed_value);
        }
        ReliabilityData { values }
    }

    /// Present values grouped by item (column).
    fn units(&self) -> Vec<Vec<f64>> {
        let width = self.values.first().map_or(0, Vec::len);
        (0..width)
            .map(|col| {
                self.values
                    .iter()
                    .filter_map(|row| row[col])
                    .collect::<Vec<f64>>()
            })
            .collect()
    }
}

/// Stable key for grouping equal f64 ratings.
fn key(v: f64) -> u64 {
    // input is validated finite; normalize -0.0 so it groups with 0.0
    if v == 0.0 {
        0.0f64.to_bits()
    } else {
        v.to_bits()
    }
}

struct Classes {
    /// Distinct rating values in ascending order.
    values: Vec<f64>,
    /// Global coincidence frequency of each distinct value.
    freq: Vec<f64>,
    /// Cumulative frequency up to and including each class (for ordinal).
    cumulative: Vec<f64>,
}

impl Classes {
    fn build(units: &[Vec<f64>]) -> Classes {
        let mut counts: BTreeMap<u64, (f64, f64)> = BTreeMap::new();
        for unit in units {
            for &v in unit {
                let entry = counts.entry(key(v)).or_insert((v, 0.0));
                entry.1 += 1.0;
            }
        }
        let mut pairs: Vec<(f64, f64)> = counts.into_values().collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let values: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let freq: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        let mut cumulative = Vec::with_capacity(freq.len());
        let mut acc = 0.0;
        for &f in &freq {
            acc += f;
            cumulative.push(acc);
        }
        Classes {
            values,
            freq,
            cumulative,
        }
    }

    fn index_of(&self, v: f64) -> usize {
        self.values
            .binary_search_by(|probe| probe.total_cmp(&v))
            .expect("every rating is registered as a class")
    }

    /// Squared distance between class `c` and class `k` under the metric.
    fn distance(&self, c: usize, k: usize, metric: AlphaMetric) -> f64 {
        if c == k {
            return 0.0;
        }
        match metric {
            AlphaMetric::Nominal => 1.0,
            AlphaMetric::Interval => {
                let d = self.values[c] - self.values[k];
                d * d
            }
            AlphaMetric::Ratio => {
                let (a, b) = (self.values[c], self.values[k]);
                let denom = a + b;
                if denom == 0.0 {
                    0.0
                } else {
                    let d = (a - b) / denom;
                    d * d
                }
            }
            AlphaMetric::Ordinal => {
                let (lo, hi) = if c < k { (c, k) } else { (k, c) };
                // sum of frequencies of every class from lo to hi, minus
                // half the endpoints
                let span = self.cumulative[hi] - if lo > 0 { self.cumulative[lo - 1] } else { 0.0 };
                let d = span - (self.freq[lo] + self.freq[hi]) / 2.0;
                d * d
            }
        }
    }
}

/// Computes Krippendorff's alpha over a raters-by-items matrix.
///
/// Works on pairwise coincidences within items: each item with `n_u >= 2`
/// ratings contributes its ordered value pairs weighted by `1 / (n_u - 1)`.
/// Requires at least two such items; returns
/// [`SurveyError::ZeroExpectedDisagreement`] when every rating in the matrix
/// is identical.
pub fn krippendorff_alpha(data: &ReliabilityData, metric: AlphaMetric) -> Result<f64, SurveyError> {
    let units: Vec<Vec<f64>> = data.units().into_iter().filter(|u| u.len() >= 2).collect();
    if units.len() < 2 {
        return Err(SurveyError::InsufficientData);
    }
    if metric == AlphaMetric::Ratio && units.iter().flatten().any(|&v| v < 0.0) {
        return Err(SurveyError::NonFiniteValue);
    }
    let classes = Classes::build(&units);
    let n: f64 = classes.freq.iter().sum();

    // expected disagreement over all pairable values
    let mut de_num = 0.0;
    for c in 0..classes.values.len() {
        for k in (c + 1)..classes.values.len() {
            de_num += 2.0 * classes.freq[c] * classes.freq[k] * classes.distance(c, k, metric);
        }
    }
    if de_num == 0.0 {
        return Err(SurveyError::ZeroExpectedDisagreement);
    }

    // observed disagreement within units, via per-unit class frequencies
    let mut do_sum = 0.0;
    for unit in &units {
        let mut unit_freq: BTreeMap<usize, f64> = BTreeMap::new();
        for &v in unit {
            *unit_freq.entry(classes.index_of(v)).or_insert(0.0) += 1.0;
        }
        let idx: Vec<(usize, f64)> = unit_freq.into_iter().collect();
        let mut within = 0.0;
        for (i, &(c, fc)) in idx.iter().enumerate() {
            for &(k, fk) in &idx[i + 1..] {
                within += 2.0 * fc * fk * classes.distance(c, k, metric);
            }
        }
        do_sum += within / (unit.len() as f64 - 1.0);
    }

    let d_o = do_sum / n;
    let d_e = de_num / (n * (n - 1.0));
    Ok(1.0 - d_o / d_e)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(rows: &[&[Option<f64>]]) -> ReliabilityData {
        ReliabilityData::new(rows.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    /// Literal pairwise-enumeration oracle: loops over every ordered pair of
    /// ratings, within items for D_o and across everything for D_e.
    fn alpha_oracle(values: &[Vec<Option<f64>>], metric: AlphaMetric) -> Option<f64> {
        let n_items = values.first()?.len();
        let units: Vec<Vec<f64>> = (0..n_items)
            .map(|col| values.iter().filter_map(|row| row[col]).collect())
            .filter(|u: &Vec<f64>| u.len() >= 2)
            .collect();
        if units.len() < 2 {
            return None;
        }
        let all: Vec<f64> = units.iter().flatten().copied().collect();
        let n = all.len() as f64;
        let delta = |a: f64, b: f64| -> f64 {
            match metric {
                AlphaMetric::Nominal => {
                    if a == b {
                        0.0
                    } else {
                        1.0
                    }
                }
                AlphaMetric::Interval => (a - b) * (a - b),
                AlphaMetric::Ratio => {
                    if a + b == 0.0 {
                        0.0
                    } else {
                        ((a - b) / (a + b)).powi(2)
                    }
                }
                AlphaMetric::Ordinal => {
                    if a == b {
                        return 0.0;
                    }
                    let (lo, hi) = if a < b { (a, b) } else { (b, a) };
                    let between: f64 = all.iter().filter(|&&v| v > lo && v < hi).count() as f64;
                    let n_lo = all.iter().filter(|&&v| v == lo).count() as f64;
                    let n_hi = all.iter().filter(|&&v| v == hi).count() as f64;
                    let d = between + (n_lo + n_hi) / 2.0;
                    d * d
                }
            }
        };
        let mut do_sum = 0.0;
        for unit in &units {
            let mut within = 0.0;
            for i in 0..unit.len() {
                for j in 0..unit.len() {
                    if i != j {
                        within += delta(unit[i], unit[j]);
                    }
                }
            }
            do_sum += within / (unit.len() as f64 - 1.0);
        }
        let mut de_sum = 0.0;
        for i in 0..all.len() {
            for j in 0..all.len() {
                if i != j {
                    de_sum += delta(all[i], all[j]);
                }
            }
        }
        if de_sum == 0.0 {
            return None;
        }
        let d_o = do_sum / n;
        let d_e = de_sum / (n * (n - 1.0));
        Some(1.0 - d_o / d_e)
    }

    #[test]
    fn perfect_agreement_is_exactly_one() {
        let data = matrix(&[
            &[Some(1.0), Some(2.0), Some(3.0), Some(1.0), Some(2.0)],
            &[Some(1.0), Some(2.0), Some(3.0), Some(1.0), Some(2.0)],
        ]);
        for metric in [
            AlphaMetric::Nominal,
            AlphaMetric::Interval,
            AlphaMetric::Ordinal,
        ] {
            assert_eq!(krippendorff_alpha(&data, metric).unwrap(), 1.0);
        }
    }

    #[test]
    fn hand_computed_systematic_disagreement() {
        // two units, raters always split {1, 2}: D_o = 1, D_e = 2/3
        let data = matrix(&[&[Some(1.0), Some(2.0)], &[Some(2.0), Some(1.0)]]);
        let alpha = krippendorff_alpha(&data, AlphaMetric::Interval).unwrap();
        assert!((alpha - -0.5).abs() < 1e-15, "alpha = {alpha}");
    }

    #[test]
    fn all_identical_ratings_is_an_error() {
        let data = matrix(&[&[Some(7.0), Some(7.0)], &[Some(7.0), Some(7.0)]]);
        assert!(matches!(
            krippendorff_alpha(&data, AlphaMetric::Interval),
            Err(SurveyError::ZeroExpectedDisagreement)
        ));
    }

    #[test]
    fn needs_two_pairable_units() {
        let data = matrix(&[&[Some(1.0), Some(2.0), None], &[Some(2.0), None, Some(4.0)]]);
        assert!(matches!(
            krippendorff_alpha(&data, AlphaMetric::Interval),
            Err(SurveyError::InsufficientData)
        ));
    }

    #[test]
    fn matches_pairwise_oracle_on_mixed_matrix() {
        let rows: Vec<Vec<Option<f64>>> = vec![
            vec![Some(1.0), Some(2.0), Some(3.0), Some(3.0), None, Some(2.0)],
            vec![Some(1.0), Some(2.0), Some(3.0), Some(3.0), Some(1.0), None],
            vec![None, Some(3.0), Some(3.0), Some(3.0), Some(1.0), Some(2.0)],
            vec![
                Some(1.0),
                Some(2.0),
                Some(3.0),
                Some(3.0),
                Some(1.0),
                Some(3.0),
            ],
        ];
        let data = ReliabilityData::new(rows.clone()).unwrap();
        for metric in [
            AlphaMetric::Nominal,
            AlphaMetric::Ordinal,
            AlphaMetric::Interval,
            AlphaMetric::Ratio,
        ] {
            let got = krippendorff_alpha(&data, metric).unwrap();
            let want = alpha_oracle(&rows, metric).unwrap();
            assert!(
                (got - want).abs() < 1e-12,
                "{metric:?}: {got} vs oracle {want}"
            );
        }
    }

    #[test]
    fn reliability_bands() {
        use super::super::ReliabilityBand;
        assert_eq!(ReliabilityBand::of(0.92), ReliabilityBand::Reliable);
        assert_eq!(ReliabilityBand::of(0.8), ReliabilityBand::Reliable);
        assert_eq!(ReliabilityBand::of(0.78), ReliabilityBand::Tentative);
        assert_eq!(ReliabilityBand::of(0.6), ReliabilityBand::Tentative);
        assert_eq!(ReliabilityBand::of(0.31), ReliabilityBand::Unreliable);
        assert_eq!(ReliabilityBand::of(-0.31), ReliabilityBand::Unreliable);
    }

    #[test]
    fn ratio_metric_rejects_negative_ratings() {
        let data = matrix(&[&[Some(-1.0), Some(2.0)], &[Some(1.0), Some(2.0)]]);
        assert!(matches!(
            krippendorff_alpha(&data, AlphaMetric::Ratio),
            Err(SurveyError::NonFiniteValue)
        ));
    }

    #[test]
    fn from_normalized_builds_participant_by_question_matrix() {
        use crate::ingest::Scenario;
        let responses = [
            NormalizedResponse {
                participant_id: "p2".into(),
                question_id: "q1".into(),
                scenario: Scenario::Tp,
                signed_value: 10.0,
            },
            NormalizedResponse {
                participant_id: "p1".into(),
                question_id: "q2".into(),
                scenario: Scenario::Tp,
                signed_value: -5.0,
            },
            NormalizedResponse {
                participant_id: "p1".into(),
                question_id: "q1".into(),
                scenario: Scenario::Tp,
                signed_value: 10.0,
            },
        ];
        let data = ReliabilityData::from_normalized(responses.iter());
        assert_eq!(
            data.values,
            vec![vec![Some(10.0), Some(-5.0)], vec![Some(10.0), None],]
        );
    }
}
