//! Mann-Whitney U and Kruskal-Wallis tests.
//!
//! Both are rank-based and distribution-free; p-values are two-sided. The
//! Mann-Whitney test switches to an exact null distribution for small
//! tie-free samples and otherwise uses the normal approximation with tie
//! and continuity corrections.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use super::rank::average_ranks;
use super::SurveyError;

/// Largest per-sample size for the exact Mann-Whitney null distribution.
const EXACT_LIMIT: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MannWhitneyResult {
    /// Test statistic: the smaller of `u1` and `u2`.
    pub u: f64,
    pub u1: f64,
    pub u2: f64,
    /// Two-sided p-value.
    pub p_value: f64,
    /// True when the exact enumeration-based null distribution was used.
    pub exact: bool,
}

/// Sum of `t^3 - t` over tie groups of a sorted sequence.
fn tie_correction_term(sorted: &[f64]) -> f64 {
    let mut term = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        let t = (j - i) as f64;
        term += t * t * t - t;
        i = j;
    }
    term
}

/// Null distribution of U for sample sizes (n, m) without ties:
/// `counts[u]` is the number of rank assignments with statistic `u`.
///
/// Recurrence on the largest remaining rank: if it belongs to the first
/// sample it contributes `m` to U, otherwise nothing.
fn u_distribution(n: usize, m: usize) -> Vec<u64> {
    let max_u = n * m;
    // counts[i][j][u]
    let mut counts = vec![vec![vec![0u64; max_u + 1]; m + 1]; n + 1];
    for row in &mut counts[0] {
        row[0] = 1;
    }
    for i in 1..=n {
        counts[i][0][0] = 1;
        for j in 1..=m {
            for u in 0..=max_u {
                let from_x = if u >= j { counts[i - 1][j][u - j] } else { 0 };
                let from_y = counts[i][j - 1][u];
                counts[i][j][u] = from_x + from_y;
            }
        }
    }
    counts[n][m].clone()
}

/// Mann-Whitney U test, two-sided.
///
/// For `|x|, |y| <= 8` with no ties the p-value is exact:
/// `P(min(U1, U2) <= observed)` under uniform rank assignments. Otherwise
/// the normal approximation applies, with tie correction in the variance
/// and a 0.5 continuity correction. Identical samples give p = 1.
pub fn mann_whitney_u(x: &[f64], y: &[f64]) -> Result<MannWhitneyResult, SurveyError> {
    if x.is_empty() || y.is_empty() {
        return Err(SurveyError::EmptyInput);
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(SurveyError::NonFiniteValue);
    }
    let n = x.len();
    let m = y.len();
    let mut combined: Vec<f64> = x.iter().chain(y).copied().collect();
    let ranks = average_ranks(&combined);
    let r1: f64 = ranks[..n].iter().sum();
    let u1 = r1 - (n * (n + 1)) as f64 / 2.0;
    let u2 = (n * m) as f64 - u1;
    let u = u1.min(u2);

    combined.sort_by(f64::total_cmp);
    let tie_term = tie_correction_term(&combined);
    let has_ties = tie_term > 0.0;

    if n <= EXACT_LIMIT && m <= EXACT_LIMIT && !has_ties {
        let counts = u_distribution(n, m);
        let total: u64 = counts.iter().sum();
        let u_obs = u.round() as usize;
        let max_u = n * m;
        let favorable: u64 = counts
            .iter()
            .enumerate()
            .filter(|(v, _)| (*v).min(max_u - *v) <= u_obs)
            .map(|(_, c)| *c)
            .sum();
        return Ok(MannWhitneyResult {
            u,
            u1,
            u2,
            p_value: favorable as f64 / total as f64,
            exact: true,
        });
    }

    let total = (n + m) as f64;
    let mean = (n * m) as f64 / 2.0;
    let variance = (n * m) as f64 / 12.0 * ((total + 1.0) - tie_term / (total * (total - 1.0)));
    let p_value = if variance <= 0.0 {
        1.0
    } else {
        let z = (u - mean + 0.5) / variance.sqrt();
        let normal = Normal::new(0.0, 1.0).expect("standard normal");
        (2.0 * normal.cdf(z)).min(1.0)
    };
    Ok(MannWhitneyResult {
        u,
        u1,
        u2,
        p_value,
        exact: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KruskalWallisResult {
    /// Rank-based H statistic with tie correction.
    pub h: f64,
    /// Upper-tail p from the chi-square approximation.
    pub p_value: f64,
    pub degrees_of_freedom: usize,
}

/// Kruskal-Wallis rank test across two or more groups.
///
/// Requires a total sample of at least 5 for the chi-square approximation
/// to be meaningful. When every observation is identical the statistic is
/// defined as 0 with p = 1.
pub fn kruskal_wallis(groups: &[Vec<f64>]) -> Result<KruskalWallisResult, SurveyError> {
    if groups.len() < 2 {
        return Err(SurveyError::TooFewGroups(groups.len()));
    }
    for (i, g) in groups.iter().enumerate() {
        if g.is_empty() {
            return Err(SurveyError::EmptyGroup(i));
        }
        if g.iter().any(|v| !v.is_finite()) {
            return Err(SurveyError::NonFiniteValue);
        }
    }
    let total: usize = groups.iter().map(Vec::len).sum();
    if total < 5 {
        return Err(SurveyError::TooFewValues {
            needed: 5,
            got: total,
        });
    }

    let combined: Vec<f64> = groups.iter().flatten().copied().collect();
    let ranks = average_ranks(&combined);
    let n = total as f64;
    let mut h = 0.0;
    let mut offset = 0;
    for g in groups {
        let r: f64 = ranks[offset..offset + g.len()].iter().sum();
        h += r * r / g.len() as f64;
        offset += g.len();
    }
    h = 12.0 / (n * (n + 1.0)) * h - 3.0 * (n + 1.0);

    let mut sorted = combined;
    sorted.sort_by(f64::total_cmp);
    let correction = 1.0 - tie_correction_term(&sorted) / (n * n * n - n);
    let h = if correction == 0.0 {
        0.0
    } else {
        h / correction
    };

    let df = groups.len() - 1;
    let chi = ChiSquared::new(df as f64).expect("df >= 1");
    let p_value = if h <= 0.0 { 1.0 } else { 1.0 - chi.cdf(h) };
    Ok(KruskalWallisResult {
        h,
        p_value,
        degrees_of_freedom: df,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complete_separation_gives_u_zero() {
        let result = mann_whitney_u(&[1.0, 2.0], &[3.0, 4.0]).unwrap();
        assert_eq!(result.u, 0.0);
        assert_eq!(result.u1, 0.0);
        assert_eq!(result.u2, 4.0);
        assert!(result.exact);
        // enumeration over C(4,2) = 6 labelings: min-U = 0 occurs twice
        assert!((result.p_value - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn identical_samples_are_not_significant() {
        let x = vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0];
        let result = mann_whitney_u(&x, &x).unwrap();
        assert!(!result.exact, "ties force the normal approximation");
        assert!(result.p_value > 0.99, "p = {}", result.p_value);
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(matches!(
            mann_whitney_u(&[], &[1.0]),
            Err(SurveyError::EmptyInput)
        ));
    }

    /// Full enumeration oracle over all C(n+m, n) rank labelings.
    fn exact_p_oracle(x: &[f64], y: &[f64]) -> f64 {
        let n = x.len();
        let m = y.len();
        let mut all: Vec<f64> = x.iter().chain(y).copied().collect();
        all.sort_by(f64::total_cmp);
        let total_items = n + m;

        // observed min(U1, U2) from the actual labeling
        let u_stat = |xs: &[f64], ys: &[f64]| -> usize {
            let mut u = 0usize;
            for a in xs {
                for b in ys {
                    if a > b {
                        u += 1;
                    }
                }
            }
            u.min(n * m - u)
        };
        let observed = u_stat(x, y);

        let mut favorable = 0u64;
        let mut total = 0u64;
        for mask in 0u32..(1 << total_items) {
            if mask.count_ones() as usize != n {
                continue;
            }
            total += 1;
            let mut xs = Vec::with_capacity(n);
            let mut ys = Vec::with_capacity(m);
            for (i, &v) in all.iter().enumerate() {
                if mask & (1 << i) != 0 {
                    xs.push(v);
                } else {
                    ys.push(v);
                }
            }
            if u_stat(&xs, &ys) <= observed {
                favorable += 1;
            }
        }
        favorable as f64 / total as f64
    }

    #[test]
    fn exact_p_matches_full_labeling_enumeration() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..40 {
            let n = rng.gen_range(1..=8);
            let m = rng.gen_range(1..=8);
            // distinct values so the exact path applies
            let mut pool: Vec<f64> = (0..n + m).map(|i| i as f64).collect();
            for i in (1..pool.len()).rev() {
                pool.swap(i, rng.gen_range(0..=i));
            }
            let x = pool[..n].to_vec();
            let y = pool[n..].to_vec();
            let result = mann_whitney_u(&x, &y).unwrap();
            assert!(result.exact);
            let oracle = exact_p_oracle(&x, &y);
            assert!(
                (result.p_value - oracle).abs() < 1e-12,
                "n={n} m={m}: {} vs oracle {oracle}",
                result.p_value
            );
        }
    }

    #[test]
    fn kruskal_wallis_identical_groups() {
        let g = vec![vec![2.0, 2.0, 2.0], vec![2.0, 2.0], vec![2.0, 2.0]];
        let result = kruskal_wallis(&g).unwrap();
        assert_eq!(result.h, 0.0);
        assert_eq!(result.p_value, 1.0);
        assert_eq!(result.degrees_of_freedom, 2);
    }

    #[test]
    fn kruskal_wallis_hand_computed_rank_sums() {
        // groups {1,2}, {3,4}, {5,6}: rank sums 3, 7, 11
        // H = 12/(6*7) * (9/2 + 49/2 + 121/2) - 3*7 = 32/7
        let g = vec![vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]];
        let result = kruskal_wallis(&g).unwrap();
        assert!((result.h - 32.0 / 7.0).abs() < 1e-12, "h = {}", result.h);
        assert!(result.p_value > 0.0 && result.p_value < 1.0);
    }

    #[test]
    fn two_group_kruskal_agrees_with_mann_whitney_on_separation() {
        let x = vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let y = vec![10.0, 11.0, 12.0, 13.0, 14.0, 15.0];
        let kw = kruskal_wallis(&[x.clone(), y.clone()]).unwrap();
        let mwu = mann_whitney_u(&x, &y).unwrap();
        assert_eq!(kw.p_value < 0.05, mwu.p_value < 0.05);
        // and both agree there is no difference for identical groups
        let kw = kruskal_wallis(&[x.clone(), x.clone()]).unwrap();
        let mwu = mann_whitney_u(&x, &x).unwrap();
        assert_eq!(kw.p_value < 0.05, mwu.p_value < 0.05);
    }

    #[test]
    fn kruskal_wallis_group_validation() {
        assert!(matches!(
            kruskal_wallis(&[vec![1.0, 2.0]]),
            Err(SurveyError::TooFewGroups(1))
        ));
        assert!(matches!(
            kruskal_wallis(&[vec![1.0, 2.0, 3.0], vec![]]),
            Err(SurveyError::EmptyGroup(1))
        ));
        assert!(matches!(
            kruskal_wallis(&[vec![1.0], vec![2.0]]),
            Err(SurveyError::TooFewValues { needed: 5, got: 2 })
        ));
    }
}
