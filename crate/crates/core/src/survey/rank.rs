//! Rank correlation coefficients with tie handling.

use super::SurveyError;

fn validate_pair(x: &[f64], y: &[f64]) -> Result<(), SurveyError> {
    if x.len() != y.len() {
        return Err(SurveyError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 3 {
        return Err(SurveyError::TooFewValues {
            needed: 3,
            got: x.len(),
        });
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(SurveyError::NonFiniteValue);
    }
    Ok(())
}

/// 1-based ranks; tied values share the average of their rank positions.
pub(crate) fn average_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j < n && values[order[j]] == values[order[i]] {
            j += 1;
        }
        // positions i..j (0-based) share the mean 1-based rank
        let rank = (i + j + 1) as f64 / 2.0;
        for &idx in &order[i..j] {
            ranks[idx] = rank;
        }
        i = j;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> Result<f64, SurveyError> {
    let n = x.len() as f64;
    let mean_x = x.iter().sum::<f64>() / n;
    let mean_y = y.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var_x = 0.0;
    let mut var_y = 0.0;
    for (&a, &b) in x.iter().zip(y) {
        let dx = a - mean_x;
        let dy = b - mean_y;
        cov += dx * dy;
        var_x += dx * dx;
        var_y += dy * dy;
    }
    if var_x == 0.0 || var_y == 0.0 {
        return Err(SurveyError::ConstantInput);
    }
    Ok(cov / (var_x * var_y).sqrt())
}

/// Spearman's rank correlation: the Pearson correlation of average ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64, SurveyError> {
    validate_pair(x, y)?;
    pearson(&average_ranks(x), &average_ranks(y))
}

/// Counts strictly decreasing pairs via merge sort.
fn count_inversions(values: &mut [f64]) -> u64 {
    let n = values.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let (left, right) = values.split_at_mut(mid);
    let mut inversions = count_inversions(left) + count_inversions(right);
    let mut merged = Vec::with_capacity(n);
    let (mut i, mut j) = (0, 0);
    while i < left.len() && j < right.len() {
        if left[i] <= right[j] {
            merged.push(left[i]);
            i += 1;
        } else {
            // left[i..] are all strictly greater than right[j]
            inversions += (left.len() - i) as u64;
            merged.push(right[j]);
            j += 1;
        }
    }
    merged.extend_from_slice(&left[i..]);
    merged.extend_from_slice(&right[j..]);
    values.copy_from_slice(&merged);
    inversions
}

fn tie_pair_count(sorted: &[f64]) -> u64 {
    let mut pairs = 0u64;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        let t = (j - i) as u64;
        pairs += t * (t - 1) / 2;
        i = j;
    }
    pairs
}

/// Kendall's tau-b with tie correction.
///
/// Concordances are counted in O(n log n): after sorting by `(x, y)`, the
/// number of discordant pairs is the number of strict inversions in the `y`
/// sequence. With `n0 = n(n-1)/2` and `t_x, t_y, t_xy` the tied-pair counts,
///
/// ```text
/// tau_b = (n0 - t_x - t_y + t_xy - 2 * discordant)
///         / sqrt((n0 - t_x) * (n0 - t_y))
/// ```
pub fn kendall_tau_b(x: &[f64], y: &[f64]) -> Result<f64, SurveyError> {
    validate_pair(x, y)?;
    let n = x.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]).then(y[a].total_cmp(&y[b])));

    let mut tie_x = 0u64;
    let mut tie_xy = 0u64;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j < n && x[order[j]] == x[order[i]] {
            j += 1;
        }
        let t = (j - i) as u64;
        tie_x += t * (t - 1) / 2;
        // joint ties within this x-run
        let mut a = i;
        while a < j {
            let mut b = a;
            while b < j && y[order[b]] == y[order[a]] {
                b += 1;
            }
            let t = (b - a) as u64;
            tie_xy += t * (t - 1) / 2;
            a = b;
        }
        i = j;
    }

    let mut ys_sorted: Vec<f64> = y.to_vec();
    ys_sorted.sort_by(f64::total_cmp);
    let tie_y = tie_pair_count(&ys_sorted);

    let mut ys_in_x_order: Vec<f64> = order.iter().map(|&i| y[i]).collect();
    let discordant = count_inversions(&mut ys_in_x_order);

    let n0 = (n as u64) * (n as u64 - 1) / 2;
    if n0 == tie_x || n0 == tie_y {
        return Err(SurveyError::ConstantInput);
    }
    let numerator =
        n0 as f64 - tie_x as f64 - tie_y as f64 + tie_xy as f64 - 2.0 * discordant as f64;
    let denominator = ((n0 - tie_x) as f64 * (n0 - tie_y) as f64).sqrt();
    Ok(numerator / denominator)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn monotone_sequences_correlate_exactly_one() {
        let x: Vec<f64> = (1..=10).map(f64::from).collect();
        let y: Vec<f64> = x.iter().map(|v| v * v).collect();
        assert_eq!(spearman(&x, &y).unwrap(), 1.0);
        assert_eq!(kendall_tau_b(&x, &y).unwrap(), 1.0);
    }

    #[test]
    fn reversed_sequences_correlate_exactly_minus_one() {
        let x: Vec<f64> = (1..=10).map(f64::from).collect();
        let y: Vec<f64> = x.iter().map(|v| -v).collect();
        assert_eq!(spearman(&x, &y).unwrap(), -1.0);
        assert_eq!(kendall_tau_b(&x, &y).unwrap(), -1.0);
    }

    #[test]
    fn constant_input_is_an_error() {
        let x = vec![1.0, 1.0, 1.0, 1.0];
        let y = vec![1.0, 2.0, 3.0, 4.0];
        assert!(matches!(spearman(&x, &y), Err(SurveyError::ConstantInput)));
        assert!(matches!(
            kendall_tau_b(&x, &y),
            Err(SurveyError::ConstantInput)
        ));
    }

    #[test]
    fn length_mismatch_and_short_input() {
        assert!(matches!(
            spearman(&[1.0, 2.0], &[1.0, 2.0, 3.0]),
            Err(SurveyError::LengthMismatch(2, 3))
        ));
        assert!(matches!(
            kendall_tau_b(&[1.0, 2.0], &[1.0, 2.0]),
            Err(SurveyError::TooFewValues { needed: 3, got: 2 })
        ));
    }

    #[test]
    fn average_ranks_handle_ties() {
        let ranks = average_ranks(&[1.0, 3.0, 2.0, 3.0, 5.0]);
        assert_eq!(ranks, vec![1.0, 3.5, 2.0, 3.5, 5.0]);
    }

    /// Brute-force oracles: rank-then-Pearson for Spearman, explicit
    /// concordant/discordant enumeration for tau-b.
    #[test]
    fn tied_data_matches_enumeration_oracles() {
        fn spearman_oracle(x: &[f64], y: &[f64]) -> f64 {
            let rank = |vals: &[f64]| -> Vec<f64> {
                vals.iter()
                    .map(|&v| {
                        let below = vals.iter().filter(|&&w| w < v).count() as f64;
                        let equal = vals.iter().filter(|&&w| w == v).count() as f64;
                        below + (equal + 1.0) / 2.0
                    })
                    .collect()
            };
            let rx = rank(x);
            let ry = rank(y);
            let n = x.len() as f64;
            let mx = rx.iter().sum::<f64>() / n;
            let my = ry.iter().sum::<f64>() / n;
            let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
            let vx: f64 = rx.iter().map(|a| (a - mx) * (a - mx)).sum();
            let vy: f64 = ry.iter().map(|b| (b - my) * (b - my)).sum();
            cov / (vx * vy).sqrt()
        }
        fn kendall_oracle(x: &[f64], y: &[f64]) -> f64 {
            let n = x.len();
            let (mut concordant, mut discordant) = (0i64, 0i64);
            let (mut tie_x, mut tie_y) = (0i64, 0i64);
            let n0 = (n * (n - 1) / 2) as i64;
            for i in 0..n {
                for j in (i + 1)..n {
                    let dx = x[i] - x[j];
                    let dy = y[i] - y[j];
                    if dx == 0.0 {
                        tie_x += 1;
                    }
                    if dy == 0.0 {
                        tie_y += 1;
                    }
                    if dx * dy > 0.0 {
                        concordant += 1;
                    } else if dx * dy < 0.0 {
                        discordant += 1;
                    }
                }
            }
            (concordant - discordant) as f64
                / (((n0 - tie_x) as f64) * ((n0 - tie_y) as f64)).sqrt()
        }

        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        for trial in 0..200 {
            let n = rng.gen_range(3..=50);
            // coarse integer grid forces plenty of ties
            let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-3i32..=3) as f64).collect();
            let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-3i32..=3) as f64).collect();
            if x.windows(2).all(|w| w[0] == w[1]) || y.windows(2).all(|w| w[0] == w[1]) {
                continue;
            }
            let s = spearman(&x, &y).unwrap();
            assert!(
                (s - spearman_oracle(&x, &y)).abs() < 1e-12,
                "trial {trial}: spearman"
            );
            let k = kendall_tau_b(&x, &y).unwrap();
            assert!(
                (k - kendall_oracle(&x, &y)).abs() < 1e-12,
                "trial {trial}: kendall"
            );
        }
    }
}
