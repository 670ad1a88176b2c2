//! Lloyd's k-means with k-means++ seeding, plus the silhouette coefficient.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::SamplerError;

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansFit {
    /// Cluster index per point.
    pub assignments: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    /// Sum of squared distances to assigned centroids.
    pub objective: f64,
    pub iterations: usize,
}

/// k-means++ seeding: first centroid uniform, the rest weighted by squared
/// distance to the nearest chosen centroid. If every remaining distance is
/// zero (duplicate-heavy data) the lowest-index unchosen point is taken.
fn kmeans_pp_init(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut chosen: Vec<usize> = vec![rng.gen_range(0..n)];
    let mut dist2: Vec<f64> = points
        .iter()
        .map(|p| squared_distance(p, &points[chosen[0]]))
        .collect();
    while chosen.len() < k {
        let total: f64 = dist2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.gen::<f64>() * total;
            let mut pick = n - 1;
            for (i, &d) in dist2.iter().enumerate() {
                if target < d {
                    pick = i;
                    break;
                }
                target -= d;
            }
            pick
        } else {
            (0..n)
                .find(|i| !chosen.contains(i))
                .expect("k <= n leaves an unchosen point")
        };
        chosen.push(next);
        for (i, p) in points.iter().enumerate() {
            let d = squared_distance(p, &points[next]);
            if d < dist2[i] {
                dist2[i] = d;
            }
        }
    }
    chosen.into_iter().map(|i| points[i].clone()).collect()
}

fn assign_all(points: &[Vec<f64>], centroids: &[Vec<f64>]) -> (Vec<usize>, f64) {
    let mut assignments = Vec::with_capacity(points.len());
    let mut objective = 0.0;
    for p in points {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (c, centroid) in centroids.iter().enumerate() {
            let d = squared_distance(p, centroid);
            if d < best_d {
                best_d = d;
                best = c;
            }
        }
        assignments.push(best);
        objective += best_d;
    }
    (assignments, objective)
}

/// Lloyd iterations from a k-means++ start, until the assignment reaches a
/// fixpoint or 300 iterations. The objective never increases across
/// iterations. An emptied cluster is re-seeded at the point farthest from
/// its assigned centroid.
pub fn kmeans(points: &[Vec<f64>], k: usize, seed: u64) -> Result<KMeansFit, SamplerError> {
    let n = points.len();
    if k == 0 || k > n {
        return Err(SamplerError::TooFewPoints { k, points: n });
    }
    let dim = points[0].len();
    if points.iter().any(|p| p.len() != dim) {
        return Err(SamplerError::DimensionMismatch);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = kmeans_pp_init(points, k, &mut rng);
    let mut previous: Option<Vec<usize>> = None;
    let mut last_objective = f64::INFINITY;
    let mut iterations = 0;
    loop {
        let (mut assignments, mut objective) = assign_all(points, &centroids);

        // re-seed empty clusters at the globally worst-placed point
        loop {
            let mut counts = vec![0usize; k];
            for &a in &assignments {
                counts[a] += 1;
            }
            let Some(empty) = counts.iter().position(|&c| c == 0) else {
                break;
            };
            let donor = (0..n)
                .filter(|&i| counts[assignments[i]] > 1)
                .max_by(|&a, &b| {
                    squared_distance(&points[a], &centroids[assignments[a]])
                        .total_cmp(&squared_distance(&points[b], &centroids[assignments[b]]))
                })
                .expect("k <= n guarantees a donor cluster with > 1 member");
            centroids[empty] = points[donor].clone();
            assignments[donor] = empty;
            objective = points
                .iter()
                .zip(&assignments)
                .map(|(p, &a)| squared_distance(p, &centroids[a]))
                .sum();
        }

        debug_assert!(
            objective <= last_objective * (1.0 + 1e-12) + 1e-12,
            "objective increased: {last_objective} -> {objective}"
        );
        last_objective = objective;

        if previous.as_ref() == Some(&assignments) || iterations >= 300 {
            return Ok(KMeansFit {
                assignments,
                centroids,
                objective,
                iterations,
            });
        }

        // update step: centroids move to cluster means
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &a) in points.iter().zip(&assignments) {
            counts[a] += 1;
            for (s, v) in sums[a].iter_mut().zip(p) {
                *s += v;
            }
        }
        for (c, (sum, &count)) in sums.iter().zip(&counts).enumerate() {
            if count > 0 {
                centroids[c] = sum.iter().map(|s| s / count as f64).collect();
            }
        }
        previous = Some(assignments);
        iterations += 1;
    }
}

/// Mean silhouette coefficient over all points.
///
/// Per point, `a` is the mean distance to its own cluster (excluding
/// itself), `b` the smallest mean distance to another cluster, and
/// `s = (b - a) / max(a, b)`. Points in singleton clusters score 0, as do
/// degenerate points with `a = b = 0`.
pub fn silhouette(points: &[Vec<f64>], assignments: &[usize]) -> Result<f64, SamplerError> {
    if points.len() != assignments.len() {
        return Err(SamplerError::DimensionMismatch);
    }
    let k = assignments.iter().copied().max().map_or(0, |m| m + 1);
    let mut counts = vec![0usize; k];
    for &a in assignments {
        counts[a] += 1;
    }
    if counts.iter().filter(|&&c| c > 0).count() < 2 {
        return Err(SamplerError::SingleCluster);
    }

    let n = points.len();
    let mut total = 0.0;
    for i in 0..n {
        let own = assignments[i];
        if counts[own] == 1 {
            continue; // singleton contributes s = 0
        }
        let mut dist_sum = vec![0.0; k];
        for j in 0..n {
            if i == j {
                continue;
            }
            dist_sum[assignments[j]] += squared_distance(&points[i], &points[j]).sqrt();
        }
        let a = dist_sum[own] / (counts[own] - 1) as f64;
        let b = (0..k)
            .filter(|&c| c != own && counts[c] > 0)
            .map(|c| dist_sum[c] / counts[c] as f64)
            .fold(f64::INFINITY, f64::min);
        let denom = a.max(b);
        if denom > 0.0 {
            total += (b - a) / denom;
        }
    }
    Ok(total / n as f64)
}

/// Runs k-means for each cluster count in `lo..=hi` (clamped to the point
/// count) and keeps the fit with the highest mean silhouette; ties go to
/// the smallest k.
pub fn choose_k(
    points: &[Vec<f64>],
    k_range: (usize, usize),
    seed: u64,
) -> Result<(usize, KMeansFit), SamplerError> {
    let lo = k_range.0.max(2);
    let hi = k_range.1.min(points.len());
    if lo > hi {
        return Err(SamplerError::TooFewPoints {
            k: lo,
            points: points.len(),
        });
    }
    let mut best: Option<(f64, usize, KMeansFit)> = None;
    for k in lo..=hi {
        let fit = kmeans(points, k, seed)?;
        let score = silhouette(points, &fit.assignments)?;
        if best.as_ref().is_none_or(|(s, _, _)| score > *s) {
            best = Some((score, k, fit));
        }
    }
    let (_, k, fit) = best.expect("range verified non-empty");
    Ok((k, fit))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn k_equals_n_gives_zero_objective() {
        let points = vec![
            vec![0.0, 0.0],
            vec![1.0, 0.0],
            vec![5.0, 5.0],
            vec![9.0, 2.0],
        ];
        let fit = kmeans(&points, 4, 0).unwrap();
        assert_eq!(fit.objective, 0.0);
        let mut sorted = fit.assignments.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, vec![0, 1, 2, 3]);
    }

    #[test]
    fn two_separated_pairs_cluster_at_pair_means() {
        let points = vec![
            vec![0.0, 0.0],
            vec![0.0, 2.0],
            vec![10.0, 0.0],
            vec![10.0, 2.0],
        ];
        let fit = kmeans(&points, 2, 42).unwrap();
        assert_eq!(fit.assignments[0], fit.assignments[1]);
        assert_eq!(fit.assignments[2], fit.assignments[3]);
        assert_ne!(fit.assignments[0], fit.assignments[2]);
        let mut centroids = fit.centroids.clone();
        centroids.sort_by(|a, b| a[0].total_cmp(&b[0]));
        assert_eq!(centroids[0], vec![0.0, 1.0]);
        assert_eq!(centroids[1], vec![10.0, 1.0]);
    }

    #[test]
    fn empty_cluster_is_reseeded() {
        // three coincident points and one outlier: the duplicate forces a
        // coincident centroid whose cluster empties under lowest-index
        // tie-breaking, so the repair rule must fire
        let points = vec![
            vec![0.0, 0.0],
            vec![0.0, 0.0],
            vec![0.0, 0.0],
            vec![100.0, 0.0],
        ];
        for seed in 0..20 {
            let fit = kmeans(&points, 3, seed).unwrap();
            let mut counts = vec![0usize; 3];
            for &a in &fit.assignments {
                counts[a] += 1;
            }
            assert!(counts.iter().all(|&c| c > 0), "seed {seed}: {counts:?}");
        }
    }

    #[test]
    fn k_larger_than_point_count_is_rejected() {
        let points = vec![vec![0.0], vec![1.0]];
        assert!(matches!(
            kmeans(&points, 3, 0),
            Err(SamplerError::TooFewPoints { k: 3, points: 2 })
        ));
    }

    #[test]
    fn objective_is_deterministic_for_fixed_seed() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let points: Vec<Vec<f64>> = (0..60)
            .map(|_| vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)])
            .collect();
        let a = kmeans(&points, 5, 123).unwrap();
        let b = kmeans(&points, 5, 123).unwrap();
        assert_eq!(a, b);
    }

    fn blobs(centers: &[(f64, f64)], per: usize, spread: f64, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut points = Vec::new();
        for &(cx, cy) in centers {
            for _ in 0..per {
                points.push(vec![
                    cx + rng.gen_range(-spread..spread),
                    cy + rng.gen_range(-spread..spread),
                ]);
            }
        }
        points
    }

    #[test]
    fn silhouette_high_for_separated_blobs() {
        let points = blobs(&[(0.0, 0.0), (100.0, 0.0)], 25, 0.5, 1);
        let fit = kmeans(&points, 2, 3).unwrap();
        let s = silhouette(&points, &fit.assignments).unwrap();
        assert!(s > 0.9, "silhouette = {s}");
    }

    #[test]
    fn silhouette_near_zero_for_arbitrary_split_of_one_blob() {
        let points = blobs(&[(0.0, 0.0)], 50, 0.5, 2);
        // split one blob in half arbitrarily
        let assignments: Vec<usize> = (0..50).map(|i| i % 2).collect();
        let s = silhouette(&points, &assignments).unwrap();
        assert!(s < 0.2, "silhouette = {s}");
    }

    #[test]
    fn silhouette_zero_for_identical_points() {
        let points = vec![vec![1.0, 1.0]; 6];
        let assignments = vec![0, 0, 0, 1, 1, 1];
        assert_eq!(silhouette(&points, &assignments).unwrap(), 0.0);
    }

    #[test]
    fn silhouette_requires_two_clusters() {
        let points = vec![vec![0.0], vec![1.0]];
        assert!(matches!(
            silhouette(&points, &[0, 0]),
            Err(SamplerError::SingleCluster)
        ));
    }

    #[test]
    fn choose_k_finds_three_blobs() {
        let points = blobs(&[(0.0, 0.0), (10.0, 0.0), (5.0, 8.66)], 40, 0.1, 9);
        let (k, fit) = choose_k(&points, (2, 10), 4).unwrap();
        assert_eq!(k, 3);
        assert_eq!(fit.centroids.len(), 3);
    }
}
