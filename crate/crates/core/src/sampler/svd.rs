//! Truncated SVD by randomized range finding.
//!
//! Sketch the column space with a Gaussian test matrix (oversampling 10),
//! sharpen it with four power iterations, then take the exact SVD of the
//! small projected matrix. When `rank + oversampling` reaches the smaller
//! matrix dimension the sketch spans the full column space and the result
//! is exact up to round-off.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::text::SparseMatrix;
use super::SamplerError;

const OVERSAMPLING: usize = 10;
const POWER_ITERATIONS: usize = 4;

/// Rank-truncated SVD of a document-term matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SvdResult {
    /// Left singular vectors, row per document, `rank` columns;
    /// mutually orthonormal.
    pub u: Vec<Vec<f64>>,
    /// Non-increasing singular values, `rank` of them.
    pub singular_values: Vec<f64>,
    /// `u` scaled by the singular values: the embedding coordinates.
    pub scores: Vec<Vec<f64>>,
}

/// `A * x` for sparse `A` (n x d) and dense `x` (d x l).
fn sparse_times_dense(a: &SparseMatrix, x: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(a.n_rows(), x.ncols());
    for (i, row) in a.rows.iter().enumerate() {
        for &(col, w) in row {
            for j in 0..x.ncols() {
                out[(i, j)] += w * x[(col, j)];
            }
        }
    }
    out
}

/// `A^T * x` for sparse `A` (n x d) and dense `x` (n x l).
fn sparse_transpose_times_dense(a: &SparseMatrix, x: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(a.cols, x.ncols());
    for (i, row) in a.rows.iter().enumerate() {
        for &(col, w) in row {
            for j in 0..x.ncols() {
                out[(col, j)] += w * x[(i, j)];
            }
        }
    }
    out
}

fn orthonormal_basis(m: DMatrix<f64>) -> DMatrix<f64> {
    m.qr().q()
}

/// Randomized truncated SVD keeping the top `rank` components.
pub fn truncated_svd(
    matrix: &SparseMatrix,
    rank: usize,
    seed: u64,
) -> Result<SvdResult, SamplerError> {
    let n = matrix.n_rows();
    let d = matrix.cols;
    let max_rank = n.min(d);
    if rank == 0 || rank > max_rank {
        return Err(SamplerError::RankTooLarge {
            rank,
            max: max_rank,
        });
    }

    let sketch = (rank + OVERSAMPLING).min(max_rank);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let omega = DMatrix::from_fn(d, sketch, |_, _| StandardNormal.sample(&mut rng));

    let mut q = orthonormal_basis(sparse_times_dense(matrix, &omega));
    for _ in 0..POWER_ITERATIONS {
        let z = orthonormal_basis(sparse_transpose_times_dense(matrix, &q));
        q = orthonormal_basis(sparse_times_dense(matrix, &z));
    }

    // b = q^T a, computed as (a^T q)^T to reuse the sparse kernels
    let b = sparse_transpose_times_dense(matrix, &q).transpose();
    let svd = b.svd(true, false);
    let u_small = svd.u.expect("u requested");

    // order components by descending singular value
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let order = &order[..rank];

    let u_full = q * u_small;
    let singular_values: Vec<f64> = order.iter().map(|&j| svd.singular_values[j]).collect();
    let mut u = Vec::with_capacity(n);
    let mut scores = Vec::with_capacity(n);
    for i in 0..n {
        let row_u: Vec<f64> = order.iter().map(|&j| u_full[(i, j)]).collect();
        let row_s: Vec<f64> = row_u
            .iter()
            .zip(&singular_values)
            .map(|(u, s)| u * s)
            .collect();
        u.push(row_u);
        scores.push(row_s);
    }
    Ok(SvdResult {
        u,
        singular_values,
        scores,
    })
}

/// Dense matrix rows as a sparse matrix (for callers that already have
/// dense data, e.g. tests and point sets).
pub fn sparse_from_dense(rows: &[Vec<f64>]) -> SparseMatrix {
    let cols = rows.first().map_or(0, Vec::len);
    SparseMatrix {
        rows: rows
            .iter()
            .map(|r| {
                r.iter()
                    .enumerate()
                    .filter(|(_, &v)| v != 0.0)
                    .map(|(j, &v)| (j, v))
                    .collect()
            })
            .collect(),
        cols,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn rank_one_outer_product_is_recovered_exactly() {
        let u = [1.0, 2.0, -1.0, 0.5];
        let v = [3.0, -1.0, 2.0];
        let rows: Vec<Vec<f64>> = u
            .iter()
            .map(|a| v.iter().map(|b| a * b).collect())
            .collect();
        let m = sparse_from_dense(&rows);
        let svd = truncated_svd(&m, 1, 0).unwrap();
        // reconstruct and compare
        let mut err = 0.0;
        let mut norm = 0.0;
        for (i, row) in rows.iter().enumerate() {
            for (j, &val) in row.iter().enumerate() {
                let rec = svd.scores[i][0] * {
                    // right singular vector from A^T u / sigma
                    let mut acc = 0.0;
                    for (r, urow) in svd.u.iter().enumerate() {
                        acc += rows[r][j] * urow[0];
                    }
                    acc / svd.singular_values[0]
                };
                err += (val - rec) * (val - rec);
                norm += val * val;
            }
        }
        assert!((err / norm).sqrt() < 1e-8);
    }

    #[test]
    fn identity_has_unit_singular_values() {
        let rows: Vec<Vec<f64>> = (0..5)
            .map(|i| (0..5).map(|j| f64::from(u8::from(i == j))).collect())
            .collect();
        let m = sparse_from_dense(&rows);
        let svd = truncated_svd(&m, 5, 1).unwrap();
        for s in &svd.singular_values {
            assert!((s - 1.0).abs() < 1e-10, "sigma = {s}");
        }
    }

    #[test]
    fn singular_values_are_non_increasing_and_u_orthonormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let rows: Vec<Vec<f64>> = (0..30)
            .map(|_| (0..80).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let m = sparse_from_dense(&rows);
        let svd = truncated_svd(&m, 12, 3).unwrap();
        for pair in svd.singular_values.windows(2) {
            assert!(pair[0] >= pair[1]);
        }
        for a in 0..12 {
            for b in a..12 {
                let dot: f64 = svd.u.iter().map(|row| row[a] * row[b]).sum();
                let expected = f64::from(u8::from(a == b));
                assert!(
                    (dot - expected).abs() < 1e-6,
                    "u columns {a},{b}: dot = {dot}"
                );
            }
        }
    }

    #[test]
    fn rank_bounds_are_enforced() {
        let rows = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]];
        let m = sparse_from_dense(&rows);
        assert!(matches!(
            truncated_svd(&m, 0, 0),
            Err(SamplerError::RankTooLarge { rank: 0, max: 2 })
        ));
        assert!(matches!(
            truncated_svd(&m, 3, 0),
            Err(SamplerError::RankTooLarge { rank: 3, max: 2 })
        ));
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let rows: Vec<Vec<f64>> = (0..20)
            .map(|_| (0..40).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let m = sparse_from_dense(&rows);
        let a = truncated_svd(&m, 5, 77).unwrap();
        let b = truncated_svd(&m, 5, 77).unwrap();
        assert_eq!(a, b);
    }
}
