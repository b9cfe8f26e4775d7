//! Shared independent oracles for the integration suites.
//!
//! Everything here deliberately avoids the crate's computational paths:
//! the permanent is a direct permutation sum, the least-squares solver is a
//! generic normal-equations elimination.

// Each suite uses its own slice of these oracles.
#![allow(dead_code)]

use ndarray::Array2;
use num_complex::Complex64;
use rand::Rng;

/// Permanent by direct permutation expansion, O(n! n).
pub fn naive_permanent(a: &Array2<Complex64>) -> Complex64 {
    let n = a.nrows();
    assert_eq!(n, a.ncols());
    let mut indices: Vec<usize> = (0..n).collect();
    let mut total = Complex64::new(0.0, 0.0);
    permute_and_sum(a, &mut indices, 0, &mut total);
    total
}

fn permute_and_sum(
    a: &Array2<Complex64>,
    indices: &mut Vec<usize>,
    depth: usize,
    total: &mut Complex64,
) {
    let n = indices.len();
    if depth == n {
        let term: Complex64 = (0..n).map(|i| a[(i, indices[i])]).product();
        *total += term;
        return;
    }
    for i in depth..n {
        indices.swap(depth, i);
        permute_and_sum(a, indices, depth + 1, total);
        indices.swap(depth, i);
    }
}

/// A random complex matrix with standard complex Gaussian entries.
pub fn random_complex_matrix<R: Rng>(n: usize, rng: &mut R) -> Array2<Complex64> {
    Array2::from_shape_fn((n, n), |_| lossmit_core::rng::complex_standard_normal(rng))
}

/// Generic linear least squares via normal equations and Gaussian
/// elimination with partial pivoting: minimises ||design * x - target||_2.
/// `design[i]` is row i.
pub fn solve_least_squares(design: &[Vec<f64>], target: &[f64]) -> Vec<f64> {
    let rows = design.len();
    assert_eq!(rows, target.len());
    let cols = design[0].len();
    // Normal equations: (D^T D) x = D^T y.
    let mut gram = vec![vec![0.0f64; cols + 1]; cols];
    for (row, &y) in design.iter().zip(target) {
        assert_eq!(row.len(), cols);
        for i in 0..cols {
            for j in 0..cols {
                gram[i][j] += row[i] * row[j];
            }
            gram[i][cols] += row[i] * y;
        }
    }
    // Elimination.
    for col in 0..cols {
        let pivot_row = (col..cols)
            .max_by(|&a, &b| gram[a][col].abs().total_cmp(&gram[b][col].abs()))
            .unwrap();
        gram.swap(col, pivot_row);
        let pivot = gram[col][col];
        assert!(pivot.abs() > 1e-300, "singular least-squares system");
        for row in 0..cols {
            if row != col {
                let factor = gram[row][col] / pivot;
                for j in col..=cols {
                    let update = factor * gram[col][j];
                    gram[row][j] -= update;
                }
            }
        }
    }
    (0..cols).map(|i| gram[i][cols] / gram[i][i]).collect()
}
