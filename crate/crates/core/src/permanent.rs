//! Exact matrix permanents.
//!
//! Uses Ryser's formula in the Nijenhuis–Wilf arrangement, iterating the
//! 2^(n-1) proper subsets of the first n-1 columns in Gray-code order so each
//! step updates the running row sums with a single column. O(2^(n-1) * n)
//! arithmetic.

use ndarray::ArrayView2;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Hard cap on the matrix size; beyond this the 2^n term count is not worth
/// waiting for and callers should rethink the computation.
pub const MAX_PERMANENT_SIZE: usize = 24;

/// Per(a) for a square complex matrix, exact up to floating-point rounding.
pub fn permanent(a: ArrayView2<'_, Complex64>) -> Result<Complex64> {
    let n = a.nrows();
    if n == 0 || a.ncols() != n {
        return Err(Error::Argument(format!(
            "permanent needs a non-empty square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if n > MAX_PERMANENT_SIZE {
        return Err(Error::Capacity {
            what: "permanent matrix size",
            requested: n as u128,
            limit: MAX_PERMANENT_SIZE as u128,
        });
    }
    if n == 1 {
        return Ok(a[(0, 0)]);
    }

    // Row sums start at x_i = a[i][n-1] - (1/2) * sum_j a[i][j]; toggling
    // column j in the Gray code adds or removes a[i][j].
    let mut sums: Vec<Complex64> = (0..n)
        .map(|i| {
            let row_total: Complex64 = (0..n).map(|j| a[(i, j)]).sum();
            a[(i, n - 1)] - row_total * 0.5
        })
        .collect();

    let mut total: Complex64 = sums.iter().product();
    let mut gray: u64 = 0;
    let mut sign = 1.0;
    for g in 1..(1u64 << (n - 1)) {
        let next_gray = g ^ (g >> 1);
        let toggled = (gray ^ next_gray).trailing_zeros() as usize;
        let adding = next_gray & (1 << toggled) != 0;
        gray = next_gray;
        for i in 0..n {
            if adding {
                sums[i] += a[(i, toggled)];
            } else {
                sums[i] -= a[(i, toggled)];
            }
        }
        sign = -sign;
        total += sums.iter().product::<Complex64>() * sign;
    }

    let front = if n % 2 == 0 { -2.0 } else { 2.0 };
    Ok(total * front)
}
