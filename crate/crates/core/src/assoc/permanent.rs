//! Exact matrix permanents by Ryser's inclusion–exclusion formula.

use nalgebra::DMatrix;

use crate::{Error, Result};

/// Largest dimension accepted by the exact permanent.
pub const DEFAULT_SIZE_CAP: usize = 20;

/// Permanent of an `M×N` matrix with `M ≤ N`: the sum over injective maps
/// `δ: rows → cols` of `Π_k Q[k][δ(k)]`.
///
/// The permanent of a `0×N` matrix is `1`.
pub fn permanent(q: &DMatrix<f64>) -> Result<f64> {
    permanent_with_cap(q, DEFAULT_SIZE_CAP)
}

pub fn permanent_with_cap(q: &DMatrix<f64>, cap: usize) -> Result<f64> {
    let (m, n) = q.shape();
    if m > n {
        return Err(Error::Dimension(format!(
            "permanent needs rows <= cols, got {m}x{n}; transpose first"
        )));
    }
    if n > cap {
        return Err(Error::Capacity { size: n, cap });
    }
    if cfg!(debug_assertions) && q.iter().any(|&x| x < 0.0) {
        log::debug!("permanent of a matrix with negative entries");
    }
    Ok(ryser(q))
}

/// Rectangular Ryser over column subsets visited in Gray-code order.
///
/// With `f(S) = Π_k Σ_{j∈S} Q[k][j]`, Möbius inversion over the image of
/// each row map gives
/// `per(Q) = Σ_{|S| ≤ M} (−1)^{M−|S|} C(N−|S|, M−|S|) f(S)`,
/// which reduces to the usual square formula when `M = N`.
fn ryser(q: &DMatrix<f64>) -> f64 {
    let (m, n) = q.shape();
    if m == 0 {
        return 1.0;
    }
    // Row-major copy: the inner loop walks one column across all rows.
    let cols: Vec<Vec<f64>> = (0..n).map(|j| q.column(j).iter().copied().collect()).collect();
    let coef: Vec<f64> = (0..=m)
        .map(|s| {
            let sign = if (m - s) % 2 == 0 { 1.0 } else { -1.0 };
            sign * binomial(n - s, m - s)
        })
        .collect();

    let mut row_sums = vec![0.0f64; m];
    let mut in_set = vec![false; n];
    let mut size = 0usize;
    let mut total = 0.0f64;
    for i in 1u64..(1u64 << n) {
        let j = i.trailing_zeros() as usize;
        let col = &cols[j];
        if in_set[j] {
            in_set[j] = false;
            size -= 1;
            for (r, c) in row_sums.iter_mut().zip(col) {
                *r -= c;
            }
        } else {
            in_set[j] = true;
            size += 1;
            for (r, c) in row_sums.iter_mut().zip(col) {
                *r += c;
            }
        }
        if size <= m {
            let prod: f64 = row_sums.iter().product();
            total += coef[size] * prod;
        }
    }
    total
}

fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Copy of `q` without row `k` and column `j`.
pub fn minor(q: &DMatrix<f64>, k: usize, j: usize) -> DMatrix<f64> {
    q.clone().remove_row(k).remove_column(j)
}
