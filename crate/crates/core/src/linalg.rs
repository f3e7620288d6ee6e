//! Exact rank computations over the rationals.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

/// Rank of an integer matrix, computed by Gaussian elimination over `Q`.
pub fn rank<R: AsRef<[i64]>>(matrix: &[R]) -> usize {
    let mut rows: Vec<Vec<BigRational>> = matrix
        .iter()
        .map(|r| r.as_ref().iter().map(|&v| BigRational::from_integer(BigInt::from(v))).collect())
        .collect();
    echelonize(&mut rows)
}

/// Reduces `rows` in place to row-echelon form and returns the rank.
fn echelonize(rows: &mut [Vec<BigRational>]) -> usize {
    let ncols = rows.first().map_or(0, Vec::len);
    let mut pivot_row = 0;
    for col in 0..ncols {
        if pivot_row == rows.len() {
            break;
        }
        let Some(p) = (pivot_row..rows.len()).find(|&r| !rows[r][col].is_zero()) else {
            continue;
        };
        rows.swap(pivot_row, p);
        let inv = BigRational::one() / &rows[pivot_row][col];
        for v in rows[pivot_row][col..].iter_mut() {
            *v *= &inv;
        }
        let (top, bottom) = rows.split_at_mut(pivot_row + 1);
        let pivot = &top[pivot_row];
        for row in bottom.iter_mut() {
            if row[col].is_zero() {
                continue;
            }
            let factor = row[col].clone();
            for (v, pv) in row[col..].iter_mut().zip(&pivot[col..]) {
                if !pv.is_zero() {
                    *v -= &factor * pv;
                }
            }
        }
        pivot_row += 1;
    }
    pivot_row
}

/// Whether every row of `inner` lies in the row space of `outer`.
pub fn row_space_contains<A: AsRef<[i64]>, B: AsRef<[i64]>>(outer: &[A], inner: &[B]) -> bool {
    let base = rank(outer);
    let stacked: Vec<&[i64]> = outer.iter().map(AsRef::as_ref).chain(inner.iter().map(AsRef::as_ref)).collect();
    rank(&stacked) == base
}
