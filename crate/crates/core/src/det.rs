//! Fraction-free (Bareiss) determinant.
//!
//! Every intermediate division is exact over an integral domain, so for
//! integer scalars the result is exact with no rational arithmetic. The same
//! code runs over fields (rationals, floats) unchanged.

use std::ops::Neg;

use num_traits::Num;

/// Determinant of a square matrix given as rows. The empty matrix has determinant one.
pub fn bareiss_determinant<T>(mut m: Vec<Vec<T>>) -> T
where
    T: Num + Clone + Neg<Output = T>,
{
    let n = m.len();
    assert!(m.iter().all(|row| row.len() == n), "matrix must be square");
    if n == 0 {
        return T::one();
    }
    let mut negate = false;
    let mut prev = T::one();
    for k in 0..n - 1 {
        if m[k][k].is_zero() {
            match (k + 1..n).find(|&i| !m[i][k].is_zero()) {
                Some(i) => {
                    m.swap(i, k);
                    negate = !negate;
                }
                None => return T::zero(),
            }
        }
        let pivot = m[k][k].clone();
        let (done, rest) = m.split_at_mut(k + 1);
        let pivot_row = &done[k];
        for row in rest {
            let lead = row[k].clone();
            for (x, p) in row[k + 1..].iter_mut().zip(&pivot_row[k + 1..]) {
                *x = (x.clone() * pivot.clone() - lead.clone() * p.clone()) / prev.clone();
            }
            row[k] = T::zero();
        }
        prev = pivot;
    }
    let d = m[n - 1][n - 1].clone();
    if negate {
        -d
    } else {
        d
    }
}
