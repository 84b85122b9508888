//! Small dense complex linear algebra used by the Liouville-space resolvent.
//!
//! The Liouville dimension of the supported models is d² ≤ 25, so a direct
//! LU factorization with partial pivoting is both simple and exact enough:
//! the resolvent contract requires ‖(ωI − L)·G(ω) − I‖ at machine precision
//! for well-conditioned arguments.

use crate::Complex64;
use ndarray::{Array1, Array2};

/// Solve `A x = b` for complex dense `A` by LU with partial pivoting.
///
/// # Arguments
/// * `a` — square matrix (consumed as the factorization workspace).
/// * `b` — right-hand side of matching dimension.
///
/// # Returns
/// The solution vector, or `None` if a pivot collapses below absolute
/// tolerance 1e−300 (numerically singular matrix).
pub fn lu_solve(mut a: Array2<Complex64>, mut b: Array1<Complex64>) -> Option<Array1<Complex64>> {
    let n = a.nrows();
    assert_eq!(a.ncols(), n, "lu_solve requires a square matrix");
    assert_eq!(b.len(), n, "rhs length must match matrix dimension");

    for col in 0..n {
        // Partial pivot: largest |a[row, col]| for row >= col.
        let mut pivot_row = col;
        let mut pivot_mag = a[[col, col]].norm();
        for row in (col + 1)..n {
            let mag = a[[row, col]].norm();
            if mag > pivot_mag {
                pivot_mag = mag;
                pivot_row = row;
            }
        }
        if pivot_mag < 1e-300 {
            return None;
        }
        if pivot_row != col {
            for k in 0..n {
                let tmp = a[[col, k]];
                a[[col, k]] = a[[pivot_row, k]];
                a[[pivot_row, k]] = tmp;
            }
            b.swap(col, pivot_row);
        }
        let pivot = a[[col, col]];
        for row in (col + 1)..n {
            let factor = a[[row, col]] / pivot;
            if factor.norm() == 0.0 {
                continue;
            }
            for k in (col + 1)..n {
                let sub = factor * a[[col, k]];
                a[[row, k]] -= sub;
            }
            let sub = factor * b[col];
            b[row] -= sub;
            a[[row, col]] = Complex64::new(0.0, 0.0);
        }
    }

    // Back substitution.
    let mut x = Array1::from_elem(n, Complex64::new(0.0, 0.0));
    for row in (0..n).rev() {
        let mut acc = b[row];
        for k in (row + 1)..n {
            acc -= a[[row, k]] * x[k];
        }
        x[row] = acc / a[[row, row]];
    }
    Some(x)
}

/// Solve `A X = I`, returning the full inverse. Used by the resolvent.
///
/// # Returns
/// `None` if `a` is numerically singular.
pub fn lu_inverse(a: &Array2<Complex64>) -> Option<Array2<Complex64>> {
    let n = a.nrows();
    let mut inv = Array2::from_elem((n, n), Complex64::new(0.0, 0.0));
    for col in 0..n {
        let mut e = Array1::from_elem(n, Complex64::new(0.0, 0.0));
        e[col] = Complex64::new(1.0, 0.0);
        let x = lu_solve(a.clone(), e)?;
        for row in 0..n {
            inv[[row, col]] = x[row];
        }
    }
    Some(inv)
}
