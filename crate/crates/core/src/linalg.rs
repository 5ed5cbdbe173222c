//! Small dense linear-algebra helpers shared by the solvers.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Design matrix with a leading column of ones when `with_intercept`.
pub fn augmented_design(x: &DMatrix<f64>, with_intercept: bool) -> DMatrix<f64> {
    if with_intercept {
        x.clone().insert_column(0, 1.0)
    } else {
        x.clone()
    }
}

/// Numerical rank from the singular values, with the usual
/// `max(n, p) * eps * sigma_max` cutoff.
pub fn numerical_rank(a: &DMatrix<f64>) -> usize {
    if a.ncols() == 0 || a.nrows() == 0 {
        return 0;
    }
    let sv = a.singular_values();
    let smax = sv.max();
    if smax == 0.0 {
        return 0;
    }
    let cutoff = a.nrows().max(a.ncols()) as f64 * f64::EPSILON * smax;
    sv.iter().filter(|&&s| s > cutoff).count()
}

/// Errors unless `a` has at least as many rows as columns and full column rank.
pub fn require_full_column_rank(a: &DMatrix<f64>) -> Result<()> {
    let p = a.ncols();
    if a.nrows() < p {
        return Err(Error::DegenerateDesign {
            rank: a.nrows(),
            required: p,
        });
    }
    let rank = numerical_rank(a);
    if rank < p {
        return Err(Error::DegenerateDesign { rank, required: p });
    }
    Ok(())
}

/// Solves the square system `a x = b` by partial-pivot LU; `None` if singular.
pub fn solve_square(a: DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    let x = a.lu().solve(b)?;
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Least squares through a thin QR factorization: `R beta = Q^T y`.
pub fn least_squares_qr(a: &DMatrix<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
    require_full_column_rank(a)?;
    if a.ncols() == 0 {
        return Ok(DVector::zeros(0));
    }
    let qr = a.clone().qr();
    let qty = qr.q().transpose() * y;
    let r = qr.r();
    r.solve_upper_triangular(&qty).ok_or(Error::DegenerateDesign {
        rank: a.ncols() - 1,
        required: a.ncols(),
    })
}
