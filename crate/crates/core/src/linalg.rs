//! Dense LU solves with a singularity guard.

use faer::linalg::solvers::Solve;
use faer::{Col, Mat};

use crate::error::{Error, Result};

/// Pivots below this magnitude are treated as zero.
pub const MIN_PIVOT: f64 = 1e-14;
/// Largest accepted ratio between the largest and smallest pivot.
pub const MAX_CONDITION: f64 = 1e14;

/// Solves `a x = b` by LU with partial pivoting.
///
/// The ratio of extreme pivots of `U` serves as a cheap condition estimate.
pub fn solve_dense(a: &Mat<f64>, b: &[f64]) -> Result<Vec<f64>> {
    let n = a.nrows();
    debug_assert_eq!(n, b.len());
    let lu = a.partial_piv_lu();
    let u = lu.U();
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for i in 0..n {
        let p = u[(i, i)].abs();
        lo = lo.min(p);
        hi = hi.max(p);
    }
    if !(lo.is_finite() && hi.is_finite()) || lo < MIN_PIVOT || hi > MAX_CONDITION * lo {
        return Err(Error::SingularJacobian {
            pivot_ratio: if hi > 0.0 { lo / hi } else { 0.0 },
        });
    }
    let rhs = Col::from_fn(n, |i| b[i]);
    let x = lu.solve(&rhs);
    let out: Vec<f64> = (0..n).map(|i| x[i]).collect();
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularJacobian { pivot_ratio: 0.0 });
    }
    Ok(out)
}
