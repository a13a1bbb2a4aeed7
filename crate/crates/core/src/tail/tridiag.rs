//! Symmetric tridiagonal matrices with a constant off-diagonal.

/// Number of eigenvalues strictly below `mu` (Sturm sequence count via the
/// `LDL^T` pivots of `A - mu I`).
pub(crate) fn sturm_count(diag: &[f64], off: f64, mu: f64) -> usize {
    let off_sq = off * off;
    let mut count = 0;
    let mut d = 1.0;
    for (j, &a) in diag.iter().enumerate() {
        d = if j == 0 { a - mu } else { a - mu - off_sq / d };
        if d == 0.0 {
            d = -f64::EPSILON * (a.abs() + mu.abs()).max(f64::MIN_POSITIVE);
        }
        if d < 0.0 {
            count += 1;
        }
    }
    count
}

/// Smallest eigenvalue by bisection on the Sturm count, to absolute
/// tolerance `tol`. Returns the final bracket `(lo, hi)`; `lo` is below the
/// eigenvalue.
pub(crate) fn smallest_eigenvalue(diag: &[f64], off: f64, tol: f64) -> (f64, f64) {
    let spread = 2.0 * off.abs();
    let mut lo = diag.iter().copied().fold(f64::INFINITY, f64::min) - spread;
    let mut hi = diag.iter().copied().fold(f64::NEG_INFINITY, f64::max) + spread;
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if sturm_count(diag, off, mid) >= 1 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    (lo, hi)
}

/// Solves `(A - shift I) y = rhs` by the Thomas algorithm, in place.
pub(crate) fn solve_shifted(
    diag: &[f64],
    off: f64,
    shift: f64,
    rhs: &mut [f64],
    work: &mut Vec<f64>,
) {
    let n = diag.len();
    work.clear();
    work.resize(n, 0.0);
    let mut pivot = diag[0] - shift;
    work[0] = off / pivot;
    rhs[0] /= pivot;
    for j in 1..n {
        pivot = diag[j] - shift - off * work[j - 1];
        work[j] = off / pivot;
        rhs[j] = (rhs[j] - off * rhs[j - 1]) / pivot;
    }
    for j in (0..n - 1).rev() {
        rhs[j] -= work[j] * rhs[j + 1];
    }
}
