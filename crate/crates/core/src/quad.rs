//! Composite Simpson quadrature.

use crate::error::{Error, Result};

const START_INTERVALS: usize = 16;
const MAX_INTERVALS: usize = 1 << 24;

/// Composite Simpson rule on `intervals` (even) equal subintervals.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, intervals: usize) -> f64 {
    assert!(
        intervals >= 2 && intervals.is_multiple_of(2),
        "Simpson needs an even interval count"
    );
    let h = (b - a) / intervals as f64;
    let mut odd = 0.0;
    let mut even = 0.0;
    for k in 1..intervals {
        let v = f(a + k as f64 * h);
        if k % 2 == 1 {
            odd += v;
        } else {
            even += v;
        }
    }
    h / 3.0 * (f(a) + f(b) + 4.0 * odd + 2.0 * even)
}

/// Simpson weights (before the `h/3` factor) for `intervals + 1` nodes.
pub fn simpson_weights(intervals: usize) -> Vec<f64> {
    assert!(
        intervals >= 2 && intervals.is_multiple_of(2),
        "Simpson needs an even interval count"
    );
    (0..=intervals)
        .map(|k| {
            if k == 0 || k == intervals {
                1.0
            } else if k % 2 == 1 {
                4.0
            } else {
                2.0
            }
        })
        .collect()
}

/// Composite Simpson with interval doubling until two successive estimates
/// agree to `rel_tol` relative to the integral of `|f|`.
///
/// Every node value is checked for finiteness; the first bad node is
/// reported through [`Error::Evaluation`].
pub fn simpson_adaptive<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let eval = |z: f64| -> Result<f64> {
        let v = f(z);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Evaluation {
                what: "integrand",
                z,
            })
        }
    };

    let mut n = START_INTERVALS;
    let mut h = (b - a) / n as f64;
    let fa = eval(a)?;
    let fb = eval(b)?;
    let (ends, ends_abs) = (fa + fb, fa.abs() + fb.abs());
    let (mut odd, mut odd_abs, mut even, mut even_abs) = (0.0, 0.0, 0.0, 0.0);
    for k in 1..n {
        let v = eval(a + k as f64 * h)?;
        if k % 2 == 1 {
            odd += v;
            odd_abs += v.abs();
        } else {
            even += v;
            even_abs += v.abs();
        }
    }
    let mut prev = h / 3.0 * (ends + 4.0 * odd + 2.0 * even);

    while n < MAX_INTERVALS {
        n *= 2;
        h *= 0.5;
        even += odd;
        even_abs += odd_abs;
        odd = 0.0;
        odd_abs = 0.0;
        for k in (1..n).step_by(2) {
            let v = eval(a + k as f64 * h)?;
            odd += v;
            odd_abs += v.abs();
        }
        let cur = h / 3.0 * (ends + 4.0 * odd + 2.0 * even);
        let scale = h / 3.0 * (ends_abs + 4.0 * odd_abs + 2.0 * even_abs);
        if (cur - prev).abs() <= rel_tol * scale.abs() {
            return Ok(cur);
        }
        prev = cur;
    }
    Err(Error::QuadratureNotConverged { a, b, intervals: n })
}
