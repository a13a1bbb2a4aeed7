//! Closed-form first-passage densities used as oracles.

use crate::error::{Error, Result};

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// `ln q_x(t)` for Brownian motion from `x` to zero; `-inf` at `t <= 0`.
pub fn bm_fpt_log_density(x: f64, t: f64) -> f64 {
    if t <= 0.0 {
        return f64::NEG_INFINITY;
    }
    x.ln() - HALF_LN_2PI - 1.5 * t.ln() - x * x / (2.0 * t)
}

/// `q_x(t) = x / sqrt(2 pi t^3) exp(-x^2 / 2t)`, with `q_x(0) = 0`.
pub fn bm_fpt_density(x: f64, t: f64) -> f64 {
    bm_fpt_log_density(x, t).exp()
}

fn ln_sinh(t: f64) -> f64 {
    if t < 1.0 {
        t.sinh().ln()
    } else {
        t + (-(-2.0 * t).exp()).ln_1p() - std::f64::consts::LN_2
    }
}

fn coth(t: f64) -> f64 {
    1.0 / t.tanh()
}

/// Log density of the hitting time of zero for `dX = -X dt + dW`, `X_0 = 1`.
pub fn ou_fpt_log_density(t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::invalid(format!("OU density needs t > 0, got {t}")));
    }
    Ok(-HALF_LN_2PI - 1.5 * ln_sinh(t) + (1.0 + t - coth(t)) / 2.0)
}

/// `p_1(t) = (2 pi)^{-1/2} sinh(t)^{-3/2} exp((1 + t - coth t) / 2)`.
pub fn ou_fpt_density(t: f64) -> Result<f64> {
    ou_fpt_log_density(t).map(f64::exp)
}

/// Closed-form rate `-(1/t) ln(p_1(t) / (q_1(t) e^{1/2}))` of the OU example.
pub fn ou_rate(t: f64) -> Result<f64> {
    let log_ratio = ou_fpt_log_density(t)? - bm_fpt_log_density(1.0, t) - 0.5;
    Ok(-log_ratio / t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::simpson;

    // Numerical Recipes erfc, relative error < 1.2e-7.
    fn erfc(x: f64) -> f64 {
        let z = x.abs();
        let t = 1.0 / (1.0 + 0.5 * z);
        let r = t
            * (-z * z - 1.265_512_23
                + t * (1.000_023_68
                    + t * (0.374_091_96
                        + t * (0.096_784_18
                            + t * (-0.186_288_06
                                + t * (0.278_868_07
                                    + t * (-1.135_203_98
                                        + t * (1.488_515_87
                                            + t * (-0.822_152_23 + t * 0.170_872_77)))))))))
                .exp();
        if x >= 0.0 {
            r
        } else {
            2.0 - r
        }
    }

    #[test]
    fn bm_values() {
        assert!((bm_fpt_density(1.0, 1.0) - 0.2419707).abs() < 5e-8);
        assert!((bm_fpt_density(2.0, 4.0) - 0.0604927).abs() < 5e-8);
        assert_eq!(bm_fpt_density(1.0, 0.0), 0.0);
    }

    #[test]
    fn ou_values() {
        // Direct evaluation of the closed form gives 0.4414832 at t = 1.
        assert!((ou_fpt_density(1.0).unwrap() - 0.441_483_241_254_894).abs() < 1e-12);
        assert!(ou_fpt_density(0.01).unwrap() < 1e-10);
        let ratio = ou_fpt_density(5.0).unwrap() / ou_fpt_density(4.0).unwrap();
        assert!((ratio / (-1f64).exp() - 1.0).abs() < 0.05);
        assert!(ou_fpt_density(0.0).is_err());
        assert!(ou_fpt_density(-1.0).is_err());
        // Large t stays finite in log space.
        assert!(ou_fpt_log_density(1000.0).unwrap().is_finite());
    }

    #[test]
    fn densities_integrate_to_one() {
        // Simpson on a graded grid: t = s^2 resolves the essential singularity at zero.
        for x in [0.5, 1.0, 2.0] {
            let upper = 200f64.sqrt();
            let mass = simpson(|s| 2.0 * s * bm_fpt_density(x, s * s), 0.0, upper, 200_000);
            // Mass beyond 200 is erf(x / sqrt(400)).
            let tail = 1.0 - erfc(x / 400f64.sqrt());
            assert!((mass + tail - 1.0).abs() < 1e-4, "x = {x}: {mass} + {tail}");
            assert!((mass - (1.0 - tail)).abs() < 1e-4);
        }
        let mass = simpson(
            |s| {
                if s == 0.0 {
                    0.0
                } else {
                    2.0 * s * ou_fpt_density(s * s).unwrap()
                }
            },
            0.0,
            60f64.sqrt(),
            100_000,
        );
        assert!((mass - 1.0).abs() < 1e-4, "OU mass {mass}");
    }

    #[test]
    fn ou_rate_limits() {
        assert!((ou_rate(0.05).unwrap() + 1.0 / 3.0).abs() < 0.02);
        assert!(ou_rate(50.0).unwrap() < 1.0);
    }
}
