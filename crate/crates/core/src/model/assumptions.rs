//! Heuristic check that the diffusion reaches zero almost surely.

use serde::Serialize;

use super::DriftModel;
use crate::error::{Error, Result};

/// Cutoffs `W` at which `∫_0^W exp(-2 ∫_0^w a) dw` is reported.
pub const CUTOFFS: [f64; 4] = [1e1, 1e2, 1e3, 1e4];
const PANELS_PER_DECADE: usize = 10_000;
const DIVERGENCE_LEVEL: f64 = 1e6;
const CONVERGENCE_TOL: f64 = 1e-8;
const GAMMA_PROBE_POINTS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DivergenceVerdict {
    Diverges,
    Converges,
    Inconclusive,
}

#[derive(Debug, Clone, Serialize)]
pub struct AssumptionReport {
    /// `a` and `a'` finite on the probe grid.
    pub a_c1_on_domain: bool,
    pub divergence_heuristic: DivergenceVerdict,
    /// Partial integrals at [`CUTOFFS`]; `inf` once the integrand overflows.
    pub partial_integrals: Vec<f64>,
    /// Minimum of gamma over the probe grid.
    pub gamma_lower_bound_estimate: f64,
    pub warning: Option<String>,
}

/// Probes `a`, `a'` and gamma on `[0, probe_max]` and estimates whether
/// `∫_0^∞ exp(-2 ∫_0^w a(z) dz) dw` diverges.
///
/// The verdict is `Diverges` when a partial integral exceeds `1e6` (or the
/// integrand overflows) or when the increments per decade do not shrink;
/// `Converges` only when the last two partial integrals agree to `1e-8`
/// relative. Anything else is `Inconclusive`.
pub fn check_assumptions(model: &DriftModel, probe_max: f64) -> Result<AssumptionReport> {
    if !(probe_max > 0.0 && probe_max.is_finite()) {
        return Err(Error::invalid(format!(
            "probe_max must be positive, got {probe_max}"
        )));
    }

    let mut a_c1 = true;
    let mut gamma_min = f64::INFINITY;
    for k in 0..=GAMMA_PROBE_POINTS {
        let z = probe_max * k as f64 / GAMMA_PROBE_POINTS as f64;
        if !(model.a(z).is_finite() && model.a_prime(z).is_finite()) {
            a_c1 = false;
            continue;
        }
        gamma_min = gamma_min.min(model.gamma(z));
    }

    let partial = scale_integrals(model)?;
    let verdict = classify(&partial);
    let warning = match verdict {
        DivergenceVerdict::Diverges => None,
        DivergenceVerdict::Converges => Some(
            "scale integral appears finite: the process may never reach zero and the density \
             need not integrate to one"
                .to_string(),
        ),
        DivergenceVerdict::Inconclusive => Some(
            "could not decide whether the scale integral diverges; zero may not be reached \
             almost surely"
                .to_string(),
        ),
    };

    Ok(AssumptionReport {
        a_c1_on_domain: a_c1,
        divergence_heuristic: verdict,
        partial_integrals: partial,
        gamma_lower_bound_estimate: gamma_min,
        warning,
    })
}

fn classify(partial: &[f64]) -> DivergenceVerdict {
    if partial
        .iter()
        .any(|v| !v.is_finite() || *v > DIVERGENCE_LEVEL)
    {
        return DivergenceVerdict::Diverges;
    }
    let increments: Vec<f64> = partial.windows(2).map(|w| w[1] - w[0]).collect();
    let last = *partial.last().unwrap();
    if (last - partial[partial.len() - 2]).abs() <= CONVERGENCE_TOL * last.abs() {
        return DivergenceVerdict::Converges;
    }
    if increments.windows(2).all(|w| w[1] >= w[0]) && increments[0] > 0.0 {
        return DivergenceVerdict::Diverges;
    }
    DivergenceVerdict::Inconclusive
}

/// Partial scale integrals at each cutoff. The inner integral is accumulated
/// with Simpson over node pairs; odd nodes use the 3-point half-panel rule.
fn scale_integrals(model: &DriftModel) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(CUTOFFS.len());
    let mut inner = 0.0; // ∫_0^w a
    let mut outer = 0.0; // ∫_0^w exp(-2 inner)
    let mut overflowed = false;
    let mut lo = 0.0;
    let segments = std::iter::once(1.0).chain(CUTOFFS);
    for hi in segments {
        if !overflowed {
            let h = (hi - lo) / PANELS_PER_DECADE as f64;
            let drift = |z: f64| -> Result<f64> {
                let v = model.a(z);
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::Evaluation { what: "drift a", z })
                }
            };
            let mut f0 = drift(lo)?;
            for j in (0..PANELS_PER_DECADE).step_by(2) {
                let w0 = lo + j as f64 * h;
                let f1 = drift(w0 + h)?;
                let f2 = drift(w0 + 2.0 * h)?;
                let inner1 = inner + h * (5.0 * f0 + 8.0 * f1 - f2) / 12.0;
                let inner2 = inner + h * (f0 + 4.0 * f1 + f2) / 3.0;
                let e0 = -2.0 * inner;
                let e1 = -2.0 * inner1;
                let e2 = -2.0 * inner2;
                if e0.max(e1).max(e2) > 700.0 {
                    overflowed = true;
                    break;
                }
                outer += h * (e0.exp() + 4.0 * e1.exp() + e2.exp()) / 3.0;
                inner = inner2;
                f0 = f2;
            }
        }
        if hi >= CUTOFFS[0] {
            out.push(if overflowed { f64::INFINITY } else { outer });
        }
        lo = hi;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::build_model;

    fn verdict(a: &str) -> AssumptionReport {
        check_assumptions(&build_model(a, 1.0).unwrap(), 10.0).unwrap()
    }

    #[test]
    fn zero_drift_diverges_linearly() {
        let r = verdict("0");
        assert_eq!(r.divergence_heuristic, DivergenceVerdict::Diverges);
        for (w, v) in CUTOFFS.iter().zip(&r.partial_integrals) {
            assert!((v - w).abs() < 1e-9 * w);
        }
        assert!(r.warning.is_none());
        assert!(r.a_c1_on_domain);
        assert_eq!(r.gamma_lower_bound_estimate, 0.0);
    }

    #[test]
    fn ou_drift_diverges_by_overflow() {
        let r = verdict("-z");
        assert_eq!(r.divergence_heuristic, DivergenceVerdict::Diverges);
        assert!(r.partial_integrals.iter().any(|v| v.is_infinite()));
        assert_eq!(r.gamma_lower_bound_estimate, -0.5);
    }

    #[test]
    fn strong_positive_drift_is_flagged() {
        let r = verdict("1000");
        assert_ne!(r.divergence_heuristic, DivergenceVerdict::Diverges);
        assert!(r.warning.is_some());
        // ∫_0^∞ exp(-2000 w) dw = 1/2000.
        assert!((r.partial_integrals[3] - 5e-4).abs() < 1e-6);
    }

    #[test]
    fn slow_divergence_is_detected() {
        // a = 1/(2(1+z)) gives exp(-2∫a) = 1/(1+w): logarithmic divergence.
        let r = verdict("1/(2*(1+z))");
        assert_eq!(r.divergence_heuristic, DivergenceVerdict::Diverges);
    }

    #[test]
    fn partial_integrals_are_nondecreasing() {
        for a in ["0", "0.3", "1/(1+z)", "sin(z)", "1000"] {
            let r = verdict(a);
            assert!(r.partial_integrals.windows(2).all(|w| w[1] >= w[0]), "{a}");
        }
    }

    #[test]
    fn rejects_bad_probe() {
        let m = build_model("0", 1.0).unwrap();
        assert!(check_assumptions(&m, 0.0).is_err());
    }
}
