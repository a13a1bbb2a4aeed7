//! Principal Dirichlet eigenvalue of the killed generator and the mixture
//! density for large `t`.
//!
//! The eigenproblem `½φ″ + aφ′ = -μφ` on `(0, n)` with `φ(0) = φ(n) = 0` is
//! the Sturm–Liouville problem `-(wφ′)′ = 2μwφ` with `w = exp(2∫_0^z a)`.
//! Writing `φ = ψ/√w` turns it into `-½ψ″ + γψ = μψ`, whose potential is the
//! model's `γ`. That problem is discretized by central differences into a
//! symmetric tridiagonal matrix.

mod tridiag;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimator::DensityEstimate;
use crate::model::{bm_fpt_log_density, DriftModel};

pub const DEFAULT_MESH: usize = 4000;
pub const MIN_MESH: usize = 100;
/// Largest eigenvalue change between `mesh` and `2 mesh` that is accepted.
pub const MESH_SHIFT_TOL: f64 = 1e-3;
/// Default splice rule: first `t` with `std_err / p_hat` above this.
pub const DEFAULT_RELATIVE_ERROR: f64 = 0.15;
const BISECTION_TOL: f64 = 1e-10;
const LIOUVILLE_TOL: f64 = 1e-10;
const INVERSE_ITERATIONS: usize = 4;

/// `max(8, 4x)`.
pub fn default_domain(x: f64) -> f64 {
    (4.0 * x).max(8.0)
}

#[derive(Debug, Clone, Serialize)]
pub struct EigenResult {
    /// Richardson extrapolation of `mu_mesh` and `mu_refined`.
    pub mu1: f64,
    pub mu_mesh: f64,
    pub mu_refined: f64,
    pub n: f64,
    pub mesh: usize,
    /// Schrödinger-form eigenfunction `ψ` on the `mesh + 1` nodes, zero at
    /// both ends, nonnegative and normalized to `h Σ ψ² = 1`.
    pub eigenfunction_samples: Vec<f64>,
}

/// Potential of the Liouville-transformed problem, computed from the
/// log-weight `ℓ = ln w`: `ℓ″/4 + ℓ′²/8` with `ℓ′ = 2a`, `ℓ″ = 2a′`.
pub fn liouville_potential(model: &DriftModel, z: f64) -> f64 {
    let l1 = 2.0 * model.a(z);
    let l2 = 2.0 * model.a_prime(z);
    l2 / 4.0 + l1 * l1 / 8.0
}

/// Checks that the Liouville potential equals `gamma` at every node of the
/// mesh, relative to `max(1, |gamma|)`.
pub fn check_liouville(model: &DriftModel, n: f64, mesh: usize) -> Result<()> {
    for j in 0..=mesh {
        let z = n * j as f64 / mesh as f64;
        let potential = liouville_potential(model, z);
        let gamma = model.gamma(z);
        if !((potential - gamma).abs() <= LIOUVILLE_TOL * gamma.abs().max(1.0)) {
            return Err(Error::LiouvilleMismatch {
                z,
                potential,
                gamma,
            });
        }
    }
    Ok(())
}

struct Discretization {
    diag: Vec<f64>,
    off: f64,
    h: f64,
}

fn discretize(model: &DriftModel, n: f64, mesh: usize) -> Result<Discretization> {
    let h = n / mesh as f64;
    let inv_h2 = 1.0 / (h * h);
    let diag = (1..mesh)
        .map(|j| {
            let z = j as f64 * h;
            let g = model.gamma(z);
            if g.is_finite() {
                Ok(inv_h2 + g)
            } else {
                Err(Error::Evaluation { what: "gamma", z })
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Discretization {
        diag,
        off: -0.5 * inv_h2,
        h,
    })
}

fn eigenfunction(d: &Discretization, shift: f64) -> Vec<f64> {
    let mut v = vec![1.0; d.diag.len()];
    let mut work = Vec::new();
    for _ in 0..INVERSE_ITERATIONS {
        tridiag::solve_shifted(&d.diag, d.off, shift, &mut v, &mut work);
        let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        v.iter_mut().for_each(|x| *x /= scale);
    }
    if v.iter().sum::<f64>() < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
    let norm = (d.h * v.iter().map(|x| x * x).sum::<f64>()).sqrt();
    let mut samples = Vec::with_capacity(v.len() + 2);
    samples.push(0.0);
    samples.extend(v.iter().map(|x| x / norm));
    samples.push(0.0);
    samples
}

/// Smallest Dirichlet eigenvalue `μ₁ⁿ` of `-½ψ″ + γψ` on `(0, n)`.
///
/// Bisection on Sturm counts at `mesh` and `2 mesh`, combined by Richardson
/// extrapolation `(4μ(2 mesh) - μ(mesh)) / 3`. Fails with
/// [`Error::MeshTooCoarse`] when the two levels differ by more than
/// [`MESH_SHIFT_TOL`].
pub fn principal_eigenvalue(model: &DriftModel, n: f64, mesh: usize) -> Result<EigenResult> {
    if !(n > 0.0 && n.is_finite()) {
        return Err(Error::invalid(format!(
            "domain length must be positive, got {n}"
        )));
    }
    if mesh < MIN_MESH {
        return Err(Error::invalid(format!(
            "mesh must be at least {MIN_MESH}, got {mesh}"
        )));
    }
    check_liouville(model, n, 2 * mesh)?;

    let coarse = discretize(model, n, mesh)?;
    let (lo, hi) = tridiag::smallest_eigenvalue(&coarse.diag, coarse.off, BISECTION_TOL);
    let mu_mesh = 0.5 * (lo + hi);
    let fine = discretize(model, n, 2 * mesh)?;
    let (flo, fhi) = tridiag::smallest_eigenvalue(&fine.diag, fine.off, BISECTION_TOL);
    let mu_refined = 0.5 * (flo + fhi);

    let shift = (mu_refined - mu_mesh).abs();
    if shift > MESH_SHIFT_TOL {
        return Err(Error::MeshTooCoarse { mesh, shift });
    }
    // Shift slightly below the eigenvalue so `A - shift I` stays positive
    // definite and Thomas needs no pivoting.
    let samples = eigenfunction(&coarse, lo - 1e-7 * mu_mesh.abs().max(1.0));
    Ok(EigenResult {
        mu1: (4.0 * mu_refined - mu_mesh) / 3.0,
        mu_mesh,
        mu_refined,
        n,
        mesh,
        eigenfunction_samples: samples,
    })
}

/// `μ₁` on the domains `n, 2n, 4n, ...` (`levels` entries).
pub fn eigen_ladder(
    model: &DriftModel,
    n: f64,
    mesh: usize,
    levels: usize,
) -> Result<Vec<EigenResult>> {
    (0..levels)
        .map(|k| principal_eigenvalue(model, n * f64::powi(2.0, k as i32), mesh))
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct TailModel {
    /// Splice time `T`.
    pub t_splice: f64,
    /// Decay rate, `μ₁ⁿ`.
    pub lambda: f64,
    /// `p_hat(T) / (q_x(T) exp(-λT))`.
    pub c_star: f64,
    pub n: f64,
    pub mesh: usize,
    #[serde(skip)]
    pub source: DensityEstimate,
    p_splice: f64,
    log_q_splice: f64,
}

/// First grid time at which `std_err / p_hat` exceeds `ratio`.
pub fn default_splice_time(estimate: &DensityEstimate, ratio: f64) -> Option<f64> {
    estimate
        .t_grid
        .iter()
        .zip(estimate.p_hat.iter().zip(&estimate.std_err))
        .find(|(_, (p, se))| !(**se <= ratio * **p))
        .map(|(t, _)| *t)
}

/// Splices the Monte Carlo estimate on `[0, T]` with `c_* q_x(t) exp(-μ₁ⁿ t)`.
pub fn build_tail(
    model: &DriftModel,
    estimate: &DensityEstimate,
    t_splice: f64,
    n: f64,
    mesh: usize,
) -> Result<TailModel> {
    let j = estimate.index_of(t_splice).ok_or_else(|| {
        Error::invalid(format!(
            "splice time {t_splice} is not on the estimate's grid"
        ))
    })?;
    let t_splice = estimate.t_grid[j];
    let p_splice = estimate.p_hat[j];
    if !(p_splice > 0.0) {
        return Err(Error::invalid(format!(
            "density estimate at T = {t_splice} is not positive"
        )));
    }
    let lambda = principal_eigenvalue(model, n, mesh)?.mu1;
    let log_q_splice = bm_fpt_log_density(estimate.x, t_splice);
    Ok(TailModel {
        t_splice,
        lambda,
        c_star: (p_splice.ln() - log_q_splice + lambda * t_splice).exp(),
        n,
        mesh,
        source: estimate.clone(),
        p_splice,
        log_q_splice,
    })
}

/// Mixture density: the interpolated estimate below `T`, the exponential
/// tail from `T` on.
pub fn evaluate_mixture(tm: &TailModel, t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::invalid(format!("mixture needs t >= 0, got {t}")));
    }
    if t < tm.t_splice {
        return Ok(tm.source.interpolate(t));
    }
    // Anchored at p_hat(T) so the two branches agree exactly at T.
    let log_ratio =
        bm_fpt_log_density(tm.source.x, t) - tm.log_q_splice - tm.lambda * (t - tm.t_splice);
    Ok(tm.p_splice * log_ratio.exp())
}

/// Local decay rate of the mixture relative to `q_x`,
/// `-d/dt ln(p_mix(t) / q_x(t))`, by a central difference of step `dt`.
pub fn mixture_local_rate(tm: &TailModel, t: f64, dt: f64) -> Result<f64> {
    let x = tm.source.x;
    let f =
        |s: f64| -> Result<f64> { Ok(evaluate_mixture(tm, s)?.ln() - bm_fpt_log_density(x, s)) };
    Ok(-(f(t + dt)? - f(t - dt)?) / (2.0 * dt))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bridge::BridgeEnsemble;
    use crate::estimator::{estimate_density, uniform_grid};
    use crate::model::build_model;
    use std::f64::consts::PI;

    #[test]
    fn zero_drift_dirichlet_values() {
        let zero = build_model("0", 1.0).unwrap();
        let e = principal_eigenvalue(&zero, 1.0, DEFAULT_MESH).unwrap();
        assert!((e.mu1 - PI * PI / 2.0).abs() < 1e-6, "{}", e.mu1);
        let e = principal_eigenvalue(&zero, 2.0, DEFAULT_MESH).unwrap();
        assert!((e.mu1 - PI * PI / 8.0).abs() < 1e-6);
    }

    #[test]
    fn eigenfunction_is_the_sine() {
        let zero = build_model("0", 1.0).unwrap();
        let e = principal_eigenvalue(&zero, 1.0, 400).unwrap();
        let s = &e.eigenfunction_samples;
        assert_eq!(s.len(), 401);
        assert_eq!((s[0], s[400]), (0.0, 0.0));
        for (j, v) in s.iter().enumerate() {
            let exact = 2f64.sqrt() * (PI * j as f64 / 400.0).sin();
            assert!((v - exact).abs() < 1e-4, "{j}: {v} vs {exact}");
        }
    }

    #[test]
    fn ou_eigenvalue_is_one() {
        let ou = build_model("-z", 1.0).unwrap();
        let e = principal_eigenvalue(&ou, 8.0, DEFAULT_MESH).unwrap();
        assert!((e.mu1 - 1.0).abs() < 1e-3, "{}", e.mu1);
        assert!(e.eigenfunction_samples[1..DEFAULT_MESH]
            .iter()
            .all(|v| *v >= 0.0));
    }

    #[test]
    fn domain_monotonicity() {
        let m = build_model("-z/2 + 0.3", 1.0).unwrap();
        let mus: Vec<f64> = [2.0, 4.0, 8.0]
            .iter()
            .map(|&n| principal_eigenvalue(&m, n, 1000).unwrap().mu1)
            .collect();
        assert!(mus[0] > mus[1] && mus[1] > mus[2], "{mus:?}");
    }

    #[test]
    fn coarse_mesh_is_reported() {
        let steep = build_model("-40*z", 1.0).unwrap();
        let err = principal_eigenvalue(&steep, 8.0, 100);
        assert!(
            matches!(err, Err(Error::MeshTooCoarse { mesh: 100, .. })),
            "{err:?}"
        );
        assert!(principal_eigenvalue(&steep, 8.0, 99).is_err());
    }

    #[test]
    fn liouville_identity_holds() {
        for a in ["-z", "0", "sin(z) - z/3", "exp(-z) + 1/(1 + z)"] {
            check_liouville(&build_model(a, 1.0).unwrap(), 10.0, 5000).unwrap();
        }
    }

    #[test]
    fn mixture_is_continuous_and_follows_the_tail() {
        let ou = build_model("-z", 1.0).unwrap();
        let est = estimate_density(
            &ou,
            &uniform_grid(8.0, 80),
            &BridgeEnsemble::new(500, 100, 3).unwrap(),
        )
        .unwrap();
        let tm = build_tail(&ou, &est, 6.0, 8.0, 1000).unwrap();
        let at_t = evaluate_mixture(&tm, 6.0).unwrap();
        assert_eq!(at_t, est.p_hat[est.index_of(6.0).unwrap()]);
        let direct = tm.c_star * bm_fpt_log_density(1.0, 6.0).exp() * (-tm.lambda * 6.0).exp();
        assert!((direct - at_t).abs() < 1e-12 * at_t);
        let v = evaluate_mixture(&tm, 12.0).unwrap();
        let formula = tm.c_star * bm_fpt_log_density(1.0, 12.0).exp() * (-tm.lambda * 12.0).exp();
        assert!((v - formula).abs() < 1e-12 * formula);
        assert!((mixture_local_rate(&tm, 10.0, 1e-3).unwrap() - tm.lambda).abs() < 1e-6);
        assert!(evaluate_mixture(&tm, -1.0).is_err());
        assert!(build_tail(&ou, &est, 6.05, 8.0, 1000).is_err());
    }

    #[test]
    fn splice_rule() {
        let ou = build_model("-z", 1.0).unwrap();
        let est = estimate_density(
            &ou,
            &uniform_grid(20.0, 40),
            &BridgeEnsemble::new(100, 50, 1).unwrap(),
        )
        .unwrap();
        let t = default_splice_time(&est, DEFAULT_RELATIVE_ERROR).unwrap();
        let j = est.index_of(t).unwrap();
        assert!(est.std_err[j] > 0.15 * est.p_hat[j]);
        assert!((0..j).all(|i| est.std_err[i] <= 0.15 * est.p_hat[i]));
    }
}
