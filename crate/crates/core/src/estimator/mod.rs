//! The direct density estimator, the rate function and their diagnostics.
//!
//! One bridge ensemble serves the whole time grid: for each path the bridge
//! is generated once and `I_i(t)` is evaluated at every `t` by rescaling the
//! same points by `sqrt(t)`. Means of `exp(-t I_i(t))` are formed in log
//! space, shifted by the largest exponent.

mod accumulator;
mod diagnostics;

use std::f64::consts::PI;

use serde::Serialize;

pub use accumulator::LogMeanExp;
pub use diagnostics::{
    convergence_scaling, covariance_diagnostic, loglog_slope, CovarianceDiagnostic, Reference,
    ScalingRow, ScalingTable, DEFAULT_REFERENCE_MULTIPLIER, MIN_REPLICATIONS,
};

use crate::bridge::{BridgeEnsemble, FunctionalKernel, PathProfile};
use crate::error::{Error, Result};
use crate::model::{bm_fpt_log_density, DriftModel, DEFAULT_PROBE_MAX};
use crate::quad::{simpson_adaptive, simpson_weights};

pub const DEFAULT_GRID_POINTS: usize = 200;
pub const DEFAULT_KAPPA_SEARCH: (f64, f64) = (1e-2, 1e2);
const LOWER_BOUND_PROBES: usize = 10_000;
const KAPPA_SCAN: usize = 200;

#[derive(Debug, Clone, Serialize)]
pub struct DensityEstimate {
    pub t_grid: Vec<f64>,
    pub p_hat: Vec<f64>,
    pub std_err: Vec<f64>,
    /// `ln((1/N) Σ exp(-t I_i(t)))` per grid point.
    pub log_mean: Vec<f64>,
    pub x: f64,
    pub n_paths: usize,
    pub grid_size: usize,
    pub base_seed: u64,
    /// `-∫_0^x a`.
    pub prefactor_log: f64,
}

impl DensityEstimate {
    /// Index of `t` in the grid (relative tolerance `1e-12`).
    pub fn index_of(&self, t: f64) -> Option<usize> {
        self.t_grid
            .iter()
            .position(|&g| (g - t).abs() <= 1e-12 * t.abs().max(1.0))
    }

    /// Linear interpolation of `p_hat`, with `p_hat(0) = 0`.
    pub fn interpolate(&self, t: f64) -> f64 {
        let grid = &self.t_grid;
        if t <= 0.0 {
            return 0.0;
        }
        let j = grid.partition_point(|&g| g < t);
        if j == 0 {
            return self.p_hat[0] * t / grid[0];
        }
        if j == grid.len() {
            return *self.p_hat.last().unwrap();
        }
        let (t0, t1) = (grid[j - 1], grid[j]);
        let w = (t - t0) / (t1 - t0);
        self.p_hat[j - 1] * (1.0 - w) + self.p_hat[j] * w
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RateCurve {
    pub t_grid: Vec<f64>,
    pub lambda_hat: Vec<f64>,
    /// Sampled `inf gamma`.
    pub lower_bound: f64,
    /// `inf_kappa { m(kappa + x) + pi^2 / (2 kappa^2) }`.
    pub upper_bound: f64,
    /// `(1/x) ∫_0^x gamma`.
    pub small_t_limit: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateBounds {
    pub lower: f64,
    pub upper: f64,
    /// Minimizing `kappa`; infinite when the limit `kappa -> inf` wins.
    pub kappa_star: f64,
}

/// `points` uniform times on `(0, t_max]`.
pub fn uniform_grid(t_max: f64, points: usize) -> Vec<f64> {
    (1..=points)
        .map(|k| t_max * k as f64 / points as f64)
        .collect()
}

/// `points` uniform times on `[lo, hi]`.
pub fn linspace(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![lo];
    }
    (0..points)
        .map(|k| lo + (hi - lo) * k as f64 / (points - 1) as f64)
        .collect()
}

pub fn validate_grid(t_grid: &[f64]) -> Result<()> {
    if t_grid.is_empty() {
        return Err(Error::invalid("time grid is empty"));
    }
    if !t_grid.iter().all(|t| *t > 0.0 && t.is_finite()) {
        return Err(Error::invalid(
            "time grid must be strictly positive and finite",
        ));
    }
    if !t_grid.windows(2).all(|w| w[1] > w[0]) {
        return Err(Error::invalid("time grid must be strictly increasing"));
    }
    Ok(())
}

/// Per-`t` accumulators of `-t I_i(t)` over the ensemble, reduced in chunk
/// order.
fn accumulate(
    model: &DriftModel,
    t_grid: &[f64],
    ensemble: &BridgeEnsemble,
) -> Result<Vec<LogMeanExp>> {
    let m = ensemble.grid_size();
    let kernel = FunctionalKernel::new(m, model.x());
    let partials = ensemble.map_chunks(|range| -> Result<Vec<LogMeanExp>> {
        let mut accs = vec![LogMeanExp::default(); t_grid.len()];
        let mut profile = PathProfile::new(m);
        let (mut radii, mut values, mut scratch) = (vec![0.0; m + 1], vec![0.0; m + 1], Vec::new());
        let mut failure = None;
        ensemble.for_each_path(range, |_, points| {
            if failure.is_some() {
                return;
            }
            profile.load(points);
            for (acc, &t) in accs.iter_mut().zip(t_grid) {
                let i = kernel.integrate_batch(&profile, t, &mut radii, &mut values, |zs, out| {
                    model.gamma_batch(zs, out, &mut scratch)
                });
                match i {
                    Ok(i) => acc.push(-t * i),
                    Err(e) => {
                        failure = Some(e);
                        return;
                    }
                }
            }
        });
        failure.map_or(Ok(accs), Err)
    });
    reduce(partials, t_grid.len())
}

fn reduce(partials: Vec<Result<Vec<LogMeanExp>>>, len: usize) -> Result<Vec<LogMeanExp>> {
    let mut total = vec![LogMeanExp::default(); len];
    for chunk in partials {
        for (acc, part) in total.iter_mut().zip(chunk?) {
            acc.merge(&part);
        }
    }
    Ok(total)
}

fn check_inputs(t_grid: &[f64], ensemble: &BridgeEnsemble) -> Result<()> {
    validate_grid(t_grid)?;
    if ensemble.n_paths() < 2 {
        return Err(Error::invalid("the estimator needs at least two paths"));
    }
    Ok(())
}

/// `p_hat(t) = q_x(t) exp(-∫_0^x a) (1/N) Σ exp(-t I_i(t))` on `t_grid`.
pub fn estimate_density(
    model: &DriftModel,
    t_grid: &[f64],
    ensemble: &BridgeEnsemble,
) -> Result<DensityEstimate> {
    check_inputs(t_grid, ensemble)?;
    let accs = accumulate(model, t_grid, ensemble)?;
    let x = model.x();
    let prefactor_log = model.prefactor_log();
    let sqrt_n = (ensemble.n_paths() as f64).sqrt();
    let mut p_hat = Vec::with_capacity(t_grid.len());
    let mut std_err = Vec::with_capacity(t_grid.len());
    let mut log_mean = Vec::with_capacity(t_grid.len());
    for (acc, &t) in accs.iter().zip(t_grid) {
        let log_q = bm_fpt_log_density(x, t);
        let lm = acc.log_mean();
        p_hat.push((log_q + prefactor_log + lm).exp());
        std_err.push((log_q + prefactor_log + acc.log_std()).exp() / sqrt_n);
        log_mean.push(lm);
    }
    Ok(DensityEstimate {
        t_grid: t_grid.to_vec(),
        p_hat,
        std_err,
        log_mean,
        x,
        n_paths: ensemble.n_paths(),
        grid_size: ensemble.grid_size(),
        base_seed: ensemble.base_seed(),
        prefactor_log,
    })
}

/// `(1/x) ∫_0^x gamma`, the `t -> 0` limit of the rate function.
pub fn small_t_limit(model: &DriftModel) -> Result<f64> {
    let x = model.x();
    Ok(simpson_adaptive(|z| model.gamma(z), 0.0, x, 1e-10)? / x)
}

/// Rate curve `-(1/t) ln(mean exp(-t I))` read off an existing estimate.
pub fn rate_from_density(model: &DriftModel, density: &DensityEstimate) -> Result<RateCurve> {
    let bounds = rate_bounds(model, DEFAULT_KAPPA_SEARCH)?;
    Ok(RateCurve {
        t_grid: density.t_grid.clone(),
        lambda_hat: density
            .log_mean
            .iter()
            .zip(&density.t_grid)
            // `+ 0.0` turns the zero-drift `-0.0` into `0.0`.
            .map(|(lm, t)| -lm / t + 0.0)
            .collect(),
        lower_bound: bounds.lower,
        upper_bound: bounds.upper,
        small_t_limit: small_t_limit(model)?,
    })
}

pub fn estimate_rate(
    model: &DriftModel,
    t_grid: &[f64],
    ensemble: &BridgeEnsemble,
) -> Result<RateCurve> {
    let density = estimate_density(model, t_grid, ensemble)?;
    rate_from_density(model, &density)
}

fn golden_section<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol * (a.abs() + b.abs()).max(1e-12) {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Bounds on the rate function: `inf gamma` (sampled) below, and above
/// `inf_kappa { m(kappa + x) + pi^2 / (2 kappa^2) }` with
/// `m(w) = max_{0 <= z <= w} gamma(z)` scanned on a grid of step `w / 1000`.
///
/// The minimization scans `kappa` log-uniformly over `kappa_search`, then
/// refines the best bracket by golden section. The `kappa -> inf` limit is
/// included as `m(kappa_max + x)`, i.e. with `m` frozen at the search edge.
pub fn rate_bounds(model: &DriftModel, kappa_search: (f64, f64)) -> Result<RateBounds> {
    let (k_lo, k_hi) = kappa_search;
    if !(k_lo > 0.0 && k_hi > k_lo && k_hi.is_finite()) {
        return Err(Error::invalid(format!(
            "bad kappa search interval {kappa_search:?}"
        )));
    }
    let x = model.x();
    let probe_max = DEFAULT_PROBE_MAX.max(x);
    let mut lower = f64::INFINITY;
    for k in 0..=LOWER_BOUND_PROBES {
        let g = model.gamma(probe_max * k as f64 / LOWER_BOUND_PROBES as f64);
        lower = if g.is_finite() {
            lower.min(g)
        } else {
            f64::NEG_INFINITY
        };
    }

    let running_max = |w: f64| -> f64 {
        let mut m = f64::NEG_INFINITY;
        for k in 0..=1000 {
            let g = model.gamma(w * k as f64 / 1000.0);
            if !g.is_finite() {
                return f64::INFINITY;
            }
            m = m.max(g);
        }
        m
    };
    let objective = |kappa: f64| running_max(kappa + x) + PI * PI / (2.0 * kappa * kappa);

    let ratio = (k_hi / k_lo).ln();
    let kappas: Vec<f64> = (0..KAPPA_SCAN)
        .map(|j| k_lo * (ratio * j as f64 / (KAPPA_SCAN - 1) as f64).exp())
        .collect();
    let values: Vec<f64> = kappas.iter().map(|&k| objective(k)).collect();
    let best = values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(j, _)| j)
        .unwrap();
    let (a, b) = (
        kappas[best.saturating_sub(1)],
        kappas[(best + 1).min(KAPPA_SCAN - 1)],
    );
    let kappa = golden_section(objective, a, b, 1e-10);
    let (mut upper, mut kappa_star) = (objective(kappa), kappa);
    if values[best] < upper {
        upper = values[best];
        kappa_star = kappas[best];
    }
    let saturated = running_max(k_hi + x);
    if saturated < upper {
        upper = saturated;
        kappa_star = f64::INFINITY;
    }
    Ok(RateBounds {
        lower,
        upper,
        kappa_star,
    })
}

/// Rate estimator for the OU drift `a(z) = -z` from the per-path moments
/// `A_i = ∫|beta|^2` and `C_i = ∫ u beta^(1)`:
///
/// ```text
/// lambda_hat(t) = x^2/6 - 1/2 - (1/t) ln((1/N) Σ exp(-t^2 A_i / 2 - t^{3/2} x C_i))
/// ```
///
/// This is algebraically the same quantity as [`estimate_rate`] on the OU
/// model and serves as an independent evaluation route.
pub fn ou_rate_estimator(
    model: &DriftModel,
    t_grid: &[f64],
    ensemble: &BridgeEnsemble,
) -> Result<RateCurve> {
    check_inputs(t_grid, ensemble)?;
    model.check_ornstein_uhlenbeck()?;
    let x = model.x();
    let m = ensemble.grid_size();
    let weights = simpson_weights(m);
    let h_third = 1.0 / (3.0 * m as f64);
    let partials = ensemble.map_chunks(|range| -> Result<Vec<LogMeanExp>> {
        let mut accs = vec![LogMeanExp::default(); t_grid.len()];
        ensemble.for_each_path(range, |_, points| {
            let (mut a, mut c) = (0.0, 0.0);
            for (k, (p, w)) in points.iter().zip(&weights).enumerate() {
                let u = k as f64 / m as f64;
                a += w * (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]);
                c += w * u * p[0];
            }
            let (a, c) = (a * h_third, c * h_third);
            for (acc, &t) in accs.iter_mut().zip(t_grid) {
                acc.push(-t * t * a / 2.0 - t * t.sqrt() * x * c);
            }
        });
        Ok(accs)
    });
    let accs = reduce(partials, t_grid.len())?;
    let bounds = rate_bounds(model, DEFAULT_KAPPA_SEARCH)?;
    Ok(RateCurve {
        t_grid: t_grid.to_vec(),
        lambda_hat: accs
            .iter()
            .zip(t_grid)
            .map(|(acc, &t)| x * x / 6.0 - 0.5 - acc.log_mean() / t)
            .collect(),
        lower_bound: bounds.lower,
        upper_bound: bounds.upper,
        small_t_limit: small_t_limit(model)?,
    })
}
