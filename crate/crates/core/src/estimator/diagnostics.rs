//! Replicated-run diagnostics: the empirical covariance of the fluctuation
//! process and the `1/sqrt(N)` scaling of the uniform error.

use serde::Serialize;

use super::{estimate_density, validate_grid};
use crate::bridge::BridgeEnsemble;
use crate::error::{Error, Result};
use crate::model::{bm_fpt_density, ou_fpt_density, DriftModel};
use crate::rng::stream_seed;

/// Minimum number of replications for [`covariance_diagnostic`].
pub const MIN_REPLICATIONS: usize = 30;
/// Size of the reference run relative to `N` when no closed form exists.
pub const DEFAULT_REFERENCE_MULTIPLIER: usize = 100;

/// The density that replicated estimates are compared against.
pub enum Reference {
    ClosedForm(Box<dyn Fn(f64) -> f64 + Send + Sync>),
    /// One run with `multiplier * N` paths on an independent seed.
    Simulated {
        multiplier: usize,
    },
}

impl Reference {
    pub fn brownian(x: f64) -> Self {
        Reference::ClosedForm(Box::new(move |t| bm_fpt_density(x, t)))
    }

    /// `p_1` of the OU drift `a(z) = -z` from `x = 1`.
    pub fn ornstein_uhlenbeck() -> Self {
        Reference::ClosedForm(Box::new(|t| ou_fpt_density(t).unwrap_or(0.0)))
    }

    fn values(
        &self,
        model: &DriftModel,
        times: &[f64],
        n_paths: usize,
        grid_size: usize,
        base_seed: u64,
    ) -> Result<Vec<f64>> {
        match self {
            Reference::ClosedForm(f) => Ok(times.iter().map(|&t| f(t)).collect()),
            Reference::Simulated { multiplier } => {
                let ensemble = BridgeEnsemble::new(
                    n_paths * multiplier.max(&1),
                    grid_size,
                    stream_seed(base_seed, u64::MAX),
                )?;
                Ok(estimate_density(model, times, &ensemble)?.p_hat)
            }
        }
    }
}

fn replication_seed(base_seed: u64, n_paths: usize, r: usize) -> u64 {
    stream_seed(stream_seed(base_seed, n_paths as u64), r as u64)
}

#[derive(Debug, Clone, Serialize)]
pub struct CovarianceDiagnostic {
    pub pairs: Vec<(f64, f64)>,
    /// Sample covariance of `sqrt(N) (p_hat - p_ref)` over replications, per pair.
    pub empirical_gamma: Vec<f64>,
    /// Distinct times appearing in `pairs`, increasing.
    pub times: Vec<f64>,
    pub reference: Vec<f64>,
    /// `|p_hat - p_ref| / std_err`, indexed `[replication][time]`.
    pub z_scores: Vec<Vec<f64>>,
    pub n_paths: usize,
    pub replications: usize,
}

impl CovarianceDiagnostic {
    /// Empirical `q`-quantile of the z-scores at `times[j]`.
    pub fn z_quantile(&self, j: usize, q: f64) -> f64 {
        let mut zs: Vec<f64> = self.z_scores.iter().map(|row| row[j]).collect();
        zs.sort_by(f64::total_cmp);
        let k = ((q * zs.len() as f64).ceil() as usize).clamp(1, zs.len());
        zs[k - 1]
    }
}

fn z_score(diff: f64, se: f64) -> f64 {
    if diff == 0.0 {
        0.0
    } else if se == 0.0 {
        f64::INFINITY
    } else {
        diff.abs() / se
    }
}

/// Replicates the `N`-path estimator `replications` times and reports the
/// empirical covariance of `sqrt(N)(p_hat - p_ref)` at each `(s, t)` pair.
pub fn covariance_diagnostic(
    model: &DriftModel,
    pairs: &[(f64, f64)],
    n_paths: usize,
    grid_size: usize,
    replications: usize,
    base_seed: u64,
    reference: &Reference,
) -> Result<CovarianceDiagnostic> {
    if replications < MIN_REPLICATIONS {
        return Err(Error::invalid(format!(
            "covariance diagnostic needs at least {MIN_REPLICATIONS} replications, got {replications}"
        )));
    }
    let mut times: Vec<f64> = pairs.iter().flat_map(|&(s, t)| [s, t]).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    validate_grid(&times)?;
    let index = |t: f64| times.binary_search_by(|g| g.total_cmp(&t)).unwrap();

    let p_ref = reference.values(model, &times, n_paths, grid_size, base_seed)?;
    let scale = (n_paths as f64).sqrt();
    let mut deviations = Vec::with_capacity(replications);
    let mut z_scores = Vec::with_capacity(replications);
    for r in 0..replications {
        let ensemble =
            BridgeEnsemble::new(n_paths, grid_size, replication_seed(base_seed, n_paths, r))?;
        let est = estimate_density(model, &times, &ensemble)?;
        let diff: Vec<f64> = est.p_hat.iter().zip(&p_ref).map(|(p, q)| p - q).collect();
        z_scores.push(
            diff.iter()
                .zip(&est.std_err)
                .map(|(&d, &se)| z_score(d, se))
                .collect(),
        );
        deviations.push(diff.into_iter().map(|d| scale * d).collect::<Vec<_>>());
    }

    let n = replications as f64;
    let mean: Vec<f64> = (0..times.len())
        .map(|j| deviations.iter().map(|d| d[j]).sum::<f64>() / n)
        .collect();
    let empirical_gamma = pairs
        .iter()
        .map(|&(s, t)| {
            let (i, j) = (index(s), index(t));
            deviations
                .iter()
                .map(|d| (d[i] - mean[i]) * (d[j] - mean[j]))
                .sum::<f64>()
                / (n - 1.0)
        })
        .collect();

    Ok(CovarianceDiagnostic {
        pairs: pairs.to_vec(),
        empirical_gamma,
        times,
        reference: p_ref,
        z_scores,
        n_paths,
        replications,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ScalingRow {
    pub n_paths: usize,
    /// `sqrt(mean_r max_t (p_hat - p_ref)^2)`.
    pub rmse: f64,
    /// `max_t |p_hat - p_ref|` per replication.
    pub max_errors: Vec<f64>,
    /// Grid average of `std_err`, per replication.
    pub mean_std_err: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScalingTable {
    pub rows: Vec<ScalingRow>,
    /// Least-squares slope of `ln rmse` against `ln N`.
    pub slope: f64,
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// RMSE of the uniform error over `t_grid` for each `N` in `n_list`, over
/// `replications` independent seeds.
pub fn convergence_scaling(
    model: &DriftModel,
    t_grid: &[f64],
    n_list: &[usize],
    grid_size: usize,
    replications: usize,
    base_seed: u64,
    reference: &Reference,
) -> Result<ScalingTable> {
    validate_grid(t_grid)?;
    if n_list.len() < 2 || replications == 0 {
        return Err(Error::invalid(
            "scaling needs at least two sample sizes and one replication",
        ));
    }
    let mut rows = Vec::with_capacity(n_list.len());
    for &n_paths in n_list {
        let p_ref = reference.values(model, t_grid, n_paths, grid_size, base_seed)?;
        let mut max_errors = Vec::with_capacity(replications);
        let mut mean_std_err = Vec::with_capacity(replications);
        for r in 0..replications {
            let ensemble =
                BridgeEnsemble::new(n_paths, grid_size, replication_seed(base_seed, n_paths, r))?;
            let est = estimate_density(model, t_grid, &ensemble)?;
            max_errors.push(
                est.p_hat
                    .iter()
                    .zip(&p_ref)
                    .map(|(p, q)| (p - q).abs())
                    .fold(0.0, f64::max),
            );
            mean_std_err.push(est.std_err.iter().sum::<f64>() / t_grid.len() as f64);
        }
        let rmse = (max_errors.iter().map(|e| e * e).sum::<f64>() / replications as f64).sqrt();
        rows.push(ScalingRow {
            n_paths,
            rmse,
            max_errors,
            mean_std_err,
        });
    }
    let xs: Vec<f64> = rows.iter().map(|r| r.n_paths as f64).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.rmse).collect();
    Ok(ScalingTable {
        slope: loglog_slope(&xs, &ys),
        rows,
    })
}
