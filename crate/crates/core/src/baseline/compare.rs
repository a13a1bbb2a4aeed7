use std::time::{Duration, Instant};

use serde::Serialize;

use super::{euler_fpt_sample, kernel_density, Bandwidth, KernelDensity};
use crate::bridge::BridgeEnsemble;
use crate::error::{Error, Result};
use crate::estimator::{estimate_density, validate_grid};
use crate::model::DriftModel;

const PILOT_PATHS: usize = 256;

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonRow {
    pub method: String,
    /// Euler step; `None` for the direct estimator.
    pub h: Option<f64>,
    pub n_paths: usize,
    pub wall_time: f64,
    pub max_abs_error: f64,
    pub mean_abs_error: f64,
}

/// Euler output kept for reporting: the empirical CDF and kernel density on
/// the comparison grid.
#[derive(Debug, Clone, Serialize)]
pub struct EulerCurves {
    pub h: f64,
    pub n_paths: usize,
    pub cdf: Vec<f64>,
    pub kde: KernelDensity,
}

#[derive(Debug, Clone, Serialize)]
pub struct Comparison {
    pub rows: Vec<ComparisonRow>,
    pub euler: Vec<EulerCurves>,
}

#[derive(Debug, Clone)]
pub struct ComparisonConfig {
    pub n_paths: usize,
    pub grid_size: usize,
    pub seed: u64,
    /// Euler steps to compare; each run gets the direct estimator's budget.
    pub euler_steps: Vec<f64>,
    /// Fixed Euler path count instead of the matched budget.
    pub n_euler: Option<usize>,
    pub bridge_correction: bool,
    pub bandwidth: Bandwidth,
}

fn errors(values: &[f64], reference: &[f64]) -> (f64, f64) {
    let diffs: Vec<f64> = values
        .iter()
        .zip(reference)
        .map(|(v, r)| (v - r).abs())
        .collect();
    let max = diffs.iter().copied().fold(0.0, f64::max);
    (max, diffs.iter().sum::<f64>() / diffs.len() as f64)
}

/// Direct estimator against Euler + kernel density at matched wall-clock
/// time. Each Euler run's path count is chosen from a pilot run so that it
/// takes about as long as the direct estimate.
pub fn compare_methods<R: Fn(f64) -> f64>(
    model: &DriftModel,
    t_grid: &[f64],
    reference: R,
    config: &ComparisonConfig,
) -> Result<Comparison> {
    validate_grid(t_grid)?;
    let p_ref: Vec<f64> = t_grid.iter().map(|&t| reference(t)).collect();
    let horizon_max = *t_grid.last().unwrap();

    let start = Instant::now();
    let ensemble = BridgeEnsemble::new(config.n_paths, config.grid_size, config.seed)?;
    let direct = estimate_density(model, t_grid, &ensemble)?;
    let budget = start.elapsed();
    let (max_abs_error, mean_abs_error) = errors(&direct.p_hat, &p_ref);
    let mut rows = vec![ComparisonRow {
        method: "direct".into(),
        h: None,
        n_paths: config.n_paths,
        wall_time: budget.as_secs_f64(),
        max_abs_error,
        mean_abs_error,
    }];
    let mut euler = Vec::new();

    for &h in &config.euler_steps {
        let horizon = (horizon_max / h).ceil() * h;
        let pilot_start = Instant::now();
        euler_fpt_sample(
            model,
            h,
            horizon,
            PILOT_PATHS,
            config.bridge_correction,
            config.seed ^ 1,
        )?;
        let per_path = pilot_start.elapsed().as_secs_f64() / PILOT_PATHS as f64;
        let n_euler =
            ((budget.as_secs_f64() / per_path.max(1e-9)) as usize).max(super::kde::MIN_SAMPLES);

        let start = Instant::now();
        let run = euler_fpt_sample(
            model,
            h,
            horizon,
            n_euler,
            config.bridge_correction,
            config.seed,
        )?;
        let kde = kernel_density(&run, config.bandwidth, t_grid)?;
        let elapsed: Duration = start.elapsed();
        let (max_abs_error, mean_abs_error) = errors(&kde.values, &p_ref);
        rows.push(ComparisonRow {
            method: format!("euler+kde h={h}"),
            h: Some(h),
            n_paths: n_euler,
            wall_time: elapsed.as_secs_f64(),
            max_abs_error,
            mean_abs_error,
        });
        euler.push(EulerCurves {
            h,
            n_paths: n_euler,
            cdf: run.cdf_curve(t_grid),
            kde,
        });
    }
    if rows.iter().any(|r| !r.max_abs_error.is_finite()) {
        return Err(Error::invalid("comparison produced non-finite errors"));
    }
    Ok(Comparison { rows, euler })
}
