use serde::Serialize;

use super::EulerRun;
use crate::error::{Error, Result};

pub const MIN_SAMPLES: usize = 100;
/// Kernel contributions beyond this many bandwidths are dropped.
const CUTOFF: f64 = 9.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Bandwidth {
    /// `1.06 sigma_hat n^{-1/5}`.
    Silverman,
    Fixed(f64),
}

#[derive(Debug, Clone, Serialize)]
pub struct KernelDensity {
    pub bandwidth: f64,
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    /// Fraction of paths that crossed before the horizon.
    pub mass: f64,
}

/// Gaussian kernel density of the uncensored crossing times, reflected at
/// `t = 0` and scaled to the uncensored fraction of paths.
pub fn kernel_density(run: &EulerRun, rule: Bandwidth, grid: &[f64]) -> Result<KernelDensity> {
    let mut samples = run.uncensored();
    if samples.len() < MIN_SAMPLES {
        return Err(Error::TooFewSamples {
            required: MIN_SAMPLES,
            found: samples.len(),
        });
    }
    samples.sort_by(f64::total_cmp);
    let n = samples.len() as f64;
    let bandwidth = match rule {
        Bandwidth::Fixed(b) => b,
        Bandwidth::Silverman => {
            let mean = samples.iter().sum::<f64>() / n;
            let var = samples.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / (n - 1.0);
            1.06 * var.sqrt() * n.powf(-0.2)
        }
    };
    if !(bandwidth > 0.0 && bandwidth.is_finite()) {
        return Err(Error::invalid(format!(
            "bandwidth must be positive, got {bandwidth}"
        )));
    }
    let mass = n / run.n_paths() as f64;
    let norm = mass / (n * bandwidth * (2.0 * std::f64::consts::PI).sqrt());
    let kernel = |u: f64| (-0.5 * u * u).exp();
    let values = grid
        .iter()
        .map(|&t| {
            if t < 0.0 {
                return 0.0;
            }
            let lo = samples.partition_point(|&s| s < t - CUTOFF * bandwidth);
            let hi = samples.partition_point(|&s| s <= t + CUTOFF * bandwidth);
            let near: f64 = samples[lo..hi]
                .iter()
                .map(|&s| kernel((t - s) / bandwidth))
                .sum();
            let reflected_hi = samples.partition_point(|&s| s <= CUTOFF * bandwidth - t);
            let mirror: f64 = samples[..reflected_hi]
                .iter()
                .map(|&s| kernel((t + s) / bandwidth))
                .sum();
            norm * (near + mirror)
        })
        .collect();
    Ok(KernelDensity {
        bandwidth,
        grid: grid.to_vec(),
        values,
        mass,
    })
}
