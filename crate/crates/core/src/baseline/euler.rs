use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::bridge::CHUNK_PATHS;
use crate::error::{Error, Result};
use crate::model::DriftModel;
use crate::rng::stream_rng;

/// First-passage times of an Euler-discretized diffusion, censored at the
/// horizon (`None`).
#[derive(Debug, Clone, Serialize)]
pub struct EulerRun {
    pub h: f64,
    pub horizon: f64,
    pub x: f64,
    pub crossing_times: Vec<Option<f64>>,
    pub bridge_correction: bool,
    pub seed: u64,
}

impl EulerRun {
    pub fn n_paths(&self) -> usize {
        self.crossing_times.len()
    }

    pub fn uncensored(&self) -> Vec<f64> {
        self.crossing_times.iter().flatten().copied().collect()
    }

    /// Empirical `P[tau <= t]` over all paths, censored ones included.
    pub fn cdf(&self, t: f64) -> f64 {
        let hits = self
            .crossing_times
            .iter()
            .flatten()
            .filter(|&&c| c <= t)
            .count();
        hits as f64 / self.n_paths() as f64
    }

    pub fn cdf_curve(&self, grid: &[f64]) -> Vec<f64> {
        let mut sorted = self.uncensored();
        sorted.sort_by(f64::total_cmp);
        let n = self.n_paths() as f64;
        grid.iter()
            .map(|&t| sorted.partition_point(|&c| c <= t) as f64 / n)
            .collect()
    }
}

/// Simulates `X_{k+1} = X_k + a(X_k) h + sqrt(h) Z` from `x` and records the
/// first step at which the path is at or below zero.
///
/// With `bridge_correction`, a step between two positive values also counts
/// as a crossing with the Brownian-bridge probability
/// `exp(-2 X_k X_{k+1} / h)`; the crossing time is then drawn uniformly in
/// the step. Path `i` draws its normals from stream `2i` and its uniforms from
/// stream `2i + 1` of `seed`, so runs with and without the correction share
/// their Gaussian increments.
pub fn euler_fpt_sample(
    model: &DriftModel,
    h: f64,
    horizon: f64,
    n_paths: usize,
    bridge_correction: bool,
    seed: u64,
) -> Result<EulerRun> {
    if !(h > 0.0 && horizon > 0.0 && h.is_finite() && horizon.is_finite()) {
        return Err(Error::invalid(format!(
            "need h > 0 and horizon > 0, got h = {h}, horizon = {horizon}"
        )));
    }
    let steps_f = horizon / h;
    let steps = steps_f.round();
    if (steps_f - steps).abs() > 1e-9 * steps_f.max(1.0) || steps < 1.0 {
        return Err(Error::invalid(format!(
            "horizon {horizon} is not a multiple of h = {h}"
        )));
    }
    if n_paths == 0 {
        return Err(Error::invalid("need at least one path"));
    }
    let steps = steps as usize;
    let x = model.x();
    let sqrt_h = h.sqrt();

    let path = |i: usize| -> Result<Option<f64>> {
        let mut normals = stream_rng(seed, 2 * i as u64);
        let mut uniforms = stream_rng(seed, 2 * i as u64 + 1);
        let mut xk = x;
        for k in 0..steps {
            let a = model.a(xk);
            if !a.is_finite() {
                return Err(Error::Evaluation {
                    what: "drift",
                    z: xk,
                });
            }
            let z: f64 = normals.sample(StandardNormal);
            let next = xk + a * h + sqrt_h * z;
            if next <= 0.0 {
                return Ok(Some((k + 1) as f64 * h));
            }
            if bridge_correction && uniforms.gen::<f64>() < (-2.0 * xk * next / h).exp() {
                return Ok(Some((k as f64 + uniforms.gen::<f64>()) * h));
            }
            xk = next;
        }
        Ok(None)
    };

    let chunks: Vec<Result<Vec<Option<f64>>>> = (0..n_paths.div_ceil(CHUNK_PATHS))
        .into_par_iter()
        .map(|c| {
            (c * CHUNK_PATHS..((c + 1) * CHUNK_PATHS).min(n_paths))
                .map(path)
                .collect()
        })
        .collect();
    let mut crossing_times = Vec::with_capacity(n_paths);
    for chunk in chunks {
        crossing_times.extend(chunk?);
    }
    Ok(EulerRun {
        h,
        horizon,
        x,
        crossing_times,
        bridge_correction,
        seed,
    })
}
