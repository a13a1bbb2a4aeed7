//! Shared fixtures for the criterion benchmarks.

use bridgefpt::{build_model, DriftModel};

pub fn ou_model() -> DriftModel {
    build_model("-z", 1.0).expect("OU drift parses")
}

/// `points` uniform times on `(0, t_max]`.
pub fn uniform_grid(t_max: f64, points: usize) -> Vec<f64> {
    (1..=points)
        .map(|k| t_max * k as f64 / points as f64)
        .collect()
}
