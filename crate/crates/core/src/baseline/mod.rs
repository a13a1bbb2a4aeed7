//! The conventional route for comparison: Euler simulation of the diffusion
//! until it crosses zero, then a kernel density of the crossing times.

mod compare;
mod euler;
mod kde;

pub use compare::{compare_methods, Comparison, ComparisonConfig, ComparisonRow, EulerCurves};
pub use euler::{euler_fpt_sample, EulerRun};
pub use kde::{kernel_density, Bandwidth, KernelDensity, MIN_SAMPLES};
