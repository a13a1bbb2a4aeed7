//! Direct Monte Carlo estimation of first-passage-time densities.
//!
//! For `dX = a(X) dt + dW` started at `x > 0`, the density of the first
//! hitting time of zero factors as
//!
//! ```text
//! p_x(t) = q_x(t) exp(-∫_0^x a) E[exp(-t ∫_0^1 gamma(|u x e1 + sqrt(t) beta_u|) du)]
//! ```
//!
//! where `q_x` is the Brownian first-passage density, `gamma = (a^2 + a')/2`
//! and `beta` is a standard three-dimensional Brownian bridge. The bridge can
//! be simulated exactly, so the expectation is estimated by a plain average
//! over simulated bridges.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::redundant_guards)]

pub mod baseline;
pub mod bridge;
pub mod error;
pub mod estimator;
pub mod expr;
pub mod model;
pub mod quad;
pub mod rng;
pub mod tail;

pub use baseline::{EulerRun, KernelDensity};
pub use bridge::{BridgeEnsemble, BridgePath};
pub use error::{Error, Result};
pub use estimator::{DensityEstimate, RateCurve};
pub use expr::{Expr, ParseError};
pub use model::{build_model, lamperti_transform, DriftModel, GeneralDiffusionSpec, ModelSpec};
pub use tail::{EigenResult, TailModel};
