//! Reduction of `dY = b(Y) dt + sigma(Y) dW` to unit diffusion coefficient.

use std::sync::Arc;

use super::{Drift, DriftModel, ModelSpec, DEFAULT_PROBE_MAX, QUAD_TOL};
use crate::error::{Error, Result};
use crate::expr::{self, Expr, Program};
use crate::quad::simpson_adaptive;

const SIGMA_PROBES: usize = 1000;
const TABLE_STEPS_TO_START: usize = 1024;
const MAX_TABLE_NODES: usize = 1 << 18;
/// Transformed coordinates covered beyond `max(x, probe max)`.
const COVER_MARGIN: f64 = 40.0;
const INVERSE_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct GeneralDiffusionSpec {
    pub b_text: String,
    pub sigma_text: String,
    pub b: Expr,
    pub sigma: Expr,
    pub level: f64,
    pub start: f64,
}

impl GeneralDiffusionSpec {
    pub fn parse(b: &str, sigma: &str, level: f64, start: f64) -> Result<Self> {
        if !(level.is_finite() && start.is_finite() && start > level) {
            return Err(Error::invalid(format!(
                "start {start} must lie above the level {level}"
            )));
        }
        Ok(GeneralDiffusionSpec {
            b_text: b.to_string(),
            sigma_text: sigma.to_string(),
            b: expr::parse(b)?,
            sigma: expr::parse(sigma)?,
            level,
            start,
        })
    }
}

#[derive(Debug, Clone)]
pub struct LampertiResult {
    pub model: DriftModel,
    /// `∫_level^start 1/sigma`.
    pub x: f64,
}

/// Drift of `X = F(Y)`, `F(v) = ∫_level^v 1/sigma`, evaluated through a
/// numerical inverse of `F`: `a(F(v)) = b(v)/sigma(v) - sigma'(v)/2`.
pub(crate) struct LampertiDrift {
    b_text: String,
    sigma_text: String,
    level: f64,
    start: f64,
    sigma: Program,
    g: Program,
    g_prime: Program,
    nodes: Vec<f64>,
    cumulative: Vec<f64>,
}

impl LampertiDrift {
    fn inv_sigma(&self, v: f64) -> f64 {
        1.0 / self.sigma.eval(v)
    }

    /// `F(v)` for `v` in node interval `j`.
    fn transform_within(&self, j: usize, v: f64) -> f64 {
        let v0 = self.nodes[j];
        let mid = 0.5 * (v0 + v);
        self.cumulative[j]
            + (v - v0) / 6.0 * (self.inv_sigma(v0) + 4.0 * self.inv_sigma(mid) + self.inv_sigma(v))
    }

    /// `F^{-1}(z)`; NaN outside the tabulated range.
    pub(crate) fn inverse(&self, z: f64) -> f64 {
        if !(z >= 0.0) || z > *self.cumulative.last().unwrap() {
            return f64::NAN;
        }
        let j = match self.cumulative.partition_point(|&c| c <= z) {
            0 => 0,
            p => (p - 1).min(self.nodes.len() - 2),
        };
        let (mut lo, mut hi) = (self.nodes[j], self.nodes[j + 1]);
        let mut v = lo
            + (hi - lo) * (z - self.cumulative[j]) / (self.cumulative[j + 1] - self.cumulative[j]);
        // Newton on F(v) - z, falling back to bisection when a step leaves the bracket.
        for _ in 0..100 {
            let r = self.transform_within(j, v) - z;
            if r > 0.0 {
                hi = v;
            } else {
                lo = v;
            }
            let step = r * self.sigma.eval(v);
            let mut next = v - step;
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - v).abs() <= INVERSE_TOL * v.abs().max(1.0) || hi - lo <= INVERSE_TOL {
                return next;
            }
            v = next;
        }
        v
    }

    pub(crate) fn a(&self, z: f64) -> f64 {
        self.g.eval(self.inverse(z))
    }

    pub(crate) fn a_prime(&self, z: f64) -> f64 {
        self.a_and_prime(z).1
    }

    pub(crate) fn a_and_prime(&self, z: f64) -> (f64, f64) {
        let v = self.inverse(z);
        (self.g.eval(v), self.g_prime.eval(v) * self.sigma.eval(v))
    }

    pub(crate) fn spec(&self) -> ModelSpec {
        ModelSpec::General {
            b: self.b_text.clone(),
            sigma: self.sigma_text.clone(),
            level: self.level,
            start: self.start,
        }
    }
}

/// Transforms a general diffusion to unit diffusion coefficient and returns
/// the equivalent [`DriftModel`] with start level `x = ∫_level^start 1/sigma`.
pub fn lamperti_transform(spec: &GeneralDiffusionSpec) -> Result<LampertiResult> {
    let sigma = spec.sigma.compile();
    let (level, start) = (spec.level, spec.start);
    for k in 0..=SIGMA_PROBES {
        let y = level + (start - level) * k as f64 / SIGMA_PROBES as f64;
        let s = sigma.eval(y);
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::NonPositiveSigma { y });
        }
    }
    let x = simpson_adaptive(|v| 1.0 / sigma.eval(v), level, start, QUAD_TOL)?;

    let sigma_prime = spec.sigma.derivative();
    let g = Expr::sub(
        Expr::div(spec.b.clone(), spec.sigma.clone()),
        Expr::div(sigma_prime, Expr::Const(2.0)),
    );
    let g_prime = g.derivative();

    // Tabulate F on a uniform v-grid until it covers the coordinates the
    // estimator will visit. Stops early where sigma stops being positive
    // above the start point.
    let cover = x.max(DEFAULT_PROBE_MAX) + COVER_MARGIN;
    let dv = (start - level) / TABLE_STEPS_TO_START as f64;
    let inv = |v: f64| 1.0 / sigma.eval(v);
    let mut nodes = vec![level];
    let mut cumulative = vec![0.0];
    while *cumulative.last().unwrap() < cover && nodes.len() < MAX_TABLE_NODES {
        let j = nodes.len() - 1;
        let v0 = nodes[j];
        // Uniform up to the start point, then the step doubles every
        // TABLE_STEPS_TO_START nodes.
        let v1 = if j < TABLE_STEPS_TO_START {
            level + (j + 1) as f64 * dv
        } else {
            v0 + dv * (1u64 << ((j / TABLE_STEPS_TO_START).min(40))) as f64
        };
        let step = v1 - v0;
        let s_mid = sigma.eval(0.5 * (v0 + v1));
        let s_end = sigma.eval(v1);
        let ok = s_mid > 0.0 && s_end > 0.0 && s_mid.is_finite() && s_end.is_finite();
        if !ok {
            if v1 <= start {
                return Err(Error::NonMonotoneTransform { y: v1 });
            }
            break;
        }
        let f1 = cumulative[j] + step / 6.0 * (inv(v0) + 4.0 / s_mid + 1.0 / s_end);
        if !(f1 > cumulative[j]) {
            return Err(Error::NonMonotoneTransform { y: v1 });
        }
        nodes.push(v1);
        cumulative.push(f1);
    }

    let drift = LampertiDrift {
        b_text: spec.b_text.clone(),
        sigma_text: spec.sigma_text.clone(),
        level,
        start,
        g: g.compile(),
        g_prime: g_prime.compile(),
        sigma,
        nodes,
        cumulative,
    };
    let model = DriftModel::assemble(Drift::Transformed(Arc::new(drift)), x)?;
    Ok(LampertiResult { model, x })
}
