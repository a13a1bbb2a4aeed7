//! The diffusion `dX = a(X) dt + dW` started at `x > 0` and killed at zero.

mod assumptions;
mod closed_form;
mod lamperti;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{self, Expr, Program};
use crate::quad::simpson_adaptive;

pub use assumptions::{check_assumptions, AssumptionReport, DivergenceVerdict};
pub use closed_form::{
    bm_fpt_density, bm_fpt_log_density, ou_fpt_density, ou_fpt_log_density, ou_rate,
};
pub use lamperti::{lamperti_transform, GeneralDiffusionSpec, LampertiResult};

use lamperti::LampertiDrift;

/// Upper end of the grid on which drifts are probed for evaluability.
pub const DEFAULT_PROBE_MAX: f64 = 10.0;
const PROBE_POINTS: usize = 1000;
pub(crate) const QUAD_TOL: f64 = 1e-10;

/// A drift `a`, its derivative, the potential `gamma = (a^2 + a') / 2` and the
/// start level `x`.
#[derive(Clone)]
pub struct DriftModel {
    drift: Drift,
    x: f64,
    int_a: f64,
}

#[derive(Clone)]
enum Drift {
    Symbolic(Arc<SymbolicDrift>),
    Transformed(Arc<LampertiDrift>),
}

struct SymbolicDrift {
    text: String,
    a: Expr,
    a_prime: Expr,
    gamma: Expr,
    a_prog: Program,
    a_prime_prog: Program,
    gamma_prog: Program,
}

/// Serialized form of a model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelSpec {
    Drift {
        drift: String,
        x: f64,
    },
    General {
        b: String,
        sigma: String,
        level: f64,
        start: f64,
    },
}

impl ModelSpec {
    pub fn build(&self) -> Result<DriftModel> {
        match self {
            ModelSpec::Drift { drift, x } => build_model(drift, *x),
            ModelSpec::General {
                b,
                sigma,
                level,
                start,
            } => {
                let spec = GeneralDiffusionSpec::parse(b, sigma, *level, *start)?;
                Ok(lamperti_transform(&spec)?.model)
            }
        }
    }
}

/// Parses `a_text`, differentiates it and integrates it over `[0, x]`.
pub fn build_model(a_text: &str, x: f64) -> Result<DriftModel> {
    if !(x > 0.0 && x.is_finite()) {
        return Err(Error::invalid(format!(
            "start level x must be positive, got {x}"
        )));
    }
    let a = expr::parse(a_text)?;
    let a_prime = a.derivative();
    let gamma = Expr::div(
        Expr::add(Expr::mul(a.clone(), a.clone()), a_prime.clone()),
        Expr::Const(2.0),
    );
    let sym = SymbolicDrift {
        text: a_text.to_string(),
        a_prog: a.compile(),
        a_prime_prog: a_prime.compile(),
        gamma_prog: gamma.compile(),
        a,
        a_prime,
        gamma,
    };
    DriftModel::assemble(Drift::Symbolic(Arc::new(sym)), x)
}

impl DriftModel {
    fn assemble(drift: Drift, x: f64) -> Result<Self> {
        let mut model = DriftModel {
            drift,
            x,
            int_a: 0.0,
        };
        let probe_max = DEFAULT_PROBE_MAX.max(x);
        for k in 0..=PROBE_POINTS {
            let z = probe_max * k as f64 / PROBE_POINTS as f64;
            if !model.a(z).is_finite() {
                return Err(Error::Evaluation { what: "drift a", z });
            }
            if !model.a_prime(z).is_finite() {
                return Err(Error::Evaluation {
                    what: "drift derivative a'",
                    z,
                });
            }
        }
        model.int_a = simpson_adaptive(|z| model.a(z), 0.0, x, QUAD_TOL)?;
        Ok(model)
    }

    #[inline]
    pub fn a(&self, z: f64) -> f64 {
        match &self.drift {
            Drift::Symbolic(s) => s.a_prog.eval(z),
            Drift::Transformed(l) => l.a(z),
        }
    }

    #[inline]
    pub fn a_prime(&self, z: f64) -> f64 {
        match &self.drift {
            Drift::Symbolic(s) => s.a_prime_prog.eval(z),
            Drift::Transformed(l) => l.a_prime(z),
        }
    }

    /// [`DriftModel::gamma`] at every point of `zs`; `scratch` is reused
    /// between calls.
    pub fn gamma_batch(&self, zs: &[f64], out: &mut [f64], scratch: &mut Vec<f64>) {
        match &self.drift {
            Drift::Symbolic(s) => s.gamma_prog.eval_batch(zs, out, scratch),
            Drift::Transformed(_) => {
                for (o, z) in out.iter_mut().zip(zs) {
                    *o = self.gamma(*z);
                }
            }
        }
    }

    /// `gamma(z) = (a(z)^2 + a'(z)) / 2`.
    #[inline]
    pub fn gamma(&self, z: f64) -> f64 {
        match &self.drift {
            Drift::Symbolic(s) => s.gamma_prog.eval(z),
            Drift::Transformed(l) => {
                let (a, ap) = l.a_and_prime(z);
                (a * a + ap) / 2.0
            }
        }
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    /// `∫_0^x a(v) dv`.
    pub fn int_a(&self) -> f64 {
        self.int_a
    }

    /// Log of the density prefactor `exp(-∫_0^x a)`.
    pub fn prefactor_log(&self) -> f64 {
        -self.int_a
    }

    /// Symbolic drift, or `None` for a Lamperti-transformed model.
    pub fn drift_expr(&self) -> Option<&Expr> {
        match &self.drift {
            Drift::Symbolic(s) => Some(&s.a),
            Drift::Transformed(_) => None,
        }
    }

    pub fn derivative_expr(&self) -> Option<&Expr> {
        match &self.drift {
            Drift::Symbolic(s) => Some(&s.a_prime),
            Drift::Transformed(_) => None,
        }
    }

    pub fn gamma_expr(&self) -> Option<&Expr> {
        match &self.drift {
            Drift::Symbolic(s) => Some(&s.gamma),
            Drift::Transformed(_) => None,
        }
    }

    /// True when `a` is identically zero as an expression.
    pub fn is_zero_drift(&self) -> bool {
        matches!(self.drift_expr(), Some(Expr::Const(c)) if *c == 0.0)
    }

    /// Checks `a(z) = -z` on the probe grid.
    pub fn check_ornstein_uhlenbeck(&self) -> Result<()> {
        for k in 0..=PROBE_POINTS {
            let z = DEFAULT_PROBE_MAX * k as f64 / PROBE_POINTS as f64;
            let value = self.a(z);
            if (value + z).abs() > 1e-12 * z.max(1.0) {
                return Err(Error::NotOrnsteinUhlenbeck { z, value });
            }
        }
        Ok(())
    }

    pub fn spec(&self) -> ModelSpec {
        match &self.drift {
            Drift::Symbolic(s) => ModelSpec::Drift {
                drift: s.text.clone(),
                x: self.x,
            },
            Drift::Transformed(l) => l.spec(),
        }
    }
}

impl fmt::Debug for DriftModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DriftModel")
            .field("spec", &self.spec())
            .field("int_a", &self.int_a)
            .finish()
    }
}
