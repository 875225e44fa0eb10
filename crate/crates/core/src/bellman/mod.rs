//! Value iteration over the sampling-error state.
//!
//! After the per-epoch cost is rewritten with the stage cost
//!
//! ```text
//! h(z, x) = (z + x − λ + μ_Y)²/2 − (x − λ + μ_Y)²/2 + c_s
//! ```
//!
//! the remaining decision problem depends on `(λ, μ_Y)` only through
//! `λ − μ_Y`, stored here as [`Reduced::net_lambda`]. The recursion is
//!
//! ```text
//! g_r(E) = min{ 0, min_{z ≥ 0} h(z, E) + E[g_{r−1}((√E + √z·G)²)] },  g_0 = 0
//! ```
//!
//! where the outer `0` is "transmit now". The epoch cost is then
//! `J(λ) = h_0 + E_Y[ min_z h(z, Y) + E[g_∞((Y + z)·G²)] ]`.

mod lambda;
mod policy;
mod search;
mod transition;
mod value;

pub use lambda::{
    default_bracket_hi, evaluate_j, find_lambda_star, JEvaluation, LambdaSearch, OuterExpectation,
    SolverOptions,
};
pub use policy::{extract_policy, first_step_value, Decision, FirstStepTable, Policy};
pub use search::{minimize_wait, ZSearch};
pub use transition::{TransitionMethod, TransitionRule, DEFAULT_TRANSITION_NODES};
pub use value::{
    bellman_backup, solve_g_infinity, solve_reduced, transition_expectation, ErrorGrid, SolveReport,
    ValueFunction, DEFAULT_GRID_POINTS, STOP_TOL,
};

use serde::{Deserialize, Serialize};

use crate::stochastic::DelayMoments;
use crate::{Error, Result};

/// Sampling cost, transmission cost and Lagrange multiplier.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostParams {
    pub c_s: f64,
    pub c_tau: f64,
    pub lambda: f64,
}

impl CostParams {
    pub fn new(c_s: f64, c_tau: f64, lambda: f64) -> Result<Self> {
        let p = Self { c_s, c_tau, lambda };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c_s.is_finite() && self.c_s > 0.0) {
            return Err(Error::validation("c_s", format!("must be > 0, got {}", self.c_s)));
        }
        if !(self.c_tau.is_finite() && self.c_tau > 0.0) {
            return Err(Error::validation("c_tau", format!("must be > 0, got {}", self.c_tau)));
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::validation("lambda", format!("must be >= 0, got {}", self.lambda)));
        }
        Ok(())
    }

    pub fn reduced(&self, mu_y: f64) -> Reduced {
        Reduced {
            c_s: self.c_s,
            net_lambda: self.lambda - mu_y,
        }
    }
}

/// The two numbers the recursion actually depends on.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Reduced {
    pub c_s: f64,
    /// `λ − μ_Y`
    pub net_lambda: f64,
}

impl Reduced {
    #[inline]
    pub fn h(&self, z: f64, x: f64) -> f64 {
        let b = x - self.net_lambda;
        let s = z + b;
        0.5 * s * s - 0.5 * b * b + self.c_s
    }

    /// `λ − μ_Y` clamped at zero.
    pub fn positive_net_lambda(&self) -> f64 {
        self.net_lambda.max(0.0)
    }
}

/// Stage cost `h(z, x)` of waiting `z` from state `x` before the next sample.
pub fn stage_cost_h(z: f64, x: f64, params: &CostParams, mu_y: f64) -> f64 {
    params.reduced(mu_y).h(z, x)
}

/// `h_0 = c_τ − (λ − μ_Y)·μ_Y + E[Y²]/2`.
pub fn h_zero(params: &CostParams, moments: DelayMoments) -> f64 {
    params.c_tau - (params.lambda - moments.mean) * moments.mean + moments.second / 2.0
}
