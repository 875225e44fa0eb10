//! Run configuration: one JSON document per run, unknown keys rejected.
//!
//! ```json
//! { "c_s": 2, "c_tau": 5, "delay": { "kind": "deterministic", "d": 1 } }
//! ```
//!
//! is a complete config; everything else has a default.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bellman::{OuterExpectation, SolverOptions, TransitionMethod, DEFAULT_GRID_POINTS};
use crate::experiments::{default_t_grid, Budgets, DelayFamily};
use crate::sim::{Costs, SimOptions, DEFAULT_DT, DEFAULT_K_MAX};
use crate::stats::DEFAULT_BATCHES;
use crate::stochastic::DelayModel;
use crate::{Error, Result};

/// Environment variable consulted for the seed when `--seed` is absent.
pub const SEED_ENV: &str = "WIENER_SAMPLING_SEED";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub n_points: usize,
    pub e_max: Option<f64>,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            n_points: DEFAULT_GRID_POINTS,
            e_max: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub tol: f64,
    pub max_iter: usize,
    pub n_quad: usize,
    pub z_max: Option<f64>,
    pub tol_lambda: f64,
    pub bracket: Option<(f64, f64)>,
    pub max_bracket_doublings: usize,
    pub outer: OuterExpectation,
    pub transition: TransitionMethod,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let d = SolverOptions::default();
        Self {
            tol: d.tol,
            max_iter: d.max_iter,
            n_quad: d.n_quad,
            z_max: d.z_max,
            tol_lambda: d.tol_lambda,
            bracket: d.bracket,
            max_bracket_doublings: d.max_bracket_doublings,
            outer: d.outer,
            transition: d.transition,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    pub n_epochs: usize,
    pub dt: f64,
    pub k_max: usize,
    pub n_batches: usize,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            n_epochs: 20_000,
            dt: DEFAULT_DT,
            k_max: DEFAULT_K_MAX,
            n_batches: DEFAULT_BATCHES,
        }
    }
}

/// Policy run by the `simulate` subcommand.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PolicyConfig {
    /// Solve `λ*` and run the resulting policy.
    Optimal,
    Periodic { period: f64 },
    ZeroWait,
    /// Best period on `t_grid`.
    BestPeriodic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub c_s: f64,
    pub c_tau: f64,
    pub delay: DelayModel,
    /// Multiplier for `solve`, `convergence` and fixed-λ `curves`.
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub simulation: SimulationConfig,
    #[serde(default = "default_policy")]
    pub policy: PolicyConfig,
    /// Family for `sweep-sigma` and `curves`; its mean is the mean of `delay`.
    #[serde(default = "default_family")]
    pub family: DelayFamily,
    #[serde(default = "default_sigma2_list")]
    pub sigma2_list: Vec<f64>,
    #[serde(default = "default_c_tau_list")]
    pub c_tau_list: Vec<f64>,
    #[serde(default = "default_t_grid", rename = "T_grid", alias = "t_grid")]
    pub t_grid: Vec<f64>,
    #[serde(default)]
    pub seed: Option<u64>,
}

fn default_lambda() -> f64 {
    10.0
}

fn default_policy() -> PolicyConfig {
    PolicyConfig::Optimal
}

fn default_family() -> DelayFamily {
    DelayFamily::Lognormal
}

fn default_sigma2_list() -> Vec<f64> {
    vec![0.0, 0.1, 1.0, 2.5]
}

fn default_c_tau_list() -> Vec<f64> {
    vec![0.1, 1.0, 10.0]
}

fn positive(field: &str, x: f64) -> Result<()> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(Error::validation(field, format!("must be finite and > 0, got {x}")))
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| Error::Parse {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        positive("c_s", self.c_s)?;
        positive("c_tau", self.c_tau)?;
        self.delay.validate().map_err(|e| match e {
            Error::Validation { field, reason } => Error::validation(format!("delay.{field}"), reason),
            other => other,
        })?;
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::validation("lambda", format!("must be finite and >= 0, got {}", self.lambda)));
        }
        self.solver_options().validate()?;
        self.sim_options(0).validate()?;
        if let PolicyConfig::Periodic { period } = self.policy {
            positive("policy.period", period)?;
        }
        for (i, s) in self.sigma2_list.iter().enumerate() {
            if !(s.is_finite() && *s >= 0.0) {
                return Err(Error::validation(format!("sigma2_list[{i}]"), format!("must be >= 0, got {s}")));
            }
        }
        for (i, c) in self.c_tau_list.iter().enumerate() {
            positive(&format!("c_tau_list[{i}]"), *c)?;
        }
        if self.t_grid.is_empty() {
            return Err(Error::validation("T_grid", "must be nonempty"));
        }
        for (i, t) in self.t_grid.iter().enumerate() {
            positive(&format!("T_grid[{i}]"), *t)?;
        }
        Ok(())
    }

    pub fn costs(&self) -> Costs {
        Costs {
            c_s: self.c_s,
            c_tau: self.c_tau,
        }
    }

    pub fn mean_delay(&self) -> f64 {
        self.delay.moments().mean
    }

    pub fn solver_options(&self) -> SolverOptions {
        let s = &self.solver;
        SolverOptions {
            n_points: self.grid.n_points,
            e_max: self.grid.e_max,
            tol: s.tol,
            max_iter: s.max_iter,
            n_quad: s.n_quad,
            z_max: s.z_max,
            tol_lambda: s.tol_lambda,
            bracket: s.bracket,
            max_bracket_doublings: s.max_bracket_doublings,
            outer: s.outer,
            transition: s.transition,
        }
    }

    pub fn sim_options(&self, seed: u64) -> SimOptions {
        let s = &self.simulation;
        SimOptions {
            n_epochs: s.n_epochs,
            dt: s.dt,
            k_max: s.k_max,
            seed,
            stream: 0,
            n_batches: s.n_batches,
        }
    }

    pub fn budgets(&self, seed: u64) -> Budgets {
        Budgets {
            solver: self.solver_options(),
            sim: self.sim_options(seed),
            t_grid: self.t_grid.clone(),
        }
    }
}

/// Reads and validates a config file.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)?;
    ExperimentConfig::from_json(&text)
}

/// `--seed`, then the environment variable, then the config, then 0.
pub fn resolve_seed(cli: Option<u64>, env: Option<&str>, config: Option<u64>) -> Result<u64> {
    if let Some(s) = cli {
        return Ok(s);
    }
    if let Some(v) = env {
        return v
            .trim()
            .parse()
            .map_err(|_| Error::validation(SEED_ENV, format!("not an unsigned integer: {v:?}")));
    }
    Ok(config.unwrap_or(0))
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{"c_s": 2, "c_tau": 5, "delay": {"kind": "deterministic", "d": 1}}"#;

    fn field_of(err: Error) -> String {
        match err {
            Error::Validation { field, .. } => field,
            Error::Parse { path, .. } => path,
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = ExperimentConfig::from_json(MINIMAL).unwrap();
        assert_eq!(cfg.grid.n_points, 2001);
        assert_eq!(cfg.solver.max_iter, 500);
        assert_eq!(cfg.simulation.n_epochs, 20_000);
        assert_eq!(cfg.t_grid.len(), 20);
        assert_eq!(cfg.policy, PolicyConfig::Optimal);
        assert_eq!(cfg.seed, None);
        assert_eq!(cfg.delay, DelayModel::Deterministic { d: 1.0 });
    }

    #[test]
    fn bad_probs_name_the_field() {
        let text = r#"{"c_s": 2, "c_tau": 5,
            "delay": {"kind": "discrete", "values": [0.5, 1.5], "probs": [0.5, 0.6]}}"#;
        assert_eq!(field_of(ExperimentConfig::from_json(text).unwrap_err()), "delay.probs");
    }

    #[test]
    fn nonpositive_costs_rejected() {
        let text = MINIMAL.replace("\"c_s\": 2", "\"c_s\": -1");
        assert_eq!(field_of(ExperimentConfig::from_json(&text).unwrap_err()), "c_s");
        let text = MINIMAL.replace("\"c_tau\": 5", "\"c_tau\": 0");
        assert_eq!(field_of(ExperimentConfig::from_json(&text).unwrap_err()), "c_tau");
    }

    #[test]
    fn unknown_keys_rejected_with_path() {
        let text = r#"{"c_s": 2, "c_tau": 5, "delay": {"kind": "deterministic", "d": 1},
            "solver": {"tol": 1e-6, "tolerance": 3}}"#;
        let err = ExperimentConfig::from_json(text).unwrap_err();
        assert!(matches!(err, Error::Parse { .. }));
        assert!(field_of(err).starts_with("solver"));
    }

    #[test]
    fn seed_precedence() {
        assert_eq!(resolve_seed(Some(3), Some("4"), Some(5)).unwrap(), 3);
        assert_eq!(resolve_seed(None, Some("4"), Some(5)).unwrap(), 4);
        assert_eq!(resolve_seed(None, None, Some(5)).unwrap(), 5);
        assert_eq!(resolve_seed(None, None, None).unwrap(), 0);
        assert!(resolve_seed(None, Some("x"), None).is_err());
    }
}
