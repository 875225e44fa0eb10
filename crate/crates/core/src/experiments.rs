//! Studies built on the solver and simulator: delay-variance sweep,
//! convergence trace and waiting-time curves.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bellman::{
    extract_policy, find_lambda_star, solve_g_infinity, CostParams, Policy, SolveReport, SolverOptions,
};
use crate::sim::{best_periodic, log_grid, run_simulation, Costs, PolicySpec, SimOptions};
use crate::stochastic::DelayModel;
use crate::{Error, Result};

/// Mean-preserving delay family indexed by a spread parameter `σ²`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DelayFamily {
    /// `σ²` is the variance of `ln Y`.
    Lognormal,
    /// `σ²` is the variance of `Y`.
    TwoPoint,
}

impl DelayFamily {
    pub fn model(self, mean: f64, sigma2: f64) -> Result<DelayModel> {
        match self {
            DelayFamily::Lognormal => DelayModel::lognormal_with_mean(mean, sigma2),
            DelayFamily::TwoPoint => DelayModel::two_point_with_mean(mean, sigma2),
        }
    }
}

/// Default period grid for the periodic baseline.
pub fn default_t_grid() -> Vec<f64> {
    log_grid(0.05, 20.0, 20)
}

/// Numerical and Monte Carlo budgets shared by the sweep rows.
#[derive(Clone, Debug, PartialEq)]
pub struct Budgets {
    pub solver: SolverOptions,
    pub sim: SimOptions,
    pub t_grid: Vec<f64>,
}

impl Default for Budgets {
    fn default() -> Self {
        Self {
            solver: SolverOptions::default(),
            sim: SimOptions::default(),
            t_grid: default_t_grid(),
        }
    }
}

/// One `σ²` point of the sweep. The `mse_*` columns hold the simulated
/// cost-inclusive objective; `*_error` hold the pure squared-error part.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepRow {
    pub sigma2: f64,
    pub lambda_star: f64,
    pub mse_opt: f64,
    pub mse_opt_ci: f64,
    pub mse_periodic: f64,
    pub mse_periodic_ci: f64,
    pub t_best: f64,
    pub seed: u64,
    pub mse_opt_error: f64,
    pub mse_periodic_error: f64,
}

impl SweepRow {
    pub fn gap(&self) -> f64 {
        self.mse_periodic - self.mse_opt
    }
}

/// Solves `λ*`, simulates the optimal policy and the best periodic
/// policy for every `σ²`. Row `i` simulates on streams `2i` (optimal) and
/// `2i + 1` (periodic scan) of `seed`; rows run in parallel.
pub fn sweep_sigma(
    c_s: f64,
    c_tau: f64,
    mean_delay: f64,
    sigma2_list: &[f64],
    family: DelayFamily,
    budgets: &Budgets,
    seed: u64,
) -> Result<Vec<SweepRow>> {
    if let Some(s) = sigma2_list.iter().find(|s| !(s.is_finite() && **s >= 0.0)) {
        return Err(Error::invalid(format!("sigma2 values must be >= 0, got {s}")));
    }
    let costs = Costs::new(c_s, c_tau)?;
    sigma2_list
        .par_iter()
        .enumerate()
        .map(|(i, &sigma2)| {
            let model = family.model(mean_delay, sigma2)?;
            let search = find_lambda_star(&model, c_s, c_tau, &budgets.solver)?;
            let opt_opts = SimOptions {
                seed,
                stream: 2 * i as u64,
                ..budgets.sim.clone()
            };
            let opt = run_simulation(&PolicySpec::Optimal(Box::new(search.policy)), costs, &model, &opt_opts)?;
            let per_opts = SimOptions {
                stream: 2 * i as u64 + 1,
                ..opt_opts
            };
            let (t_best, per, _) = best_periodic(&model, costs, &budgets.t_grid, &per_opts)?;
            Ok(SweepRow {
                sigma2,
                lambda_star: search.lambda_star,
                mse_opt: opt.objective,
                mse_opt_ci: opt.ci_halfwidth,
                mse_periodic: per.objective,
                mse_periodic_ci: per.ci_halfwidth,
                t_best,
                seed,
                mse_opt_error: opt.mse,
                mse_periodic_error: per.mse,
            })
        })
        .collect()
}

fn solve_policy(params: &CostParams, model: &DelayModel, opts: &SolverOptions) -> Result<(Policy, SolveReport)> {
    opts.validate()?;
    model.validate()?;
    let mu_y = model.moments().mean;
    let net = params.lambda - mu_y;
    let grid = opts.grid_for(net)?;
    let search = opts.search_for(net);
    let quad = opts.transition_rule()?;
    let (vf, report) = solve_g_infinity(params, mu_y, &grid, opts.tol, opts.max_iter, &search, &quad)?;
    let policy = extract_policy(&vf, params, mu_y, &search, &quad, &[]);
    Ok((policy, report))
}

/// Sup-norm change per value-iteration step at a fixed λ, as
/// `(iteration, sup_diff)` starting from iteration 1.
pub fn convergence_trace(
    c_s: f64,
    c_tau: f64,
    lambda: f64,
    model: &DelayModel,
    opts: &SolverOptions,
) -> Result<(Vec<(usize, f64)>, SolveReport)> {
    let params = CostParams::new(c_s, c_tau, lambda)?;
    let (_, report) = solve_policy(&params, model, opts)?;
    let rows = report
        .sup_diffs
        .iter()
        .enumerate()
        .map(|(i, &d)| (i + 1, d))
        .collect();
    Ok((rows, report))
}

/// Where the multiplier of a curve comes from.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum CurveLambda {
    Fixed(f64),
    /// Each `(σ², c_τ)` uses its own `λ*`.
    Optimal,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CurveRow {
    pub sigma2: f64,
    pub c_tau: f64,
    pub e: f64,
    pub z_star: f64,
}

/// `Z*(E)` on the error grid for every `(σ², c_τ)` pair, σ² outermost.
/// Transmit points carry `z_star = 0`.
pub fn policy_curves(
    c_s: f64,
    lambda: CurveLambda,
    mean_delay: f64,
    c_tau_list: &[f64],
    sigma2_list: &[f64],
    family: DelayFamily,
    opts: &SolverOptions,
) -> Result<Vec<CurveRow>> {
    let combos: Vec<(f64, f64)> = sigma2_list
        .iter()
        .flat_map(|&s| c_tau_list.iter().map(move |&c| (s, c)))
        .collect();
    let curves: Vec<Vec<CurveRow>> = combos
        .par_iter()
        .map(|&(sigma2, c_tau)| {
            let model = family.model(mean_delay, sigma2)?;
            let policy = match lambda {
                CurveLambda::Fixed(l) => {
                    let (policy, report) = solve_policy(&CostParams::new(c_s, c_tau, l)?, &model, opts)?;
                    report.ensure_converged()?;
                    policy
                }
                CurveLambda::Optimal => find_lambda_star(&model, c_s, c_tau, opts)?.policy,
            };
            Ok(policy
                .grid
                .points()
                .iter()
                .zip(&policy.z_star)
                .map(|(&e, &z_star)| CurveRow { sigma2, c_tau, e, z_star })
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok(curves.into_iter().flatten().collect())
}
