use serde::{Deserialize, Serialize};

use super::policy::{extract_policy, first_step_reduced, Policy};
use super::transition::{TransitionMethod, TransitionRule};
use super::search::ZSearch;
use super::value::{solve_reduced, ErrorGrid, SolveReport, ValueFunction, DEFAULT_GRID_POINTS};
use super::{h_zero, CostParams};
use crate::quadrature::{GaussHermite, GaussLaguerre};
use crate::stochastic::{DelayModel, RngStream};
use crate::{Error, Result};

/// How `E_Y[·]` is taken for delay laws without finite support.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case", deny_unknown_fields)]
pub enum OuterExpectation {
    /// Gauss–Hermite in log-space for lognormal, Gauss–Laguerre for
    /// exponential, with `n_quad` nodes.
    Quadrature,
    /// Fixed-seed Monte Carlo, so `J` stays a deterministic function of λ.
    MonteCarlo { draws: usize, seed: u64 },
}

/// Knobs shared by every solve.
#[derive(Clone, Debug, PartialEq)]
pub struct SolverOptions {
    pub n_points: usize,
    pub e_max: Option<f64>,
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

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            n_points: DEFAULT_GRID_POINTS,
            e_max: None,
            tol: 1e-6,
            max_iter: 500,
            n_quad: 33,
            z_max: None,
            tol_lambda: 1e-4,
            bracket: None,
            max_bracket_doublings: 40,
            outer: OuterExpectation::Quadrature,
            transition: TransitionMethod::default(),
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if self.n_points < 2 {
            return Err(Error::validation("grid.n_points", "must be >= 2"));
        }
        if let Some(e) = self.e_max {
            if !(e.is_finite() && e > 0.0) {
                return Err(Error::validation("grid.e_max", "must be > 0"));
            }
        }
        if !(self.tol > 0.0) {
            return Err(Error::validation("solver.tol", "must be > 0"));
        }
        if self.max_iter == 0 {
            return Err(Error::validation("solver.max_iter", "must be >= 1"));
        }
        if self.n_quad < 3 {
            return Err(Error::validation("solver.n_quad", "must be >= 3"));
        }
        if let Some(z) = self.z_max {
            if !(z.is_finite() && z > 0.0) {
                return Err(Error::validation("solver.z_max", "must be > 0"));
            }
        }
        if !(self.tol_lambda > 0.0) {
            return Err(Error::validation("solver.tol_lambda", "must be > 0"));
        }
        if let Some((lo, hi)) = self.bracket {
            if !(lo >= 0.0 && hi > lo && hi.is_finite()) {
                return Err(Error::validation("solver.bracket", "must satisfy 0 <= lo < hi"));
            }
        }
        if let OuterExpectation::MonteCarlo { draws, .. } = self.outer {
            if draws < 10_000 {
                return Err(Error::validation("solver.outer.draws", "must be >= 10000"));
            }
        }
        Ok(())
    }

    pub fn transition_rule(&self) -> Result<TransitionRule> {
        TransitionRule::new(self.transition, self.n_quad)
    }

    pub fn grid_for(&self, net_lambda: f64) -> Result<ErrorGrid> {
        ErrorGrid::for_net_lambda(net_lambda, self.n_points, self.e_max)
    }

    pub fn search_for(&self, net_lambda: f64) -> ZSearch {
        match self.z_max {
            Some(z) => ZSearch::with_z_max(z),
            None => ZSearch::for_net_lambda(net_lambda),
        }
    }
}

/// `J(λ)` together with the value function solved on the way.
#[derive(Clone, Debug)]
pub struct JEvaluation {
    pub lambda: f64,
    pub j: f64,
    pub mu_y: f64,
    pub value_function: ValueFunction,
    pub report: SolveReport,
}

/// Upper end of the initial λ bracket.
pub fn default_bracket_hi(mu_y: f64, c_s: f64, c_tau: f64) -> f64 {
    (10.0 * (mu_y + 1.0)).max(c_s + c_tau)
}

fn outer_expectation(
    model: &DelayModel,
    outer: OuterExpectation,
    n_quad: usize,
    mut f: impl FnMut(f64) -> f64,
) -> Result<f64> {
    Ok(match model {
        DelayModel::Deterministic { d } => f(*d),
        DelayModel::Discrete { values, probs } => values
            .iter()
            .zip(probs)
            .filter(|(_, p)| **p > 0.0)
            .map(|(v, p)| p * f(*v))
            .sum(),
        _ => match outer {
            OuterExpectation::MonteCarlo { draws, seed } => {
                let mut rng = RngStream::new(seed, 0);
                (0..draws).map(|_| f(model.sample(&mut rng))).sum::<f64>() / draws as f64
            }
            OuterExpectation::Quadrature => match model {
                DelayModel::Lognormal { location, scale } => {
                    GaussHermite::new(n_quad)?.expect(|x| f((location + scale * x).exp()))
                }
                DelayModel::Exponential { rate } => GaussLaguerre::new(n_quad)?.expect(|x| f(x / rate)),
                _ => unreachable!("finite-support laws handled above"),
            },
        },
    })
}

/// Solves `g_∞` at this λ (failing if value iteration does not converge)
/// and returns
/// `J(λ) = h_0 + E_Y[min_z h(z, Y) + E[g_∞((Y + z)·G²)]]`.
pub fn evaluate_j(
    lambda: f64,
    model: &DelayModel,
    c_s: f64,
    c_tau: f64,
    opts: &SolverOptions,
) -> Result<JEvaluation> {
    model.validate()?;
    opts.validate()?;
    let params = CostParams::new(c_s, c_tau, lambda)?;
    let moments = model.moments();
    let reduced = params.reduced(moments.mean);
    let grid = opts.grid_for(reduced.net_lambda)?;
    let search = opts.search_for(reduced.net_lambda);
    let quad = opts.transition_rule()?;
    let (vf, mut report) = solve_reduced(&reduced, &grid, opts.tol, opts.max_iter, &search, &quad)?;
    report.ensure_converged()?;

    let first = outer_expectation(model, opts.outer, opts.n_quad, |y| {
        first_step_reduced(y, &vf, &reduced, &search, &quad).0
    })?;
    let j = h_zero(&params, moments) + first;
    report.lambda = lambda;
    report.j_value = Some(j);
    Ok(JEvaluation {
        lambda,
        j,
        mu_y: moments.mean,
        value_function: vf,
        report,
    })
}

/// Outcome of the sign-based root search for `λ*`.
#[derive(Clone, Debug)]
pub struct LambdaSearch {
    pub lambda_star: f64,
    /// `J(λ*)`, close to 0.
    pub j_at_star: f64,
    pub bracket: (f64, f64),
    /// Every `(λ, J(λ))` evaluated, in order.
    pub evaluations: Vec<(f64, f64)>,
    pub policy: Policy,
    pub report: SolveReport,
    pub mu_y: f64,
}

/// Bisection on the sign of `J(λ)`: `J > 0` below `λ*`, `J < 0` above.
/// The bracket's upper end doubles until `J` turns negative.
pub fn find_lambda_star(model: &DelayModel, c_s: f64, c_tau: f64, opts: &SolverOptions) -> Result<LambdaSearch> {
    model.validate()?;
    opts.validate()?;
    let mu_y = model.moments().mean;
    let mut evaluations = Vec::new();
    let eval = |lambda: f64, evals: &mut Vec<(f64, f64)>| -> Result<f64> {
        let j = evaluate_j(lambda, model, c_s, c_tau, opts)?.j;
        evals.push((lambda, j));
        Ok(j)
    };

    let (mut lo, mut hi) = opts
        .bracket
        .unwrap_or((0.0, default_bracket_hi(mu_y, c_s, c_tau)));
    let j_lo = eval(lo, &mut evaluations)?;
    if j_lo <= 0.0 {
        return Err(Error::Bracket(format!("J({lo}) = {j_lo} is not positive")));
    }
    let mut doublings = 0;
    loop {
        let j_hi = eval(hi, &mut evaluations)?;
        if j_hi < 0.0 {
            break;
        }
        if doublings >= opts.max_bracket_doublings {
            return Err(Error::Bracket(format!(
                "J({hi}) = {j_hi} still nonnegative after {doublings} doublings"
            )));
        }
        lo = hi;
        hi *= 2.0;
        doublings += 1;
    }
    let bracket = (lo, hi);

    while hi - lo > opts.tol_lambda {
        let mid = 0.5 * (lo + hi);
        let j = eval(mid, &mut evaluations)?;
        if j > 0.0 {
            lo = mid;
        } else if j < 0.0 {
            hi = mid;
        } else {
            lo = mid;
            hi = mid;
        }
    }
    let lambda_star = 0.5 * (lo + hi);

    let at_star = evaluate_j(lambda_star, model, c_s, c_tau, opts)?;
    evaluations.push((lambda_star, at_star.j));
    let params = CostParams::new(c_s, c_tau, lambda_star)?;
    let net = lambda_star - mu_y;
    let quad = opts.transition_rule()?;
    let atoms: Vec<f64> = match model {
        DelayModel::Deterministic { d } => vec![*d],
        DelayModel::Discrete { values, .. } => values.clone(),
        _ => Vec::new(),
    };
    let policy = extract_policy(
        &at_star.value_function,
        &params,
        mu_y,
        &opts.search_for(net),
        &quad,
        &atoms,
    );
    Ok(LambdaSearch {
        lambda_star,
        j_at_star: at_star.j,
        bracket,
        evaluations,
        policy,
        report: at_star.report,
        mu_y,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bellman::{first_step_value, solve_g_infinity};

    fn quick() -> SolverOptions {
        SolverOptions {
            n_points: 401,
            tol: 1e-5,
            tol_lambda: 1e-3,
            ..SolverOptions::default()
        }
    }

    #[test]
    fn j_at_zero_lambda_by_hand() {
        // a = −1 < 0: g ≡ 0, the best first wait is 0, J = c_τ + μ² + E[Y²]/2 + c_s
        let det = DelayModel::Deterministic { d: 1.0 };
        let j = evaluate_j(0.0, &det, 2.0, 5.0, &quick()).unwrap().j;
        assert!((j - 8.5).abs() < 1e-12, "{j}");
        let logn = DelayModel::lognormal_with_mean(1.0, 0.1).unwrap();
        assert!(evaluate_j(0.0, &logn, 2.0, 5.0, &quick()).unwrap().j > 0.0);
    }

    #[test]
    fn j_negative_for_large_lambda() {
        let det = DelayModel::Deterministic { d: 1.0 };
        assert!(evaluate_j(40.0, &det, 2.0, 5.0, &quick()).unwrap().j < 0.0);
    }

    #[test]
    fn j_composes_h_zero_and_first_step() {
        let det = DelayModel::Deterministic { d: 1.0 };
        let opts = quick();
        let params = CostParams::new(2.0, 5.0, 10.0).unwrap();
        let h0 = h_zero(&params, det.moments());
        assert!((h0 + 3.5).abs() < 1e-12);

        let grid = opts.grid_for(9.0).unwrap();
        let search = opts.search_for(9.0);
        let quad = TransitionRule::default();
        let (vf, _) = solve_g_infinity(&params, 1.0, &grid, opts.tol, opts.max_iter, &search, &quad).unwrap();
        let (first, _) = first_step_value(1.0, &vf, &params, 1.0, &search, &quad);
        let j = evaluate_j(10.0, &det, 2.0, 5.0, &opts).unwrap().j;
        assert!((j - (h0 + first)).abs() < 1e-12, "{j} vs {}", h0 + first);
    }

    #[test]
    fn bracket_expands_and_search_brackets_the_root() {
        let det = DelayModel::Deterministic { d: 1.0 };
        let opts = SolverOptions {
            bracket: Some((0.0, 1.0)),
            ..quick()
        };
        let s = find_lambda_star(&det, 2.0, 5.0, &opts).unwrap();
        assert!(s.bracket.1 > 1.0);
        assert!(s.bracket.0 < s.lambda_star && s.lambda_star < s.bracket.1);
        let mut seen: Vec<(f64, f64)> = s.evaluations.clone();
        seen.sort_by(|a, b| a.0.total_cmp(&b.0));
        for w in seen.windows(2) {
            assert!(w[1].1 < w[0].1, "J not decreasing: {w:?}");
        }

        let stuck = SolverOptions {
            max_bracket_doublings: 0,
            ..opts
        };
        assert!(matches!(find_lambda_star(&det, 2.0, 5.0, &stuck), Err(Error::Bracket(_))));
    }

    #[test]
    fn lambda_star_stable_under_grid_refinement() {
        let model = DelayModel::lognormal_with_mean(1.0, 0.1).unwrap();
        let coarse = SolverOptions {
            n_points: 1001,
            ..SolverOptions::default()
        };
        let a = find_lambda_star(&model, 2.0, 5.0, &coarse).unwrap().lambda_star;
        let b = find_lambda_star(&model, 2.0, 5.0, &SolverOptions::default()).unwrap().lambda_star;
        assert!((a - b).abs() <= 0.02 * b, "{a} vs {b}");
    }
}
