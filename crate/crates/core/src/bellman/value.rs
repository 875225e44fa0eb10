use rayon::prelude::*;
use serde::Serialize;

use super::search::{minimize_wait, ZSearch};
use super::{CostParams, Reduced};
use super::transition::TransitionRule;
use crate::{Error, Result};

pub const DEFAULT_GRID_POINTS: usize = 2001;

/// Inner minima at or above `−STOP_TOL` count as "transmit now".
pub const STOP_TOL: f64 = 1e-9;

/// Uniform grid on `[0, e_max]` over the squared sampling error.
#[derive(Clone, Debug, PartialEq)]
pub struct ErrorGrid {
    points: Vec<f64>,
    step: f64,
}

impl ErrorGrid {
    pub fn uniform(e_max: f64, n_points: usize) -> Result<Self> {
        if !(e_max.is_finite() && e_max > 0.0) || n_points < 2 {
            return Err(Error::invalid(format!(
                "error grid needs e_max > 0 and at least 2 points, got ({e_max}, {n_points})"
            )));
        }
        let step = e_max / (n_points - 1) as f64;
        let mut points: Vec<f64> = (0..n_points).map(|i| i as f64 * step).collect();
        points[n_points - 1] = e_max;
        Ok(Self { points, step })
    }

    /// `e_max = max(4a, a + 6·√(a·z_max), 10)` with `a = (λ − μ_Y)⁺` and
    /// `z_max = 2a + 1`, unless overridden.
    pub fn default_e_max(net_lambda: f64) -> f64 {
        let a = net_lambda.max(0.0);
        let z_max = 2.0 * a + 1.0;
        (4.0 * a).max(a + 6.0 * (a * z_max).sqrt()).max(10.0)
    }

    pub fn for_net_lambda(net_lambda: f64, n_points: usize, e_max: Option<f64>) -> Result<Self> {
        Self::uniform(e_max.unwrap_or_else(|| Self::default_e_max(net_lambda)), n_points)
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn e_max(&self) -> f64 {
        self.points[self.points.len() - 1]
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    /// Linear interpolation of `values` at `e`; zero beyond `e_max`.
    #[inline]
    pub fn interpolate(&self, values: &[f64], e: f64) -> f64 {
        let n = self.points.len();
        let e_max = self.points[n - 1];
        if e > e_max {
            return 0.0;
        }
        let pos = (e / self.step).max(0.0);
        let i = pos as usize;
        if i >= n - 1 {
            return values[n - 1];
        }
        let frac = pos - i as f64;
        values[i] + frac * (values[i + 1] - values[i])
    }
}

/// Tabulated `g(E)` on an [`ErrorGrid`].
#[derive(Clone, Debug, PartialEq)]
pub struct ValueFunction {
    grid: ErrorGrid,
    values: Vec<f64>,
    /// `g` vanishes on `[active_end, ∞)`.
    active_end: f64,
}

impl ValueFunction {
    pub fn new(grid: ErrorGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::invalid(format!(
                "{} values for a grid of {} points",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self::from_parts(grid, values))
    }

    fn from_parts(grid: ErrorGrid, values: Vec<f64>) -> Self {
        let active_end = match values.iter().rposition(|&v| v != 0.0) {
            None => 0.0,
            Some(i) if i + 1 < values.len() => grid.points()[i + 1],
            Some(_) => grid.e_max(),
        };
        Self {
            grid,
            values,
            active_end,
        }
    }

    pub fn zeros(grid: ErrorGrid) -> Self {
        let values = vec![0.0; grid.len()];
        Self::from_parts(grid, values)
    }

    pub fn constant(grid: ErrorGrid, c: f64) -> Self {
        let values = vec![c; grid.len()];
        Self::from_parts(grid, values)
    }

    pub fn grid(&self) -> &ErrorGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Smallest `e` with `g ≡ 0` on `[e, ∞)`.
    pub fn active_end(&self) -> f64 {
        self.active_end
    }

    #[inline]
    pub fn eval(&self, e: f64) -> f64 {
        self.grid.interpolate(&self.values, e)
    }

    pub fn sup_distance(&self, other: &ValueFunction) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// `E[g(E')]` with `E' = (√e + √z·G)²`.
pub fn transition_expectation(vf: &ValueFunction, e: f64, z: f64, quad: &TransitionRule) -> Result<f64> {
    if !(z >= 0.0) {
        return Err(Error::invalid(format!("transition needs z >= 0, got {z}")));
    }
    if !(e >= 0.0) {
        return Err(Error::invalid(format!("transition needs e >= 0, got {e}")));
    }
    Ok(expected_next(vf, e.sqrt(), z, quad))
}

#[inline]
pub(crate) fn expected_next(vf: &ValueFunction, root_e: f64, z: f64, quad: &TransitionRule) -> f64 {
    quad.expect(vf, root_e, z.sqrt())
}

/// Inner minimisation at state `e`: `(z*, min_z h(z, e) + E[g(E')])`.
pub(crate) fn best_wait(
    vf: &ValueFunction,
    reduced: &Reduced,
    e: f64,
    search: &ZSearch,
    quad: &TransitionRule,
) -> (f64, f64) {
    let root_e = e.sqrt();
    minimize_wait(search, |z| reduced.h(z, e) + expected_next(vf, root_e, z, quad))
}

pub(crate) fn backup_reduced(
    vf_prev: &ValueFunction,
    reduced: &Reduced,
    search: &ZSearch,
    quad: &TransitionRule,
) -> ValueFunction {
    let values = vf_prev
        .grid
        .points()
        .par_iter()
        .map(|&e| {
            let (_, inner) = best_wait(vf_prev, reduced, e, search, quad);
            if inner >= -STOP_TOL {
                0.0
            } else {
                inner
            }
        })
        .collect();
    ValueFunction::from_parts(vf_prev.grid.clone(), values)
}

/// One application of the Bellman operator:
/// `g'(E) = min{0, min_z h(z, E) + E[g(E')]}` at every grid point.
pub fn bellman_backup(
    vf_prev: &ValueFunction,
    params: &CostParams,
    mu_y: f64,
    search: &ZSearch,
    quad: &TransitionRule,
) -> ValueFunction {
    backup_reduced(vf_prev, &params.reduced(mu_y), search, quad)
}

/// Convergence record of a value-iteration solve.
#[derive(Clone, Debug, Serialize)]
pub struct SolveReport {
    pub lambda: f64,
    pub iterations: usize,
    /// `sup_E |g_r − g_{r−1}|` for r = 1, 2, ...
    pub sup_diffs: Vec<f64>,
    /// Filled in by `evaluate_j`.
    pub j_value: Option<f64>,
    pub converged: bool,
    pub tol: f64,
}

impl SolveReport {
    pub fn last_diff(&self) -> f64 {
        self.sup_diffs.last().copied().unwrap_or(0.0)
    }

    /// Ratios `d[i+1]/d[i]` over the last `k` diffs (fewer if the trace is
    /// shorter). Ratios with a zero denominator are skipped.
    pub fn tail_ratios(&self, k: usize) -> Vec<f64> {
        let d = &self.sup_diffs;
        let start = d.len().saturating_sub(k);
        d[start..]
            .windows(2)
            .filter(|w| w[0] > 0.0)
            .map(|w| w[1] / w[0])
            .collect()
    }

    /// `Err(NotConverged)` if the solve hit `max_iter`.
    pub fn ensure_converged(&self) -> Result<()> {
        if self.converged {
            Ok(())
        } else {
            Err(Error::NotConverged {
                iterations: self.iterations,
                last_diff: self.last_diff(),
            })
        }
    }
}

/// Value iteration from `g_0 ≡ 0` until the sup-norm change is at most
/// `tol` or `max_iter` backups have run. Non-convergence is reported, not
/// raised.
pub fn solve_g_infinity(
    params: &CostParams,
    mu_y: f64,
    grid: &ErrorGrid,
    tol: f64,
    max_iter: usize,
    search: &ZSearch,
    quad: &TransitionRule,
) -> Result<(ValueFunction, SolveReport)> {
    let (vf, mut report) = solve_reduced(&params.reduced(mu_y), grid, tol, max_iter, search, quad)?;
    report.lambda = params.lambda;
    Ok((vf, report))
}

pub fn solve_reduced(
    reduced: &Reduced,
    grid: &ErrorGrid,
    tol: f64,
    max_iter: usize,
    search: &ZSearch,
    quad: &TransitionRule,
) -> Result<(ValueFunction, SolveReport)> {
    if !(tol > 0.0) {
        return Err(Error::invalid(format!("solver tolerance must be > 0, got {tol}")));
    }
    let mut vf = ValueFunction::zeros(grid.clone());
    let mut sup_diffs = Vec::new();
    let mut converged = false;
    for _ in 0..max_iter {
        let next = backup_reduced(&vf, reduced, search, quad);
        let diff = next.sup_distance(&vf);
        sup_diffs.push(diff);
        vf = next;
        if diff <= tol {
            converged = true;
            break;
        }
    }
    let report = SolveReport {
        lambda: f64::NAN,
        iterations: sup_diffs.len(),
        sup_diffs,
        j_value: None,
        converged,
        tol,
    };
    Ok((vf, report))
}
