use rayon::prelude::*;

use super::search::{minimize_wait, ZSearch};
use super::value::{best_wait, ErrorGrid, ValueFunction, STOP_TOL};
use super::{CostParams, Reduced};
use super::transition::TransitionRule;

/// Number of delay points in the default first-step table.
pub const FIRST_STEP_POINTS: usize = 401;

/// What the sender does after taking a sample with error `E`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Decision {
    Transmit,
    Wait(f64),
}

/// `y ↦ Z₁*(y)` tabulated on ascending delays, linear in between and
/// clamped at both ends.
#[derive(Clone, Debug, PartialEq)]
pub struct FirstStepTable {
    pub delays: Vec<f64>,
    pub z1: Vec<f64>,
    pub values: Vec<f64>,
}

impl FirstStepTable {
    pub fn wait_for(&self, y: f64) -> f64 {
        let d = &self.delays;
        if y <= d[0] {
            return self.z1[0];
        }
        let last = d.len() - 1;
        if y >= d[last] {
            return self.z1[last];
        }
        let hi = d.partition_point(|&x| x <= y);
        let lo = hi - 1;
        if d[lo] == y {
            return self.z1[lo];
        }
        let t = (y - d[lo]) / (d[hi] - d[lo]);
        self.z1[lo] + t * (self.z1[hi] - self.z1[lo])
    }
}

/// Waiting times, transmit region and first-step rule extracted from a
/// converged value function.
#[derive(Clone, Debug, PartialEq)]
pub struct Policy {
    pub lambda: f64,
    pub net_lambda: f64,
    pub c_s: f64,
    pub grid: ErrorGrid,
    /// `g_∞` on the grid.
    pub g: Vec<f64>,
    /// Wait before the next sample; 0 where `stop` holds.
    pub z_star: Vec<f64>,
    /// Transmit the current sample.
    pub stop: Vec<bool>,
    pub first_step: FirstStepTable,
}

impl Policy {
    /// Decision for a realised error. The transmit set is read at the
    /// nearest grid point; waits interpolate between neighbouring
    /// continue points. Errors beyond the grid transmit.
    pub fn decide(&self, e: f64) -> Decision {
        let grid = &self.grid;
        if e > grid.e_max() {
            return Decision::Transmit;
        }
        let n = grid.len();
        let pos = (e / grid.step()).max(0.0);
        let nearest = (pos.round() as usize).min(n - 1);
        if self.stop[nearest] {
            return Decision::Transmit;
        }
        let lo = (pos.floor() as usize).min(n - 1);
        let hi = (lo + 1).min(n - 1);
        let z = match (self.stop[lo], self.stop[hi]) {
            (false, false) => {
                let t = pos - lo as f64;
                self.z_star[lo] + t * (self.z_star[hi] - self.z_star[lo])
            }
            (false, true) => self.z_star[lo],
            (true, false) => self.z_star[hi],
            (true, true) => self.z_star[nearest],
        };
        Decision::Wait(z)
    }

    pub fn first_wait(&self, y: f64) -> f64 {
        self.first_step.wait_for(y)
    }

    /// Smallest grid error in the transmit set, if any.
    pub fn stop_threshold(&self) -> Option<f64> {
        self.stop
            .iter()
            .position(|&s| s)
            .map(|i| self.grid.points()[i])
    }
}

/// `min_{z ≥ 0} h(z, y) + E[g((y + z)·G²)]` and its minimiser. The first
/// sample of an epoch is mandatory, so there is no transmit-now option.
pub fn first_step_value(
    y: f64,
    vf: &ValueFunction,
    params: &CostParams,
    mu_y: f64,
    search: &ZSearch,
    quad: &TransitionRule,
) -> (f64, f64) {
    first_step_reduced(y, vf, &params.reduced(mu_y), search, quad)
}

pub(crate) fn first_step_reduced(
    y: f64,
    vf: &ValueFunction,
    reduced: &Reduced,
    search: &ZSearch,
    quad: &TransitionRule,
) -> (f64, f64) {
    let (z, v) = minimize_wait(search, |z| {
        reduced.h(z, y) + quad.expect(vf, 0.0, (y + z).sqrt())
    });
    (v, z)
}

/// Recomputes the argmin wait and the transmit flag at every grid point
/// and tabulates the first-step rule on `[0, z_max]` plus `extra_delays`.
pub fn extract_policy(
    vf: &ValueFunction,
    params: &CostParams,
    mu_y: f64,
    search: &ZSearch,
    quad: &TransitionRule,
    extra_delays: &[f64],
) -> Policy {
    let reduced = params.reduced(mu_y);
    let grid = vf.grid().clone();
    let per_point: Vec<(f64, f64)> = grid
        .points()
        .par_iter()
        .map(|&e| best_wait(vf, &reduced, e, search, quad))
        .collect();
    let mut z_star = Vec::with_capacity(grid.len());
    let mut stop = Vec::with_capacity(grid.len());
    for &(z, inner) in &per_point {
        let transmit = inner >= -STOP_TOL;
        stop.push(transmit);
        z_star.push(if transmit { 0.0 } else { z });
    }

    let y_max = search.z_max;
    let mut delays: Vec<f64> = (0..FIRST_STEP_POINTS)
        .map(|i| y_max * i as f64 / (FIRST_STEP_POINTS - 1) as f64)
        .collect();
    delays.extend(extra_delays.iter().copied().filter(|y| y.is_finite() && *y >= 0.0));
    delays.sort_by(f64::total_cmp);
    delays.dedup();
    let firsts: Vec<(f64, f64)> = delays
        .par_iter()
        .map(|&y| first_step_reduced(y, vf, &reduced, search, quad))
        .collect();

    Policy {
        lambda: params.lambda,
        net_lambda: reduced.net_lambda,
        c_s: params.c_s,
        g: vf.values().to_vec(),
        z_star,
        stop,
        first_step: FirstStepTable {
            delays,
            z1: firsts.iter().map(|f| f.1).collect(),
            values: firsts.iter().map(|f| f.0).collect(),
        },
        grid,
    }
}

#[cfg(test)]
mod tests {
    use super::super::value::bellman_backup;
    use super::*;

    fn setup(lambda: f64, mu_y: f64) -> (CostParams, ErrorGrid, ZSearch, TransitionRule) {
        let p = CostParams::new(2.0, 5.0, lambda).unwrap();
        let a = lambda - mu_y;
        (
            p,
            ErrorGrid::for_net_lambda(a, 1001, None).unwrap(),
            ZSearch::for_net_lambda(a),
            TransitionRule::default(),
        )
    }

    #[test]
    fn zero_value_function_stops_everywhere() {
        let (p, grid, search, q) = setup(0.5, 1.0);
        let vf = ValueFunction::zeros(grid);
        let pol = extract_policy(&vf, &p, 1.0, &search, &q, &[]);
        assert!(pol.stop.iter().all(|&s| s));
        assert!(pol.z_star.iter().all(|&z| z == 0.0));
    }

    #[test]
    fn horizon_one_policy_matches_closed_form() {
        // with g_0 ≡ 0 as the future the policy is the horizon-1 rule:
        // wait (9 − E)⁺, transmit once c_s ≥ ((9 − E)⁺)²/2, i.e. E ≥ 7
        let (p, grid, search, q) = setup(10.0, 1.0);
        let pol = extract_policy(&ValueFunction::zeros(grid.clone()), &p, 1.0, &search, &q, &[]);
        for (i, &e) in grid.points().iter().enumerate() {
            if e >= 7.0 + 1e-9 {
                assert!(pol.stop[i], "E={e} should transmit");
            } else if e < 7.0 - 1e-9 {
                assert!(!pol.stop[i], "E={e} should wait");
                assert!((pol.z_star[i] - (9.0 - e)).abs() < 1e-5);
            }
        }
        assert!(pol.stop_threshold().unwrap() <= 7.0 + grid.step());
    }

    #[test]
    fn one_backup_transmits_above_net_lambda() {
        let (p, grid, search, q) = setup(10.0, 1.0);
        let g1 = bellman_backup(&ValueFunction::zeros(grid.clone()), &p, 1.0, &search, &q);
        for (e, v) in grid.points().iter().zip(g1.values()) {
            if *e >= 9.0 {
                assert_eq!(*v, 0.0);
            }
        }
    }

    #[test]
    fn first_step_with_zero_future() {
        let (p, grid, search, q) = setup(10.0, 1.0);
        let vf = ValueFunction::zeros(grid);
        for y in [0.0, 1.0, 4.5, 8.0] {
            let (v, z) = first_step_value(y, &vf, &p, 1.0, &search, &q);
            let gap: f64 = 9.0 - y;
            assert!((z - gap).abs() < 1e-5, "y={y} z={z}");
            assert!((v - (2.0 - gap * gap / 2.0)).abs() < 1e-9);
        }
        for y in [9.0, 12.0] {
            let (v, z) = first_step_value(y, &vf, &p, 1.0, &search, &q);
            assert_eq!(z, 0.0);
            assert!((v - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn first_step_with_constant_future() {
        let p = CostParams::new(2.0, 5.0, 10.0).unwrap();
        let grid = ErrorGrid::uniform(1e7, 1001).unwrap();
        let search = ZSearch::for_net_lambda(9.0);
        let q = TransitionRule::default();
        let vf = ValueFunction::constant(grid, -1.5);
        let (v, z) = first_step_value(3.0, &vf, &p, 1.0, &search, &q);
        assert!((z - 6.0).abs() < 1e-5);
        assert!((v - (2.0 - 18.0 - 1.5)).abs() < 1e-9);
    }

    #[test]
    fn first_step_table_interpolates_and_clamps() {
        let t = FirstStepTable {
            delays: vec![0.0, 1.0, 3.0],
            z1: vec![4.0, 2.0, 0.0],
            values: vec![0.0; 3],
        };
        assert_eq!(t.wait_for(-1.0), 4.0);
        assert_eq!(t.wait_for(0.5), 3.0);
        assert_eq!(t.wait_for(1.0), 2.0);
        assert_eq!(t.wait_for(2.0), 1.0);
        assert_eq!(t.wait_for(10.0), 0.0);
    }

    #[test]
    fn extra_delays_enter_table() {
        let (p, grid, search, q) = setup(10.0, 1.0);
        let vf = ValueFunction::zeros(grid);
        let pol = extract_policy(&vf, &p, 1.0, &search, &q, &[1.2345]);
        let i = pol.first_step.delays.iter().position(|&d| d == 1.2345).unwrap();
        assert!((pol.first_step.z1[i] - (9.0 - 1.2345)).abs() < 1e-5);
    }
}
