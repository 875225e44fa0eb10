use serde::{Deserialize, Serialize};

use super::value::ValueFunction;
use crate::quadrature::{GaussHermite, GaussLegendre};
use crate::Result;

/// Normal mass beyond ±8 is about 1e-15, and 33 Legendre nodes still
/// integrate `φ` on `[−8, 8]` to 1e-12.
const NORMAL_CLIP: f64 = 8.0;
const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// How `E[g((m + s·G)²)]` is integrated over the standard normal `G`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransitionMethod {
    /// Gauss–Legendre over the `G`-interval where `g` can be nonzero.
    /// `g` has a kink where it reaches 0, so restricting to that interval
    /// keeps the integrand smooth.
    #[default]
    ActiveInterval,
    /// Gauss–Hermite over the whole line.
    Hermite,
}

/// Default node count for either method.
pub const DEFAULT_TRANSITION_NODES: usize = 33;

/// Quadrature for the one-step transition `E' = (√e + √z·G)²`.
#[derive(Clone, Debug)]
pub struct TransitionRule {
    method: TransitionMethod,
    hermite: Option<GaussHermite>,
    legendre: Option<GaussLegendre>,
}

impl TransitionRule {
    pub fn new(method: TransitionMethod, n: usize) -> Result<Self> {
        let (hermite, legendre) = match method {
            TransitionMethod::ActiveInterval => (None, Some(GaussLegendre::new(n)?)),
            TransitionMethod::Hermite => (Some(GaussHermite::new(n)?), None),
        };
        Ok(Self {
            method,
            hermite,
            legendre,
        })
    }

    pub fn method(&self) -> TransitionMethod {
        self.method
    }

    /// `E[g((m + s·G)²)]` for `m = √e ≥ 0`, `s = √z ≥ 0`.
    pub fn expect(&self, vf: &ValueFunction, m: f64, s: f64) -> f64 {
        if s == 0.0 {
            return vf.eval(m * m);
        }
        if let Some(gh) = &self.hermite {
            return gh.expect(|x| {
                let d = m + s * x;
                vf.eval(d * d)
            });
        }
        let gl = self.legendre.as_ref().expect("one rule is set");
        let r = vf.active_end().sqrt();
        if r == 0.0 {
            return 0.0;
        }
        let lo = ((-r - m) / s).max(-NORMAL_CLIP);
        let hi = ((r - m) / s).min(NORMAL_CLIP);
        if hi <= lo {
            return 0.0;
        }
        INV_SQRT_2PI
            * gl.integrate(lo, hi, |x| {
                let d = m + s * x;
                vf.eval(d * d) * (-0.5 * x * x).exp()
            })
    }
}

impl Default for TransitionRule {
    fn default() -> Self {
        Self::new(TransitionMethod::default(), DEFAULT_TRANSITION_NODES).expect("valid default rule")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bellman::ErrorGrid;

    fn rules() -> [TransitionRule; 2] {
        [
            TransitionRule::new(TransitionMethod::ActiveInterval, 33).unwrap(),
            TransitionRule::new(TransitionMethod::Hermite, 33).unwrap(),
        ]
    }

    /// Trapezoid in `G` on a fine mesh, as an independent reference.
    fn brute_force(vf: &ValueFunction, m: f64, s: f64) -> f64 {
        let n = 400_000;
        let (a, b) = (-12.0, 12.0);
        let h = (b - a) / n as f64;
        (0..=n)
            .map(|i| {
                let x = a + i as f64 * h;
                let w = if i == 0 || i == n { 0.5 } else { 1.0 };
                let d = m + s * x;
                w * vf.eval(d * d) * (-0.5 * x * x).exp()
            })
            .sum::<f64>()
            * h
            * INV_SQRT_2PI
    }

    #[test]
    fn constant_function_inside_grid() {
        let vf = ValueFunction::constant(ErrorGrid::uniform(1e4, 101).unwrap(), -2.5);
        for rule in rules() {
            for (m, s) in [(0.0, 1.0), (2.0, 0.5), (3.0, 3.0)] {
                assert!((rule.expect(&vf, m, s) + 2.5).abs() < 1e-10, "{:?}", rule.method());
            }
        }
    }

    #[test]
    fn zero_function_and_zero_step() {
        let grid = ErrorGrid::uniform(10.0, 11).unwrap();
        let vf = ValueFunction::zeros(grid.clone());
        assert_eq!(vf.active_end(), 0.0);
        let vals: Vec<f64> = grid.points().iter().map(|e| -e).collect();
        let lin = ValueFunction::new(grid, vals).unwrap();
        for rule in rules() {
            assert_eq!(rule.expect(&vf, 1.0, 1.0), 0.0);
            assert_eq!(rule.expect(&lin, 2.0, 0.0), -4.0);
        }
    }

    #[test]
    fn kinked_function_matches_brute_force() {
        // horizon-1 shape: quadratic well cut off at 0, kink at e = 7
        let grid = ErrorGrid::uniform(40.0, 4001).unwrap();
        let vals: Vec<f64> = grid
            .points()
            .iter()
            .map(|&e| (2.0 - ((9.0 - e).max(0.0)).powi(2) / 2.0).min(0.0))
            .collect();
        let vf = ValueFunction::new(grid, vals).unwrap();
        assert!((vf.active_end() - 7.0).abs() < 0.02);
        let active = TransitionRule::new(TransitionMethod::ActiveInterval, 33).unwrap();
        let hermite = TransitionRule::new(TransitionMethod::Hermite, 33).unwrap();
        let mut worst_active: f64 = 0.0;
        let mut worst_hermite: f64 = 0.0;
        for (m, s) in [(0.0, 1.0), (1.0, 1.5), (2.0, 0.7), (2.5, 2.0), (0.5, 3.0)] {
            let exact = brute_force(&vf, m, s);
            worst_active = worst_active.max((active.expect(&vf, m, s) - exact).abs());
            worst_hermite = worst_hermite.max((hermite.expect(&vf, m, s) - exact).abs());
        }
        assert!(worst_active < 1e-5, "active-interval error {worst_active}");
        assert!(1e3 * worst_active < worst_hermite, "{worst_active} vs {worst_hermite}");
    }
}
