//! Gaussian quadrature rules, normalised as probability expectations.
//!
//! Nodes come from Newton iteration on the orthonormal three-term
//! recurrences, seeded with the usual asymptotic guesses.

use std::f64::consts::PI;

use crate::{Error, Result};

const NEWTON_EPS: f64 = 3e-15;
const NEWTON_MAX: usize = 200;

/// Above this the orthonormal Hermite recurrence underflows at the
/// outer nodes and the rule loses its mass.
pub const MAX_HERMITE_NODES: usize = 150;

/// Rule for `E[f(G)]`, `G ~ N(0, 1)`: `Σ weights[i]·f(nodes[i])`.
#[derive(Clone, Debug)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussHermite {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 || n > MAX_HERMITE_NODES {
            return Err(Error::invalid(format!(
                "Gauss-Hermite rule needs 1..={MAX_HERMITE_NODES} nodes, got {n}"
            )));
        }
        let (x, w) = physicists_hermite(n);
        let nodes = x.iter().map(|xi| xi * std::f64::consts::SQRT_2).collect();
        let weights = w.iter().map(|wi| wi / PI.sqrt()).collect();
        Ok(Self { nodes, weights })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn expect(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }
}

/// Nodes/weights for weight `exp(−x²)` on the real line.
fn physicists_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    let m = n.div_ceil(2);
    let mut z = 0.0f64;
    for i in 0..m {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        for _ in 0..NEWTON_MAX {
            let (p1, pp) = hermite_pair(n, z);
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= NEWTON_EPS * z.abs().max(1.0) {
                break;
            }
        }
        let (_, pp) = hermite_pair(n, z);
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    if n % 2 == 1 {
        x[m - 1] = 0.0;
    }
    (x, w)
}

/// Orthonormal Hermite value and derivative `(p_n(z), p_n'(z))`.
fn hermite_pair(n: usize, z: f64) -> (f64, f64) {
    let mut p1 = PI.powf(-0.25);
    let mut p2 = 0.0;
    for j in 0..n {
        let p3 = p2;
        p2 = p1;
        let jf = j as f64;
        p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
    }
    (p1, (2.0 * n as f64).sqrt() * p2)
}

/// Rule for `∫₋₁¹ f(x) dx`.
#[derive(Clone, Debug)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("Gauss-Legendre rule needs at least one node"));
        }
        let nf = n as f64;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            let mut z = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
            for _ in 0..NEWTON_MAX {
                let (_, pp) = legendre_pair(n, z);
                let z1 = z;
                z = z1 - legendre_pair(n, z1).0 / pp;
                if (z - z1).abs() <= NEWTON_EPS {
                    break;
                }
            }
            let (_, pp) = legendre_pair(n, z);
            let w = 2.0 / ((1.0 - z * z) * pp * pp);
            nodes[i] = z;
            nodes[n - 1 - i] = -z;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Ok(Self { nodes, weights })
    }

    /// `∫ₐᵇ f(x) dx`.
    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        half * self
            .nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(mid + half * x))
            .sum::<f64>()
    }
}

/// `(P_n(z), P_n'(z))`.
fn legendre_pair(n: usize, z: f64) -> (f64, f64) {
    let mut p1 = 1.0;
    let mut p2 = 0.0;
    for j in 0..n {
        let p3 = p2;
        p2 = p1;
        let jf = j as f64;
        p1 = ((2.0 * jf + 1.0) * z * p2 - jf * p3) / (jf + 1.0);
    }
    let nf = n as f64;
    (p1, nf * (z * p1 - p2) / (z * z - 1.0))
}

/// Rule for `E[f(X)]`, `X ~ Exp(1)`: `Σ weights[i]·f(nodes[i])`.
#[derive(Clone, Debug)]
pub struct GaussLaguerre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLaguerre {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("Gauss-Laguerre rule needs at least one node"));
        }
        let nf = n as f64;
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let mut z = 0.0f64;
        for i in 0..n {
            z = match i {
                0 => 3.0 / (1.0 + 2.4 * nf),
                1 => z + 15.0 / (1.0 + 2.5 * nf),
                _ => {
                    let ai = (i - 1) as f64;
                    z + (1.0 + 2.55 * ai) / (1.9 * ai) * (z - nodes[i - 2])
                }
            };
            for _ in 0..NEWTON_MAX {
                let (p1, p2) = laguerre_pair(n, z);
                let pp = (nf * p1 - nf * p2) / z;
                let z1 = z;
                z = z1 - p1 / pp;
                if (z - z1).abs() <= NEWTON_EPS * z.abs().max(1.0) {
                    break;
                }
            }
            let (p1, p2) = laguerre_pair(n, z);
            let pp = (nf * p1 - nf * p2) / z;
            nodes[i] = z;
            weights[i] = -1.0 / (pp * nf * p2);
        }
        Ok(Self { nodes, weights })
    }

    pub fn expect(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }
}

/// `(L_n(z), L_{n−1}(z))`.
fn laguerre_pair(n: usize, z: f64) -> (f64, f64) {
    let mut p1 = 1.0;
    let mut p2 = 0.0;
    for j in 0..n {
        let p3 = p2;
        p2 = p1;
        let jf = j as f64;
        p1 = ((2.0 * jf + 1.0 - z) * p2 - jf * p3) / (jf + 1.0);
    }
    (p1, p2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermite_reproduces_normal_moments() {
        for n in [3usize, 8, 33, 64] {
            let gh = GaussHermite::new(n).unwrap();
            let total: f64 = gh.weights.iter().sum();
            assert!((total - 1.0).abs() < 1e-12, "n={n} sum={total}");
            assert!(gh.expect(|x| x).abs() < 1e-12);
            assert!((gh.expect(|x| x * x) - 1.0).abs() < 1e-11);
            if n >= 3 {
                assert!((gh.expect(|x| x.powi(4)) - 3.0).abs() < 1e-10, "n={n}");
            }
            // nodes strictly ordered from the largest down
            assert!(gh.nodes.windows(2).all(|w| w[0] > w[1]));
        }
    }

    #[test]
    fn hermite_smooth_integrand() {
        // E[cos(G)] = exp(-1/2)
        let gh = GaussHermite::new(33).unwrap();
        assert!((gh.expect(f64::cos) - (-0.5f64).exp()).abs() < 1e-13);
    }

    #[test]
    fn hermite_node_cap() {
        assert!(GaussHermite::new(MAX_HERMITE_NODES).is_ok());
        assert!(GaussHermite::new(MAX_HERMITE_NODES + 1).is_err());
        let gh = GaussHermite::new(MAX_HERMITE_NODES).unwrap();
        assert!((gh.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn legendre_polynomial_exactness() {
        for n in [1usize, 2, 5, 33, 64] {
            let gl = GaussLegendre::new(n).unwrap();
            assert!((gl.weights.iter().sum::<f64>() - 2.0).abs() < 1e-13, "n={n}");
            // exact up to degree 2n − 1
            let deg = 2 * n - 1;
            let exact = if deg % 2 == 1 { 2.0 / deg as f64 } else { 0.0 };
            let got = gl.integrate(-1.0, 1.0, |x| x.powi(deg as i32 - 1));
            assert!((got - exact).abs() < 1e-12, "n={n} got {got}");
        }
        let gl = GaussLegendre::new(5).unwrap();
        assert!((gl.integrate(0.0, 2.0, |x| x * x) - 8.0 / 3.0).abs() < 1e-13);
    }

    #[test]
    fn legendre_normal_density_mass() {
        let gl = GaussLegendre::new(33).unwrap();
        let phi = |x: f64| (-0.5 * x * x).exp() / (2.0 * PI).sqrt();
        assert!((gl.integrate(-9.0, 9.0, phi) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn laguerre_reproduces_exponential_moments() {
        for n in [3usize, 16, 33] {
            let gl = GaussLaguerre::new(n).unwrap();
            let total: f64 = gl.weights.iter().sum();
            assert!((total - 1.0).abs() < 1e-11, "n={n} sum={total}");
            assert!((gl.expect(|x| x) - 1.0).abs() < 1e-10);
            assert!((gl.expect(|x| x * x) - 2.0).abs() < 1e-9);
            assert!(gl.nodes.iter().all(|&x| x > 0.0));
        }
        // E[exp(-X)] = 1/2
        let gl = GaussLaguerre::new(33).unwrap();
        assert!((gl.expect(|x| (-x).exp()) - 0.5).abs() < 1e-12);
    }
}
