use crate::{Error, Result};

/// Values closer than this are treated as ties; ties go to the smaller wait.
pub const TIE_TOL: f64 = 1e-9;

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// One-dimensional search over waiting times `z ∈ [0, z_max]`: a coarse
/// scan on a geometric-plus-linear grid, then golden-section refinement
/// around the best coarse point.
#[derive(Clone, Debug, PartialEq)]
pub struct ZSearch {
    pub z_max: f64,
    /// Coarse grid including 0 and `z_max`, ascending.
    coarse: Vec<f64>,
    pub refine_width: f64,
}

impl ZSearch {
    pub const LINEAR_POINTS: usize = 48;
    pub const GEOMETRIC_POINTS: usize = 12;
    pub const REFINE_WIDTH: f64 = 1e-6;

    pub fn new(z_max: f64, linear: usize, geometric: usize, refine_width: f64) -> Result<Self> {
        if !(z_max.is_finite() && z_max > 0.0) || linear == 0 || !(refine_width > 0.0) {
            return Err(Error::invalid(format!(
                "z search needs z_max > 0, linear >= 1, refine width > 0; got ({z_max}, {linear}, {refine_width})"
            )));
        }
        let mut coarse = vec![0.0];
        // geometric points cover small waits down to z_max·1e-4
        for k in 0..geometric {
            let frac = 10f64.powf(-4.0 + 3.0 * k as f64 / geometric.max(1) as f64);
            coarse.push(z_max * frac);
        }
        for i in 1..=linear {
            coarse.push(z_max * i as f64 / linear as f64);
        }
        coarse.sort_by(f64::total_cmp);
        coarse.dedup_by(|a, b| (*a - *b).abs() <= 1e-15 * z_max);
        Ok(Self {
            z_max,
            coarse,
            refine_width,
        })
    }

    /// Default search for a given `λ − μ_Y`: `z_max = 2·(λ − μ_Y)⁺ + 1`.
    pub fn for_net_lambda(net_lambda: f64) -> Self {
        Self::with_z_max(2.0 * net_lambda.max(0.0) + 1.0)
    }

    pub fn with_z_max(z_max: f64) -> Self {
        Self::new(z_max, Self::LINEAR_POINTS, Self::GEOMETRIC_POINTS, Self::REFINE_WIDTH)
            .expect("positive z_max")
    }

    pub fn coarse_points(&self) -> &[f64] {
        &self.coarse
    }

    /// Largest gap between consecutive coarse points.
    pub fn coarse_cell(&self) -> f64 {
        self.coarse.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }
}

/// Minimises `f` over `[0, z_max]`, returning `(z*, f(z*))`.
pub fn minimize_wait(search: &ZSearch, mut f: impl FnMut(f64) -> f64) -> (f64, f64) {
    let pts = &search.coarse;
    let vals: Vec<f64> = pts.iter().map(|&z| f(z)).collect();
    let best_val = vals.iter().copied().fold(f64::INFINITY, f64::min);
    let best = vals
        .iter()
        .position(|&v| v <= best_val + TIE_TOL)
        .expect("nonempty coarse grid");

    let lo = pts[best.saturating_sub(1)];
    let hi = pts[(best + 1).min(pts.len() - 1)];
    let (zg, vg) = golden_section(&mut f, lo, hi, search.refine_width);

    let (zc, vc) = (pts[best], vals[best]);
    if vg < vc - TIE_TOL || (vg <= vc + TIE_TOL && zg < zc) {
        (zg, vg)
    } else {
        (zc, vc)
    }
}

fn golden_section(f: &mut impl FnMut(f64) -> f64, mut a: f64, mut b: f64, width: f64) -> (f64, f64) {
    if b - a <= width {
        let m = 0.5 * (a + b);
        return (m, f(m));
    }
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while b - a > width {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    if fc <= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coarse_grid_is_sorted_and_spans_range() {
        let s = ZSearch::for_net_lambda(9.0);
        let pts = s.coarse_points();
        assert_eq!(pts[0], 0.0);
        assert_eq!(*pts.last().unwrap(), 19.0);
        assert!(pts.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn finds_quadratic_minimum() {
        let s = ZSearch::for_net_lambda(9.0);
        for target in [0.0, 1e-3, 0.37, 4.0, 8.999] {
            let (z, v) = minimize_wait(&s, |z| 0.5 * (z - target).powi(2) - 1.0);
            assert!((z - target).abs() < 1e-5, "target {target} got {z}");
            assert!((v + 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn boundary_minimum_at_zero() {
        let s = ZSearch::for_net_lambda(3.0);
        let (z, v) = minimize_wait(&s, |z| z * z + 2.0 * z + 1.0);
        assert_eq!(z, 0.0);
        assert_eq!(v, 1.0);
    }

    #[test]
    fn flat_function_prefers_smallest_wait() {
        let s = ZSearch::for_net_lambda(3.0);
        let (z, _) = minimize_wait(&s, |_| 4.0);
        assert_eq!(z, 0.0);
    }

    #[test]
    fn coarse_scan_escapes_local_minimum() {
        // local min near 1, global min near 6
        let s = ZSearch::for_net_lambda(4.0);
        let f = |z: f64| -(-(z - 1.0).powi(2)).exp() - 2.0 * (-(z - 6.0).powi(2)).exp();
        let (z, _) = minimize_wait(&s, f);
        assert!((z - 6.0).abs() < 1e-3, "got {z}");
    }
}
