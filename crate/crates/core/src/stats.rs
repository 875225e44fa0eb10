//! Small statistics helpers: Welford accumulation, batch-means confidence
//! intervals for renewal-reward ratios, Spearman rank correlation.

use statrs::distribution::{ContinuousCDF, StudentsT};

/// Default number of batches for batch-means intervals.
pub const DEFAULT_BATCHES: usize = 20;

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct RunningStats {
    count: usize,
    mean: f64,
    m2: f64,
}

impl RunningStats {
    pub fn push(&mut self, x: f64) {
        // Welford
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn mean(&self) -> f64 {
        if self.count == 0 {
            f64::NAN
        } else {
            self.mean
        }
    }

    pub fn sample_var(&self) -> f64 {
        if self.count <= 1 {
            f64::NAN
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    pub fn std_error(&self) -> f64 {
        (self.sample_var() / self.count as f64).sqrt()
    }
}

impl FromIterator<f64> for RunningStats {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = RunningStats::default();
        for x in iter {
            s.push(x);
        }
        s
    }
}

/// Two-sided Student-t quantile `t_{df}(p)`.
pub fn student_t_quantile(p: f64, df: f64) -> f64 {
    StudentsT::new(0.0, 1.0, df)
        .expect("df > 0")
        .inverse_cdf(p)
}

/// Ratio estimate `Σ num / Σ den` with a 95% batch-means half-width.
#[derive(Clone, Debug, PartialEq)]
pub struct RatioEstimate {
    pub ratio: f64,
    pub halfwidth: f64,
    pub batch_ratios: Vec<f64>,
}

/// Splits the paired series into `n_batches` contiguous batches (sizes
/// differ by at most one) and uses the spread of per-batch ratios.
pub fn ratio_batch_means(num: &[f64], den: &[f64], n_batches: usize) -> RatioEstimate {
    assert_eq!(num.len(), den.len(), "paired series");
    let n = num.len();
    let total_num: f64 = num.iter().sum();
    let total_den: f64 = den.iter().sum();
    let ratio = total_num / total_den;
    let b = n_batches.min(n);
    if b < 2 {
        return RatioEstimate {
            ratio,
            halfwidth: f64::NAN,
            batch_ratios: vec![ratio],
        };
    }
    let mut batch_ratios = Vec::with_capacity(b);
    let mut start = 0;
    for k in 0..b {
        let end = (k + 1) * n / b;
        let bn: f64 = num[start..end].iter().sum();
        let bd: f64 = den[start..end].iter().sum();
        batch_ratios.push(bn / bd);
        start = end;
    }
    let stats: RunningStats = batch_ratios.iter().copied().collect();
    let t = student_t_quantile(0.975, (b - 1) as f64);
    RatioEstimate {
        ratio,
        halfwidth: t * stats.std_error(),
        batch_ratios,
    }
}

fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut r = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        // average rank over ties
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation; `NaN` if either series is constant.
pub fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let rx = ranks(xs);
    let ry = ranks(ys);
    let n = rx.len() as f64;
    let mx = rx.iter().sum::<f64>() / n;
    let my = ry.iter().sum::<f64>() / n;
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn welford_matches_two_pass() {
        let xs = [1.0, 4.0, 2.5, 7.0, -3.0];
        let s: RunningStats = xs.iter().copied().collect();
        let m = xs.iter().sum::<f64>() / 5.0;
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / 4.0;
        assert!((s.mean() - m).abs() < 1e-12);
        assert!((s.sample_var() - v).abs() < 1e-12);
    }

    #[test]
    fn t_quantile_known_value() {
        assert!((student_t_quantile(0.975, 19.0) - 2.093_024).abs() < 1e-5);
    }

    #[test]
    fn batch_means_constant_ratio_has_zero_width() {
        let num: Vec<f64> = (1..=100).map(|i| 2.0 * i as f64).collect();
        let den: Vec<f64> = (1..=100).map(|i| i as f64).collect();
        let est = ratio_batch_means(&num, &den, 20);
        assert!((est.ratio - 2.0).abs() < 1e-12);
        assert!(est.halfwidth.abs() < 1e-12);
        assert_eq!(est.batch_ratios.len(), 20);
    }

    #[test]
    fn spearman_extremes() {
        let x = [0.0, 0.1, 1.0, 2.5];
        assert!((spearman(&x, &[1.0, 2.0, 3.0, 9.0]) - 1.0).abs() < 1e-12);
        assert!((spearman(&x, &[9.0, 3.0, 2.0, 1.0]) + 1.0).abs() < 1e-12);
    }
}
