//! Randomness substrate: seeded streams, Wiener increments and channel delay
//! models with closed-form moments.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, LogNormal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Tolerance on the total mass of a discrete delay law.
pub const PROB_SUM_TOL: f64 = 1e-12;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A reproducible random stream addressed by `(seed, stream_id)`.
///
/// Backed by ChaCha8 with the stream id mapped onto the cipher's stream
/// counter, so two streams with the same seed and different ids never
/// overlap. [`RngStream::child`] derives further independent streams for
/// parallel replications.
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { seed, stream, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream
    }

    /// Derives the `index`-th child stream. Children depend only on the
    /// parent's `(seed, stream_id)`, never on how many draws the parent made.
    pub fn child(&self, index: u64) -> RngStream {
        let key = splitmix64(self.seed ^ splitmix64(self.stream ^ 0xA5A5_5A5A_C3C3_3C3C));
        RngStream::new(key, index)
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

/// Draws `W_{t+dt} − W_t ~ N(0, dt)`.
pub fn wiener_increment(dt: f64, rng: &mut RngStream) -> Result<f64> {
    if !(dt >= 0.0) || !dt.is_finite() {
        return Err(Error::invalid(format!("wiener increment needs dt >= 0, got {dt}")));
    }
    if dt == 0.0 {
        return Ok(0.0);
    }
    Ok(dt.sqrt() * rng.standard_normal())
}

/// IID channel delay law. All delays are non-negative time values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DelayModel {
    Deterministic { d: f64 },
    Exponential { rate: f64 },
    /// `Y = exp(location + scale·G)` with `G` standard normal.
    Lognormal { location: f64, scale: f64 },
    Discrete { values: Vec<f64>, probs: Vec<f64> },
}

impl DelayModel {
    /// Lognormal delay with mean `mean` and log-scale variance `log_var`.
    /// Collapses to a deterministic delay when `log_var == 0`.
    pub fn lognormal_with_mean(mean: f64, log_var: f64) -> Result<Self> {
        if !(mean > 0.0) || !(log_var >= 0.0) {
            return Err(Error::invalid(format!(
                "lognormal needs mean > 0 and log variance >= 0, got ({mean}, {log_var})"
            )));
        }
        if log_var == 0.0 {
            return Ok(DelayModel::Deterministic { d: mean });
        }
        Ok(DelayModel::Lognormal {
            location: mean.ln() - log_var / 2.0,
            scale: log_var.sqrt(),
        })
    }

    /// Two-point delay with the given mean and variance.
    ///
    /// Symmetric `{mean − σ, mean + σ}` while `σ ≤ mean`; beyond that the
    /// lower atom is pinned at 0 so delays stay non-negative:
    /// `{0, (mean² + σ²)/mean}` with `P(0) = σ²/(mean² + σ²)`.
    pub fn two_point_with_mean(mean: f64, variance: f64) -> Result<Self> {
        if !(mean > 0.0) || !(variance >= 0.0) {
            return Err(Error::invalid(format!(
                "two-point delay needs mean > 0 and variance >= 0, got ({mean}, {variance})"
            )));
        }
        if variance == 0.0 {
            return Ok(DelayModel::Deterministic { d: mean });
        }
        let sigma = variance.sqrt();
        if sigma <= mean {
            Ok(DelayModel::Discrete {
                values: vec![mean - sigma, mean + sigma],
                probs: vec![0.5, 0.5],
            })
        } else {
            let second = mean * mean + variance;
            let p0 = variance / second;
            Ok(DelayModel::Discrete {
                values: vec![0.0, second / mean],
                probs: vec![p0, 1.0 - p0],
            })
        }
    }

    /// Checks the model invariants. Errors name the offending field relative
    /// to the model (`d`, `rate`, `probs`, ...).
    pub fn validate(&self) -> Result<()> {
        let finite_nonneg = |x: f64| x.is_finite() && x >= 0.0;
        match self {
            DelayModel::Deterministic { d } => {
                if !finite_nonneg(*d) {
                    return Err(Error::validation("d", format!("must be finite and >= 0, got {d}")));
                }
            }
            DelayModel::Exponential { rate } => {
                if !(rate.is_finite() && *rate > 0.0) {
                    return Err(Error::validation("rate", format!("must be finite and > 0, got {rate}")));
                }
            }
            DelayModel::Lognormal { location, scale } => {
                if !location.is_finite() {
                    return Err(Error::validation("location", "must be finite"));
                }
                if !finite_nonneg(*scale) {
                    return Err(Error::validation("scale", format!("must be finite and >= 0, got {scale}")));
                }
            }
            DelayModel::Discrete { values, probs } => {
                if values.is_empty() {
                    return Err(Error::validation("values", "must be nonempty"));
                }
                if values.len() != probs.len() {
                    return Err(Error::validation(
                        "probs",
                        format!("length {} does not match values length {}", probs.len(), values.len()),
                    ));
                }
                if let Some(v) = values.iter().find(|v| !finite_nonneg(**v)) {
                    return Err(Error::validation("values", format!("delays must be finite and >= 0, got {v}")));
                }
                if let Some(p) = probs.iter().find(|p| !finite_nonneg(**p)) {
                    return Err(Error::validation("probs", format!("probabilities must be >= 0, got {p}")));
                }
                let total: f64 = probs.iter().sum();
                if (total - 1.0).abs() > PROB_SUM_TOL {
                    return Err(Error::validation("probs", format!("must sum to 1, got {total}")));
                }
            }
        }
        Ok(())
    }

    pub fn sample(&self, rng: &mut RngStream) -> f64 {
        match self {
            DelayModel::Deterministic { d } => *d,
            DelayModel::Exponential { rate } => Exp::new(*rate).expect("validated rate").sample(rng),
            DelayModel::Lognormal { location, scale } => LogNormal::new(*location, *scale)
                .expect("validated lognormal")
                .sample(rng),
            DelayModel::Discrete { values, probs } => {
                let u = rng.uniform();
                let mut acc = 0.0;
                for (v, p) in values.iter().zip(probs) {
                    acc += p;
                    if u < acc {
                        return *v;
                    }
                }
                // u landed in the rounding gap above the last partial sum
                *values
                    .iter()
                    .zip(probs)
                    .rev()
                    .find(|(_, p)| **p > 0.0)
                    .map(|(v, _)| v)
                    .unwrap_or(&values[values.len() - 1])
            }
        }
    }

    /// Exact `(E[Y], E[Y²])`.
    pub fn moments(&self) -> DelayMoments {
        match self {
            DelayModel::Deterministic { d } => DelayMoments { mean: *d, second: d * d },
            DelayModel::Exponential { rate } => DelayMoments {
                mean: 1.0 / rate,
                second: 2.0 / (rate * rate),
            },
            DelayModel::Lognormal { location, scale } => {
                let s2 = scale * scale;
                DelayMoments {
                    mean: (location + s2 / 2.0).exp(),
                    second: (2.0 * location + 2.0 * s2).exp(),
                }
            }
            DelayModel::Discrete { values, probs } => DelayMoments {
                mean: values.iter().zip(probs).map(|(v, p)| v * p).sum(),
                second: values.iter().zip(probs).map(|(v, p)| v * v * p).sum(),
            },
        }
    }

    pub fn variance(&self) -> f64 {
        let m = self.moments();
        (m.second - m.mean * m.mean).max(0.0)
    }
}

pub fn delay_sample(model: &DelayModel, rng: &mut RngStream) -> f64 {
    model.sample(rng)
}

pub fn delay_moments(model: &DelayModel) -> DelayMoments {
    model.moments()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DelayMoments {
    /// `μ_Y`
    pub mean: f64,
    /// `E[Y²]`
    pub second: f64,
}

/// Monte Carlo estimate and closed form of `E[∫₀^y (w₀ + W_t)² dt]` with
/// `w₀² = e0`, i.e. `y²/2 + y·e0`.
#[derive(Clone, Copy, Debug)]
pub struct HoldIntegralEstimate {
    pub mc_estimate: f64,
    /// Standard error of `mc_estimate`.
    pub std_error: f64,
    pub closed_form: f64,
}

/// Default number of Euler steps per path for [`hold_integral_mc`].
pub const HOLD_INTEGRAL_STEPS: usize = 1000;

pub fn hold_integral_mc(e0: f64, y: f64, n_paths: usize, rng: &mut RngStream) -> Result<HoldIntegralEstimate> {
    hold_integral_mc_with_steps(e0, y, n_paths, HOLD_INTEGRAL_STEPS, rng)
}

/// [`hold_integral_mc`] with an explicit step count (`dt = y / steps`),
/// trapezoidal integration along each path.
pub fn hold_integral_mc_with_steps(
    e0: f64,
    y: f64,
    n_paths: usize,
    steps: usize,
    rng: &mut RngStream,
) -> Result<HoldIntegralEstimate> {
    if !(e0 >= 0.0) || !(y >= 0.0) || n_paths == 0 || steps == 0 {
        return Err(Error::invalid(format!(
            "hold-integral estimate needs e0 >= 0, y >= 0, n_paths >= 1, steps >= 1; got ({e0}, {y}, {n_paths}, {steps})"
        )));
    }
    let closed_form = y * y / 2.0 + y * e0;
    if y == 0.0 {
        return Ok(HoldIntegralEstimate {
            mc_estimate: 0.0,
            std_error: 0.0,
            closed_form,
        });
    }
    let dt = y / steps as f64;
    let sd = dt.sqrt();
    let w0 = e0.sqrt();
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..n_paths {
        let mut w = w0;
        let mut integral = 0.0;
        for _ in 0..steps {
            let next = w + sd * rng.standard_normal();
            integral += 0.5 * dt * (w * w + next * next);
            w = next;
        }
        sum += integral;
        sum_sq += integral * integral;
    }
    let n = n_paths as f64;
    let mean = sum / n;
    let var = if n_paths > 1 {
        ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0)
    } else {
        0.0
    };
    Ok(HoldIntegralEstimate {
        mc_estimate: mean,
        std_error: (var / n).sqrt(),
        closed_form,
    })
}
