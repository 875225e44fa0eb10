//! Discrete-event execution of sampling/transmission policies.
//!
//! An epoch runs from one delivery to the next. At the delivery instant the
//! estimator switches to the delivered sample `w₀` and holds it until the
//! following delivery; the sender knows the delay `y` the delivered packet
//! experienced, so the process has drifted `N(0, y)` away from `w₀`. The
//! sender waits `Z₁(y)`, samples, and keeps sampling while the policy says
//! wait; then it transmits the latest sample, which arrives after a fresh
//! delay. The squared error `(W_t − w₀)²` is integrated along an Euler path
//! over the whole epoch.

use rayon::prelude::*;
use serde::Serialize;

use crate::bellman::{Decision, Policy};
use crate::stats::{ratio_batch_means, RunningStats, DEFAULT_BATCHES};
use crate::stochastic::{DelayModel, RngStream};
use crate::{Error, Result};

pub const DEFAULT_DT: f64 = 1e-3;
pub const DEFAULT_K_MAX: usize = 10_000;

/// Sampling and transmission costs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Costs {
    pub c_s: f64,
    pub c_tau: f64,
}

impl Costs {
    pub fn new(c_s: f64, c_tau: f64) -> Result<Self> {
        if !(c_s.is_finite() && c_s >= 0.0) || !(c_tau.is_finite() && c_tau >= 0.0) {
            return Err(Error::invalid(format!("costs must be finite and >= 0, got ({c_s}, {c_tau})")));
        }
        Ok(Self { c_s, c_tau })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum PolicySpec {
    Optimal(Box<Policy>),
    /// After each delivery wait `period`, sample once, transmit.
    Periodic { period: f64 },
    /// Sample and transmit right at each delivery.
    ZeroWait,
}

impl PolicySpec {
    pub fn name(&self) -> String {
        match self {
            PolicySpec::Optimal(_) => "optimal".to_string(),
            PolicySpec::Periodic { period } => format!("periodic({period})"),
            PolicySpec::ZeroWait => "zero_wait".to_string(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let PolicySpec::Periodic { period } = self {
            if !(period.is_finite() && *period > 0.0) {
                return Err(Error::invalid(format!("periodic policy needs T > 0, got {period}")));
            }
        }
        Ok(())
    }

    fn first_wait(&self, prev_delay: f64) -> f64 {
        match self {
            PolicySpec::Optimal(p) => p.first_wait(prev_delay),
            PolicySpec::Periodic { period } => *period,
            PolicySpec::ZeroWait => 0.0,
        }
    }

    fn after_sample(&self, error: f64) -> Decision {
        match self {
            PolicySpec::Optimal(p) => p.decide(error),
            PolicySpec::Periodic { .. } | PolicySpec::ZeroWait => Decision::Transmit,
        }
    }
}

/// One delivery-to-delivery cycle.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EpochRecord {
    /// `D_{n+1} − D_n = delay + Σ waits`.
    pub duration: f64,
    /// `∫ (W_t − Ŵ_t)² dt` over the epoch.
    pub se_integral: f64,
    pub n_samples: usize,
    /// Delay of the packet sent in this epoch.
    pub delay: f64,
    pub waits: Vec<f64>,
    /// Delay of the packet delivered at the start of the epoch.
    pub prev_delay: f64,
    /// Squared error of the transmitted sample.
    pub final_error: f64,
    /// The `k_max` valve forced the transmission.
    pub forced: bool,
}

impl EpochRecord {
    pub fn total_wait(&self) -> f64 {
        self.waits.iter().sum()
    }
}

struct ErrorPath {
    /// `W_t − w₀`
    offset: f64,
    se: f64,
    dt: f64,
}

impl ErrorPath {
    fn advance(&mut self, span: f64, rng: &mut RngStream) {
        if span <= 0.0 {
            return;
        }
        let steps = (span / self.dt).ceil().max(1.0);
        let h = span / steps;
        let sd = h.sqrt();
        for _ in 0..steps as u64 {
            let next = self.offset + sd * rng.standard_normal();
            self.se += 0.5 * h * (self.offset * self.offset + next * next);
            self.offset = next;
        }
    }
}

/// Runs one epoch. The previous packet's delay is drawn from `model`,
/// which is its stationary law under IID delays.
pub fn run_epoch(
    policy: &PolicySpec,
    model: &DelayModel,
    rng: &mut RngStream,
    dt: f64,
    k_max: usize,
) -> Result<EpochRecord> {
    if !(dt > 0.0) || k_max == 0 {
        return Err(Error::invalid(format!("run_epoch needs dt > 0 and k_max >= 1, got ({dt}, {k_max})")));
    }
    let prev_delay = model.sample(rng);
    let mut path = ErrorPath {
        offset: prev_delay.sqrt() * rng.standard_normal(),
        se: 0.0,
        dt,
    };

    let mut waits = Vec::new();
    let mut forced = false;
    let mut wait = policy.first_wait(prev_delay).max(0.0);
    loop {
        path.advance(wait, rng);
        waits.push(wait);
        let error = path.offset * path.offset;
        match policy.after_sample(error) {
            Decision::Transmit => break,
            Decision::Wait(z) => {
                if waits.len() >= k_max {
                    forced = true;
                    break;
                }
                wait = z.max(0.0);
            }
        }
    }
    let final_error = path.offset * path.offset;
    let delay = model.sample(rng);
    path.advance(delay, rng);

    Ok(EpochRecord {
        duration: waits.iter().sum::<f64>() + delay,
        se_integral: path.se,
        n_samples: waits.len(),
        delay,
        waits,
        prev_delay,
        final_error,
        forced,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimOptions {
    pub n_epochs: usize,
    pub dt: f64,
    pub k_max: usize,
    pub seed: u64,
    pub stream: u64,
    pub n_batches: usize,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            n_epochs: 20_000,
            dt: DEFAULT_DT,
            k_max: DEFAULT_K_MAX,
            seed: 0,
            stream: 0,
            n_batches: DEFAULT_BATCHES,
        }
    }
}

impl SimOptions {
    pub fn validate(&self) -> Result<()> {
        if self.n_epochs < 100 {
            return Err(Error::validation("simulation.n_epochs", "must be >= 100"));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::validation("simulation.dt", "must be > 0"));
        }
        if self.k_max == 0 {
            return Err(Error::validation("simulation.k_max", "must be >= 1"));
        }
        if self.n_batches < 2 {
            return Err(Error::validation("simulation.n_batches", "must be >= 2"));
        }
        Ok(())
    }
}

/// Renewal-reward summary of a simulation run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimResult {
    pub policy: String,
    pub n_epochs: usize,
    pub total_time: f64,
    /// `(Σ se + c_s·Σ samples + c_τ·epochs) / total_time`
    pub objective: f64,
    pub mse: f64,
    pub sample_rate: f64,
    pub tx_rate: f64,
    /// 95% batch-means half-width of `objective`.
    pub ci_halfwidth: f64,
    /// 95% batch-means half-width of `mse`.
    pub mse_ci_halfwidth: f64,
    pub forced_transmissions: usize,
    pub seed: u64,
}

/// Runs `opts.n_epochs` epochs, epoch `i` on child stream `i` of
/// `(seed, stream)`. Output order is the epoch index.
pub fn simulate_epochs(policy: &PolicySpec, model: &DelayModel, opts: &SimOptions) -> Result<Vec<EpochRecord>> {
    policy.validate()?;
    model.validate()?;
    opts.validate()?;
    let base = RngStream::new(opts.seed, opts.stream);
    (0..opts.n_epochs as u64)
        .into_par_iter()
        .map(|i| run_epoch(policy, model, &mut base.child(i), opts.dt, opts.k_max))
        .collect()
}

pub fn summarize(records: &[EpochRecord], costs: Costs, policy: &str, opts: &SimOptions) -> SimResult {
    let total_time: f64 = records.iter().map(|r| r.duration).sum();
    let se_total: f64 = records.iter().map(|r| r.se_integral).sum();
    let samples: usize = records.iter().map(|r| r.n_samples).sum();
    let n = records.len();
    let objective = (se_total + costs.c_s * samples as f64 + costs.c_tau * n as f64) / total_time;

    let durations: Vec<f64> = records.iter().map(|r| r.duration).collect();
    let rewards: Vec<f64> = records
        .iter()
        .map(|r| r.se_integral + costs.c_s * r.n_samples as f64 + costs.c_tau)
        .collect();
    let errors: Vec<f64> = records.iter().map(|r| r.se_integral).collect();
    let ci = ratio_batch_means(&rewards, &durations, opts.n_batches);
    let mse_ci = ratio_batch_means(&errors, &durations, opts.n_batches);

    SimResult {
        policy: policy.to_string(),
        n_epochs: n,
        total_time,
        objective,
        mse: se_total / total_time,
        sample_rate: samples as f64 / total_time,
        tx_rate: n as f64 / total_time,
        ci_halfwidth: ci.halfwidth,
        mse_ci_halfwidth: mse_ci.halfwidth,
        forced_transmissions: records.iter().filter(|r| r.forced).count(),
        seed: opts.seed,
    }
}

pub fn run_simulation(policy: &PolicySpec, costs: Costs, model: &DelayModel, opts: &SimOptions) -> Result<SimResult> {
    let records = simulate_epochs(policy, model, opts)?;
    Ok(summarize(&records, costs, &policy.name(), opts))
}

/// Simulates every period in `t_grid` on the same random streams and
/// returns the one with the smallest objective, plus the full scan.
pub fn best_periodic(
    model: &DelayModel,
    costs: Costs,
    t_grid: &[f64],
    opts: &SimOptions,
) -> Result<(f64, SimResult, Vec<(f64, SimResult)>)> {
    if t_grid.is_empty() {
        return Err(Error::invalid("periodic scan needs a nonempty period grid"));
    }
    let mut scan = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        let res = run_simulation(&PolicySpec::Periodic { period: t }, costs, model, opts)?;
        scan.push((t, res));
    }
    let (t_best, best) = scan
        .iter()
        .min_by(|a, b| a.1.objective.total_cmp(&b.1.objective))
        .cloned()
        .expect("nonempty scan");
    Ok((t_best, best, scan))
}

/// `n` points log-spaced on `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// Per-epoch residual `E_k − (μ_Y + Σ waits)`; its mean is 0 in expectation.
pub fn final_error_residuals(records: &[EpochRecord], mu_y: f64) -> RunningStats {
    records
        .iter()
        .map(|r| r.final_error - (mu_y + r.total_wait()))
        .collect()
}
