//! CSV and JSON artifacts. Numbers are written with 12 significant digits
//! in a `%g`-like form, independent of locale.

use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::bellman::{LambdaSearch, Policy, SolveReport};
use crate::experiments::{CurveRow, SweepRow};
use crate::sim::SimResult;
use crate::Result;

pub const SIG_DIGITS: usize = 12;

/// Formats `x` with [`SIG_DIGITS`] significant digits, trailing zeros
/// trimmed; scientific notation outside `1e-5 ≤ |x| < 1e12`.
pub fn format_num(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.*e}", SIG_DIGITS - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -5 || exp >= SIG_DIGITS as i32 {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (SIG_DIGITS as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn write_rows<I>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// `(E, g, z_star, stop)` per grid point.
pub fn write_policy(path: &Path, policy: &Policy) -> Result<()> {
    let rows = policy
        .grid
        .points()
        .iter()
        .zip(&policy.g)
        .zip(policy.z_star.iter().zip(&policy.stop))
        .map(|((e, g), (z, stop))| vec![format_num(*e), format_num(*g), format_num(*z), stop.to_string()]);
    write_rows(path, &["E", "g", "z_star", "stop"], rows)
}

/// `(y, z1, value)` of the first-step table.
pub fn write_first_step(path: &Path, policy: &Policy) -> Result<()> {
    let t = &policy.first_step;
    let rows = t
        .delays
        .iter()
        .zip(&t.z1)
        .zip(&t.values)
        .map(|((y, z), v)| vec![format_num(*y), format_num(*z), format_num(*v)]);
    write_rows(path, &["y", "z1", "value"], rows)
}

fn sup_diff_rows(report: &SolveReport) -> impl Iterator<Item = Vec<String>> + '_ {
    report
        .sup_diffs
        .iter()
        .enumerate()
        .map(|(i, d)| vec![(i + 1).to_string(), format_num(*d)])
}

/// `(iteration, sup_diff)`.
pub fn write_report(path: &Path, report: &SolveReport) -> Result<()> {
    write_rows(path, &["iteration", "sup_diff"], sup_diff_rows(report))
}

/// `(iter, sup_diff)`.
pub fn write_convergence(path: &Path, report: &SolveReport) -> Result<()> {
    write_rows(path, &["iter", "sup_diff"], sup_diff_rows(report))
}

pub fn write_sim_results(path: &Path, results: &[SimResult]) -> Result<()> {
    let rows = results.iter().map(|r| {
        vec![
            r.policy.clone(),
            r.n_epochs.to_string(),
            format_num(r.objective),
            format_num(r.mse),
            format_num(r.sample_rate),
            format_num(r.tx_rate),
            format_num(r.ci_halfwidth),
            r.seed.to_string(),
        ]
    });
    write_rows(
        path,
        &["policy", "n_epochs", "objective", "mse", "sample_rate", "tx_rate", "ci_halfwidth", "seed"],
        rows,
    )
}

pub fn write_sweep(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let rows = rows.iter().map(|r| {
        vec![
            format_num(r.sigma2),
            format_num(r.lambda_star),
            format_num(r.mse_opt),
            format_num(r.mse_opt_ci),
            format_num(r.mse_periodic),
            format_num(r.mse_periodic_ci),
            format_num(r.t_best),
            r.seed.to_string(),
        ]
    });
    write_rows(
        path,
        &["sigma2", "lambda_star", "mse_opt", "mse_opt_ci", "mse_periodic", "mse_periodic_ci", "t_best", "seed"],
        rows,
    )
}

pub fn write_curves(path: &Path, rows: &[CurveRow]) -> Result<()> {
    let rows = rows
        .iter()
        .map(|r| vec![format_num(r.sigma2), format_num(r.c_tau), format_num(r.e), format_num(r.z_star)]);
    write_rows(path, &["sigma2", "c_tau", "e", "z_star"], rows)
}

#[derive(Serialize)]
struct LambdaStarJson<'a> {
    lambda_star: f64,
    j_at_star: f64,
    bracket: (f64, f64),
    mu_y: f64,
    value_iterations: usize,
    stop_threshold: Option<f64>,
    evaluations: &'a [(f64, f64)],
}

pub fn write_lambda_star(path: &Path, search: &LambdaSearch) -> Result<()> {
    let doc = LambdaStarJson {
        lambda_star: search.lambda_star,
        j_at_star: search.j_at_star,
        bracket: search.bracket,
        mu_y: search.mu_y,
        value_iterations: search.report.iterations,
        stop_threshold: search.policy.stop_threshold(),
        evaluations: &search.evaluations,
    };
    write_json(path, &doc)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Clone, Debug, Serialize)]
pub struct Manifest {
    pub subcommand: String,
    pub config_sha256: String,
    pub seed: u64,
    pub version: String,
    pub wall_time_s: f64,
    pub outputs: Vec<String>,
}

/// Files written so far by one run, removed again if the run fails.
#[derive(Debug)]
pub struct OutputSet {
    dir: PathBuf,
    created: Vec<PathBuf>,
}

impl OutputSet {
    pub fn new(dir: &Path) -> Self {
        Self {
            dir: dir.to_path_buf(),
            created: Vec::new(),
        }
    }

    /// Path for `name` inside the output directory, recorded for cleanup.
    pub fn file(&mut self, name: &str) -> PathBuf {
        let p = self.dir.join(name);
        self.created.push(p.clone());
        p
    }

    pub fn names(&self) -> Vec<String> {
        self.created
            .iter()
            .filter_map(|p| p.file_name())
            .map(|n| n.to_string_lossy().into_owned())
            .collect()
    }

    pub fn remove_all(&self) {
        for p in &self.created {
            let _ = std::fs::remove_file(p);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_format() {
        assert_eq!(format_num(0.0), "0");
        assert_eq!(format_num(1.5), "1.5");
        assert_eq!(format_num(-2.0), "-2");
        assert_eq!(format_num(1.0 / 3.0), "0.333333333333");
        assert_eq!(format_num(123456.789), "123456.789");
        assert_eq!(format_num(2.0 / 3.0 * 1e-7), "6.66666666667e-08");
        assert_eq!(format_num(1e15), "1e+15");
        assert_eq!(format_num(0.0001), "0.0001");
        assert_eq!(format_num(f64::NAN), "nan");
        // 9.9999999999995 rounds up across a power of ten
        assert_eq!(format_num(9.9999999999995), "10");
    }

    #[test]
    fn sha_of_empty_input() {
        assert_eq!(
            sha256_hex(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
    }
}
