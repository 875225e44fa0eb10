//! Subcommand dispatch for the `wiener-sampling` binary.

use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::bellman::{extract_policy, find_lambda_star, solve_g_infinity, CostParams};
use crate::config::{resolve_seed, ExperimentConfig, PolicyConfig, SEED_ENV};
use crate::experiments::{convergence_trace, policy_curves, sweep_sigma, CurveLambda};
use crate::output::{self, Manifest, OutputSet};
use crate::sim::{best_periodic, run_simulation, PolicySpec};
use crate::Result;

#[derive(Debug, Parser)]
#[command(
    name = "wiener-sampling",
    version,
    about = "Costly sampling of a Wiener process over a random-delay channel"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Value iteration at the config's λ: g_and_policy.csv, report.csv
    Solve(RunArgs),
    /// Root search for λ*: lambda_star.json, g_and_policy.csv, first_step.csv, report.csv
    FindLambda(RunArgs),
    /// Simulate the configured policy: sim_result.csv
    Simulate(RunArgs),
    /// Delay-variance sweep: sweep.csv
    SweepSigma(RunArgs),
    /// Sup-norm trace of value iteration at the config's λ: convergence.csv
    Convergence(RunArgs),
    /// Waiting-time curves at fixed λ and at λ*: curves.csv, curves_lambda_star.csv
    Curves(RunArgs),
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// JSON config file
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory, created if missing
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the config seed and the environment seed
    #[arg(long)]
    pub seed: Option<u64>,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Solve(_) => "solve",
            Command::FindLambda(_) => "find-lambda",
            Command::Simulate(_) => "simulate",
            Command::SweepSigma(_) => "sweep-sigma",
            Command::Convergence(_) => "convergence",
            Command::Curves(_) => "curves",
        }
    }

    pub fn args(&self) -> &RunArgs {
        match self {
            Command::Solve(a)
            | Command::FindLambda(a)
            | Command::Simulate(a)
            | Command::SweepSigma(a)
            | Command::Convergence(a)
            | Command::Curves(a) => a,
        }
    }
}

/// Loads the config, runs the subcommand and writes `manifest.json`.
/// On error every file this run created is removed.
pub fn run(cmd: &Command) -> Result<Vec<String>> {
    let args = cmd.args();
    let started = Instant::now();
    let text = std::fs::read_to_string(&args.config)?;
    let cfg = ExperimentConfig::from_json(&text)?;
    let env_seed = std::env::var(SEED_ENV).ok();
    let seed = resolve_seed(args.seed, env_seed.as_deref(), cfg.seed)?;
    std::fs::create_dir_all(&args.out)?;

    let mut out = OutputSet::new(&args.out);
    let result = dispatch(cmd, &cfg, seed, &mut out).and_then(|()| {
        let manifest = Manifest {
            subcommand: cmd.name().to_string(),
            config_sha256: output::sha256_hex(text.as_bytes()),
            seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            wall_time_s: started.elapsed().as_secs_f64(),
            outputs: out.names(),
        };
        output::write_json(&out.file("manifest.json"), &manifest)
    });
    match result {
        Ok(()) => Ok(out.names()),
        Err(e) => {
            out.remove_all();
            Err(e)
        }
    }
}

fn dispatch(cmd: &Command, cfg: &ExperimentConfig, seed: u64, out: &mut OutputSet) -> Result<()> {
    let solver = cfg.solver_options();
    match cmd {
        Command::Solve(_) => {
            let params = CostParams::new(cfg.c_s, cfg.c_tau, cfg.lambda)?;
            let mu_y = cfg.mean_delay();
            let net = cfg.lambda - mu_y;
            let grid = solver.grid_for(net)?;
            let search = solver.search_for(net);
            let quad = solver.transition_rule()?;
            let (vf, report) = solve_g_infinity(&params, mu_y, &grid, solver.tol, solver.max_iter, &search, &quad)?;
            report.ensure_converged()?;
            let policy = extract_policy(&vf, &params, mu_y, &search, &quad, &[]);
            output::write_policy(&out.file("g_and_policy.csv"), &policy)?;
            output::write_report(&out.file("report.csv"), &report)?;
        }
        Command::FindLambda(_) => {
            let search = find_lambda_star(&cfg.delay, cfg.c_s, cfg.c_tau, &solver)?;
            output::write_lambda_star(&out.file("lambda_star.json"), &search)?;
            output::write_policy(&out.file("g_and_policy.csv"), &search.policy)?;
            output::write_first_step(&out.file("first_step.csv"), &search.policy)?;
            output::write_report(&out.file("report.csv"), &search.report)?;
        }
        Command::Simulate(_) => {
            let opts = cfg.sim_options(seed);
            let costs = cfg.costs();
            let result = match &cfg.policy {
                PolicyConfig::Optimal => {
                    let search = find_lambda_star(&cfg.delay, cfg.c_s, cfg.c_tau, &solver)?;
                    run_simulation(&PolicySpec::Optimal(Box::new(search.policy)), costs, &cfg.delay, &opts)?
                }
                PolicyConfig::Periodic { period } => {
                    run_simulation(&PolicySpec::Periodic { period: *period }, costs, &cfg.delay, &opts)?
                }
                PolicyConfig::ZeroWait => run_simulation(&PolicySpec::ZeroWait, costs, &cfg.delay, &opts)?,
                PolicyConfig::BestPeriodic => best_periodic(&cfg.delay, costs, &cfg.t_grid, &opts)?.1,
            };
            output::write_sim_results(&out.file("sim_result.csv"), &[result])?;
        }
        Command::SweepSigma(_) => {
            let rows = sweep_sigma(
                cfg.c_s,
                cfg.c_tau,
                cfg.mean_delay(),
                &cfg.sigma2_list,
                cfg.family,
                &cfg.budgets(seed),
                seed,
            )?;
            output::write_sweep(&out.file("sweep.csv"), &rows)?;
        }
        Command::Convergence(_) => {
            let (_, report) = convergence_trace(cfg.c_s, cfg.c_tau, cfg.lambda, &cfg.delay, &solver)?;
            output::write_convergence(&out.file("convergence.csv"), &report)?;
        }
        Command::Curves(_) => {
            for (name, lambda) in [
                ("curves.csv", CurveLambda::Fixed(cfg.lambda)),
                ("curves_lambda_star.csv", CurveLambda::Optimal),
            ] {
                let rows = policy_curves(
                    cfg.c_s,
                    lambda,
                    cfg.mean_delay(),
                    &cfg.c_tau_list,
                    &cfg.sigma2_list,
                    cfg.family,
                    &solver,
                )?;
                output::write_curves(&out.file(name), &rows)?;
            }
        }
    }
    Ok(())
}
