//! Command-line front end: run experiments, plot traces, evaluate bounds,
//! check the lemmas and benchmark the estimators.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use heavy_rl::bounds::{evaluate_all, verify_lemmas};
use heavy_rl::distributions::RewardDist;
use heavy_rl::estimators::EstimatorKind;
use heavy_rl::harness::{
    estimator_bench, plot_svg, read_traces, run_experiment, theory_params, write_csv, write_summary,
    ExperimentConfig, HarnessError, PlotMetric,
};

#[derive(Parser)]
#[command(name = "heavy-rl", version, about = "Tabular RL under heavy-tailed rewards")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write traces.csv and summary.csv.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (defaults to the config's `output`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads (defaults to all cores).
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Plot mean traces with a one-standard-deviation band.
    Plot {
        /// Directory holding traces.csv, or the CSV file itself.
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Metric::Reward)]
        metric: Metric,
        /// Draw every conf_scale instead of each agent's best.
        #[arg(long)]
        all_scales: bool,
    },
    /// Evaluate the regret bounds for an experiment config.
    CheckBounds {
        #[arg(long)]
        config: PathBuf,
    },
    /// Check the sequence and learning-rate inequalities numerically.
    VerifyLemmas {
        #[arg(long, default_value_t = 1000)]
        sequences: u64,
        #[arg(long, default_value_t = 1000)]
        max_len: usize,
        #[arg(long, default_value_t = 10_000)]
        t_max: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Deviation and coverage of the mean estimators on one distribution.
    EstimatorBench {
        /// Distribution as an inline table, e.g. `{kind = "stable", mean = 0, alpha = 1.1}`.
        #[arg(long)]
        dist: String,
        /// Comma-separated sample sizes.
        #[arg(long, value_delimiter = ',', required = true)]
        n: Vec<u64>,
        #[arg(long, default_value_t = 1000)]
        trials: u64,
        #[arg(long, default_value_t = 0.05)]
        eps: f64,
        #[arg(long, default_value_t = 0.05)]
        delta: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Metric {
    Reward,
    Regret,
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        if e.is_config_error() {
            Failure::Config(e.to_string())
        } else {
            Failure::Runtime(e.to_string())
        }
    }
}

fn load(path: &Path) -> Result<(ExperimentConfig, PathBuf), Failure> {
    ExperimentConfig::load(path).map_err(|e| match e {
        HarnessError::Io { .. } => Failure::Config(e.to_string()),
        other => other.into(),
    })
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Run { config, out, jobs } => {
            let (cfg, base) = load(&config)?;
            let out = out
                .or_else(|| cfg.output.as_ref().map(|o| base.join(o)))
                .ok_or_else(|| Failure::Config("no output directory: pass --out or set `output`".into()))?;
            let result = run_experiment(&cfg, &base, jobs)?;
            write_csv(&result.traces, &out.join("traces.csv"))?;
            write_summary(&result.summary, &out.join("summary.csv"))?;
            println!("{:<24} {:>10} {:>5} {:>16} {:>12} {:>16} {:>12}", "agent", "conf_scale", "runs", "cum_reward", "std", "pseudo_regret", "std");
            for r in &result.summary {
                println!(
                    "{:<24} {:>10} {:>5} {:>16.3} {:>12.3} {:>16.3} {:>12.3}",
                    r.agent, r.conf_scale, r.runs, r.mean_cum_reward, r.std_cum_reward, r.mean_cum_pseudo_regret, r.std_cum_pseudo_regret
                );
            }
            println!("wrote {}", out.display());
        }
        Command::Plot { input, out, metric, all_scales } => {
            let csv = if input.is_dir() { input.join("traces.csv") } else { input };
            let traces = read_traces(&csv)?;
            let metric = match metric {
                Metric::Reward => PlotMetric::CumReward,
                Metric::Regret => PlotMetric::CumPseudoRegret,
            };
            plot_svg(&traces, metric, all_scales, &out)?;
            println!("wrote {}", out.display());
        }
        Command::CheckBounds { config } => {
            let (cfg, base) = load(&config)?;
            let params = theory_params(&cfg, &base)?;
            println!("{:<28} {:>14} {:>11} {:>8}", "bound", "value", "order-only", "vacuous");
            for r in evaluate_all(&params) {
                let value = match &r.value {
                    Ok(v) => format!("{v:.4e}"),
                    Err(e) => format!("n/a ({e})"),
                };
                println!("{:<28} {:>14} {:>11} {:>8}", r.name, value, r.order_only, r.vacuous);
            }
        }
        Command::VerifyLemmas { sequences, max_len, t_max, seed } => {
            let checks = verify_lemmas(sequences, max_len, t_max, seed).map_err(|e| Failure::Config(e.to_string()))?;
            let mut failed = false;
            for c in &checks {
                let status = if c.failures == 0 { "ok" } else { "FAIL" };
                println!("{:<36} cases {:>6} failures {:>4} {status}", c.name, c.cases, c.failures);
                failed |= c.failures > 0;
            }
            if failed {
                return Err(Failure::Runtime("lemma check failed".into()));
            }
        }
        Command::EstimatorBench { dist, n, trials, eps, delta, seed } => {
            #[derive(serde::Deserialize)]
            struct Wrapper {
                dist: RewardDist,
            }
            let dist = toml::from_str::<Wrapper>(&format!("dist = {dist}"))
                .map_err(|e| Failure::Config(format!("--dist: {e}")))?
                .dist;
            let kinds = [EstimatorKind::Empirical, EstimatorKind::Truncated, EstimatorKind::MedianOfMeans];
            let rows = estimator_bench(&dist, &kinds, eps, delta, &n, trials, seed).map_err(|e| match e {
                HarnessError::Dist(_) | HarnessError::Estimator(_) => Failure::Config(e.to_string()),
                other => other.into(),
            })?;
            println!("{:<16} {:>8} {:>12} {:>14} {:>10}", "estimator", "n", "radius", "mean_abs_err", "violation");
            for r in rows {
                let name = match r.estimator {
                    EstimatorKind::Empirical => "empirical",
                    EstimatorKind::Truncated => "truncated",
                    EstimatorKind::MedianOfMeans => "median_of_means",
                };
                println!("{:<16} {:>8} {:>12.4e} {:>14.4e} {:>10.4}", name, r.n, r.radius, r.mean_abs_error, r.violation_rate);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
