use std::fmt::Write as _;
use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use meta_td::envs::{Gridworld, MrpSpec};
use meta_td::eval::solve_true_values;
use meta_td::harness::{
    run_relevance, run_sweep, write_relevance, write_sweep, Algorithm, ConfigFile, ExperimentConfig, ExperimentKind,
    GridSpacing,
};
use meta_td::learners::{BetaClamp, EtaRule, MClamp, StepSizeMode};

/// Sweeps, relevance runs and exact value solves for meta-descent TD learners.
#[derive(Debug, Parser)]
#[command(name = "meta-td", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a parameter sweep and write curves.csv, summary.csv and manifest.toml.
    Sweep(RunArgs),
    /// Run the noisy-feature relevance experiment.
    Relevance(RunArgs),
    /// Print exact state values of an MRP as CSV.
    SolveValues(SolveArgs),
    /// Resolve a configuration and print it as a complete manifest.
    ValidateConfig(RunArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    /// TOML configuration file; flags below override its fields.
    config: Option<PathBuf>,
    #[arg(long, value_parser = parse_experiment)]
    experiment: Option<ExperimentKind>,
    #[arg(long, value_parser = parse_algorithm)]
    algorithm: Option<Algorithm>,
    /// Comma-separated initial step sizes.
    #[arg(long, value_delimiter = ',')]
    alpha0_grid: Option<Vec<f64>>,
    /// Generated α₀ grid: LOW HIGH POINTS.
    #[arg(long, num_args = 3, value_names = ["LOW", "HIGH", "POINTS"], conflicts_with = "alpha0_grid")]
    alpha0_range: Option<Vec<f64>>,
    #[arg(long, value_enum)]
    alpha0_spacing: Option<Spacing>,
    /// Comma-separated meta step sizes.
    #[arg(long, value_delimiter = ',')]
    theta_grid: Option<Vec<f64>>,
    /// Comma-separated trace-decay values.
    #[arg(long, value_delimiter = ',')]
    lambda_grid: Option<Vec<f64>>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    step_size_mode: Option<Mode>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    td_baseline: Option<bool>,
    #[arg(long)]
    log_interval: Option<usize>,
    #[arg(long, value_enum)]
    m_clamp: Option<Clamp>,
    #[arg(long, value_enum)]
    eta_rule: Option<Eta>,
    /// Bound the meta-weights to [LO, HI] and each meta-update to ±2.
    #[arg(long, num_args = 2, value_names = ["LO", "HI"], allow_negative_numbers = true)]
    beta_clamp: Option<Vec<f64>>,
    /// Output directory.
    #[arg(long, env = "MTD_OUT_DIR")]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Spacing {
    Log,
    Linear,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Mode {
    PerFeature,
    Shared,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Clamp {
    Global,
    PerIndex,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Eta {
    Listed,
    Autostep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum EnvKind {
    Gridworld,
    Table,
}

#[derive(Debug, Args)]
struct SolveArgs {
    #[arg(long, value_enum, default_value = "gridworld")]
    env: EnvKind,
    /// MRP table (`--env table`); its own discount is used unless --gamma is given.
    #[arg(long, required_if_eq("env", "table"))]
    table: Option<PathBuf>,
    #[arg(long)]
    gamma: Option<f64>,
}

fn parse_experiment(s: &str) -> Result<ExperimentKind, String> {
    s.parse().map_err(|e: meta_td::Error| e.to_string())
}

fn parse_algorithm(s: &str) -> Result<Algorithm, String> {
    s.parse().map_err(|e: meta_td::Error| e.to_string())
}

impl RunArgs {
    fn resolve(&self, expected: Option<ExperimentKind>) -> anyhow::Result<ExperimentConfig> {
        let mut file = match &self.config {
            Some(path) => ConfigFile::load(path)?,
            None => ConfigFile::default(),
        };
        macro_rules! set {
            ($($field:ident),*) => {$(
                if let Some(v) = self.$field.clone() {
                    file.$field = Some(v.into());
                }
            )*};
        }
        set!(
            experiment,
            algorithm,
            alpha0_grid,
            theta_grid,
            lambda_grid,
            gamma,
            steps,
            trials,
            seed,
            tau,
            td_baseline,
            log_interval
        );
        if let Some(r) = &self.alpha0_range {
            if r[2] < 1.0 || r[2].fract() != 0.0 {
                return Err(meta_td::Error::config(format!(
                    "alpha0 range point count must be a positive integer, got {}",
                    r[2]
                ))
                .into());
            }
            file.alpha0_grid = None;
            file.alpha0_range = Some((r[0], r[1]));
            file.alpha0_points = Some(r[2] as usize);
        }
        if let Some(s) = self.alpha0_spacing {
            file.alpha0_spacing = Some(match s {
                Spacing::Log => GridSpacing::Log,
                Spacing::Linear => GridSpacing::Linear,
            });
        }
        if let Some(m) = self.step_size_mode {
            file.step_size_mode = Some(match m {
                Mode::PerFeature => StepSizeMode::PerFeature,
                Mode::Shared => StepSizeMode::Shared,
            });
        }
        if let Some(c) = self.m_clamp {
            file.m_clamp = Some(match c {
                Clamp::Global => MClamp::Global,
                Clamp::PerIndex => MClamp::PerIndex,
            });
        }
        if let Some(e) = self.eta_rule {
            file.eta_rule = Some(match e {
                Eta::Listed => EtaRule::Listed,
                Eta::Autostep => EtaRule::Autostep,
            });
        }
        if let Some(b) = &self.beta_clamp {
            file.beta_clamp = Some(BetaClamp::new(b[0], b[1]));
        }
        if let Some(out) = &self.out {
            file.output_dir = Some(out.clone());
        }
        if let Some(expected) = expected {
            match file.experiment {
                None if expected == ExperimentKind::Relevance => file.experiment = Some(expected),
                Some(kind) if (kind == ExperimentKind::Relevance) != (expected == ExperimentKind::Relevance) => {
                    let hint = if kind == ExperimentKind::Relevance {
                        "relevance"
                    } else {
                        "sweep"
                    };
                    return Err(
                        meta_td::Error::config(format!("`{kind}` experiments run with `meta-td {hint}`")).into(),
                    );
                }
                _ => {}
            }
        }
        Ok(file.resolve()?)
    }
}

fn sweep(args: &RunArgs) -> anyhow::Result<()> {
    let cfg = args.resolve(Some(ExperimentKind::Gridworld))?;
    let started = Instant::now();
    let result = run_sweep(&cfg)?;
    let files = write_sweep(&cfg, &result, &cfg.output_dir)?;
    let mut table = String::new();
    writeln!(
        table,
        "algorithm\talpha0\ttheta\tlambda\tasymptotic_{}\tdiverged",
        result.metric
    )?;
    for c in &result.cells {
        writeln!(
            table,
            "{}\t{}\t{}\t{}\t{:.6}\t{}",
            c.key.algorithm, c.key.alpha0, c.key.theta, c.key.lambda, c.asymptotic_error, c.diverged_trials
        )?;
    }
    emit(&table)?;
    eprintln!(
        "{} cells x {} trials in {:.2?}; wrote {} and {}",
        result.cells.len(),
        cfg.trials,
        started.elapsed(),
        files
            .csvs
            .iter()
            .map(|p| p.display().to_string())
            .collect::<Vec<_>>()
            .join(", "),
        files.manifest.display()
    );
    Ok(())
}

fn relevance(args: &RunArgs) -> anyhow::Result<()> {
    let cfg = args.resolve(Some(ExperimentKind::Relevance))?;
    let result = run_relevance(&cfg)?;
    let files = write_relevance(&cfg, &result, &cfg.output_dir)?;
    let r = &result.report;
    let mut out = String::new();
    writeln!(out, "mean_alpha_noisy\t{:.6e}", r.mean_alpha_noisy)?;
    writeln!(out, "mean_alpha_clean\t{:.6e}", r.mean_alpha_clean)?;
    writeln!(out, "max_alpha_noisy\t{:.6e}", r.max_alpha_noisy)?;
    writeln!(out, "min_alpha_clean\t{:.6e}", r.min_alpha_clean)?;
    writeln!(out, "separated\t{}", r.separated)?;
    writeln!(out, "non_decreasing_noisy\t{}", result.non_decreasing_noisy().len())?;
    writeln!(out, "activation_rate\t{}", result.activation_rate)?;
    emit(&out)?;
    eprintln!(
        "finished in {:.2?}; wrote output to {}",
        result.wall_time,
        files.manifest.parent().unwrap_or(&cfg.output_dir).display()
    );
    Ok(())
}

fn solve_values(args: &SolveArgs) -> anyhow::Result<()> {
    let mrp = match args.env {
        EnvKind::Gridworld => Gridworld::default().as_mrp(args.gamma.unwrap_or(0.9))?,
        EnvKind::Table => {
            let path = args.table.as_ref().expect("clap enforces --table");
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let mrp = MrpSpec::from_table(&text)?;
            match args.gamma {
                Some(g) => mrp.with_gamma(g)?,
                None => mrp,
            }
        }
    };
    let values = solve_true_values(&mrp)?;
    let mut out = String::from("state,value\n");
    for (s, v) in values.v.iter().enumerate() {
        writeln!(out, "{s},{v}")?;
    }
    emit(&out)
}

fn validate_config(args: &RunArgs) -> anyhow::Result<()> {
    if args.config.is_none() && args.experiment.is_none() {
        bail!(meta_td::Error::config(
            "nothing to validate: give a config file or --experiment"
        ));
    }
    let cfg = args.resolve(None)?;
    emit(&cfg.manifest()?)
}

/// Writes to stdout; a closed pipe (e.g. `| head`) is not an error.
fn emit(text: &str) -> anyhow::Result<()> {
    let mut stdout = std::io::stdout().lock();
    match stdout.write_all(text.as_bytes()).and_then(|()| stdout.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e).context("writing to stdout"),
        _ => Ok(()),
    }
}

/// 2 for a numerical divergence, 1 for everything else.
fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<meta_td::Error>() {
        Some(e) if e.is_divergence() => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match &cli.command {
        Command::Sweep(a) => sweep(a),
        Command::Relevance(a) => relevance(a),
        Command::SolveValues(a) => solve_values(a),
        Command::ValidateConfig(a) => validate_config(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
