use clap::{Parser, Subcommand};
use corrgcv::validate::ValidationLevel;
use corrgcv_cli::{cmd_estimate, cmd_simulate, cmd_theory, cmd_validate, CliConfig, CommonOpts, ExitCode};
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "corrgcv",
    about = "Exact asymptotics and risk estimators for ridge regression with correlated samples",
    version
)]
struct Cli {
    /// Path to the TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides the config's [output].dir).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for grid sweeps (overrides CORRGCV_WORKERS and config).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Master seed override.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Omniscient theory curves over the configured grid (no sampling).
    Theory,
    /// Full Monte Carlo sweep: theory, estimator, and empirical rows.
    Simulate,
    /// Run all estimators on one dataset (generated, or loaded with --data).
    Estimate {
        /// CSV dataset: label column first, features after.
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Run the invariant suites and report residuals.
    Validate {
        /// fast (< 1 min) or full (large-T oracles and trace tests).
        #[arg(long, default_value = "fast")]
        level: String,
    },
}

fn load_config(opts: &CommonOpts) -> Result<CliConfig, String> {
    let path = opts.config.as_ref().ok_or("--config is required for this subcommand")?;
    CliConfig::load(path)
}

fn init_workers(opts: &CommonOpts, cfg_workers: Option<usize>) {
    let workers = opts.resolve_workers(cfg_workers);
    // ignore failure when a global pool already exists (tests, repeat calls)
    let _ = rayon::ThreadPoolBuilder::new().num_threads(workers).build_global();
}

fn main() {
    let cli = Cli::parse();
    let opts = CommonOpts {
        config: cli.config.clone(),
        out: cli.out.clone(),
        workers: cli.workers,
        seed: cli.seed,
    };
    let code = match run(cli.command, &opts) {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::ValidationFailure
        }
    };
    std::process::exit(code as i32);
}

fn run(command: Command, opts: &CommonOpts) -> Result<ExitCode, String> {
    match command {
        Command::Theory => {
            let config = load_config(opts)?;
            init_workers(opts, config.workers);
            let (outcome, path) = cmd_theory(config, opts.config.as_deref(), opts)?;
            println!("theory: {} rows -> {}", outcome.rows.len(), path.display());
            Ok(ExitCode::Ok)
        }
        Command::Simulate => {
            let config = load_config(opts)?;
            init_workers(opts, config.workers);
            let (outcome, path, code) = cmd_simulate(config, opts.config.as_deref(), opts)?;
            println!(
                "simulate: {} rows ({} of {} grid points failed) -> {}",
                outcome.rows.len(),
                outcome.failed_points,
                outcome.total_points,
                path.display()
            );
            Ok(code)
        }
        Command::Estimate { data } => {
            let config = load_config(opts)?;
            init_workers(opts, config.workers);
            let (record, path) = cmd_estimate(config, opts.config.as_deref(), opts, data.as_deref())?;
            println!("{}", serde_json::to_string_pretty(&record).expect("record serializes"));
            println!("estimate -> {}", path.display());
            if record.errors.is_empty() {
                Ok(ExitCode::Ok)
            } else {
                Err(record.errors.join("; "))
            }
        }
        Command::Validate { level } => {
            let level = match level.as_str() {
                "fast" => ValidationLevel::Fast,
                "full" => ValidationLevel::Full,
                other => return Err(format!("unknown validation level {other:?} (fast|full)")),
            };
            init_workers(opts, None);
            let out_dir = opts.out.clone();
            let (checks, code) = cmd_validate(level, opts.seed.unwrap_or(0), out_dir.as_deref())?;
            for c in &checks {
                println!(
                    "[{}] {} (residual {:.3e}, tolerance {:.1e})",
                    if c.pass { "PASS" } else { "FAIL" },
                    c.name,
                    c.residual,
                    c.tolerance
                );
            }
            let failed = checks.iter().filter(|c| !c.pass).count();
            println!("validate: {} checks, {} failed", checks.len(), failed);
            Ok(code)
        }
    }
}
