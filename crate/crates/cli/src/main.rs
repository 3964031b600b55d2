//! `weakflow`: run, validate, and cross-check measurement experiments.
//!
//! Exit codes: 0 when every check passes, 1 when the run completed but a
//! check failed, 2 for config or execution errors.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use weakflow::oracles::{density_product, FreeGaussian, Gaussian1d, TrappedCoherent};
use weakflow::Units;
use weakflow_cli::config::{parse_config, ExperimentKind, ParsedConfig};
use weakflow_cli::experiment::run_experiment;
use weakflow_cli::output::{render_check, write_results};

#[derive(Parser)]
#[command(
    name = "weakflow",
    version,
    about = "Weak velocity measurements on guided trajectories"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the experiment a config file describes and write its results
    Run(RunArgs),
    /// Parse and check a config file, reporting every violation
    Validate { config: PathBuf },
    /// Run a convergence-sweep config (refuses any other experiment)
    Sweep(RunArgs),
    /// Print closed-form reference values for by-hand checks
    Oracle(OracleArgs),
}

#[derive(Args)]
struct RunArgs {
    config: PathBuf,
    /// Override the config's master seed
    #[arg(long)]
    seed: Option<u64>,
    /// Write results here instead of the config's out_dir
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (fallback: WEAKFLOW_WORKERS, then all cores)
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args)]
struct OracleArgs {
    /// free_gaussian, coherent, or product
    name: String,
    #[arg(long, default_value_t = 0.0)]
    x0: f64,
    #[arg(long, default_value_t = 1.0)]
    s0: f64,
    #[arg(long, default_value_t = 0.0)]
    k0: f64,
    /// Trap frequency for the coherent oracle
    #[arg(long, default_value_t = 1.0)]
    omega: f64,
    #[arg(long, default_value_t = 0.0)]
    time: f64,
    /// Evaluation point for densities and velocity fields
    #[arg(long, default_value_t = 0.0)]
    x: f64,
    /// Pointer spread for the product oracle
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    /// Pointer reading for the product oracle
    #[arg(long, default_value_t = 0.0)]
    y: f64,
}

fn main() -> ExitCode {
    match dispatch() {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("{msg}");
            ExitCode::from(2)
        }
    }
}

fn dispatch() -> Result<ExitCode, String> {
    match Cli::parse().cmd {
        Cmd::Run(args) => run(args, None),
        Cmd::Sweep(args) => run(args, Some(ExperimentKind::Sweep)),
        Cmd::Validate { config } => {
            let cfg = load(&config)?;
            println!("config ok: experiment = {}", cfg.experiment.label());
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Oracle(args) => {
            oracle(&args)?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn load(path: &PathBuf) -> Result<ParsedConfig, String> {
    parse_config(path).map_err(|e| e.to_string())
}

fn run(args: RunArgs, require: Option<ExperimentKind>) -> Result<ExitCode, String> {
    let mut cfg = load(&args.config)?;
    match require {
        Some(kind) if cfg.experiment != kind => {
            return Err(format!(
                "this subcommand runs `{}` configs; `{}` declares `{}` (use `run`)",
                kind.label(),
                args.config.display(),
                cfg.experiment.label()
            ));
        }
        _ if require.is_none() && cfg.experiment == ExperimentKind::Sweep => {
            return Err(format!(
                "`{}` declares a sweep; use the `sweep` subcommand",
                args.config.display()
            ));
        }
        _ => {}
    }
    if let Some(seed) = args.seed {
        cfg.run.master_seed = seed;
    }
    if let Some(out) = args.out {
        cfg.run.out_dir = out;
    }
    let workers = args.workers.or_else(|| {
        std::env::var("WEAKFLOW_WORKERS").ok().and_then(|v| v.parse().ok())
    });
    if let Some(w) = workers {
        // a second build_global in one process is harmless for determinism,
        // just late; ignore it
        let _ = rayon::ThreadPoolBuilder::new().num_threads(w).build_global();
    }

    let bundle = run_experiment(&cfg).map_err(|e| e.to_string())?;
    for check in &bundle.checks {
        println!("{}", render_check(check));
    }
    let written = write_results(&bundle, &cfg.run.out_dir).map_err(|e| e.to_string())?;
    for path in &written {
        println!("wrote {}", path.display());
    }
    if bundle.all_pass() {
        println!("verdict: PASS ({} checks)", bundle.checks.len());
        Ok(ExitCode::SUCCESS)
    } else {
        let failed = bundle.checks.iter().filter(|c| !c.pass).count();
        println!("verdict: FAIL ({failed} of {} checks)", bundle.checks.len());
        Ok(ExitCode::from(1))
    }
}

fn oracle(args: &OracleArgs) -> Result<(), String> {
    let units = Units::default();
    match args.name.as_str() {
        "free_gaussian" => {
            let g = FreeGaussian { x0: args.x0, s0: args.s0, k0: args.k0, units };
            println!("spread_rate = {}", g.spread_rate());
            println!("center({}) = {}", args.time, g.center(args.time));
            println!("width({}) = {}", args.time, g.width(args.time));
            println!("density({}, {}) = {}", args.x, args.time, g.density(args.time).density(args.x));
            println!("velocity({}, {}) = {}", args.x, args.time, g.velocity(args.x, args.time));
        }
        "coherent" => {
            let c = TrappedCoherent { omega: args.omega, x0: args.x0, k0: args.k0, units };
            println!("width = {}", c.width());
            println!("period = {}", c.period());
            println!("center({}) = {}", args.time, c.center(args.time));
            println!("velocity({}) = {}", args.time, c.velocity(args.time));
        }
        "product" => {
            let packet = Gaussian1d { mean: args.x0, sd: args.s0 };
            let pointer = Gaussian1d { mean: args.y, sd: args.sigma };
            let cond = density_product(packet, pointer);
            println!("conditional_mean = {}", cond.mean);
            println!("conditional_sd = {}", cond.sd);
            println!("conditional_density({}) = {}", args.x, cond.density(args.x));
        }
        other => {
            return Err(format!(
                "unknown oracle `{other}`; choose free_gaussian, coherent, or product"
            ));
        }
    }
    Ok(())
}
