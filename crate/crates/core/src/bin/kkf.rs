use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use kkf_core::config::{ModelParams, StabilityReport};
use kkf_core::field::InitialSpec;
use kkf_core::io::{
    apply_override, parse_config_unchecked, run_config, run_langevin_config, run_preset, RunConfig,
    Strictness,
};
use kkf_core::kernel::identities::run_identity_suite;
use kkf_core::{KkfError, Result};

/// Solver for the mean-field inertial noisy Kuramoto equation.
#[derive(Parser)]
#[command(name = "kkf", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// JSON run config.
    config: PathBuf,
    /// Warn about unknown config keys instead of failing.
    #[arg(long)]
    lenient: bool,
    /// Set a config value, e.g. `--override model.K=4`. Repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Use the unmodified initial datum (requires G_omega < 1).
    #[arg(long)]
    literal_initial: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run the PDE solver for a config.
    Solve(ConfigArgs),
    /// Run the Langevin particle ensemble for a config (needs `mode.langevin`).
    Langevin(ConfigArgs),
    /// Run a named preset, writing one series per sweep value.
    Preset {
        /// One of fig1..fig6, fig78.
        name: String,
        /// Output directory.
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Set a config value on every run, e.g. `--override grid.T=5`.
        /// `sweep=[1,3]` replaces the sweep values.
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Also write a snapshot every N steps.
        #[arg(long)]
        snapshot_every: Option<usize>,
    },
    /// Check the closed-form kernel identities by quadrature.
    KernelCheck,
    /// Evaluate the positivity conditions for a config or for explicit values.
    Stability {
        /// JSON run config; otherwise the flags below are used.
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 1.0)]
        m: f64,
        #[arg(long = "D", default_value_t = 1.0)]
        noise: f64,
        #[arg(long = "K", default_value_t = 0.0)]
        coupling: f64,
        #[arg(long = "Omega1", default_value_t = 0.0)]
        omega1: f64,
        #[arg(long, default_value_t = 0.2)]
        d_omega: f64,
        #[arg(long, default_value_t = 0.01)]
        d_t: f64,
        #[arg(long = "G", default_value_t = 4.0)]
        g_omega: f64,
        #[arg(long)]
        lenient: bool,
    },
}

fn split_override(item: &str) -> Result<(&str, &str)> {
    item.split_once('=')
        .ok_or_else(|| KkfError::Config(format!("override `{item}` is not KEY=VALUE")))
}

fn load(args: &ConfigArgs) -> Result<RunConfig> {
    let strictness = if args.lenient {
        Strictness::Lenient
    } else {
        Strictness::Strict
    };
    let text = std::fs::read_to_string(&args.config).map_err(|e| KkfError::io(&args.config, e))?;
    let (mut cfg, unknown) = parse_config_unchecked(&text, strictness)?;
    for key in unknown {
        eprintln!("warning: ignoring unknown config key `{key}`");
    }
    for item in &args.overrides {
        let (k, v) = split_override(item)?;
        cfg = apply_override(&cfg, k, v)?;
    }
    if args.literal_initial {
        cfg.initial = InitialSpec::Unregularized;
    }
    cfg.prepare()?;
    Ok(cfg)
}

fn print_stability(r: &StabilityReport) {
    let ok = |b: bool| if b { "ok" } else { "VIOLATED" };
    println!("d_omega <= {:.6}: {}", r.d_omega_max, ok(r.d_omega_ok));
    match r.d_t_max {
        Some(max) => println!("d_t <= {max:.6}: {}", ok(r.d_t_ok)),
        None => println!("d_t unconstrained: ok"),
    }
    println!("G_omega <= {:.6}: {}", r.g_omega_max, ok(r.g_omega_ok));
    println!("overall: {}", ok(r.overall_ok));
}

fn solve(args: &ConfigArgs) -> Result<()> {
    let cfg = load(args)?;
    let records = run_config(&cfg)?;
    if let Some(last) = records.last() {
        println!(
            "t = {:.4}  |r| = {:.6}  |s| = {:.6}",
            last.t, last.abs_r, last.abs_s
        );
    }
    Ok(())
}

fn langevin(args: &ConfigArgs) -> Result<()> {
    let cfg = load(args)?;
    let records = run_langevin_config(&cfg)?;
    if let Some(last) = records.last() {
        println!(
            "t = {:.4}  |r| = {:.6}  |s| = {:.6}",
            last.t, last.abs_r, last.abs_s
        );
    }
    Ok(())
}

fn preset(
    name: &str,
    out: &Path,
    overrides: &[String],
    snapshot_every: Option<usize>,
) -> Result<()> {
    let mut sweep = None;
    let mut rest = Vec::new();
    for item in overrides {
        let (k, v) = split_override(item)?;
        if k == "sweep" {
            let values: Vec<f64> = serde_json::from_str(v).map_err(|e| {
                KkfError::Config(format!("sweep must be a JSON list of numbers: {e}"))
            })?;
            sweep = Some(values);
        } else {
            rest.push((k, v));
        }
    }
    std::fs::create_dir_all(out).map_err(|e| KkfError::io(out, e))?;
    for (label, mut cfg) in run_preset(name, sweep.as_deref())? {
        for (k, v) in &rest {
            cfg = apply_override(&cfg, k, v)?;
        }
        cfg.output.series = Some(out.join(format!("{label}.csv")));
        cfg.output.snapshot_every = snapshot_every;
        cfg.output.snapshot_prefix = Some(out.join(&label));
        let records = run_config(&cfg)?;
        let last = records.last().expect("series holds the initial state");
        println!(
            "{label}: d_omega {:.4} target d_t {:.5}  t = {:.3}  |r| = {:.6}  |s| = {:.6}",
            cfg.grid.d_omega, cfg.grid.target_d_t, last.t, last.abs_r, last.abs_s
        );
    }
    Ok(())
}

fn kernel_check() -> Result<ExitCode> {
    let checks = run_identity_suite();
    for c in &checks {
        println!("{c}");
    }
    Ok(if checks.iter().all(|c| c.passed()) {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Solve(args) => solve(&args).map(|_| ExitCode::SUCCESS),
        Command::Langevin(args) => langevin(&args).map(|_| ExitCode::SUCCESS),
        Command::Preset {
            name,
            out,
            overrides,
            snapshot_every,
        } => preset(&name, &out, &overrides, snapshot_every).map(|_| ExitCode::SUCCESS),
        Command::KernelCheck => kernel_check(),
        Command::Stability {
            config,
            m,
            noise,
            coupling,
            omega1,
            d_omega,
            d_t,
            g_omega,
            lenient,
        } => {
            let report = match config {
                Some(path) => {
                    let strictness = if lenient {
                        Strictness::Lenient
                    } else {
                        Strictness::Strict
                    };
                    let text =
                        std::fs::read_to_string(&path).map_err(|e| KkfError::io(&path, e))?;
                    parse_config_unchecked(&text, strictness)?.0.stability()?
                }
                None => StabilityReport::evaluate(
                    &ModelParams::new(m, noise, coupling, omega1)?,
                    d_omega,
                    d_t,
                    g_omega,
                )?,
            };
            print_stability(&report);
            // a violated condition is bad input, same as a rejected config
            Ok(if report.overall_ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = std::env::var("KKF_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
    {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
