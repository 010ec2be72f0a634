use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};
use log::info;

use qdd_core::config::{parse_config, parse_config_str, RunConfig};
use qdd_core::optimize::TerminalReason;
use qdd_core::output::{emit_results, RunResults};
use qdd_core::run::{run_gradcheck, run_optimize, run_solve};
use qdd_core::sweep::run_epsilon_sweep;
use qdd_core::Error;

/// Quantum drift-diffusion solver and adjoint-based doping optimizer.
///
/// Exit codes: 0 success, 2 configuration error, 3 solver nonconvergence,
/// 4 line-search failure, 1 any other error.
#[derive(Debug, Parser)]
#[command(name = "qdd", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Forward solve at the reference doping.
    Solve(Common),
    /// Gradient descent on the doping profile.
    Optimize(Common),
    /// Optimize along a decreasing ladder of epsilon2 and compare with the classical optimum.
    Sweep(Common),
    /// Compare adjoint and finite-difference directional derivatives.
    Gradcheck(Common),
}

#[derive(Debug, Args)]
struct Common {
    /// Run configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides output.dir.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Grid size N for an N x N mesh; overrides geometry.nx, geometry.ny and sweep.grid.
    #[arg(long)]
    grid: Option<usize>,
    /// Quantum parameter; overrides physics.epsilon2 (and sweep.epsilon2 when set).
    #[arg(long)]
    epsilon2: Option<f64>,
}

const EXIT_OTHER: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_NONCONVERGENCE: u8 = 3;
const EXIT_LINE_SEARCH: u8 = 4;

fn exit_code(e: &Error) -> u8 {
    if e.is_line_search_failure() {
        EXIT_LINE_SEARCH
    } else if e.is_solver_failure() {
        EXIT_NONCONVERGENCE
    } else if matches!(e, Error::Config(_) | Error::Geometry(_)) {
        EXIT_CONFIG
    } else {
        EXIT_OTHER
    }
}

fn defaults_help() -> String {
    let example = "[physics]\nlambda2 = 0.0017\nepsilon2 = 1.88e-4\n";
    let cfg = parse_config_str(example).expect("built-in example parses");
    format!(
        "Config defaults (physics.lambda2 and physics.epsilon2 are required):\n\n{}",
        cfg.to_toml()
    )
}

fn load(common: &Common) -> Result<(RunConfig, PathBuf), Error> {
    let mut cfg = parse_config(&common.config).map_err(|e| match e {
        Error::Io { path, source } => Error::Config(format!("cannot read {path}: {source}")),
        e => e,
    })?;
    cfg.apply_overrides(common.grid, common.epsilon2)?;
    let out = common.out.clone().unwrap_or_else(|| PathBuf::from(&cfg.output.dir));
    info!("configuration:\n{}", cfg.to_toml());
    Ok((cfg, out))
}

fn run(command: &Command) -> Result<u8, Error> {
    let code = match command {
        Command::Solve(c) => {
            let (cfg, out) = load(c)?;
            let (dev, res) = run_solve::<f64>(&cfg)?;
            emit_results(&out, &cfg, &dev, RunResults::Solve(&res))?;
            println!("solve: {} iterations, residual {:.3e}", res.state.iterations, res.state.residual);
            for (name, i) in &res.currents {
                println!("current {name}: {i:.6e}");
            }
            println!("peak current density: {:.6e}", res.peak_current);
            0
        }
        Command::Optimize(c) => {
            let (cfg, out) = load(c)?;
            let (dev, res) = run_optimize::<f64>(&cfg)?;
            emit_results(&out, &cfg, &dev, RunResults::Optimize(&res))?;
            let t = &res.trace;
            println!("optimize: {} iterations, stopped on {}", t.iterations(), t.reason);
            println!("cost: {:.6e} -> {:.6e}", t.records[0].cost, t.final_cost());
            if let (Some(a), Some(b)) = (res.current_ref, res.current_opt) {
                println!("current: {a:.6e} -> {b:.6e}");
            }
            println!("peak current density: {:.6e} -> {:.6e}", res.peak_ref, res.peak_opt);
            match &t.reason {
                TerminalReason::LineSearchFailure(msg) => {
                    eprintln!("qdd: {msg}");
                    EXIT_LINE_SEARCH
                }
                _ => 0,
            }
        }
        Command::Sweep(c) => {
            let (cfg, out) = load(c)?;
            let (dev, rep) = run_epsilon_sweep::<f64>(&cfg)?;
            emit_results(&out, &cfg, &dev, RunResults::Sweep(&rep))?;
            for row in &rep.rows {
                match (&row.outcome, &row.distances) {
                    (Ok(r), Some(d)) => println!(
                        "{:>3} eps2 {:.3e}: cost {:.6e}, dist C {:.3e} n {:.3e} S {:.3e}, gap {:.3e}",
                        row.label(),
                        row.eps2,
                        r.cost,
                        d.c,
                        d.n,
                        d.s,
                        d.cost_gap
                    ),
                    (o, _) => println!("{:>3} eps2 {:.3e}: failed: {}", row.label(), row.eps2, o.as_ref().err().map_or("", |s| s)),
                }
            }
            if rep.rows.iter().any(|r| r.outcome.is_err()) {
                EXIT_NONCONVERGENCE
            } else {
                0
            }
        }
        Command::Gradcheck(c) => {
            let (cfg, out) = load(c)?;
            let (dev, rep) = run_gradcheck::<f64>(&cfg)?;
            emit_results(&out, &cfg, &dev, RunResults::GradCheck(&rep))?;
            print!("{rep}");
            0
        }
    };
    Ok(code)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let matches = Cli::command().after_long_help(defaults_help()).get_matches();
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    match run(&cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("qdd: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
