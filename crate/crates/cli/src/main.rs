//! `smallball` experiment runner.
//!
//! Every subcommand resolves its flags (or a `key=value` config file) into
//! a flat config, runs, and writes `<output>.csv`, `<output>.summary.json`
//! and `<output>.manifest`. Exit status: 0 pass, 2 check failed, 1 usage or
//! precondition error.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::commands::{execute, resolve};
use crate::config::{usage, Config, Res};

const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser)]
#[command(
    name = "smallball",
    version,
    about = "Small-ball and integral-functional experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

macro_rules! knobs {
    ($($field:ident),* $(,)?) => {
        /// Numeric and textual knobs; each becomes a config key.
        #[derive(Args, Debug, Default)]
        struct Knobs {
            $(
                #[arg(long, allow_hyphen_values = true)]
                $field: Option<String>,
            )*
            /// Validate and print the resolved plan without computing.
            #[arg(long)]
            dry_run: bool,
            /// Worker thread cap.
            #[arg(long)]
            threads: Option<usize>,
        }

        impl Knobs {
            fn apply(&self, cfg: &mut Config) {
                $(
                    if let Some(v) = &self.$field {
                        cfg.set(stringify!($field), v);
                    }
                )*
            }
        }
    };
}

knobs!(
    process,
    hurst,
    theta,
    alpha,
    lambda0,
    method,
    function,
    seed,
    output,
    replicates,
    dt,
    steps,
    t0,
    horizon,
    horizons,
    epsilon,
    s,
    deltas,
    etas,
    n_delta,
    n_eta,
    refine,
    k,
    eta_star,
    x_min,
    x_max,
    c0,
    d,
    eta0,
    ineq_delta,
    p,
    beta,
    k_max,
    lemma,
    x,
    y,
    z,
    g,
    g_lower,
    g_upper,
    y0,
    x0,
    theta_x,
    noise_hurst,
    tolerance,
    parallel,
);

#[derive(Subcommand)]
enum Command {
    /// Sample paths of a process.
    Simulate(Knobs),
    /// Small-ball probabilities against the analytic bound.
    Smallball(Knobs),
    /// Window-growth, derivative and sufficient-condition checks on a function.
    #[command(name = "check-a1")]
    CheckA1(Knobs),
    /// Divergence rate of the integral functional.
    Diverge(Knobs),
    /// Lower-bound experiment for self-similar fBm.
    Selfsim(Knobs),
    /// Time averages of f(X)² for stationary processes.
    Ergodic(Knobs),
    /// Drift estimator for the OU-type model.
    #[command(name = "estimate-ou")]
    EstimateOu(Knobs),
    /// Drift estimator for the model with fractional noise.
    #[command(name = "estimate-frac")]
    EstimateFrac(Knobs),
    /// Quadrature oracles for the auxiliary integrals.
    Oracle(Knobs),
    /// Run a config file or manifest; flags override its keys.
    Run {
        config: PathBuf,
        #[command(flatten)]
        knobs: Knobs,
    },
}

fn build_config(command: Command) -> Res<(Config, Knobs)> {
    let (name, mut cfg, knobs) = match command {
        Command::Run { config, knobs } => {
            let text = std::fs::read_to_string(&config)
                .or_else(|e| usage(format!("cannot read {}: {e}", config.display())))?;
            let cfg = Config::parse(&text)?;
            if cfg.is_empty() {
                return usage(format!("{} is empty", config.display()));
            }
            (None, cfg, knobs)
        }
        Command::Simulate(k) => (Some("simulate"), Config::default(), k),
        Command::Smallball(k) => (Some("smallball"), Config::default(), k),
        Command::CheckA1(k) => (Some("check-a1"), Config::default(), k),
        Command::Diverge(k) => (Some("diverge"), Config::default(), k),
        Command::Selfsim(k) => (Some("selfsim"), Config::default(), k),
        Command::Ergodic(k) => (Some("ergodic"), Config::default(), k),
        Command::EstimateOu(k) => (Some("estimate-ou"), Config::default(), k),
        Command::EstimateFrac(k) => (Some("estimate-frac"), Config::default(), k),
        Command::Oracle(k) => (Some("oracle"), Config::default(), k),
    };
    if let Some(name) = name {
        cfg.set("command", name);
    }
    knobs.apply(&mut cfg);
    if let Ok(seed) = std::env::var("SMALLBALL_SEED") {
        cfg.set("seed", &seed);
    }
    Ok((cfg, knobs))
}

fn run(command: Command) -> Res<bool> {
    let (mut cfg, knobs) = build_config(command)?;
    if let Some(n) = knobs.threads {
        set_threads(n)?;
    }
    let default_output = format!("smallball-{}", cfg.raw("command").unwrap_or("run"));
    let output = cfg.string("output", &default_output);
    let plan = resolve(&mut cfg)?;
    let manifest = cfg.to_manifest(VERSION);
    if knobs.dry_run {
        print!("{manifest}");
        println!("# plan: {plan:?}");
        return Ok(true);
    }
    let outcome = execute(&plan)?;
    std::fs::write(format!("{output}.csv"), &outcome.csv)?;
    std::fs::write(
        format!("{output}.summary.json"),
        serde_json::to_string_pretty(&outcome.summary)? + "\n",
    )?;
    std::fs::write(format!("{output}.manifest"), &manifest)?;
    println!(
        "{} {}",
        if outcome.pass { "pass" } else { "FAIL" },
        outcome.message
    );
    Ok(outcome.pass)
}

#[cfg(feature = "parallel")]
fn set_threads(n: usize) -> Res<()> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()?;
    Ok(())
}

#[cfg(not(feature = "parallel"))]
fn set_threads(_: usize) -> Res<()> {
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
