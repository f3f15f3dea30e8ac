//! `dressed-pa` command-line front end.

// `!(x > 0.0)` deliberately rejects NaN; small fixed-size matrices read best indexed.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

mod commands;
mod config;
mod error;
mod output;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::commands::Mode;
use crate::config::{linspace, Axis, RunConfig};
use crate::error::{CliError, EXIT_USAGE};
use crate::output::{Format, Sink};

#[derive(Parser)]
#[command(name = "dressed-pa", version, about = "Photoassociation of Raman-dressed spin-1 condensates")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// TOML config layered over the built-in defaults.
    #[arg(long, global = true, env = "DRESSED_PA_CONFIG")]
    config: Option<PathBuf>,
    /// Override one config key, e.g. --set pulse.t_pa_ms=5.5 (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    /// Raman coupling, E_r.
    #[arg(long, global = true, allow_negative_numbers = true)]
    omega: Option<f64>,
    /// Raman detuning, E_r.
    #[arg(long, global = true, allow_negative_numbers = true)]
    delta: Option<f64>,
    /// Seed for Monte Carlo sampling, synthetic noise and fit restarts.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Monte Carlo samples per sweep point.
    #[arg(long, global = true)]
    samples: Option<usize>,
    /// Use the rate ratio without the interference term.
    #[arg(long, global = true)]
    no_interference: bool,
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Output formats (repeatable); defaults to output.formats.
    #[arg(long = "format", value_enum, global = true)]
    formats: Vec<Format>,
    /// Exit with code 3 when a fit does not converge.
    #[arg(long, global = true)]
    strict: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Dressed band structure and band minimum.
    Bands {
        #[arg(long, allow_negative_numbers = true)]
        q_min: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        q_max: Option<f64>,
        #[arg(long)]
        points: Option<usize>,
    },
    /// Superposition coefficients at the band minimum, optionally over a δ range.
    Coeffs {
        #[arg(long, allow_negative_numbers = true, requires = "to")]
        from: Option<f64>,
        #[arg(long, allow_negative_numbers = true, requires = "from")]
        to: Option<f64>,
        #[arg(long, default_value_t = 51)]
        points: usize,
    },
    /// Rate-ratio bands over Ω_R or δ with Monte Carlo uncertainties.
    RatioSweep {
        #[arg(long, value_enum)]
        axis: Option<Axis>,
        #[arg(long, allow_negative_numbers = true)]
        min: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        max: Option<f64>,
        #[arg(long)]
        points: Option<usize>,
    },
    /// Fit a PA spectrum CSV.
    Fit {
        input: PathBuf,
        /// Peak density, cm^-3.
        #[arg(long)]
        rho0: Option<f64>,
        /// Pulse duration, ms.
        #[arg(long)]
        t_pa_ms: Option<f64>,
    },
    /// Synthesize a PA spectrum of a dressed superposition or a spin mixture.
    Simulate {
        #[arg(long, value_enum, default_value = "superposition")]
        mode: Mode,
        /// Relative Gaussian noise on every count.
        #[arg(long)]
        noise: Option<f64>,
    },
    /// Resonant loss dynamics of a statistical spin mixture.
    MixtureSim {
        /// Calibrate k00 to this on-resonance m_f=0 loss (0 disables).
        #[arg(long)]
        target_loss: Option<f64>,
    },
}

fn overrides(cli: &Cli) -> Vec<String> {
    let g = &cli.global;
    let mut set = g.overrides.clone();
    let mut push = |key: &str, value: String| set.push(format!("{key}={value}"));
    if let Some(v) = g.omega {
        push("dressing.omega_r", format!("{v:?}"));
    }
    if let Some(v) = g.delta {
        push("dressing.delta", format!("{v:?}"));
    }
    if let Some(v) = g.seed {
        push("uncertainty.seed", v.to_string());
        push("spectrum.seed", v.to_string());
    }
    if let Some(v) = g.samples {
        push("uncertainty.n_samples", v.to_string());
    }
    match &cli.command {
        Command::Bands { q_min, q_max, points } => {
            if let Some(v) = q_min {
                push("bands.q_min", format!("{v:?}"));
            }
            if let Some(v) = q_max {
                push("bands.q_max", format!("{v:?}"));
            }
            if let Some(v) = points {
                push("bands.points", v.to_string());
            }
        }
        Command::RatioSweep { axis, min, max, points } => {
            if let Some(a) = axis {
                push("sweep.axis", format!("{:?}", format!("{a:?}").to_lowercase()));
            }
            if let Some(v) = min {
                push("sweep.min", format!("{v:?}"));
            }
            if let Some(v) = max {
                push("sweep.max", format!("{v:?}"));
            }
            if let Some(v) = points {
                push("sweep.points", v.to_string());
            }
        }
        Command::Fit { rho0, t_pa_ms, .. } => {
            if let Some(v) = rho0 {
                push("pulse.rho0_cm3", format!("{v:?}"));
            }
            if let Some(v) = t_pa_ms {
                push("pulse.t_pa_ms", format!("{v:?}"));
            }
        }
        Command::Simulate { noise, .. } => {
            if let Some(v) = noise {
                push("spectrum.noise_rel", format!("{v:?}"));
            }
        }
        Command::MixtureSim { target_loss } => {
            if let Some(v) = target_loss {
                push("mixture.target_m0_loss", format!("{v:?}"));
            }
        }
        Command::Coeffs { .. } => {}
    }
    set
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = RunConfig::load(cli.global.config.as_deref(), &overrides(&cli))?;
    if let Some(dir) = &cli.global.out_dir {
        cfg.output.dir = dir.clone();
    }
    if !cli.global.formats.is_empty() {
        cfg.output.formats = cli.global.formats.clone();
    }
    let mut sink = Sink::new(&cfg.output.dir, cfg.formats())?;
    let g = &cli.global;
    match &cli.command {
        Command::Bands { .. } => {
            let b = &cfg.bands;
            commands::bands(&cfg, &mut sink, b.q_min, b.q_max, b.points)?
        }
        Command::Coeffs { from, to, points } => {
            let deltas = match (from, to) {
                (Some(a), Some(b)) => linspace(*a, *b, *points)?,
                _ => vec![cfg.dressing.delta],
            };
            commands::coeffs(&cfg, &mut sink, &deltas)?
        }
        Command::RatioSweep { .. } => commands::ratio_sweep(&cfg, &mut sink, g.no_interference)?,
        Command::Fit { input, .. } => commands::fit(&cfg, &mut sink, input, g.strict)?,
        Command::Simulate { mode, .. } => commands::simulate(&cfg, &mut sink, *mode, g.no_interference)?,
        Command::MixtureSim { .. } => commands::mixture_sim(&cfg, &mut sink)?,
    }
    for path in sink.written() {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
