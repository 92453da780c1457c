use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use fluxgate::commands::deliver;
use fluxgate::{execute, CliError, Command, OutputFormat, RunManifest};
use fluxgate_core::analysis::SweepAxis;
use fluxgate_core::protocol::Mode;

/// Simulate the three-step cavity-mediated controlled-phase gate.
#[derive(Parser, Debug)]
#[command(name = "fluxgate", version)]
struct Cli {
    /// Recorded in reports (the dynamics are deterministic).
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Lindblad integration step in ns, overriding the config.
    #[arg(long = "dt-ns", global = true)]
    dt_ns: Option<f64>,

    /// Enable developer commands.
    #[arg(long, hide = true, global = true)]
    dev: bool,

    #[command(subcommand)]
    command: Cmd,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    SequentialIdeal,
    Concurrent,
    Lindblad,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::SequentialIdeal => Mode::SequentialIdeal,
            ModeArg::Concurrent => Mode::Concurrent,
            ModeArg::Lindblad => Mode::Lindblad,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Run the gate once and write a JSON report.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "json")]
        format: FormatArg,
    },
    /// Evaluate the gate over a list of values of one parameter.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// omega_over_g, Q, gamma_scale or g_asymmetry.
        #[arg(long)]
        axis: String,
        /// Comma-separated list, e.g. 3,10,30.
        #[arg(long, allow_hyphen_values = true)]
        values: String,
        /// Worker threads (default: available processors).
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "json")]
        format: FormatArg,
    },
    /// Parse and check a config file.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Check the published gate time, photon lifetime, gate and checkpoints.
    ReproducePaper {
        #[arg(long, value_enum, default_value = "sequential-ideal")]
        mode: ModeArg,
        /// Relative change applied to g₁, e.g. 0.1 for +10%.
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        perturb_g1: f64,
        /// Scale on every decoherence rate including cavity loss.
        #[arg(long)]
        decoherence_scale: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Regenerate an oracle gate fixture.
    #[command(hide = true)]
    Fixture {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "concurrent")]
        mode: ModeArg,
        /// Oracle steps per gate duration.
        #[arg(long, default_value_t = 1_000_000)]
        steps: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn format_of(f: FormatArg) -> OutputFormat {
    match f {
        FormatArg::Json => OutputFormat::Json,
        FormatArg::Csv => OutputFormat::Csv,
    }
}

fn parse_values(list: &str) -> Result<Vec<f64>, CliError> {
    list.split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|e| CliError::Usage(format!("bad sweep value {v:?}: {e}")))
        })
        .collect()
}

fn manifest(cli: Cli) -> Result<RunManifest, CliError> {
    let (command, config, out, format) = match cli.command {
        Cmd::Simulate {
            config,
            mode,
            out,
            format,
        } => (
            Command::Simulate {
                mode: mode.map(Mode::from),
            },
            Some(config),
            out,
            format_of(format),
        ),
        Cmd::Sweep {
            config,
            axis,
            values,
            jobs,
            out,
            format,
        } => (
            Command::Sweep {
                axis: axis.parse::<SweepAxis>()?,
                values: parse_values(&values)?,
                jobs,
            },
            Some(config),
            out,
            format_of(format),
        ),
        Cmd::Validate { config } => (Command::Validate, Some(config), None, OutputFormat::Json),
        Cmd::ReproducePaper {
            mode,
            perturb_g1,
            decoherence_scale,
            out,
        } => (
            Command::ReproducePaper {
                mode: mode.into(),
                perturb_g1,
                decoherence_scale,
            },
            None,
            out,
            OutputFormat::Json,
        ),
        Cmd::Fixture {
            config,
            mode,
            steps,
            out,
        } => {
            if !cli.dev {
                return Err(CliError::Usage(
                    "fixture is a developer command; pass --dev".into(),
                ));
            }
            (
                Command::Fixture {
                    mode: mode.into(),
                    steps,
                },
                config,
                out,
                OutputFormat::Json,
            )
        }
    };
    Ok(RunManifest {
        config_path: config,
        command,
        output_path: out,
        output_format: format,
        seed: cli.seed,
        dt_override_ns: cli.dt_ns,
    })
}

fn run(cli: Cli) -> Result<u8, CliError> {
    let manifest = manifest(cli)?;
    let outcome = execute(&manifest)?;
    if let Some(summary) = &outcome.summary {
        print!("{summary}");
    }
    let reproduce = matches!(manifest.command, Command::ReproducePaper { .. });
    // reproduce-paper prints its table; the JSON only goes to --out.
    if manifest.output_path.is_some() || !reproduce {
        if let Some(text) = deliver(manifest.output_path.as_deref(), &outcome.document)? {
            print!("{text}");
        }
    }
    Ok(outcome.status.exit_code())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("FLUXGATE_LOG"))
        .format_timestamp(None)
        .init();
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("fluxgate: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
