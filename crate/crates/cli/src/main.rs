use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use spikekit_core::config::{parse_config_as, CONFIG_HELP};
use spikekit_core::presets::PRESET_NAMES;
use spikekit_core::{run_config, Error, Mode, RunConfig, RunOutcome};

#[derive(Parser)]
#[command(name = "spikekit", version, about = "Boundary-spike lab for a Keller-Segel chemotaxis model", after_help = CONFIG_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Config file (see the format below).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; default `out/<preset or mode>`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Roots t1 < t2, c_delta, t_delta and the theta bound for one delta.
    AnalyzeDelta(Common),
    /// Radial ground state by shooting.
    GroundState(Common),
    /// Steady boundary spike of the nonlocal problem for one eps.
    SolveSteady(Common),
    /// Time-dependent run from the configured initial data.
    Simulate(Common),
    /// Steady solves over `eps_list`, with extrapolation to eps = 0.
    SweepEpsilon(Common),
    /// Rerun a named preset, or the preset/config in `--config`.
    #[command(after_help = "presets: fig1 fig2 fig3 fig4a fig4b fig5")]
    Reproduce {
        #[arg(required_unless_present = "config", conflicts_with = "config")]
        preset: Option<String>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load(path: &Path, mode: Mode) -> spikekit_core::Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config_as(&text, Some(mode))
}

fn run(cli: Cli) -> spikekit_core::Result<RunOutcome> {
    let (cfg, out) = match cli.command {
        Command::AnalyzeDelta(c) => (load(&c.config, Mode::AnalyzeDelta)?, c.out),
        Command::GroundState(c) => (load(&c.config, Mode::GroundState)?, c.out),
        Command::SolveSteady(c) => (load(&c.config, Mode::SolveSteady)?, c.out),
        Command::Simulate(c) => (load(&c.config, Mode::Simulate)?, c.out),
        Command::SweepEpsilon(c) => (load(&c.config, Mode::SweepEpsilon)?, c.out),
        Command::Reproduce { preset: Some(name), out, .. } => {
            if !PRESET_NAMES.contains(&name.as_str()) {
                return Err(Error::Validation(format!("unknown preset `{name}`; expected one of {}", PRESET_NAMES.join(", "))));
            }
            (RunConfig::from_preset(&name)?, out)
        }
        Command::Reproduce { config, out, .. } => {
            let cfg = load(config.as_deref().expect("clap requires a preset or --config"), Mode::Reproduce)?;
            if cfg.preset.is_none() {
                return Err(Error::Validation("reproduce needs `preset =` in the config".into()));
            }
            (cfg, out)
        }
    };
    run_config(&cfg, out.as_deref())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(outcome) => {
            for (k, v) in &outcome.results {
                println!("{k} = {v}");
            }
            println!("manifest = {}", outcome.manifest.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("spikekit: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
