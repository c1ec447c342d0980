//! Command-line front end.
//!
//! Exit codes: 0 on success, 1 for invalid input (arguments or config),
//! 2 when a run fails.

use super::{default_output_dir, preset, run_experiment, EngineError, ExperimentConfig, RunOutput};
use clap::{Args, Parser, Subcommand};
use std::ffi::OsString;
use std::path::PathBuf;

#[derive(Parser, Debug)]
#[command(name = "noma-hudn", version, about = "NOMA experiments for heterogeneous ultra-dense networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run an experiment described by a TOML config.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run one of the built-in figure presets.
    Preset {
        #[arg(long, value_parser = ["fig4", "fig5"])]
        name: String,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Check a config without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Args, Debug)]
struct Overrides {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    /// Output directory (default: config `output`, then $NOMA_HUDN_OUTPUT, then ./out).
    #[arg(long)]
    output: Option<PathBuf>,
    /// Worker threads, 0 for all cores.
    #[arg(long)]
    workers: Option<usize>,
}

impl Overrides {
    fn apply(self, mut cfg: ExperimentConfig) -> Result<(ExperimentConfig, PathBuf), EngineError> {
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(t) = self.trials {
            cfg.trials = t;
        }
        if let Some(w) = self.workers {
            cfg.workers = w;
        }
        cfg.validate()?;
        let dir = self.output.or_else(|| cfg.output.clone()).unwrap_or_else(default_output_dir);
        Ok((cfg, dir))
    }
}

fn report(out: &RunOutput) {
    println!("wrote {}", out.csv.display());
    for f in &out.extra_files {
        println!("wrote {}", f.display());
    }
    println!("wrote {}", out.manifest_path.display());
    println!("config hash {}", out.manifest.config_hash);
}

fn execute(command: Command) -> Result<(), EngineError> {
    match command {
        Command::Run { config, overrides } => {
            let (cfg, dir) = overrides.apply(ExperimentConfig::load(&config)?)?;
            report(&run_experiment(&cfg, &dir)?);
        }
        Command::Preset { name, overrides } => {
            let (cfg, dir) = overrides.apply(preset(&name)?)?;
            report(&run_experiment(&cfg, &dir)?);
        }
        Command::Validate { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            println!("{}: ok ({:?}, {} sweep points)", cfg.name, cfg.kind, cfg.sweep.values.len());
        }
    }
    Ok(())
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
