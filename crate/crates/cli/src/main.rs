use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use lame_spectra::{run, CliError, ExperimentConfig, Task};

/// Runs one experiment task from a JSON config.
#[derive(Debug, Parser)]
#[command(name = "lame-spectra", version)]
struct Args {
    /// solve, spectrum-sweep, measure-check, forest, figures or verify-all
    task: Task,
    #[arg(long)]
    config: PathBuf,
    /// Output directory, overrides the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed for the randomized starts, overrides the config.
    #[arg(long)]
    seed: Option<u64>,
}

fn load(args: &Args) -> Result<ExperimentConfig, CliError> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if let Some(t) = cfg.task {
        if t != args.task {
            return Err(CliError::Config {
                path: "task".into(),
                message: format!("config says `{t}` but the command line asks for `{}`", args.task),
            });
        }
    }
    cfg.task = Some(args.task);
    if args.out.is_some() {
        cfg.out = args.out.clone();
    }
    if args.seed.is_some() {
        cfg.seed = args.seed;
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let args = Args::parse();
    let result = load(&args).and_then(|cfg| run(&cfg));
    match result {
        Ok(manifest) => {
            for c in &manifest.checks {
                let status = match (c.hard, c.pass) {
                    (false, _) => "info",
                    (true, true) => "pass",
                    (true, false) => "FAIL",
                };
                println!("{status:4} {}: {}", c.name, c.detail);
            }
            println!("{} outputs, {}", manifest.outputs.len(), if manifest.pass { "all checks pass" } else { "check failures" });
            ExitCode::from(manifest.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
