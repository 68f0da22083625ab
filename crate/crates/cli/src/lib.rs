//! Configuration-driven experiments on higher Heine-Stieltjes problems:
//! spectra, root measures, support forests and figures.

pub mod config;
pub mod error;
pub mod figures;
pub mod manifest;
pub mod svg;
pub mod tasks;
pub mod verify;

use std::path::PathBuf;

pub use config::{ExperimentConfig, Task};
pub use error::{CliError, CliResult};
pub use manifest::{Check, RunManifest};

use manifest::Recorder;

pub const DEFAULT_OUT: &str = "lame-spectra-out";

/// Validates the config and runs its task, writing outputs and
/// `manifest.json` to the output directory.
pub fn run(config: &ExperimentConfig) -> CliResult<RunManifest> {
    config.validate()?;
    let task = config.task()?;
    let out = config.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    let mut rec = Recorder::new(&out)?;
    match task {
        Task::Solve => tasks::solve(config, &mut rec)?,
        Task::SpectrumSweep => tasks::spectrum_sweep(config, &mut rec)?,
        Task::MeasureCheck => tasks::measure_check(config, &mut rec)?,
        Task::Forest => tasks::forest(config, &mut rec)?,
        Task::Figures => figures::figures(config, &mut rec)?,
        Task::VerifyAll => {
            verify::verify_all(config, &mut rec)?;
        }
    }
    rec.finish(config, config.seed())
}
