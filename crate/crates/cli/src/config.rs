use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use lame_core::forest::{DensityParams, ForestParams, STRAIGHT_TOL_EMPIRICAL};
use lame_core::measure::{DEFAULT_PROBE_COUNT, DEFAULT_STANDOFF};
use lame_core::operator::LameOperator;
use lame_core::poly::Poly;
use lame_core::spectral::DEFAULT_SEED;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Solve,
    SpectrumSweep,
    MeasureCheck,
    Forest,
    Figures,
    VerifyAll,
}

impl Task {
    pub const ALL: [Task; 6] = [
        Task::Solve,
        Task::SpectrumSweep,
        Task::MeasureCheck,
        Task::Forest,
        Task::Figures,
        Task::VerifyAll,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Task::Solve => "solve",
            Task::SpectrumSweep => "spectrum-sweep",
            Task::MeasureCheck => "measure-check",
            Task::Forest => "forest",
            Task::Figures => "figures",
            Task::VerifyAll => "verify-all",
        }
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Task {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Task::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| format!("unknown task `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeConfig {
    #[serde(default = "default_probe_count")]
    pub count: usize,
    /// Circle radius around the origin; `max |root of Q_k| + 1.5` if absent.
    #[serde(default)]
    pub radius: Option<f64>,
    #[serde(default = "default_standoff")]
    pub standoff: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            count: DEFAULT_PROBE_COUNT,
            radius: None,
            standoff: DEFAULT_STANDOFF,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForestConfig {
    #[serde(default = "default_break_factor")]
    pub break_factor: f64,
    #[serde(default = "default_simplify")]
    pub simplify: f64,
    #[serde(default = "default_snap")]
    pub snap: f64,
    #[serde(default = "default_snap_spacing")]
    pub snap_spacing: f64,
    #[serde(default = "default_straighten_tol")]
    pub straighten_tol: f64,
    #[serde(default = "default_offset")]
    pub density_offset: f64,
    #[serde(default = "default_samples")]
    pub samples_per_edge: usize,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            break_factor: default_break_factor(),
            simplify: default_simplify(),
            snap: default_snap(),
            snap_spacing: default_snap_spacing(),
            straighten_tol: default_straighten_tol(),
            density_offset: default_offset(),
            samples_per_edge: default_samples(),
        }
    }
}

impl ForestConfig {
    pub fn params(&self) -> ForestParams {
        ForestParams {
            break_factor: self.break_factor,
            simplify: self.simplify,
            snap: self.snap,
            snap_spacing: self.snap_spacing,
        }
    }

    pub fn density(&self) -> DensityParams {
        DensityParams {
            offset: self.density_offset,
            samples_per_edge: self.samples_per_edge,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub operator: LameOperator,
    #[serde(default)]
    pub task: Option<Task>,
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default)]
    pub n_list: Option<Vec<usize>>,
    /// Target for the normalized Van Vleck polynomial when one pair per
    /// degree is needed.
    #[serde(default)]
    pub target: Option<Poly>,
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default)]
    pub probes: ProbeConfig,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub forest: ForestConfig,
    #[serde(default = "default_junction_radius")]
    pub junction_radius: f64,
    /// Degree whose roots define the forest for interlacing; defaults to
    /// the larger of `n + 1` and the forest minimum.
    #[serde(default)]
    pub reference_n: Option<usize>,
}

fn default_probe_count() -> usize {
    DEFAULT_PROBE_COUNT
}
fn default_standoff() -> f64 {
    DEFAULT_STANDOFF
}
fn default_break_factor() -> f64 {
    ForestParams::default().break_factor
}
fn default_simplify() -> f64 {
    ForestParams::default().simplify
}
fn default_snap() -> f64 {
    ForestParams::default().snap
}
fn default_snap_spacing() -> f64 {
    ForestParams::default().snap_spacing
}
fn default_straighten_tol() -> f64 {
    STRAIGHT_TOL_EMPIRICAL
}
fn default_offset() -> f64 {
    DensityParams::default().offset
}
fn default_samples() -> usize {
    DensityParams::default().samples_per_edge
}
fn default_eps() -> f64 {
    0.15
}
fn default_junction_radius() -> f64 {
    0.1
}

impl ExperimentConfig {
    pub fn new(operator: LameOperator, task: Task) -> Self {
        ExperimentConfig {
            operator,
            task: Some(task),
            n: None,
            n_list: None,
            target: None,
            eps: default_eps(),
            probes: ProbeConfig::default(),
            out: None,
            seed: None,
            forest: ForestConfig::default(),
            junction_radius: default_junction_radius(),
            reference_n: None,
        }
    }

    pub fn from_json(text: &str) -> CliResult<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            CliError::Config {
                path: if path == "." { String::new() } else { path },
                message: e.into_inner().to_string(),
            }
        })
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        Self::from_json(&text)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    pub fn task(&self) -> CliResult<Task> {
        self.task.ok_or_else(|| config_err("task", "no task given"))
    }

    /// Checks that the fields the task needs are present and sensible.
    pub fn validate(&self) -> CliResult<()> {
        let task = self.task()?;
        let k = self.operator.order();
        let class = self.operator.validate();
        if !class.nondegenerate {
            return Err(config_err("operator", "operator is degenerate"));
        }
        let check_n = |field: &str, n: usize| -> CliResult<()> {
            if n < k {
                Err(config_err(field, &format!("n = {n} is below the operator order k = {k}")))
            } else {
                Ok(())
            }
        };
        match task {
            Task::Solve | Task::MeasureCheck | Task::Forest | Task::Figures => {
                let n = self.n.ok_or_else(|| config_err("n", &format!("task {task} needs `n`")))?;
                check_n("n", n)?;
            }
            Task::SpectrumSweep => {
                let list = self
                    .n_list
                    .as_ref()
                    .ok_or_else(|| config_err("n_list", "task spectrum-sweep needs `n_list`"))?;
                if list.is_empty() {
                    return Err(config_err("n_list", "empty degree list"));
                }
            }
            Task::VerifyAll => {}
        }
        if let Some(list) = &self.n_list {
            for (i, &n) in list.iter().enumerate() {
                check_n(&format!("n_list[{i}]"), n)?;
            }
        }
        if task == Task::Forest && class.r >= 1 && self.target.is_none() {
            return Err(config_err("target", "task forest with r = 1 needs `target`"));
        }
        if !(self.eps > 0.0) {
            return Err(config_err("eps", "must be positive"));
        }
        if self.probes.count == 0 {
            return Err(config_err("probes.count", "must be positive"));
        }
        if !(self.junction_radius >= 0.0) {
            return Err(config_err("junction_radius", "must be non-negative"));
        }
        if !(self.forest.straighten_tol > 0.0) {
            return Err(config_err("forest.straighten_tol", "must be positive"));
        }
        if let Some(t) = &self.target {
            if t.is_zero() {
                return Err(config_err("target", "zero polynomial"));
            }
        }
        Ok(())
    }
}

pub(crate) fn config_err(path: &str, message: &str) -> CliError {
    CliError::Config {
        path: path.to_string(),
        message: message.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const LEGENDRE: &str = r#"{"k":2,"coeffs":[{"re":[0],"im":[0]},{"re":[0,2],"im":[0,0]},{"re":[-1,0,1],"im":[0,0,0]}]}"#;

    #[test]
    fn defaults_fill_in() {
        let cfg = ExperimentConfig::from_json(&format!(r#"{{"operator":{LEGENDRE},"task":"solve","n":4}}"#)).unwrap();
        assert_eq!(cfg.eps, 0.15);
        assert_eq!(cfg.probes.count, 16);
        assert_eq!(cfg.junction_radius, 0.1);
        assert_eq!(cfg.seed(), DEFAULT_SEED);
        cfg.validate().unwrap();
    }

    #[test]
    fn error_carries_field_path() {
        let err = ExperimentConfig::from_json(&format!(
            r#"{{"operator":{LEGENDRE},"task":"solve","n":4,"probes":{{"count":"many"}}}}"#
        ))
        .unwrap_err();
        match err {
            CliError::Config { path, .. } => assert_eq!(path, "probes.count"),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn missing_n_is_reported() {
        let cfg = ExperimentConfig::from_json(&format!(r#"{{"operator":{LEGENDRE},"task":"forest"}}"#)).unwrap();
        match cfg.validate().unwrap_err() {
            CliError::Config { path, .. } => assert_eq!(path, "n"),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn n_below_order() {
        let cfg = ExperimentConfig::from_json(&format!(r#"{{"operator":{LEGENDRE},"task":"solve","n":1}}"#)).unwrap();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn task_names_round_trip() {
        for t in Task::ALL {
            assert_eq!(t.name().parse::<Task>().unwrap(), t);
            let json = serde_json::to_string(&t).unwrap();
            assert_eq!(json, format!("\"{}\"", t.name()));
        }
    }
}
