//! Run configuration: one TOML file, every section strict about its keys.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use polariton::dynamics::{FrequencyGrid, TimeGrid, Window};
use polariton::perturbation::DEFAULT_DARK_THRESHOLD;
use polariton::{CavityParams, Ensemble, MolecularModel, VibrationalMode};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Spectrum,
    Dynamics,
    Rate,
    Densities,
    Validate,
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::Spectrum => "spectrum",
            Task::Dynamics => "dynamics",
            Task::Rate => "rate",
            Task::Densities => "densities",
            Task::Validate => "validate",
        })
    }
}

/// How the many-molecule Hamiltonian is represented.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunMethod {
    /// Truncated at quasi block `q` (`cute0`, `cute1`, `cuteq:<q>`).
    Cute(u64),
    /// Untruncated symmetric space.
    ExactN,
    /// Brute-force tensor product of `N ≤ 4` molecules.
    Oracle,
    /// `N → ∞` at fixed `g√N`.
    Infinite,
}

impl FromStr for RunMethod {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "cute0" => Ok(RunMethod::Cute(0)),
            "cute1" => Ok(RunMethod::Cute(1)),
            "exactN" => Ok(RunMethod::ExactN),
            "oracle" => Ok(RunMethod::Oracle),
            "infinite" => Ok(RunMethod::Infinite),
            _ => s
                .strip_prefix("cuteq:")
                .and_then(|q| q.parse().ok())
                .map(RunMethod::Cute)
                .ok_or_else(|| {
                    format!("unknown method `{s}`, expected cute0, cute1, cuteq:<q>, exactN, oracle or infinite")
                }),
        }
    }
}

impl fmt::Display for RunMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunMethod::Cute(0) => f.write_str("cute0"),
            RunMethod::Cute(1) => f.write_str("cute1"),
            RunMethod::Cute(q) => write!(f, "cuteq:{q}"),
            RunMethod::ExactN => f.write_str("exactN"),
            RunMethod::Oracle => f.write_str("oracle"),
            RunMethod::Infinite => f.write_str("infinite"),
        }
    }
}

impl Serialize for RunMethod {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for RunMethod {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}

/// Molecule count: an integer or the string `"infinite"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Molecules(pub Ensemble);

impl Serialize for Molecules {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self.0 {
            Ensemble::Finite(n) => s.serialize_u64(n),
            Ensemble::Infinite => s.serialize_str("infinite"),
        }
    }
}

impl<'de> Deserialize<'de> for Molecules {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Count(u64),
            Name(String),
        }
        match Raw::deserialize(d)? {
            Raw::Count(n) => Ok(Molecules(Ensemble::Finite(n))),
            Raw::Name(s) if s == "infinite" => Ok(Molecules(Ensemble::Infinite)),
            Raw::Name(s) => Err(serde::de::Error::custom(format!(
                "molecules must be a positive integer or \"infinite\", got \"{s}\""
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeConfig {
    pub frequency: f64,
    pub huang_rhys: f64,
    pub n_max: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MoleculeConfig {
    pub electronic_gap: f64,
    #[serde(default)]
    pub modes: Vec<ModeConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CavityConfig {
    pub omega_c: f64,
    pub g_sqrt_n: f64,
    pub molecules: Option<Molecules>,
    #[serde(default)]
    pub kappa: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WindowKind {
    None,
    HalfCosineTail,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumConfig {
    pub omega_min: Option<f64>,
    pub omega_max: Option<f64>,
    #[serde(default = "default_points")]
    pub n_points: usize,
    #[serde(default = "default_window")]
    pub window: WindowKind,
    #[serde(default = "default_fraction")]
    pub window_fraction: f64,
}

fn default_points() -> usize {
    2001
}

fn default_window() -> WindowKind {
    WindowKind::HalfCosineTail
}

fn default_fraction() -> f64 {
    0.1
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        Self {
            omega_min: None,
            omega_max: None,
            n_points: default_points(),
            window: default_window(),
            window_fraction: default_fraction(),
        }
    }
}

impl SpectrumConfig {
    pub fn window(&self) -> Window {
        match self.window {
            WindowKind::None => Window::None,
            WindowKind::HalfCosineTail => Window::HalfCosineTail {
                fraction: self.window_fraction,
            },
        }
    }
}

/// Initial state: `"photon"` or `"h0:<k>"`, the `k`-th eigenstate of the
/// zeroth block in ascending energy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Initial {
    Photon,
    H0Eigenstate(usize),
}

impl FromStr for Initial {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "photon" {
            return Ok(Initial::Photon);
        }
        s.strip_prefix("h0:")
            .and_then(|k| k.parse().ok())
            .map(Initial::H0Eigenstate)
            .ok_or_else(|| {
                format!("unknown initial state `{s}`, expected \"photon\" or \"h0:<k>\"")
            })
    }
}

impl fmt::Display for Initial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Initial::Photon => f.write_str("photon"),
            Initial::H0Eigenstate(k) => write!(f, "h0:{k}"),
        }
    }
}

impl Serialize for Initial {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Initial {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Propagation {
    Auto,
    Spectral,
    Stepping,
    Krylov,
}

impl From<Propagation> for polariton::dynamics::Method {
    fn from(p: Propagation) -> Self {
        use polariton::dynamics::Method;
        match p {
            Propagation::Auto => Method::Auto,
            Propagation::Spectral => Method::Spectral,
            Propagation::Stepping => Method::Stepping,
            Propagation::Krylov => Method::Krylov,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsConfig {
    #[serde(default = "default_initial")]
    pub initial: Initial,
    #[serde(default = "default_propagation")]
    pub propagation: Propagation,
}

fn default_initial() -> Initial {
    Initial::Photon
}

fn default_propagation() -> Propagation {
    Propagation::Auto
}

impl Default for DynamicsConfig {
    fn default() -> Self {
        Self {
            initial: default_initial(),
            propagation: default_propagation(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateConfig {
    /// Defaults to the lowest eigenstate below the threshold.
    pub dark_index: Option<usize>,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
}

fn default_threshold() -> f64 {
    DEFAULT_DARK_THRESHOLD
}

impl Default for RateConfig {
    fn default() -> Self {
        Self {
            dark_index: None,
            threshold: default_threshold(),
        }
    }
}

/// `"lowest_dark"`, `"lower_polariton"`, `"upper_polariton"` or an explicit
/// eigenstate index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum StateSelector {
    Index(usize),
    Named(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensitiesConfig {
    #[serde(default = "default_states")]
    pub states: Vec<StateSelector>,
    #[serde(default)]
    pub mode: usize,
    #[serde(default = "default_x_min")]
    pub x_min: f64,
    #[serde(default = "default_x_max")]
    pub x_max: f64,
    #[serde(default = "default_points")]
    pub n_points: usize,
    #[serde(default = "default_threshold")]
    pub dark_threshold: f64,
}

fn default_states() -> Vec<StateSelector> {
    ["lowest_dark", "lower_polariton", "upper_polariton"]
        .map(|s| StateSelector::Named(s.into()))
        .to_vec()
}

fn default_x_min() -> f64 {
    -5.0
}

fn default_x_max() -> f64 {
    10.0
}

impl Default for DensitiesConfig {
    fn default() -> Self {
        Self {
            states: default_states(),
            mode: 0,
            x_min: default_x_min(),
            x_max: default_x_max(),
            n_points: default_points(),
            dark_threshold: default_threshold(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidateConfig {
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
}

fn default_tolerance() -> f64 {
    1e-8
}

impl Default for ValidateConfig {
    fn default() -> Self {
        Self {
            tolerance: default_tolerance(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_directory")]
    pub directory: PathBuf,
    /// File name without extension; defaults to the task name.
    pub stem: Option<String>,
}

fn default_directory() -> PathBuf {
    PathBuf::from(".")
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            directory: default_directory(),
            stem: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Optional; must agree with the subcommand when present.
    pub task: Option<Task>,
    pub method: RunMethod,
    pub molecule: MoleculeConfig,
    pub cavity: CavityConfig,
    pub grid: Option<TimeGrid>,
    #[serde(default)]
    pub spectrum: SpectrumConfig,
    #[serde(default)]
    pub dynamics: DynamicsConfig,
    #[serde(default)]
    pub rate: RateConfig,
    #[serde(default)]
    pub densities: DensitiesConfig,
    #[serde(default)]
    pub validate: ValidateConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

fn bad(key: &str, msg: impl fmt::Display) -> CliError {
    CliError::Config(format!("`{key}`: {msg}"))
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn model(&self) -> MolecularModel {
        MolecularModel::new(
            self.molecule.electronic_gap,
            self.molecule
                .modes
                .iter()
                .map(|m| VibrationalMode::new(m.frequency, m.huang_rhys, m.n_max))
                .collect(),
        )
    }

    pub fn ensemble(&self) -> Ensemble {
        self.cavity.molecules.map_or(Ensemble::Infinite, |m| m.0)
    }

    pub fn cavity(&self) -> CavityParams {
        CavityParams::new(
            self.cavity.omega_c,
            self.cavity.g_sqrt_n,
            self.ensemble(),
            self.cavity.kappa,
        )
    }

    pub fn time_grid(&self) -> Result<TimeGrid, CliError> {
        self.grid
            .ok_or_else(|| bad("grid", "this task needs a [grid] section"))
    }

    pub fn frequency_grid(&self, lo: f64, hi: f64) -> Result<FrequencyGrid, CliError> {
        let s = &self.spectrum;
        FrequencyGrid::new(
            s.omega_min.unwrap_or(lo),
            s.omega_max.unwrap_or(hi),
            s.n_points,
        )
        .map_err(|e| bad("spectrum", e))
    }

    /// Fills defaults that depend on the method and checks the method/task
    /// compatibility matrix. Every failure names the offending key.
    pub fn resolve(mut self, task: Task) -> Result<Self, CliError> {
        if let Some(t) = self.task {
            if t != task {
                return Err(bad(
                    "task",
                    format!("config says `{t}` but the command is `{task}`"),
                ));
            }
        }
        self.task = Some(task);

        match (self.method, self.cavity.molecules) {
            (RunMethod::Infinite, Some(Molecules(Ensemble::Finite(_)))) => {
                return Err(bad(
                    "cavity.molecules",
                    "method `infinite` needs molecules = \"infinite\" or no value",
                ))
            }
            (RunMethod::Infinite, _) => self.cavity.molecules = Some(Molecules(Ensemble::Infinite)),
            (_, None | Some(Molecules(Ensemble::Infinite))) => {
                return Err(bad(
                    "cavity.molecules",
                    format!("method `{}` needs a finite molecule count", self.method),
                ))
            }
            (_, Some(Molecules(Ensemble::Finite(_)))) => {}
        }

        let allowed = match task {
            Task::Spectrum | Task::Dynamics => true,
            Task::Rate => self.method != RunMethod::Infinite && self.method != RunMethod::Oracle,
            Task::Densities => matches!(self.method, RunMethod::Infinite | RunMethod::Cute(0)),
            Task::Validate => matches!(self.method, RunMethod::Oracle | RunMethod::ExactN),
        };
        if !allowed {
            return Err(bad(
                "method",
                format!("`{}` cannot be used for task `{task}`", self.method),
            ));
        }

        self.model().validate().map_err(|e| bad("molecule", e))?;
        self.cavity().validate().map_err(|e| bad("cavity", e))?;
        if matches!(task, Task::Spectrum | Task::Dynamics | Task::Validate) {
            self.time_grid()?.validate().map_err(|e| bad("grid", e))?;
        }
        if task == Task::Spectrum {
            self.spectrum().map_err(|e| bad("spectrum", e))?;
        }
        if task == Task::Densities && self.densities.mode >= self.molecule.modes.len() {
            return Err(bad(
                "densities.mode",
                format!("model has {} modes", self.molecule.modes.len()),
            ));
        }
        if task == Task::Densities
            && !(self.densities.x_max > self.densities.x_min && self.densities.n_points >= 2)
        {
            return Err(bad("densities", "needs x_max > x_min and n_points >= 2"));
        }
        if task == Task::Validate && !(self.validate.tolerance > 0.0) {
            return Err(bad("validate.tolerance", "must be positive"));
        }
        Ok(self)
    }

    fn spectrum(&self) -> Result<(), String> {
        let s = &self.spectrum;
        if s.n_points < 2 {
            return Err("n_points must be >= 2".into());
        }
        if !(s.window_fraction > 0.0 && s.window_fraction <= 1.0) {
            return Err("window_fraction must lie in (0, 1]".into());
        }
        if let (Some(a), Some(b)) = (s.omega_min, s.omega_max) {
            if !(b > a) {
                return Err("omega_max must exceed omega_min".into());
            }
        }
        Ok(())
    }

    pub fn stem(&self, task: Task) -> String {
        self.output.stem.clone().unwrap_or_else(|| task.to_string())
    }
}
