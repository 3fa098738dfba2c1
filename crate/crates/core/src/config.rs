//! Experiment configuration: JSON schema, defaults and validation.

use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::disorder::{DisorderError, DisorderModel};
use crate::lattice::{Boundary, Lattice, LatticeError, LatticeSpec};
use crate::mc::McPlan;
use crate::quad::QuadOptions;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: line {line}, column {column}: {message}")]
    Parse { path: String, line: usize, column: usize, message: String },
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
    #[error(transparent)]
    Disorder(#[from] DisorderError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DisorderKind {
    Iid,
    Correlated,
    Toymodel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DisorderConfig {
    pub kind: DisorderKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    /// Correlated pair for the toymodel; defaults to the central pair.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pair: Option<(usize, usize)>,
    /// Whitespace-separated dense `T`, one row per line.
    #[serde(default, rename = "T_file", skip_serializing_if = "Option::is_none")]
    pub t_file: Option<String>,
    /// `T = I + c·A` with `A` the nearest-neighbour adjacency.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nn_coupling: Option<f64>,
}

impl Default for DisorderConfig {
    fn default() -> Self {
        Self { kind: DisorderKind::Iid, delta: None, pair: None, t_file: None, nn_coupling: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergyGrid {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl EnergyGrid {
    pub fn values(&self) -> Vec<f64> {
        match self.points {
            0 => Vec::new(),
            1 => vec![self.start],
            n => (0..n).map(|i| self.start + (self.stop - self.start) * i as f64 / (n - 1) as f64).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeConfig {
    #[serde(rename = "E", default, skip_serializing_if = "Option::is_none")]
    pub energy: Option<f64>,
    #[serde(rename = "E_grid", default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<EnergyGrid>,
    #[serde(rename = "E_tilde", default, skip_serializing_if = "Option::is_none")]
    pub energy_tilde: Option<f64>,
    pub epsilon: f64,
    pub lambda: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self { energy: None, grid: None, energy_tilde: None, epsilon: 0.1, lambda: 1.0 }
    }
}

impl ProbeConfig {
    /// The energy grid, or the single energy `E` (default 0).
    pub fn energies(&self) -> Vec<f64> {
        match (&self.grid, self.energy) {
            (Some(g), _) => g.values(),
            (None, Some(e)) => vec![e],
            (None, None) => vec![0.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McConfig {
    pub samples: usize,
    pub seed: u64,
    #[serde(default = "default_batch")]
    pub batch: usize,
}

fn default_batch() -> usize {
    1024
}

impl Default for McConfig {
    fn default() -> Self {
        Self { samples: 10_000, seed: 0, batch: default_batch() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    /// File stem, relative to `--out`; defaults to the subcommand name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    pub format: OutputFormat,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { path: None, format: OutputFormat::Csv }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Monte Carlo agreement in standard errors.
    pub sigma: f64,
    /// Fraction of grid points that must agree.
    pub pass_fraction: f64,
    pub quad_rel: f64,
    pub quad_abs: f64,
    /// Relative tolerance for oracle comparisons.
    pub rel: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { sigma: 3.0, pass_fraction: 0.95, quad_rel: 1e-9, quad_abs: 1e-13, rel: 1e-4 }
    }
}

impl Tolerances {
    pub fn quad(&self) -> QuadOptions {
        QuadOptions::new(self.quad_rel, self.quad_abs)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub deltas: Vec<f64>,
    /// Also run the two-site decomposition for each δ.
    #[serde(default)]
    pub check_decomposition: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self { deltas: vec![0.05, 0.1, 0.15, 0.2], check_decomposition: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundsConfig {
    pub eta: f64,
    pub delta: f64,
    pub vectors: usize,
    /// Side lengths for the `K` sweep.
    pub sides: Vec<usize>,
}

impl Default for BoundsConfig {
    fn default() -> Self {
        Self { eta: 1.0, delta: 0.25, vectors: 100, sides: vec![8, 16, 32] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_lattice")]
    pub lattice: LatticeSpec,
    #[serde(default)]
    pub disorder: DisorderConfig,
    #[serde(default)]
    pub probe: ProbeConfig,
    #[serde(default)]
    pub mc: McConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub bounds: BoundsConfig,
    /// Green's function entry `(j, k)` for `g2`.
    #[serde(default)]
    pub entry: (usize, usize),
}

fn strip_location(message: &str) -> String {
    match message.rfind(" at line ") {
        Some(i) => message[..i].to_string(),
        None => message.to_string(),
    }
}

fn default_lattice() -> LatticeSpec {
    LatticeSpec::new(1, 16, Boundary::Periodic)
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            lattice: default_lattice(),
            disorder: DisorderConfig::default(),
            probe: ProbeConfig::default(),
            mc: McConfig::default(),
            output: OutputConfig::default(),
            tolerances: Tolerances::default(),
            sweep: SweepConfig::default(),
            bounds: BoundsConfig::default(),
            entry: (0, 0),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str, origin: &str) -> Result<Self, ConfigError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| ConfigError::Parse {
            path: origin.to_string(),
            line: e.line(),
            column: e.column(),
            message: strip_location(&e.to_string()),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Io { path: path.display().to_string(), message: e.to_string() })?;
        let mut cfg = Self::from_json(&text, &path.display().to_string())?;
        // relative T_file paths are resolved against the config's directory
        if let (Some(t), Some(dir)) = (&cfg.disorder.t_file, path.parent()) {
            if Path::new(t).is_relative() && !dir.as_os_str().is_empty() {
                cfg.disorder.t_file = Some(dir.join(t).display().to_string());
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.lattice.validate()?;
        let p = &self.probe;
        if p.energy.is_some() && p.grid.is_some() {
            return Err(ConfigError::Invalid("probe: give either E or E_grid, not both".into()));
        }
        if let Some(g) = &p.grid {
            if g.points == 0 || !g.start.is_finite() || !g.stop.is_finite() {
                return Err(ConfigError::Invalid("probe.E_grid needs finite bounds and points >= 1".into()));
            }
        }
        if !(p.epsilon >= 0.0 && p.epsilon.is_finite()) {
            return Err(ConfigError::Invalid(format!("probe.epsilon must be >= 0, got {}", p.epsilon)));
        }
        if !(p.lambda >= 0.0 && p.lambda.is_finite()) {
            return Err(ConfigError::Invalid(format!("probe.lambda must be >= 0, got {}", p.lambda)));
        }
        if self.mc.samples < 2 || self.mc.batch == 0 {
            return Err(ConfigError::Invalid("mc: samples must be >= 2 and batch >= 1".into()));
        }
        let t = &self.tolerances;
        if !(t.sigma > 0.0 && (0.0..=1.0).contains(&t.pass_fraction) && t.quad_rel > 0.0 && t.quad_abs >= 0.0 && t.rel > 0.0) {
            return Err(ConfigError::Invalid("tolerances out of range".into()));
        }
        let d = &self.disorder;
        match d.kind {
            DisorderKind::Toymodel if d.delta.is_none() && self.sweep.deltas.is_empty() => {
                return Err(ConfigError::Invalid("toymodel disorder needs disorder.delta or sweep.deltas".into()));
            }
            DisorderKind::Correlated if d.t_file.is_some() == d.nn_coupling.is_some() => {
                return Err(ConfigError::Invalid("correlated disorder needs exactly one of T_file, nn_coupling".into()));
            }
            DisorderKind::Iid if d.delta.is_some() || d.t_file.is_some() || d.nn_coupling.is_some() || d.pair.is_some() => {
                return Err(ConfigError::Invalid("iid disorder takes no further parameters".into()));
            }
            _ => {}
        }
        Ok(())
    }

    pub fn lattice(&self) -> Result<Lattice, ConfigError> {
        Ok(Lattice::new(self.lattice)?)
    }

    pub fn plan(&self) -> McPlan {
        McPlan { samples: self.mc.samples, seed: self.mc.seed, batch: self.mc.batch }
    }

    /// Correlated pair of a toymodel, defaulting to the lattice's central pair.
    pub fn pair(&self, lattice: &Lattice) -> Result<(usize, usize), ConfigError> {
        match self.disorder.pair {
            Some(p) => Ok(p),
            None => lattice
                .central_pair()
                .ok_or_else(|| ConfigError::Invalid("toymodel needs at least two sites".into())),
        }
    }

    /// The disorder model; a toymodel uses `delta` (or the override).
    pub fn model_with_delta(&self, lattice: &Lattice, delta: Option<f64>) -> Result<DisorderModel, ConfigError> {
        let d = &self.disorder;
        Ok(match d.kind {
            DisorderKind::Iid => DisorderModel::Iid,
            DisorderKind::Correlated => match (&d.t_file, d.nn_coupling) {
                (Some(path), _) => DisorderModel::correlated(read_matrix(path)?)?,
                (None, Some(c)) => DisorderModel::nearest_neighbor(lattice, c)?,
                (None, None) => unreachable!("rejected by validate"),
            },
            DisorderKind::Toymodel => {
                let delta = delta
                    .or(d.delta)
                    .ok_or_else(|| ConfigError::Invalid("toymodel disorder needs disorder.delta".into()))?;
                DisorderModel::toymodel(lattice, delta, self.pair(lattice)?)?
            }
        })
    }

    pub fn model(&self, lattice: &Lattice) -> Result<DisorderModel, ConfigError> {
        self.model_with_delta(lattice, None)
    }

    /// Pretty JSON of the fully resolved configuration.
    pub fn resolved_json(&self) -> String {
        serde_json::to_string(self).expect("configuration is always serialisable")
    }
}

fn read_matrix(path: &str) -> Result<DMatrix<f64>, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io { path: path.into(), message: e.to_string() })?;
    let rows: Vec<Vec<f64>> = text
        .lines()
        .filter(|l| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
        .map(|l| {
            l.split(|c: char| c.is_whitespace() || c == ',')
                .filter(|s| !s.is_empty())
                .map(|s| s.parse::<f64>())
                .collect::<Result<Vec<f64>, _>>()
        })
        .collect::<Result<_, _>>()
        .map_err(|e| ConfigError::Invalid(format!("{path}: {e}")))?;
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(ConfigError::Invalid(format!("{path}: T must be square")));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}
