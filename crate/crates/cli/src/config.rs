//! JSON experiment configuration.

use std::fmt;
use std::path::{Path, PathBuf};

use maxent_core::dynamics::{RebuildPolicy, RestrictedSettings};
use maxent_core::geometry::GeometryKind;
use maxent_core::models::{InitialStateSpec, SpinChainSpec};
use maxent_core::ode::OdeSettings;
use maxent_core::operator::DEFAULT_MAX_DIM;
use maxent_core::projection::DEFAULT_RCOND;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub n_sites: usize,
    #[serde(default = "one")]
    pub coupling: f64,
    #[serde(default = "yes")]
    pub periodic: bool,
    #[serde(default = "default_max_dim")]
    pub max_dim: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    pub beta: f64,
    pub c1: f64,
    pub c2: f64,
    #[serde(default = "one")]
    pub zeta: f64,
    #[serde(default = "default_x0")]
    pub x0: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeometryChoice {
    Kmb,
    Covar,
}

impl GeometryChoice {
    pub fn kind(self) -> GeometryKind {
        match self {
            GeometryChoice::Kmb => GeometryKind::Kmb,
            GeometryChoice::Covar => GeometryKind::Covar,
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            GeometryChoice::Kmb => "kmb",
            GeometryChoice::Covar => "covar",
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RebuildChoice {
    #[default]
    EveryEvaluation,
    PerStep,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default = "default_rtol")]
    pub rtol: f64,
    #[serde(default = "default_atol")]
    pub atol: f64,
    #[serde(default)]
    pub rebuild: RebuildChoice,
    #[serde(default = "default_rcond")]
    pub rcond: f64,
    #[serde(default)]
    pub h_init: Option<f64>,
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            rtol: default_rtol(),
            atol: default_atol(),
            rebuild: RebuildChoice::default(),
            rcond: default_rcond(),
            h_init: None,
            max_steps: default_max_steps(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub directory: PathBuf,
    #[serde(default = "yes")]
    pub csv: bool,
    #[serde(default = "yes")]
    pub manifest: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelConfig,
    pub initial: InitialConfig,
    pub basis_level: usize,
    pub geometries: Vec<GeometryChoice>,
    pub t_max: f64,
    pub n_points: usize,
    #[serde(default)]
    pub solver: SolverConfig,
    pub outputs: OutputConfig,
    #[serde(default)]
    pub seed: u64,
}

fn one() -> f64 {
    1.0
}
fn yes() -> bool {
    true
}
fn default_x0() -> f64 {
    -0.3
}
fn default_max_dim() -> usize {
    DEFAULT_MAX_DIM
}
fn default_rtol() -> f64 {
    OdeSettings::default().rtol
}
fn default_atol() -> f64 {
    OdeSettings::default().atol
}
fn default_rcond() -> f64 {
    DEFAULT_RCOND
}
fn default_max_steps() -> usize {
    OdeSettings::default().max_steps
}

/// A config field that prevents the run, with the reason.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub field: String,
    pub reason: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.reason)
    }
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    /// The six-site ring runs at `beta = 1` (`c = 3`) or `beta = 0.1` (`c = 1`).
    pub fn preset(beta: f64, geometries: Vec<GeometryChoice>, directory: PathBuf) -> Self {
        let c = if beta >= 1.0 { 3.0 } else { 10.0 * beta };
        Self {
            model: ModelConfig {
                n_sites: 6,
                coupling: 1.0,
                periodic: true,
                max_dim: DEFAULT_MAX_DIM,
            },
            initial: InitialConfig {
                beta,
                c1: c,
                c2: c,
                zeta: 1.0,
                x0: -0.3,
            },
            basis_level: 4,
            geometries,
            t_max: 10.0,
            n_points: 200,
            solver: SolverConfig::default(),
            outputs: OutputConfig {
                directory,
                csv: true,
                manifest: true,
            },
            seed: 0,
        }
    }

    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut bad = |field: &str, reason: String| {
            out.push(Violation {
                field: field.into(),
                reason,
            })
        };
        if let Err(e) = self.chain_spec().validate() {
            bad("model", e.to_string());
        }
        if let Err(e) = self.initial_spec().validate() {
            bad("initial", e.to_string());
        }
        if !(self.t_max > 0.0 && self.t_max.is_finite()) {
            bad("t_max", "t_max must be positive".into());
        }
        if self.n_points < 2 {
            bad(
                "n_points",
                format!("n_points must be at least 2, got {}", self.n_points),
            );
        }
        if self.geometries.is_empty() {
            bad("geometries", "at least one geometry is required".into());
        }
        let mut seen = Vec::new();
        for g in &self.geometries {
            if seen.contains(g) {
                bad("geometries", format!("{} listed twice", g.tag()));
            }
            seen.push(*g);
        }
        if let Err(e) = self.ode_settings().validate() {
            bad("solver", e.to_string());
        }
        if !(self.solver.rcond > 0.0 && self.solver.rcond < 1.0) {
            bad(
                "solver.rcond",
                format!("rcond must be in (0, 1), got {}", self.solver.rcond),
            );
        }
        if self.outputs.directory.as_os_str().is_empty() {
            bad("outputs.directory", "output directory is empty".into());
        }
        out
    }

    pub fn chain_spec(&self) -> SpinChainSpec {
        SpinChainSpec {
            n_sites: self.model.n_sites,
            coupling: self.model.coupling,
            periodic: self.model.periodic,
            max_dim: self.model.max_dim,
        }
    }

    pub fn initial_spec(&self) -> InitialStateSpec {
        let i = &self.initial;
        InitialStateSpec {
            beta: i.beta,
            c1: i.c1,
            c2: i.c2,
            zeta: i.zeta,
            x0: i.x0,
        }
    }

    pub fn ode_settings(&self) -> OdeSettings {
        OdeSettings {
            rtol: self.solver.rtol,
            atol: self.solver.atol,
            h_init: self.solver.h_init,
            max_steps: self.solver.max_steps,
        }
    }

    pub fn restricted_settings(&self) -> RestrictedSettings {
        RestrictedSettings {
            ode: self.ode_settings(),
            rcond: self.solver.rcond,
            rebuild: match self.solver.rebuild {
                RebuildChoice::EveryEvaluation => RebuildPolicy::EveryEvaluation,
                RebuildChoice::PerStep => RebuildPolicy::PerStep,
            },
        }
    }

    pub fn times(&self) -> Vec<f64> {
        let last = (self.n_points - 1) as f64;
        (0..self.n_points)
            .map(|i| self.t_max * i as f64 / last)
            .collect()
    }
}
