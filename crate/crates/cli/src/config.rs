//! JSON run configuration.

use std::fmt;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use gfqi::{CutoffParams, FlowSpec, Grid, HamiltonianExpr, Partition};
use serde::{Deserialize, Serialize};

/// Marks errors caused by the configuration rather than the computation.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid configuration: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn config_err(msg: impl fmt::Display) -> anyhow::Error {
    ConfigError(msg.to_string()).into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompactSupport {
    pub r0: f64,
    pub w: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub generation: f64,
    pub gradient: f64,
    pub telescoping: f64,
    pub qi_ratio: f64,
    pub conformal: f64,
    pub gauge: f64,
    pub carnot: f64,
    pub first_variation: f64,
    pub action_vanishing: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            generation: 1e-6,
            gradient: 1e-3,
            telescoping: 1e-12,
            qi_ratio: 2.0,
            conformal: 1e-6,
            gauge: 1e-4,
            carnot: 1e-6,
            first_variation: 1e-3,
            action_vanishing: 1e-6,
        }
    }
}

/// Sizes of the randomized parts of the check suites.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Sampling {
    pub gradient_points: usize,
    pub telescoping_points: usize,
    pub probe_rays: usize,
    pub probe_radii: Vec<f64>,
    pub conformal_points: usize,
    pub gauge_paths: usize,
    pub trajectories: usize,
    pub path_intervals: usize,
}

impl Default for Sampling {
    fn default() -> Self {
        Sampling {
            gradient_points: 5,
            telescoping_points: 200,
            probe_rays: 32,
            probe_radii: vec![1.0, 10.0, 100.0],
            conformal_points: 50,
            gauge_paths: 10,
            trajectories: 5,
            path_intervals: 200,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<String>,
}

/// Initial state for the `flow` command; defaults to the origin over `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialState {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    #[serde(default)]
    pub z: f64,
    #[serde(default)]
    pub t0: f64,
    #[serde(default = "one")]
    pub t1: f64,
}

fn one() -> f64 {
    1.0
}

fn default_partition() -> usize {
    16
}

fn default_grid() -> Grid {
    Grid {
        min: -3.0,
        max: 3.0,
        count: 101,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dim: usize,
    pub hamiltonian: String,
    #[serde(default)]
    pub compact_support: Option<CompactSupport>,
    #[serde(default = "default_partition")]
    pub partition: usize,
    #[serde(default)]
    pub cutoff: CutoffParams,
    #[serde(default)]
    pub flow: FlowSpec,
    #[serde(default = "default_grid")]
    pub grid: Grid,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub sampling: Sampling,
    #[serde(default)]
    pub initial: Option<InitialState>,
    #[serde(default)]
    pub output: OutputConfig,
}

/// Validated objects built from a [`RunConfig`].
#[derive(Debug, Clone)]
pub struct Resolved {
    pub config: RunConfig,
    pub h: HamiltonianExpr,
    pub part: Partition,
    pub cutoff: CutoffParams,
    pub spec: FlowSpec,
    pub grid: Grid,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(config_err)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn resolve(self) -> Result<Resolved> {
        if self.dim == 0 {
            return Err(config_err("dim must be at least 1"));
        }
        let mut h = HamiltonianExpr::parse(&self.hamiltonian, self.dim)
            .map_err(|e| config_err(format!("hamiltonian {:?}: {e}", self.hamiltonian)))?;
        if let Some(cs) = &self.compact_support {
            h = h.compactify(cs.r0, cs.w).map_err(config_err)?;
        }
        let part = Partition::new(self.partition).map_err(config_err)?;
        self.cutoff.validate().map_err(config_err)?;
        self.flow.validate().map_err(config_err)?;
        self.grid.validate().map_err(config_err)?;
        let t = &self.tolerances;
        let tols = [
            t.generation,
            t.gradient,
            t.telescoping,
            t.qi_ratio,
            t.conformal,
            t.gauge,
            t.carnot,
            t.first_variation,
            t.action_vanishing,
        ];
        if tols.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(config_err("tolerances must be positive and finite"));
        }
        if self.sampling.path_intervals < gfqi::action::MIN_INTERVALS {
            return Err(config_err(format!(
                "sampling.path_intervals must be at least {}",
                gfqi::action::MIN_INTERVALS
            )));
        }
        if let Some(init) = &self.initial {
            if init.q.len() != self.dim || init.p.len() != self.dim {
                return Err(config_err("initial.q and initial.p must have length dim"));
            }
            if init.t0 == init.t1 {
                return Err(config_err("initial.t0 and initial.t1 must differ"));
            }
        }
        Ok(Resolved {
            h,
            part,
            cutoff: self.cutoff,
            spec: self.flow,
            grid: self.grid,
            config: self,
        })
    }
}
