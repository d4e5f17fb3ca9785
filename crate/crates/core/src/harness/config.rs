//! Experiment configuration: one JSON document, unknown keys rejected.
//!
//! ```json
//! {
//!   "system": { "diffusion": [0.1, 0.1],
//!               "kernels": [[{"family": "Ws", "gamma": 1, "s": 3.75}, {"family": "Zero"}],
//!                           [{"family": "Zero"}, {"family": "Ws", "gamma": 1, "s": 2.4}]],
//!               "initial": [{"kind": "Indicator"}, {"kind": "Indicator"}] },
//!   "grid":   { "backend": "finite_volume", "l": 20, "t_end": 20 },
//!   "sweep":  { "parameter": "uniform_gamma", "values": [1.0, 1.105, 1.221] },
//!   "seed": 0,
//!   "output_dir": "out"
//! }
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::solver::finite_volume::FvConfig;
use crate::solver::SolverConfig;
use crate::system::{InitialData, InteractionSystem};

/// Calibrated Nash constant for d = 1 (mixture search on [−20, 20], 2048
/// points, times the 1.05 safety factor).
pub const DEFAULT_NASH_CONSTANT: f64 = 0.4282;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    Spectral,
    #[default]
    FiniteVolume,
}

/// Graded-mesh and time-step controls for the finite-volume backend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeshConfig {
    pub h_min: f64,
    pub growth: f64,
    pub h_max: f64,
    pub refine: u32,
    pub dt0: f64,
    pub dt_growth: f64,
    pub dt_max: f64,
}

impl Default for MeshConfig {
    fn default() -> Self {
        let f = FvConfig::default();
        MeshConfig {
            h_min: f.h_min,
            growth: f.growth,
            h_max: f.h_max,
            refine: f.refine,
            dt0: f.dt0,
            dt_growth: f.dt_growth,
            dt_max: f.dt_max,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridConfig {
    pub backend: Backend,
    /// Half-width of the domain.
    pub l: f64,
    /// Spectral grid size (power of two).
    pub m: usize,
    /// Spectral time step.
    pub dt: f64,
    pub t_end: f64,
    pub dealias: bool,
    pub cfl: f64,
    pub record_every: usize,
    pub blowup_threshold: f64,
    pub mesh: MeshConfig,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            backend: Backend::FiniteVolume,
            l: 20.0,
            m: 2048,
            dt: 1e-3,
            t_end: 20.0,
            dealias: true,
            cfl: 0.5,
            record_every: 10,
            blowup_threshold: 1e12,
            mesh: MeshConfig::default(),
        }
    }
}

impl GridConfig {
    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig {
            dt: self.dt,
            cfl: self.cfl,
            dealias: self.dealias,
            t_end: self.t_end,
            blowup_threshold: self.blowup_threshold,
            record_every: self.record_every.max(1),
        }
    }

    pub fn fv_config(&self) -> FvConfig {
        let m = &self.mesh;
        FvConfig {
            h_min: m.h_min,
            growth: m.growth,
            h_max: m.h_max,
            refine: m.refine,
            dt0: m.dt0,
            dt_growth: m.dt_growth,
            dt_max: m.dt_max,
            t_end: self.t_end,
            blowup_threshold: self.blowup_threshold,
            record_every: self.record_every.max(1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    /// Every non-zero kernel gets strength γ.
    #[default]
    UniformGamma,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default)]
    pub parameter: SweepParameter,
    /// γ values (positive, strictly increasing).
    pub values: Vec<f64>,
}

impl SweepConfig {
    /// γ = e^x for each x.
    pub fn from_ln(ln_values: &[f64]) -> Self {
        SweepConfig { parameter: SweepParameter::UniformGamma, values: ln_values.iter().map(|x| x.exp()).collect() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FitX {
    #[default]
    LnGamma,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FitY {
    #[default]
    LnL2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct FitConfig {
    pub x: FitX,
    pub y: FitY,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SteadyConfig {
    /// Trailing window length.
    pub window: f64,
    /// Relative change of every ‖u_i‖₂ over the window.
    pub tol: f64,
}

impl Default for SteadyConfig {
    fn default() -> Self {
        SteadyConfig { window: 2.0, tol: 1e-5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub system: InteractionSystem,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    #[serde(default)]
    pub fit: FitConfig,
    #[serde(default)]
    pub steady: SteadyConfig,
    #[serde(default = "default_nash")]
    pub nash_constant: f64,
    /// Mixed into every random initial-data preset.
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

fn default_nash() -> f64 {
    DEFAULT_NASH_CONSTANT
}

impl ExperimentConfig {
    pub fn new(system: InteractionSystem) -> Self {
        ExperimentConfig {
            system,
            grid: GridConfig::default(),
            sweep: None,
            fit: FitConfig::default(),
            steady: SteadyConfig::default(),
            nash_constant: DEFAULT_NASH_CONSTANT,
            seed: 0,
            output_dir: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.system.validate()?;
        let g = &self.grid;
        if !(g.l > 0.0 && g.l.is_finite()) {
            return Err(Error::Invalid("grid.l must be positive".into()));
        }
        if !(g.t_end > 0.0 && g.t_end.is_finite()) {
            return Err(Error::Invalid("grid.t_end must be positive".into()));
        }
        if g.backend == Backend::Spectral && !(g.dt > 0.0) {
            return Err(Error::Invalid("grid.dt must be positive".into()));
        }
        if g.mesh.refine == 0 {
            return Err(Error::Invalid("grid.mesh.refine must be ≥ 1".into()));
        }
        if let Some(s) = &self.sweep {
            if s.values.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
                return Err(Error::Invalid("sweep values must be positive".into()));
            }
            if s.values.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::Invalid("sweep values must be strictly increasing".into()));
            }
            if g.t_end <= self.steady.window {
                return Err(Error::Invalid("grid.t_end must exceed the steady-state window".into()));
            }
        }
        if !(self.steady.window > 0.0 && self.steady.tol > 0.0) {
            return Err(Error::Invalid("steady window and tolerance must be positive".into()));
        }
        if !(self.nash_constant > 0.0) {
            return Err(Error::Invalid("nash_constant must be positive".into()));
        }
        Ok(())
    }

    /// The system with the run seed mixed into random presets.
    pub fn seeded_system(&self) -> InteractionSystem {
        let mut sys = self.system.clone();
        for u in sys.initial.iter_mut() {
            if let InitialData::RandomBumps { seed, .. } = u {
                *seed ^= self.seed;
            }
        }
        sys
    }
}
