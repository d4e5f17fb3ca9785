//! One-dimensional solvers for the N-species system.
//!
//! Two backends share the diagnostics and termination logic:
//!
//! * [`spectral`] — periodic pseudo-spectral IMEX scheme on a uniform grid.
//!   The nonlocal term is exact to round-off; this is the reference solver.
//! * [`finite_volume`] — conservative finite volumes on a graded mesh with
//!   zero-flux walls. Aggregated steady states at large γ are sharp spikes
//!   (widths far below any affordable uniform grid spacing); the graded mesh
//!   resolves them where the spectral grid produces Gibbs noise.

pub mod finite_volume;
pub mod snapshot;
pub mod spectral;

use serde::{Deserialize, Serialize};

use crate::diagnostics::DiagnosticsRecord;

#[derive(Debug, Clone, PartialEq)]
pub struct GridState {
    /// Domain half-width; the grid covers [−L, L).
    pub l: f64,
    pub m: usize,
    pub t: f64,
    /// Cell values u_i(x_c), x_c = −L + c·Δx.
    pub u: Vec<Vec<f64>>,
    /// Wavenumbers k = πn/L in FFT order.
    pub khat: Vec<f64>,
}

impl GridState {
    pub fn dx(&self) -> f64 {
        2.0 * self.l / self.m as f64
    }

    pub fn x(&self, c: usize) -> f64 {
        -self.l + c as f64 * self.dx()
    }

    pub fn masses(&self) -> Vec<f64> {
        let dx = self.dx();
        self.u.iter().map(|u| u.iter().sum::<f64>() * dx).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub dt: f64,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    #[serde(default = "yes")]
    pub dealias: bool,
    pub t_end: f64,
    #[serde(default = "default_blowup")]
    pub blowup_threshold: f64,
    #[serde(default = "one")]
    pub record_every: usize,
}

fn default_cfl() -> f64 {
    0.5
}
fn yes() -> bool {
    true
}
fn default_blowup() -> f64 {
    1e12
}
fn one() -> usize {
    1
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig { dt: 1e-3, cfl: 0.5, dealias: true, t_end: 20.0, blowup_threshold: 1e12, record_every: 100 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    Completed,
    BlowUp,
    NonFinite,
    /// The observer asked to stop (e.g. a steady state was detected).
    Stopped,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub records: Vec<DiagnosticsRecord>,
    pub termination: Termination,
    pub steps: usize,
    pub t: f64,
    /// Relative mass change per species between the first and last record.
    pub mass_drift: Vec<f64>,
    /// Smallest cell value seen at any recorded time.
    pub min_value: f64,
}

pub(crate) fn mass_drift(first: &DiagnosticsRecord, last: &DiagnosticsRecord) -> Vec<f64> {
    first
        .mass
        .iter()
        .zip(&last.mass)
        .map(|(a, b)| if *a != 0.0 { ((b - a) / a).abs() } else { b.abs() })
        .collect()
}

/// Observer hook called on every record; returning `true` stops the run.
pub trait Observer {
    fn observe(&mut self, record: &DiagnosticsRecord) -> bool;
}

impl<F: FnMut(&DiagnosticsRecord) -> bool> Observer for F {
    fn observe(&mut self, record: &DiagnosticsRecord) -> bool {
        self(record)
    }
}

/// Never stops.
pub struct NoObserver;

impl Observer for NoObserver {
    fn observe(&mut self, _: &DiagnosticsRecord) -> bool {
        false
    }
}
