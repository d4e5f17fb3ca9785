//! Single runs and γ-sweeps with steady-state detection.

use std::collections::VecDeque;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{Backend, ExperimentConfig};
use crate::diagnostics::DiagnosticsRecord;
use crate::error::{Error, Result};
use crate::solver::finite_volume::FvSolver;
use crate::solver::spectral::SpectralSolver;
use crate::solver::{RunOutput, Termination};
use crate::system::InteractionSystem;

/// Environment variable overriding the sweep worker count.
pub const WORKERS_ENV: &str = "NLADS_WORKERS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RunStatus {
    /// Every ‖u_i‖₂ settled within the trailing window.
    Converged,
    /// t_end reached without settling.
    NotConverged,
    BlowUp,
    NonFinite,
    /// The solver could not be constructed (see the message).
    Failed,
}

impl RunStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            RunStatus::Converged => "converged",
            RunStatus::NotConverged => "not_converged",
            RunStatus::BlowUp => "blow_up",
            RunStatus::NonFinite => "non_finite",
            RunStatus::Failed => "failed",
        }
    }
}

/// Trailing-window test: stops once every ‖u_i‖₂ has moved by less than
/// `tol` (relative) over [t − window, t].
#[derive(Debug, Clone)]
pub struct SteadyDetector {
    window: f64,
    tol: f64,
    history: VecDeque<(f64, Vec<f64>)>,
    pub steady_at: Option<f64>,
}

impl SteadyDetector {
    pub fn new(window: f64, tol: f64) -> Self {
        SteadyDetector { window, tol, history: VecDeque::new(), steady_at: None }
    }

    pub fn push(&mut self, r: &DiagnosticsRecord) -> bool {
        self.history.push_back((r.t, r.l2_norms.clone()));
        // keep exactly one record at or before t − window
        while self.history.len() > 1 && self.history[1].0 <= r.t - self.window {
            self.history.pop_front();
        }
        if self.history[0].0 > r.t - self.window {
            return false;
        }
        let settled = r.l2_norms.iter().enumerate().all(|(i, &now)| {
            self.history.iter().all(|(_, past)| (past[i] - now).abs() <= self.tol * now.abs())
        });
        if settled && self.steady_at.is_none() {
            self.steady_at = Some(r.t);
        }
        settled
    }
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub status: RunStatus,
    pub output: RunOutput,
    pub steady_at: Option<f64>,
}

impl RunResult {
    pub fn last(&self) -> &DiagnosticsRecord {
        self.output.records.last().expect("runs always record the initial state")
    }
}

fn status_of(output: &RunOutput, steady: Option<f64>) -> RunStatus {
    match output.termination {
        Termination::BlowUp => RunStatus::BlowUp,
        Termination::NonFinite => RunStatus::NonFinite,
        _ if steady.is_some() => RunStatus::Converged,
        _ => RunStatus::NotConverged,
    }
}

/// One run of `system` with the grid and steady-state settings of `cfg`.
pub fn run_system(cfg: &ExperimentConfig, system: &InteractionSystem) -> Result<RunResult> {
    match cfg.grid.backend {
        Backend::Spectral => {
            let solver = SpectralSolver::new(system, cfg.grid.l, cfg.grid.m)?;
            Ok(run_spectral(cfg, &solver))
        }
        Backend::FiniteVolume => {
            let solver = FvSolver::new(system, cfg.grid.l, &cfg.grid.fv_config())?;
            Ok(run_fv(cfg, &solver))
        }
    }
}

fn run_spectral(cfg: &ExperimentConfig, solver: &SpectralSolver) -> RunResult {
    let mut det = SteadyDetector::new(cfg.steady.window, cfg.steady.tol);
    let mut state = solver.init();
    let output = solver.run_observed(&mut state, &cfg.grid.solver_config(), &mut |r: &DiagnosticsRecord| det.push(r));
    let steady_at = det.steady_at;
    RunResult { status: status_of(&output, steady_at), output, steady_at }
}

fn run_fv(cfg: &ExperimentConfig, solver: &FvSolver) -> RunResult {
    let mut det = SteadyDetector::new(cfg.steady.window, cfg.steady.tol);
    let mut state = solver.init();
    let output = solver.run_observed(&mut state, &cfg.grid.fv_config(), &mut |r: &DiagnosticsRecord| det.push(r));
    let steady_at = det.steady_at;
    RunResult { status: status_of(&output, steady_at), output, steady_at }
}

pub fn run_single(cfg: &ExperimentConfig) -> Result<RunResult> {
    cfg.validate()?;
    run_system(cfg, &cfg.seeded_system())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepPoint {
    pub gamma: f64,
    pub status: RunStatus,
    /// Final diagnostics; `None` when the run could not start.
    pub record: Option<DiagnosticsRecord>,
    pub steady_at: Option<f64>,
    pub steps: usize,
    pub mass_drift: Vec<f64>,
    pub error: Option<String>,
}

impl SweepPoint {
    pub fn ln_gamma(&self) -> f64 {
        self.gamma.ln()
    }

    pub fn ln_l2(&self) -> Option<Vec<f64>> {
        self.record.as_ref().map(|r| r.l2_norms.iter().map(|v| v.ln()).collect())
    }

    fn from_run(gamma: f64, r: Result<RunResult>) -> Self {
        match r {
            Ok(r) => SweepPoint {
                gamma,
                status: r.status,
                record: Some(r.last().clone()),
                steady_at: r.steady_at,
                steps: r.output.steps,
                mass_drift: r.output.mass_drift,
                error: None,
            },
            Err(e) => SweepPoint {
                gamma,
                status: RunStatus::Failed,
                record: None,
                steady_at: None,
                steps: 0,
                mass_drift: vec![],
                error: Some(e.to_string()),
            },
        }
    }
}

/// Worker count: `NLADS_WORKERS` if set and positive, else all cores.
pub fn worker_count() -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(rayon::current_num_threads)
}

/// One run per sweep value, in parallel; results in sweep order. Per-run
/// failures are recorded in the point, not propagated.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<Vec<SweepPoint>> {
    cfg.validate()?;
    let values = match &cfg.sweep {
        Some(s) => s.values.clone(),
        None => return Err(Error::Invalid("config has no sweep section".into())),
    };
    if values.is_empty() {
        return Ok(vec![]);
    }
    let base = cfg.seeded_system();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(worker_count())
        .build()
        .map_err(|e| Error::Invalid(e.to_string()))?;
    let points = match cfg.grid.backend {
        Backend::Spectral => pool.install(|| {
            values
                .par_iter()
                .map(|&g| {
                    let sys = base.with_uniform_gamma(g);
                    let r = SpectralSolver::new(&sys, cfg.grid.l, cfg.grid.m).map(|s| run_spectral(cfg, &s));
                    SweepPoint::from_run(g, r)
                })
                .collect()
        }),
        Backend::FiniteVolume => {
            // the mesh and unit-strength convolution bands are shared by every run
            let template = FvSolver::new(&base.with_uniform_gamma(values[0]), cfg.grid.l, &cfg.grid.fv_config());
            match template {
                Err(e) => values.iter().map(|&g| SweepPoint::from_run(g, Err(Error::Invalid(e.to_string())))).collect(),
                Ok(template) => pool.install(|| {
                    values
                        .par_iter()
                        .map(|&g| {
                            let r = template.rebind(&base.with_uniform_gamma(g)).map(|s| run_fv(cfg, &s));
                            SweepPoint::from_run(g, r)
                        })
                        .collect()
                }),
            }
        }
    };
    Ok(points)
}

/// `gamma, ln_gamma, ln_l2_1..N, status, t_final` — one row per point.
pub fn write_sweep_csv<W: Write>(points: &[SweepPoint], n: usize, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["gamma".to_string(), "ln_gamma".to_string()];
    header.extend((1..=n).map(|i| format!("ln_l2_{i}")));
    header.push("status".into());
    header.push("t_final".into());
    w.write_record(&header)?;
    for p in points {
        let mut row = vec![p.gamma.to_string(), p.ln_gamma().to_string()];
        match p.ln_l2() {
            Some(v) => row.extend(v.iter().map(|x| x.to_string())),
            None => row.extend((0..n).map(|_| "NaN".to_string())),
        }
        row.push(p.status.as_str().into());
        row.push(p.record.as_ref().map_or("NaN".into(), |r| r.t.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_sweep_csv_file(points: &[SweepPoint], n: usize, path: &Path) -> Result<()> {
    write_sweep_csv(points, n, std::fs::File::create(path)?)
}
