//! Periodic pseudo-spectral IMEX scheme:
//!
//!   û^{n+1} = (û^n − Δt·ik·ĝ^n) / (1 + Δt D k²),  g = u·∂_x(Σ_j K_ij ∗ u_j)
//!
//! Diffusion is implicit, the nonlocal flux explicit. The k = 0 mode is left
//! untouched, so mass is conserved by construction.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::{mass_drift, GridState, NoObserver, Observer, RunOutput, SolverConfig, Termination};
use crate::diagnostics::{self, Cells, DiagnosticsRecord};
use crate::error::{Error, Result};
use crate::system::{InitialData, InteractionSystem};

pub struct SpectralSolver {
    system: InteractionSystem,
    l: f64,
    m: usize,
    /// K̂_ij per mode, `None` for zero kernels.
    kernel_hat: Vec<Vec<Option<Vec<f64>>>>,
    khat: Vec<f64>,
    keep: Vec<bool>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    p: Vec<f64>,
    masses0: Vec<f64>,
}

impl std::fmt::Debug for SpectralSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralSolver").field("l", &self.l).field("m", &self.m).finish()
    }
}

fn wavenumbers(l: f64, m: usize) -> Vec<f64> {
    (0..m)
        .map(|idx| {
            let n = if idx <= m / 2 { idx as f64 } else { idx as f64 - m as f64 };
            std::f64::consts::PI * n / l
        })
        .collect()
}

impl SpectralSolver {
    /// Precompute kernel transforms for the grid [−L, L) with M cells.
    pub fn new(system: &InteractionSystem, l: f64, m: usize) -> Result<Self> {
        system.validate()?;
        if m < 8 || !m.is_power_of_two() {
            return Err(Error::BadResolution(format!("M = {m} must be a power of two ≥ 8")));
        }
        if !(l > 0.0) {
            return Err(Error::BadResolution(format!("L = {l} must be positive")));
        }
        let reach = system.support_radius();
        if reach >= l {
            return Err(Error::DomainTooSmall { l, radius: reach });
        }
        let mut kernel_hat = Vec::new();
        for row in &system.kernels {
            let mut r = Vec::new();
            for k in row {
                r.push(if k.is_zero() {
                    None
                } else {
                    Some(k.fourier_coefficients(l, m)?.iter().map(|z| z.re).collect())
                });
            }
            kernel_hat.push(r);
        }
        let mut planner = FftPlanner::new();
        // 2/3 rule: keep |n| ≤ M/3
        let keep = (0..m)
            .map(|idx| {
                let n = if idx <= m / 2 { idx } else { m - idx };
                3 * n <= m
            })
            .collect();
        let masses0 = if system.initial.is_empty() { vec![0.0; system.n()] } else { system.masses() };
        Ok(SpectralSolver {
            system: system.clone(),
            l,
            m,
            kernel_hat,
            khat: wavenumbers(l, m),
            keep,
            fwd: planner.plan_fft_forward(m),
            inv: planner.plan_fft_inverse(m),
            p: system.p(),
            masses0,
        })
    }

    pub fn system(&self) -> &InteractionSystem {
        &self.system
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.l / self.m as f64
    }

    /// Cell averages of the system's initial data (zero when none is given).
    pub fn init(&self) -> GridState {
        let n = self.system.n();
        let u = (0..n)
            .map(|i| match self.system.initial.get(i) {
                Some(data) => self.sample(data),
                None => vec![0.0; self.m],
            })
            .collect();
        GridState { l: self.l, m: self.m, t: 0.0, u, khat: self.khat.clone() }
    }

    /// Cell averages over [x_c − Δx/2, x_c + Δx/2]; exact for every preset.
    pub fn sample(&self, data: &InitialData) -> Vec<f64> {
        let dx = self.dx();
        (0..self.m)
            .map(|c| {
                let x = -self.l + c as f64 * dx;
                data.cell_integral(x - 0.5 * dx, x + 0.5 * dx) / dx
            })
            .collect()
    }

    /// Build a state from explicit cell values.
    pub fn state_from(&self, u: Vec<Vec<f64>>) -> Result<GridState> {
        if u.len() != self.system.n() || u.iter().any(|v| v.len() != self.m) {
            return Err(Error::BadResolution("state shape does not match the solver".into()));
        }
        Ok(GridState { l: self.l, m: self.m, t: 0.0, u, khat: self.khat.clone() })
    }

    fn forward(&self, u: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = u.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.fwd.process(&mut buf);
        buf
    }

    fn inverse_real(&self, mut buf: Vec<Complex64>) -> Vec<f64> {
        self.inv.process(&mut buf);
        let scale = 1.0 / self.m as f64;
        let peak = buf.iter().fold(0.0f64, |a, z| a.max(z.re.abs()));
        debug_assert!(
            buf.iter().all(|z| z.im.abs() <= 1e-12 * (1.0 + peak)),
            "spectral result is not real"
        );
        buf.iter().map(|z| z.re * scale).collect()
    }

    /// i·k with the Nyquist mode dropped (its derivative is not real).
    fn ik(&self, idx: usize) -> Complex64 {
        if idx == self.m / 2 {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new(0.0, self.khat[idx])
        }
    }

    fn velocity_from_hat(&self, uhat: &[Vec<Complex64>]) -> Vec<Vec<f64>> {
        let n = self.system.n();
        (0..n)
            .map(|i| {
                let mut acc = vec![Complex64::new(0.0, 0.0); self.m];
                let mut any = false;
                for (j, kh) in self.kernel_hat[i].iter().enumerate() {
                    if let Some(kh) = kh {
                        any = true;
                        for idx in 0..self.m {
                            acc[idx] += kh[idx] * uhat[j][idx];
                        }
                    }
                }
                if !any {
                    return vec![0.0; self.m];
                }
                for (idx, z) in acc.iter_mut().enumerate() {
                    *z *= self.ik(idx);
                }
                self.inverse_real(acc)
            })
            .collect()
    }

    /// v_i = ∂_x Σ_j K_ij ∗ u_j.
    pub fn nonlocal_velocity(&self, state: &GridState) -> Vec<Vec<f64>> {
        let uhat: Vec<Vec<Complex64>> = state.u.iter().map(|u| self.forward(u)).collect();
        self.velocity_from_hat(&uhat)
    }

    /// Largest stable step for the current state under `cfl`.
    pub fn cfl_limit(&self, v: &[Vec<f64>], cfl: f64) -> f64 {
        let vmax = v.iter().flatten().fold(0.0f64, |a, x| a.max(x.abs()));
        if vmax == 0.0 {
            f64::INFINITY
        } else {
            cfl * self.dx() / vmax
        }
    }

    /// One IMEX step of size `config.dt`.
    pub fn step(&self, state: &mut GridState, config: &SolverConfig) -> Result<()> {
        self.step_dt(state, config, config.dt)
    }

    fn step_dt(&self, state: &mut GridState, config: &SolverConfig, dt: f64) -> Result<()> {
        let uhat: Vec<Vec<Complex64>> = state.u.iter().map(|u| self.forward(u)).collect();
        let v = self.velocity_from_hat(&uhat);
        let limit = self.cfl_limit(&v, config.cfl);
        if dt > limit * (1.0 + 1e-12) {
            return Err(Error::CflViolation { dt, limit });
        }
        let mut next = Vec::with_capacity(state.u.len());
        for (i, (u, vi)) in state.u.iter().zip(&v).enumerate() {
            let d = self.system.diffusion[i];
            let g: Vec<f64> = u.iter().zip(vi).map(|(a, b)| a * b).collect();
            let mut ghat = self.forward(&g);
            if config.dealias {
                for (idx, z) in ghat.iter_mut().enumerate() {
                    if !self.keep[idx] {
                        *z = Complex64::new(0.0, 0.0);
                    }
                }
            }
            let new_hat: Vec<Complex64> = (0..self.m)
                .map(|idx| {
                    let k = self.khat[idx];
                    (uhat[i][idx] - dt * self.ik(idx) * ghat[idx]) / (1.0 + dt * d * k * k)
                })
                .collect();
            let un = self.inverse_real(new_hat);
            if un.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite(i));
            }
            next.push(un);
        }
        state.u = next;
        state.t += dt;
        Ok(())
    }

    pub fn record(&self, state: &GridState) -> DiagnosticsRecord {
        diagnostics::record(state.t, &state.u, Cells::Uniform(self.dx()), &self.p, &self.masses0)
    }

    pub fn run(&self, state: &mut GridState, config: &SolverConfig) -> RunOutput {
        self.run_observed(state, config, &mut NoObserver)
    }

    /// Advance to `t_end`, shrinking steps to the CFL limit where needed.
    pub fn run_observed(&self, state: &mut GridState, config: &SolverConfig, obs: &mut dyn Observer) -> RunOutput {
        let first = self.record(state);
        let mut min_value = first.min_value;
        let mut records = vec![first];
        let mut steps = 0usize;
        let every = config.record_every.max(1);
        let mut termination = Termination::Completed;
        if obs.observe(&records[0]) {
            termination = Termination::Stopped;
        }
        while termination == Termination::Completed && state.t < config.t_end * (1.0 - 1e-12) {
            let remaining = config.t_end - state.t;
            let v = self.nonlocal_velocity(state);
            let dt = config.dt.min(remaining).min(self.cfl_limit(&v, config.cfl));
            match self.step_dt(state, config, dt) {
                Ok(()) => {}
                Err(Error::NonFinite(_)) => {
                    termination = Termination::NonFinite;
                    break;
                }
                Err(_) => {
                    termination = Termination::NonFinite;
                    break;
                }
            }
            steps += 1;
            let last = state.t >= config.t_end * (1.0 - 1e-12);
            if steps % every == 0 || last {
                let r = self.record(state);
                min_value = min_value.min(r.min_value);
                let blow = diagnostics::blowup_indicator(&r, config.blowup_threshold);
                let stop = obs.observe(&r);
                records.push(r);
                if blow {
                    termination = Termination::BlowUp;
                } else if stop && !last {
                    termination = Termination::Stopped;
                }
            }
        }
        let drift = mass_drift(&records[0], records.last().unwrap());
        RunOutput { records, termination, steps, t: state.t, mass_drift: drift, min_value }
    }
}
