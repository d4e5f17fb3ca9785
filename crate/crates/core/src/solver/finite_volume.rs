//! Conservative finite volumes on a graded mesh over [−L, L] with zero-flux
//! walls.
//!
//! * Mesh: symmetric about 0, cell widths h_min·growth^k capped at h_max.
//! * Fluxes: Scharfetter–Gummel, J = (D/Δx)[B(−δ)u_c − B(δ)u_{c+1}] with
//!   B(z) = z/(e^z − 1) and δ = (F_{c+1} − F_c)/D. Discrete equilibria
//!   u ∝ e^{F/D} are reproduced exactly, which is what the steady-state
//!   experiments measure.
//! * Convolution: exact cell integrals of the kernel through its
//!   antiderivative, so the W_s gradient singularity is never sampled.
//! * Time: backward Euler with F lagged. The tridiagonal system is solved for
//!   the cumulative mass P_c = Σ_{c′≤c} m_{c′}, which pins total mass exactly
//!   and stays well conditioned across twelve decades of cell width.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{mass_drift, NoObserver, Observer, RunOutput, Termination};
use crate::diagnostics::{self, Cells, DiagnosticsRecord};
use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::system::InteractionSystem;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FvConfig {
    pub h_min: f64,
    pub growth: f64,
    pub h_max: f64,
    /// Refinement level r: h_min/r, growth^{1/r}, h_max/r (about r× the cells).
    pub refine: u32,
    pub dt0: f64,
    pub dt_growth: f64,
    pub dt_max: f64,
    pub t_end: f64,
    pub blowup_threshold: f64,
    pub record_every: usize,
}

impl Default for FvConfig {
    fn default() -> Self {
        FvConfig {
            h_min: 1e-12,
            growth: 1.05,
            h_max: 0.05,
            refine: 1,
            dt0: 1e-4,
            dt_growth: 1.05,
            dt_max: 0.02,
            t_end: 20.0,
            blowup_threshold: 1e300,
            record_every: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FvMesh {
    pub l: f64,
    pub faces: Vec<f64>,
    pub centers: Vec<f64>,
    pub widths: Vec<f64>,
    /// Distances between neighbouring centres (length n − 1).
    pub dxc: Vec<f64>,
}

impl FvMesh {
    pub fn graded(l: f64, h_min: f64, growth: f64, h_max: f64) -> Result<Self> {
        if !(l > 0.0 && h_min > 0.0 && growth >= 1.0 && h_max >= h_min) {
            return Err(Error::BadResolution("need L > 0, h_min > 0, growth ≥ 1, h_max ≥ h_min".into()));
        }
        let mut half = vec![0.0];
        let mut h = h_min;
        while *half.last().unwrap() < l {
            let next = (half.last().unwrap() + h).min(l);
            half.push(next);
            h = (h * growth).min(h_max);
            if half.len() > 50_000_000 {
                return Err(Error::BadResolution("mesh too large".into()));
            }
        }
        // Absorb a sliver at the wall into its neighbour.
        let k = half.len();
        if k > 2 && half[k - 1] - half[k - 2] < 0.25 * (half[k - 2] - half[k - 3]) {
            half.remove(k - 2);
        }
        let mut faces: Vec<f64> = half.iter().skip(1).rev().map(|x| -x).collect();
        faces.extend_from_slice(&half);
        Ok(Self::from_faces(l, faces))
    }

    pub fn from_faces(l: f64, faces: Vec<f64>) -> Self {
        let centers: Vec<f64> = faces.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        let widths = faces.windows(2).map(|w| w[1] - w[0]).collect();
        let dxc = centers.windows(2).map(|w| w[1] - w[0]).collect();
        FvMesh { l, faces, centers, widths, dxc }
    }

    pub fn from_config(l: f64, cfg: &FvConfig) -> Result<Self> {
        let r = cfg.refine.max(1) as f64;
        Self::graded(l, cfg.h_min / r, cfg.growth.powf(1.0 / r), cfg.h_max / r)
    }

    pub fn len(&self) -> usize {
        self.widths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.widths.is_empty()
    }
}

/// Row-banded convolution matrix for a unit-strength kernel:
/// (K ∗ u)(x_c) = Σ_k u_k ∫_{cell k} K(x_c − y) dy.
#[derive(Debug)]
struct Band {
    rows: Vec<(usize, Vec<f64>)>,
}

impl Band {
    fn build(kernel: &KernelSpec, mesh: &FvMesh) -> Self {
        let r = kernel.support_radius();
        let f = &mesh.faces;
        let n = mesh.len();
        let rows = mesh
            .centers
            .iter()
            .map(|&x| {
                // cells k with faces[k+1] > x − r and faces[k] < x + r
                let lo = f.partition_point(|&y| y <= x - r).saturating_sub(1).min(n - 1);
                let hi = f.partition_point(|&y| y < x + r).min(n);
                let vals = (lo..hi.max(lo + 1))
                    .map(|k| kernel.eval_cumulative(x - f[k]) - kernel.eval_cumulative(x - f[k + 1]))
                    .collect();
                (lo, vals)
            })
            .collect();
        Band { rows }
    }

    fn apply_add(&self, scale: f64, u: &[f64], out: &mut [f64]) {
        for (o, (start, vals)) in out.iter_mut().zip(&self.rows) {
            let s: f64 = vals.iter().zip(&u[*start..]).map(|(a, b)| a * b).sum();
            *o += scale * s;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FvState {
    pub t: f64,
    /// Cell masses m_c = ∫_cell u.
    pub mass: Vec<Vec<f64>>,
}

#[derive(Clone)]
pub struct FvSolver {
    system: InteractionSystem,
    mesh: Arc<FvMesh>,
    /// Unit-strength bands shared between solvers that differ only in γ.
    bands: Vec<(KernelSpec, Arc<Band>)>,
    conv: Vec<Vec<Option<(f64, usize)>>>,
    p: Vec<f64>,
    masses0: Vec<f64>,
}

impl std::fmt::Debug for FvSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FvSolver").field("cells", &self.mesh.len()).field("l", &self.mesh.l).finish()
    }
}

fn unit(k: &KernelSpec) -> KernelSpec {
    KernelSpec { gamma: 1.0, ..*k }
}

impl FvSolver {
    pub fn new(system: &InteractionSystem, l: f64, cfg: &FvConfig) -> Result<Self> {
        let mesh = Arc::new(FvMesh::from_config(l, cfg)?);
        Self::with_mesh(system, mesh, Vec::new())
    }

    fn with_mesh(system: &InteractionSystem, mesh: Arc<FvMesh>, mut bands: Vec<(KernelSpec, Arc<Band>)>) -> Result<Self> {
        system.validate()?;
        let reach = system.support_radius();
        if reach >= mesh.l {
            return Err(Error::DomainTooSmall { l: mesh.l, radius: reach });
        }
        let mut conv = Vec::new();
        for row in &system.kernels {
            let mut r = Vec::new();
            for k in row {
                if k.is_zero() {
                    r.push(None);
                    continue;
                }
                let shape = unit(k);
                let idx = match bands.iter().position(|(s, _)| *s == shape) {
                    Some(i) => i,
                    None => {
                        bands.push((shape, Arc::new(Band::build(&shape, &mesh))));
                        bands.len() - 1
                    }
                };
                r.push(Some((k.gamma, idx)));
            }
            conv.push(r);
        }
        let masses0 = if system.initial.is_empty() { vec![0.0; system.n()] } else { system.masses() };
        Ok(FvSolver { system: system.clone(), mesh, bands, conv, p: system.p(), masses0 })
    }

    /// Same mesh, new system; convolution bands are reused when the kernel
    /// shapes agree (only the strengths differ).
    pub fn rebind(&self, system: &InteractionSystem) -> Result<Self> {
        Self::with_mesh(system, self.mesh.clone(), self.bands.clone())
    }

    pub fn mesh(&self) -> &FvMesh {
        &self.mesh
    }

    pub fn system(&self) -> &InteractionSystem {
        &self.system
    }

    pub fn init(&self) -> FvState {
        let f = &self.mesh.faces;
        let mass = (0..self.system.n())
            .map(|i| match self.system.initial.get(i) {
                Some(data) => f.windows(2).map(|w| data.cell_integral(w[0], w[1])).collect(),
                None => vec![0.0; self.mesh.len()],
            })
            .collect();
        FvState { t: 0.0, mass }
    }

    pub fn densities(&self, state: &FvState) -> Vec<Vec<f64>> {
        state.mass.iter().map(|m| m.iter().zip(&self.mesh.widths).map(|(a, h)| a / h).collect()).collect()
    }

    /// F_i = Σ_j K_ij ∗ u_j at the cell centres.
    pub fn potentials(&self, u: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let n = self.mesh.len();
        self.conv
            .iter()
            .map(|row| {
                let mut f = vec![0.0; n];
                for (j, entry) in row.iter().enumerate() {
                    if let Some((gamma, idx)) = entry {
                        self.bands[*idx].1.apply_add(*gamma, &u[j], &mut f);
                    }
                }
                f
            })
            .collect()
    }

    pub fn step(&self, state: &mut FvState, dt: f64) -> Result<()> {
        let u = self.densities(state);
        let f = self.potentials(&u);
        let mut next = Vec::with_capacity(state.mass.len());
        for (i, (m, fi)) in state.mass.iter().zip(&f).enumerate() {
            let mn = self.implicit_mass_step(m, fi, self.system.diffusion[i], dt);
            if mn.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite(i));
            }
            next.push(mn);
        }
        state.mass = next;
        state.t += dt;
        Ok(())
    }

    fn implicit_mass_step(&self, m: &[f64], f: &[f64], d: f64, dt: f64) -> Vec<f64> {
        let n = m.len();
        if n < 2 {
            return m.to_vec();
        }
        let h = &self.mesh.widths;
        let dxc = &self.mesh.dxc;
        // J_{c+1/2} = α_c m_c − β_c m_{c+1}
        let k = n - 1;
        let mut alpha = vec![0.0; k];
        let mut beta = vec![0.0; k];
        for c in 0..k {
            let delta = (f[c + 1] - f[c]) / d;
            alpha[c] = bernoulli(-delta) * d / (dxc[c] * h[c]);
            beta[c] = bernoulli(delta) * d / (dxc[c] * h[c + 1]);
        }
        let mut cum = Vec::with_capacity(n);
        let mut s = 0.0;
        for &x in m {
            s += x;
            cum.push(s);
        }
        let total = s;
        // α_c(P_c − P_{c−1}) − β_c(P_{c+1} − P_c) + P_c/dt = S_c/dt, P_{−1} = 0, P_{n−1} = total
        let inv = 1.0 / dt;
        let diag: Vec<f64> = (0..k).map(|c| alpha[c] + beta[c] + inv).collect();
        let sub: Vec<f64> = (0..k).map(|c| -alpha[c]).collect();
        let sup: Vec<f64> = (0..k).map(|c| -beta[c]).collect();
        let mut rhs: Vec<f64> = cum[..k].iter().map(|x| x * inv).collect();
        rhs[k - 1] += beta[k - 1] * total;
        let p = thomas(&sub, &diag, &sup, &rhs);
        let mut out = Vec::with_capacity(n);
        let mut prev = 0.0;
        for &pc in &p {
            out.push(pc - prev);
            prev = pc;
        }
        out.push(total - prev);
        out
    }

    pub fn record(&self, state: &FvState) -> DiagnosticsRecord {
        let u = self.densities(state);
        diagnostics::record(state.t, &u, Cells::Widths(&self.mesh.widths), &self.p, &self.masses0)
    }

    pub fn run(&self, state: &mut FvState, cfg: &FvConfig) -> RunOutput {
        self.run_observed(state, cfg, &mut NoObserver)
    }

    pub fn run_observed(&self, state: &mut FvState, cfg: &FvConfig, obs: &mut dyn Observer) -> RunOutput {
        let first = self.record(state);
        let mut min_value = first.min_value;
        let mut records = vec![first];
        let mut termination = Termination::Completed;
        if obs.observe(&records[0]) {
            termination = Termination::Stopped;
        }
        let mut dt = cfg.dt0;
        let mut steps = 0usize;
        let every = cfg.record_every.max(1);
        while termination == Termination::Completed && state.t < cfg.t_end * (1.0 - 1e-12) {
            let h = dt.min(cfg.t_end - state.t);
            if self.step(state, h).is_err() {
                termination = Termination::NonFinite;
                break;
            }
            steps += 1;
            dt = (dt * cfg.dt_growth).min(cfg.dt_max);
            let last = state.t >= cfg.t_end * (1.0 - 1e-12);
            if steps % every == 0 || last {
                let r = self.record(state);
                min_value = min_value.min(r.min_value);
                let blow = diagnostics::blowup_indicator(&r, cfg.blowup_threshold);
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

/// B(z) = z/(e^z − 1).
pub fn bernoulli(z: f64) -> f64 {
    if z.abs() < 1e-8 {
        1.0 - 0.5 * z
    } else {
        z / z.exp_m1()
    }
}

/// Tridiagonal solve; `sub[0]` and `sup[n−1]` are ignored.
pub fn thomas(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut cp = vec![0.0; n];
    let mut dp = vec![0.0; n];
    cp[0] = sup[0] / diag[0];
    dp[0] = rhs[0] / diag[0];
    for i in 1..n {
        let den = diag[i] - sub[i] * cp[i - 1];
        cp[i] = if i + 1 < n { sup[i] / den } else { 0.0 };
        dp[i] = (rhs[i] - sub[i] * dp[i - 1]) / den;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = dp[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = dp[i] - cp[i] * x[i + 1];
    }
    x
}
