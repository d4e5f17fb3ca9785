//! The operator Φ_i(ρ) = Σ_j a_ij ρ_j^{λ_ij} and the scalar dynamics of the
//! scaled norms ρ_i = (‖u_i‖_{p_i}/M_i)^{p_i′/d}.
//!
//! ρ obeys dρ_i/dt ≤ −C_i ρ_i²(ρ_i − Φ_i(ρ)); positive fixed points of Φ give
//! invariant rectangles Π[0, ρ_i*] and hence smallness conditions on the data.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::system::InteractionSystem;

/// Residual target for iterative fixed points, relative to 1 + ‖ρ‖_∞.
pub const FIXED_POINT_TOL: f64 = 1e-10;
pub const BISECTION_TOL: f64 = 1e-12;
pub const INVARIANT_TOL: f64 = 1e-8;
const PICARD_MAX_ITER: usize = 100_000;
const NEWTON_MAX_ITER: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhiModel {
    #[serde(rename = "N")]
    pub n: usize,
    pub d: usize,
    pub a: Vec<Vec<f64>>,
    pub lambda: Vec<Vec<f64>>,
    #[serde(rename = "C_N")]
    pub c_n: f64,
    #[serde(rename = "C")]
    pub c: Vec<f64>,
    #[serde(rename = "P")]
    pub p: Vec<f64>,
    #[serde(rename = "M")]
    pub m: Vec<f64>,
    #[serde(rename = "D")]
    pub diffusion: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FixedPointKind {
    Explicit1Species,
    Explicit2Cycle,
    Bracketed,
    NotFound,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPointResult {
    pub kind: FixedPointKind,
    pub rho_star: Option<Vec<f64>>,
    pub bracket: Option<(f64, f64)>,
    pub iterations: usize,
    pub residual: f64,
}

/// Large-time behaviour of a single species under the comparison dynamics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SingleSpeciesVerdict {
    /// λ < 1: [0, ρ*] attracts every trajectory.
    Attracting { rho_star: f64 },
    /// λ > 1: trajectories starting in [0, ρ*) decay to zero.
    DecayBasin { rho_star: f64 },
    /// λ = 1 and a < 1: everything decays.
    SmallMassDecay,
    /// λ = 1 and a ≥ 1: no conclusion.
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnilateralReport {
    pub holds: bool,
    /// (λ_11 a_11)^{1/(λ_11−1)}
    pub lhs: f64,
    /// ((λ_11−1)/λ_11) a_12^{−1} a_22^{λ_12/(λ_22−1)}
    pub threshold: f64,
    /// Same bound with a_21^{−1} in place of a_12^{−1}; infinite since a_21 = 0.
    pub threshold_a21_reading: f64,
    pub holds_a21_reading: bool,
    pub rho_star: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub t: Vec<f64>,
    pub rho: Vec<Vec<f64>>,
}

impl PhiModel {
    /// A bare model for exploring Φ: unit C, P = 2, unit masses and diffusion.
    pub fn from_parts(a: Vec<Vec<f64>>, lambda: Vec<Vec<f64>>) -> Self {
        let n = a.len();
        PhiModel {
            n,
            d: 1,
            a,
            lambda,
            c_n: 1.0,
            c: vec![1.0; n],
            p: vec![2.0; n],
            m: vec![1.0; n],
            diffusion: vec![1.0; n],
        }
    }

    pub fn with_c(mut self, c: Vec<f64>) -> Self {
        self.c = c;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n;
        let square = |m: &Vec<Vec<f64>>| m.len() == n && m.iter().all(|r| r.len() == n);
        if n == 0 || !square(&self.a) || !square(&self.lambda) {
            return Err(Error::Invalid(format!("a and lambda must be {n}×{n}")));
        }
        if self.a.iter().flatten().any(|&v| !(v >= 0.0 && v.is_finite())) {
            return Err(Error::Invalid("a must be non-negative and finite".into()));
        }
        for i in 0..n {
            for j in 0..n {
                if self.a[i][j] > 0.0 && !(self.lambda[i][j] > 0.0 && self.lambda[i][j].is_finite()) {
                    return Err(Error::Invalid("lambda must be positive where a is".into()));
                }
            }
        }
        if self.c.len() != n || self.c.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::Invalid("C must have N positive entries".into()));
        }
        Ok(())
    }
}

pub fn phi_eval(model: &PhiModel, rho: &[f64]) -> Vec<f64> {
    (0..model.n)
        .map(|i| {
            (0..model.n)
                .filter(|&j| model.a[i][j] != 0.0)
                .map(|j| model.a[i][j] * rho[j].max(0.0).powf(model.lambda[i][j]))
                .sum()
        })
        .collect()
}

pub fn residual(model: &PhiModel, rho: &[f64]) -> f64 {
    phi_eval(model, rho).iter().zip(rho).map(|(f, r)| (f - r).abs()).fold(0.0, f64::max)
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn tol_for(rho: &[f64]) -> f64 {
    FIXED_POINT_TOL * (1.0 + sup(rho))
}

/// a_ij = C_N p_i ‖∇K_ij‖_{q_ij} M_j / (2 D_i), λ_ij = d/q_ij, C_i = 4 D_i/(d p_i C_N²).
pub fn coefficients_from_system(system: &InteractionSystem, c_n: f64) -> Result<PhiModel> {
    system.validate()?;
    if !(c_n > 0.0) {
        return Err(Error::Invalid("Nash constant must be positive".into()));
    }
    let n = system.n();
    let d = system.d as f64;
    let p = system.p();
    let m = system.masses();
    let q = system.exponents();
    let mut a = vec![vec![0.0; n]; n];
    let mut lambda = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            lambda[i][j] = d / q[i][j];
            let norm = InteractionSystem::grad_norm_at(&system.kernels[i][j], q[i][j])?;
            a[i][j] = c_n * p[i] * norm * m[j] / (2.0 * system.diffusion[i]);
        }
    }
    let c = (0..n).map(|i| 4.0 * system.diffusion[i] / (d * p[i] * c_n * c_n)).collect();
    Ok(PhiModel { n, d: system.d, a, lambda, c_n, c, p, m, diffusion: system.diffusion.clone() })
}

pub fn fixed_point_1species(model: &PhiModel) -> Result<FixedPointResult> {
    if model.n != 1 {
        return Err(Error::HypothesisViolated(format!("expected one species, got {}", model.n)));
    }
    let a = model.a[0][0];
    let lam = model.lambda[0][0];
    if lam == 1.0 {
        return Err(Error::LambdaOne);
    }
    if !(a > 0.0) {
        return Err(Error::HypothesisViolated("a = 0 leaves only the zero fixed point".into()));
    }
    let rho = vec![(a.ln() / (1.0 - lam)).exp()];
    let res = residual(model, &rho);
    Ok(FixedPointResult { kind: FixedPointKind::Explicit1Species, rho_star: Some(rho), bracket: None, iterations: 0, residual: res })
}

pub fn classify_1species(model: &PhiModel) -> Result<SingleSpeciesVerdict> {
    let lam = model.lambda[0][0];
    let a = model.a[0][0];
    match fixed_point_1species(model) {
        Ok(r) => {
            let rho_star = r.rho_star.unwrap()[0];
            Ok(if lam < 1.0 {
                SingleSpeciesVerdict::Attracting { rho_star }
            } else {
                SingleSpeciesVerdict::DecayBasin { rho_star }
            })
        }
        Err(Error::LambdaOne) => {
            Ok(if a < 1.0 { SingleSpeciesVerdict::SmallMassDecay } else { SingleSpeciesVerdict::Inconclusive })
        }
        Err(e) => Err(e),
    }
}

/// Closed form for the pure 2-cycle (no self-perception).
pub fn fixed_point_2cycle(model: &PhiModel) -> Result<FixedPointResult> {
    if model.n != 2 || model.a[0][0] != 0.0 || model.a[1][1] != 0.0 {
        return Err(Error::HypothesisViolated("expected two species without self-perception".into()));
    }
    let (a12, a21) = (model.a[0][1], model.a[1][0]);
    if !(a12 > 0.0 && a21 > 0.0) {
        return Err(Error::DegenerateCycle("an off-diagonal coefficient vanishes".into()));
    }
    let (l12, l21) = (model.lambda[0][1], model.lambda[1][0]);
    let lam = l12 * l21;
    if lam == 1.0 {
        return Err(Error::DegenerateCycle("λ_12 λ_21 = 1".into()));
    }
    let r1 = ((a12.ln() + l12 * a21.ln()) / (1.0 - lam)).exp();
    let r2 = ((l21 * a12.ln() + a21.ln()) / (1.0 - lam)).exp();
    let rho = vec![r1, r2];
    let res = residual(model, &rho);
    Ok(FixedPointResult { kind: FixedPointKind::Explicit2Cycle, rho_star: Some(rho), bracket: None, iterations: 0, residual: res })
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Regime {
    Super,
    Sub,
}

fn regime(model: &PhiModel) -> Result<Regime> {
    let mut sup = true;
    let mut sub = true;
    for i in 0..model.n {
        for j in 0..model.n {
            if model.a[i][j] > 0.0 {
                sup &= model.lambda[i][j] > 1.0;
                sub &= model.lambda[i][j] < 1.0;
            }
        }
    }
    for j in 0..model.n {
        if !(0..model.n).any(|i| model.a[i][j] > 0.0) {
            return Err(Error::HypothesisViolated(format!("column {j} of a is zero")));
        }
    }
    match (sup, sub) {
        (true, false) => Ok(Regime::Super),
        (false, true) => Ok(Regime::Sub),
        _ => Err(Error::HypothesisViolated("λ_ij must be all > 1 or all < 1 on the support of a".into())),
    }
}

/// Radii of the compression and expansion spheres, smallest first.
///
/// For λ > 1: r1 = min (N a_ij)^{−1/(λ_ij−1)} (‖Φ(x)‖ ≤ ‖x‖ there) and
/// r2 = max_j min_i a_ij^{−1/(λ_ij−1)} (‖Φ(x)‖ ≥ ‖x‖ there).
/// For λ < 1 the roles swap.
pub fn bracket_radii(model: &PhiModel) -> Result<(f64, f64)> {
    let reg = regime(model)?;
    let n = model.n;
    let nf = n as f64;
    let pos = |i: usize, j: usize| model.a[i][j] > 0.0;
    let root = |a: f64, l: f64| a.powf(-1.0 / (l - 1.0));
    match reg {
        Regime::Super => {
            let mut r1 = f64::INFINITY;
            let mut r2 = 0.0f64;
            for j in 0..n {
                let mut col_min = f64::INFINITY;
                for i in 0..n {
                    if pos(i, j) {
                        r1 = r1.min(root(nf * model.a[i][j], model.lambda[i][j]));
                        col_min = col_min.min(root(model.a[i][j], model.lambda[i][j]));
                    }
                }
                r2 = r2.max(col_min);
            }
            Ok((r1, r2))
        }
        Regime::Sub => {
            let mut small = f64::INFINITY;
            let mut big = 0.0f64;
            for j in 0..n {
                let mut col_max = 0.0f64;
                for i in 0..n {
                    if pos(i, j) {
                        big = big.max(root(nf * model.a[i][j], model.lambda[i][j]));
                        col_max = col_max.max(root(model.a[i][j], model.lambda[i][j]));
                    }
                }
                small = small.min(col_max);
            }
            Ok((small, big))
        }
    }
}

/// Components that can be non-zero at a fixed point: drop rows of Φ that
/// vanish identically once the already-dropped components are zero.
fn active_set(model: &PhiModel) -> Vec<bool> {
    let n = model.n;
    let mut active = vec![true; n];
    loop {
        let mut changed = false;
        for i in 0..n {
            if active[i] && !(0..n).any(|j| active[j] && model.a[i][j] > 0.0) {
                active[i] = false;
                changed = true;
            }
        }
        if !changed {
            return active;
        }
    }
}

fn strongly_connected(model: &PhiModel) -> bool {
    let n = model.n;
    let reach = |forward: bool| {
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(u) = stack.pop() {
            for v in 0..n {
                let e = if forward { model.a[u][v] } else { model.a[v][u] };
                if e > 0.0 && !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        seen.into_iter().all(|s| s)
    };
    reach(true) && reach(false)
}

/// Newton on ln Φ_i(e^y) − y_i = 0 over the active components.
fn newton_log(model: &PhiModel, active: &[bool], seed: &[f64]) -> Option<(Vec<f64>, usize)> {
    let idx: Vec<usize> = (0..model.n).filter(|&i| active[i]).collect();
    let k = idx.len();
    let mut y: Vec<f64> = idx.iter().map(|&i| seed[i].max(1e-300).ln()).collect();
    let full = |y: &[f64]| {
        let mut rho = vec![0.0; model.n];
        for (s, &i) in idx.iter().enumerate() {
            rho[i] = y[s].exp();
        }
        rho
    };
    let eval_f = |y: &[f64]| -> Option<Vec<f64>> {
        let phi = phi_eval(model, &full(y));
        let f: Vec<f64> = idx.iter().enumerate().map(|(s, &i)| phi[i].ln() - y[s]).collect();
        if f.iter().all(|v| v.is_finite()) {
            Some(f)
        } else {
            None
        }
    };
    let mut f = eval_f(&y)?;
    for it in 0..NEWTON_MAX_ITER {
        let rho = full(&y);
        if residual(model, &rho) <= 1e-3 * tol_for(&rho) {
            return Some((rho, it));
        }
        let phi = phi_eval(model, &rho);
        let mut jac = DMatrix::<f64>::zeros(k, k);
        for (r, &i) in idx.iter().enumerate() {
            for (c, &j) in idx.iter().enumerate() {
                let aij = model.a[i][j];
                if aij > 0.0 {
                    let l = model.lambda[i][j];
                    jac[(r, c)] = aij * l * rho[j].powf(l) / phi[i];
                }
            }
            jac[(r, r)] -= 1.0;
        }
        let rhs = DVector::from_iterator(k, f.iter().map(|v| -v));
        let delta = jac.lu().solve(&rhs)?;
        let cap = delta.amax();
        let scale = if cap > 5.0 { 5.0 / cap } else { 1.0 };
        let norm0 = sup(&f);
        let mut t = scale;
        let mut accepted = false;
        for _ in 0..40 {
            let trial: Vec<f64> = y.iter().zip(delta.iter()).map(|(a, b)| a + t * b).collect();
            if let Some(ft) = eval_f(&trial) {
                if sup(&ft) < norm0 || sup(&ft) == 0.0 {
                    y = trial;
                    f = ft;
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !accepted {
            let rho = full(&y);
            return (residual(model, &rho) <= tol_for(&rho)).then_some((rho, it));
        }
    }
    let rho = full(&y);
    (residual(model, &rho) <= tol_for(&rho)).then_some((rho, NEWTON_MAX_ITER))
}

/// Damped iteration ρ ← (1−ω)ρ + ωΦ(ρ), ω halved whenever the scaled residual
/// ‖Φ(ρ)−ρ‖_∞/(1+‖ρ‖_∞) grows and regrown (×1.1, up to ω₀) while it shrinks.
pub fn damped_iteration(model: &PhiModel, seed: &[f64], omega0: f64, max_iter: usize) -> (Vec<f64>, usize, f64) {
    let mut rho = seed.to_vec();
    let mut omega = omega0;
    let mut res = residual(model, &rho);
    for it in 0..max_iter {
        if res < 1e-2 * tol_for(&rho) {
            return (rho, it, res);
        }
        let phi = phi_eval(model, &rho);
        let next: Vec<f64> = rho.iter().zip(&phi).map(|(r, f)| (1.0 - omega) * r + omega * f).collect();
        let nres = residual(model, &next);
        if !nres.is_finite() {
            omega *= 0.5;
            continue;
        }
        // compare on the scale of the stopping test; the raw residual may
        // legitimately grow on the way to a large fixed point
        if nres / (1.0 + sup(&next)) > res / (1.0 + sup(&rho)) {
            omega = (omega * 0.5).max(1e-6);
        } else {
            // recover once progress resumes
            omega = (omega * 1.1).min(omega0);
        }
        rho = next;
        res = nres;
    }
    (rho, max_iter, res)
}

fn seeds(n: usize, r1: f64, r2: f64) -> Vec<Vec<f64>> {
    let mid = 0.5 * (r1 + r2);
    let mut out = vec![vec![mid; n], vec![(r1 * r2).sqrt(); n]];
    for corner in 0..8usize {
        out.push((0..n).map(|i| if (corner >> (i % 3)) & 1 == 1 { r2 } else { r1 }).collect());
    }
    out
}

/// Positive fixed point inside the annulus r1 ≤ ‖ρ‖_∞ ≤ r2.
///
/// Newton in log coordinates is tried first from each seed: for λ > 1 the
/// positive fixed point repels plain iteration, so damping alone cannot
/// reach it. Damped iteration remains as a fallback.
pub fn fixed_point_bracketed(model: &PhiModel) -> Result<FixedPointResult> {
    model.validate()?;
    let (r1, r2) = bracket_radii(model)?;
    let active = active_set(model);
    if !active.iter().any(|&x| x) {
        return Ok(not_found((r1, r2), 0, f64::NAN));
    }
    let irreducible = strongly_connected(model);
    let mut iterations = 0;
    let mut best_res = f64::INFINITY;
    for seed in seeds(model.n, r1, r2) {
        if let Some((rho, it)) = newton_log(model, &active, &seed) {
            iterations += it;
            let res = residual(model, &rho);
            if res <= tol_for(&rho) && sup(&rho) > 0.0 {
                if irreducible {
                    assert!(rho.iter().all(|&r| r > 0.0), "irreducible Φ produced a boundary fixed point");
                }
                return Ok(FixedPointResult {
                    kind: FixedPointKind::Bracketed,
                    rho_star: Some(rho),
                    bracket: Some((r1, r2)),
                    iterations,
                    residual: res,
                });
            }
            best_res = best_res.min(res);
        } else {
            iterations += NEWTON_MAX_ITER;
        }
    }
    for seed in seeds(model.n, r1, r2) {
        let (rho, it, res) = damped_iteration(model, &seed, 0.5, PICARD_MAX_ITER / 10);
        iterations += it;
        if res <= tol_for(&rho) && sup(&rho) > 1e-300 {
            return Ok(FixedPointResult {
                kind: FixedPointKind::Bracketed,
                rho_star: Some(rho),
                bracket: Some((r1, r2)),
                iterations,
                residual: res,
            });
        }
        best_res = best_res.min(res);
    }
    Ok(not_found((r1, r2), iterations, best_res))
}

fn not_found(bracket: (f64, f64), iterations: usize, residual: f64) -> FixedPointResult {
    FixedPointResult { kind: FixedPointKind::NotFound, rho_star: None, bracket: Some(bracket), iterations, residual }
}

/// Pick the applicable fixed-point routine for a model.
pub fn fixed_point_auto(model: &PhiModel) -> Result<FixedPointResult> {
    if model.n == 1 {
        return fixed_point_1species(model);
    }
    if model.n == 2 && model.a[0][0] == 0.0 && model.a[1][1] == 0.0 {
        if let Ok(r) = fixed_point_2cycle(model) {
            return Ok(r);
        }
    }
    fixed_point_bracketed(model)
}

/// Smallness condition when species 1 perceives species 2 but not vice versa.
pub fn unilateral_mass_condition(model: &PhiModel) -> Result<UnilateralReport> {
    if model.n != 2 || model.a[1][0] != 0.0 || !(model.a[0][1] > 0.0) || !(model.a[1][1] > 0.0) {
        return Err(Error::HypothesisViolated("expected a_21 = 0 and a_12, a_22 > 0".into()));
    }
    let (a11, a12, a22) = (model.a[0][0], model.a[0][1], model.a[1][1]);
    let (l11, l12, l22) = (model.lambda[0][0], model.lambda[0][1], model.lambda[1][1]);
    if !(l22 > 1.0) || (a11 > 0.0 && !(l11 > 1.0)) {
        return Err(Error::HypothesisViolated("λ_11 and λ_22 must exceed 1".into()));
    }
    let rho2 = a22.powf(-1.0 / (l22 - 1.0));
    let b = a12 * a22.powf(-l12 / (l22 - 1.0));
    if a11 == 0.0 {
        return Ok(UnilateralReport {
            holds: true,
            lhs: 0.0,
            threshold: f64::INFINITY,
            threshold_a21_reading: f64::INFINITY,
            holds_a21_reading: true,
            rho_star: Some(vec![b, rho2]),
        });
    }
    let lhs = (l11 * a11).powf(1.0 / (l11 - 1.0));
    let threshold = (l11 - 1.0) / l11 / a12 * a22.powf(l12 / (l22 - 1.0));
    let threshold_a21 = (l11 - 1.0) / l11 / model.a[1][0] * a22.powf(l12 / (l22 - 1.0));
    let holds = lhs <= threshold;
    let rho_star = holds.then(|| {
        // f(y) = a11 y^λ11 + b − y: f(0) = b > 0, f(y_min) ≤ 0 when the condition holds.
        let f = |y: f64| a11 * y.powf(l11) + b - y;
        let mut lo = 0.0;
        let mut hi = (l11 * a11).powf(-1.0 / (l11 - 1.0));
        while hi - lo > BISECTION_TOL {
            let mid = 0.5 * (lo + hi);
            if f(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        vec![0.5 * (lo + hi), rho2]
    });
    Ok(UnilateralReport {
        holds,
        lhs,
        threshold,
        threshold_a21_reading: threshold_a21,
        holds_a21_reading: lhs <= threshold_a21,
        rho_star,
    })
}

/// After its first entry into R* = Π[0, ρ_i*], the trajectory never leaves it
/// (tolerance [`INVARIANT_TOL`] per component). Trajectories that never enter pass.
pub fn invariant_rectangle_check(rho_star: &[f64], trajectory: &[Vec<f64>]) -> bool {
    let inside = |r: &Vec<f64>, tol: f64| r.iter().zip(rho_star).all(|(x, s)| *x >= -tol && *x <= s + tol);
    match trajectory.iter().position(|r| inside(r, 0.0)) {
        None => true,
        Some(k) => trajectory[k..].iter().all(|r| inside(r, INVARIANT_TOL)),
    }
}

fn rhs(model: &PhiModel, rho: &[f64]) -> Vec<f64> {
    let clamped: Vec<f64> = rho.iter().map(|r| r.max(0.0)).collect();
    let phi = phi_eval(model, &clamped);
    (0..model.n).map(|i| -model.c[i] * clamped[i] * clamped[i] * (clamped[i] - phi[i])).collect()
}

fn rk4_step(model: &PhiModel, rho: &[f64], dt: f64) -> Vec<f64> {
    let add = |x: &[f64], k: &[f64], h: f64| -> Vec<f64> { x.iter().zip(k).map(|(a, b)| a + h * b).collect() };
    let k1 = rhs(model, rho);
    let k2 = rhs(model, &add(rho, &k1, 0.5 * dt));
    let k3 = rhs(model, &add(rho, &k2, 0.5 * dt));
    let k4 = rhs(model, &add(rho, &k3, dt));
    (0..rho.len())
        .map(|i| (rho[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])).max(0.0))
        .collect()
}

fn max_rel_change(old: &[f64], new: &[f64]) -> (f64, usize) {
    let mut worst = (0.0, 0);
    for (i, (o, n)) in old.iter().zip(new).enumerate() {
        let rel = if *o > 0.0 { (n - o).abs() / o } else if *n != 0.0 { f64::INFINITY } else { 0.0 };
        if rel > worst.0 {
            worst = (rel, i);
        }
    }
    worst
}

/// Classical RK4 for dρ_i/dt = −C_i ρ_i²(ρ_i − Φ_i(ρ)) with fixed step.
pub fn comparison_ode_integrate(model: &PhiModel, rho0: &[f64], t_end: f64, dt: f64) -> Result<Trajectory> {
    if !(dt > 0.0) || rho0.len() != model.n {
        return Err(Error::Invalid("need dt > 0 and one initial value per species".into()));
    }
    let mut t = 0.0;
    let mut rho = rho0.to_vec();
    let mut out = Trajectory { t: vec![0.0], rho: vec![rho.clone()] };
    while t < t_end * (1.0 - 1e-14) {
        let h = dt.min(t_end - t);
        let next = rk4_step(model, &rho, h);
        let (rel, idx) = max_rel_change(&rho, &next);
        if rel > 0.5 {
            return Err(Error::StepTooLarge { t, index: idx });
        }
        t += h;
        rho = next;
        out.t.push(t);
        out.rho.push(rho.clone());
    }
    Ok(out)
}

/// RK4 with step-doubling error control (relative tolerance 1e-10) and at
/// most 5% change per step. Needed for the algebraic ρ ~ t^{−1/2} decay,
/// which a fixed step cannot follow to small values in reasonable time, and
/// for long approaches to a stable equilibrium, where an uncontrolled step
/// would outgrow the RK4 stability region.
pub fn comparison_ode_adaptive(model: &PhiModel, rho0: &[f64], t_end: f64, dt0: f64) -> Trajectory {
    const RTOL: f64 = 1e-10;
    const ATOL: f64 = 1e-300;
    let mut t = 0.0;
    let mut dt = dt0;
    let mut rho = rho0.to_vec();
    let mut out = Trajectory { t: vec![0.0], rho: vec![rho.clone()] };
    while t < t_end * (1.0 - 1e-14) {
        let h = dt.min(t_end - t);
        let full = rk4_step(model, &rho, h);
        let half = rk4_step(model, &rho, 0.5 * h);
        let two = rk4_step(model, &half, 0.5 * h);
        let err = full
            .iter()
            .zip(&two)
            .map(|(a, b)| (a - b).abs() / (ATOL + RTOL * b.abs()))
            .fold(0.0f64, f64::max);
        let (rel, _) = max_rel_change(&rho, &two);
        if err > 1.0 || rel > 0.05 {
            dt = 0.5 * h;
            if dt < 1e-300 {
                break;
            }
            continue;
        }
        t += h;
        rho = two;
        out.t.push(t);
        out.rho.push(rho.clone());
        let grow = if err > 0.0 { (0.9 * err.powf(-0.2)).clamp(0.2, 4.0) } else { 4.0 };
        dt = h * grow;
    }
    out
}
