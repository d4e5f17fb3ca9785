//! Log–log power-law fits and the analytic slope predictions they are
//! compared against.
//!
//! With λ = (s − 1)/s for a W_s kernel, a single self-perceiving species
//! settles at ‖u‖₂ ∝ γ^{s/p′}, i.e. slope 1/((1 − λ)p′). For the pure
//! 2-cycle the exponents x_i solve x_1 = 1 + λ_1 x_2, x_2 = 1 + λ_2 x_1, so
//! σ_i = (1 + λ_i)/(1 − λ_1λ_2) and the slope is σ_i/p′.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::Family;
use crate::system::InteractionSystem;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points: Vec<(f64, f64)>,
}

impl SlopeFit {
    pub fn predict(&self, x: f64) -> f64 {
        self.intercept + self.slope * x
    }
}

/// Ordinary least squares y = intercept + slope·x.
pub fn fit_slope(points: &[(f64, f64)]) -> Result<SlopeFit> {
    let pts: Vec<(f64, f64)> = points.iter().copied().filter(|(x, y)| x.is_finite() && y.is_finite()).collect();
    if pts.len() < 3 {
        return Err(Error::Underdetermined(pts.len()));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::Underdetermined(1));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let r_squared = if syy > 0.0 { (1.0 - ss_res / syy).clamp(0.0, 1.0) } else { 1.0 };
    Ok(SlopeFit { slope, intercept, r_squared, points: pts })
}

/// λ = (s − 1)/s.
pub fn ws_lambda(s: f64) -> f64 {
    (s - 1.0) / s
}

fn conjugate(p: f64) -> f64 {
    p / (p - 1.0)
}

/// Slope of a decoupled species: 1/((1 − λ)p′) = s/p′.
pub fn decoupled_slope(lambda: f64, p: f64) -> f64 {
    1.0 / ((1.0 - lambda) * conjugate(p))
}

/// Slopes σ_i/p′ of the pure 2-cycle.
pub fn cycle_slopes(l1: f64, l2: f64, p: f64) -> [f64; 2] {
    let den = 1.0 - l1 * l2;
    let pc = conjugate(p);
    [(1.0 + l1) / den / pc, (1.0 + l2) / den / pc]
}

/// Predicted ln‖u_i‖₂ vs ln γ slopes. Supported patterns: decoupled
/// self-perception (diagonal kernel matrix) and the pure 2-cycle.
pub fn predict_slopes(system: &InteractionSystem, p: f64) -> Result<Vec<f64>> {
    if !(p > 1.0) {
        return Err(Error::Invalid(format!("p must exceed 1, got {p}")));
    }
    let n = system.n();
    let k = &system.kernels;
    for kk in k.iter().flatten() {
        match kk.family {
            Family::Zero => {}
            Family::Ws if kk.s > 1.0 => {}
            _ => return Err(Error::UnsupportedPattern("kernels must be W_s with s > 1".into())),
        }
    }
    let nz = |i: usize, j: usize| k[i][j].family != Family::Zero;
    let diagonal = (0..n).all(|i| nz(i, i) && (0..n).all(|j| j == i || !nz(i, j)));
    if diagonal {
        return Ok((0..n).map(|i| decoupled_slope(ws_lambda(k[i][i].s), p)).collect());
    }
    if n == 2 && !nz(0, 0) && !nz(1, 1) && nz(0, 1) && nz(1, 0) {
        let s = cycle_slopes(ws_lambda(k[0][1].s), ws_lambda(k[1][0].s), p);
        return Ok(s.to_vec());
    }
    Err(Error::UnsupportedPattern("only decoupled self-perception or a pure 2-cycle".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line() {
        let pts: Vec<(f64, f64)> = (0..5).map(|i| (i as f64, 2.0 * i as f64 + 1.0)).collect();
        let f = fit_slope(&pts).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-14);
        assert!((f.intercept - 1.0).abs() < 1e-14);
        assert!((f.r_squared - 1.0).abs() < 1e-14);
    }

    #[test]
    fn too_few_points() {
        assert_eq!(fit_slope(&[(0.0, 1.0), (1.0, 2.0)]), Err(Error::Underdetermined(2)));
        assert!(fit_slope(&[(1.0, 1.0), (1.0, 2.0), (1.0, 3.0)]).is_err());
    }

    #[test]
    fn predictions() {
        let a = predict_slopes(&InteractionSystem::self_perception(1.0, 3.75, 2.4, 0.1), 2.0).unwrap();
        assert!((a[0] - 1.875).abs() < 1e-12);
        assert!((a[1] - 1.2).abs() < 1e-12);
        let b = predict_slopes(&InteractionSystem::cross_perception(1.0, 3.75, 2.4, 0.1), 2.0).unwrap();
        assert!((b[0] - 156.0 / 103.0).abs() < 1e-12);
        assert!((b[1] - 285.0 / 206.0).abs() < 1e-12);
    }

    #[test]
    fn unsupported() {
        let mut sys = InteractionSystem::self_perception(1.0, 3.75, 2.4, 0.1);
        sys.kernels[0][1] = crate::kernel::KernelSpec::ws(1.0, 2.0);
        assert!(matches!(predict_slopes(&sys, 2.0), Err(Error::UnsupportedPattern(_))));
        let mut sys = InteractionSystem::self_perception(1.0, 3.75, 2.4, 0.1);
        sys.kernels[0][0] = crate::kernel::KernelSpec::top_hat(1.0, 1.0);
        assert!(matches!(predict_slopes(&sys, 2.0), Err(Error::UnsupportedPattern(_))));
    }
}
