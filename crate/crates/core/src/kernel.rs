//! Perception kernels K_ij = γ·W and their weak gradients.
//!
//! Every non-zero family is a probability density scaled by the strength γ.
//! The W_s family ((s+1)/2)(1−|x|^{1/s}) on [−1, 1] is the workhorse: its
//! gradient is singular at the origin for s > 1 and lies in L^q exactly for
//! q < s/(s−1). The solver never samples that gradient; it goes through the
//! Fourier coefficients of the kernel itself (see [`KernelSpec::fourier_coefficients`])
//! or through exact cell integrals ([`KernelSpec::eval_cumulative`]).

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad;

/// Tail cut for the exponential family: e^{-λr} < 1e-14 beyond r = 32.24/λ.
const EXP_TAIL: f64 = 32.24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Family {
    Ws,
    /// s → 0 limit of W_s: ½χ_[−1,1].
    WsIndicator,
    /// s → ∞ limit of W_s: ½ log⁺(1/|x|).
    WsLogCusp,
    TopHat,
    RaisedCosine,
    Exponential,
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawKernel")]
pub struct KernelSpec {
    pub family: Family,
    pub gamma: f64,
    pub s: f64,
    pub radius: f64,
    pub rate: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawKernel {
    family: Family,
    #[serde(default = "one")]
    gamma: f64,
    #[serde(default = "one")]
    s: f64,
    #[serde(default = "one")]
    radius: f64,
    #[serde(default = "one")]
    rate: f64,
}

fn one() -> f64 {
    1.0
}

impl TryFrom<RawKernel> for KernelSpec {
    type Error = Error;
    fn try_from(r: RawKernel) -> Result<Self> {
        let k = KernelSpec { family: r.family, gamma: r.gamma, s: r.s, radius: r.radius, rate: r.rate };
        k.validate()?;
        Ok(k)
    }
}

impl KernelSpec {
    pub fn ws(gamma: f64, s: f64) -> Self {
        KernelSpec { family: Family::Ws, gamma, s, radius: 1.0, rate: 1.0 }
    }

    pub fn ws_indicator(gamma: f64) -> Self {
        KernelSpec { family: Family::WsIndicator, gamma, s: 0.0, radius: 1.0, rate: 1.0 }
    }

    pub fn ws_log_cusp(gamma: f64) -> Self {
        KernelSpec { family: Family::WsLogCusp, gamma, s: f64::INFINITY, radius: 1.0, rate: 1.0 }
    }

    pub fn top_hat(gamma: f64, radius: f64) -> Self {
        KernelSpec { family: Family::TopHat, gamma, s: 1.0, radius, rate: 1.0 }
    }

    pub fn raised_cosine(gamma: f64, radius: f64) -> Self {
        KernelSpec { family: Family::RaisedCosine, gamma, s: 1.0, radius, rate: 1.0 }
    }

    pub fn exponential(gamma: f64, rate: f64) -> Self {
        KernelSpec { family: Family::Exponential, gamma, s: 1.0, radius: 1.0, rate }
    }

    pub fn zero() -> Self {
        KernelSpec { family: Family::Zero, gamma: 0.0, s: 1.0, radius: 1.0, rate: 1.0 }
    }

    pub fn with_gamma(mut self, gamma: f64) -> Self {
        self.gamma = gamma;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !self.gamma.is_finite() {
            return Err(Error::Invalid("kernel gamma must be finite".into()));
        }
        match self.family {
            Family::Ws if !(self.s > 0.0 && self.s.is_finite()) => {
                Err(Error::Invalid(format!("Ws sharpness must be finite and positive, got {}", self.s)))
            }
            Family::TopHat | Family::RaisedCosine if !(self.radius > 0.0 && self.radius.is_finite()) => {
                Err(Error::Invalid(format!("radius must be positive, got {}", self.radius)))
            }
            Family::Exponential if !(self.rate > 0.0 && self.rate.is_finite()) => {
                Err(Error::Invalid(format!("rate must be positive, got {}", self.rate)))
            }
            _ => Ok(()),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.family == Family::Zero || self.gamma == 0.0
    }

    /// Half-width of the (numerical) support.
    pub fn support_radius(&self) -> f64 {
        match self.family {
            Family::Ws | Family::WsIndicator | Family::WsLogCusp => 1.0,
            Family::TopHat | Family::RaisedCosine => self.radius,
            Family::Exponential => EXP_TAIL / self.rate,
            Family::Zero => 0.0,
        }
    }

    /// Critical gradient exponent: ∇K ∈ L^q exactly for q < qbar.
    ///
    /// `None` when no finite q works (log cusp). Jump kernels return 1: the
    /// gradient is a finite measure but not a function.
    pub fn qbar(&self) -> Option<f64> {
        match self.family {
            Family::Ws if self.s > 1.0 => Some(self.s / (self.s - 1.0)),
            Family::Ws => Some(f64::INFINITY),
            Family::WsIndicator | Family::TopHat => Some(1.0),
            Family::WsLogCusp => None,
            Family::RaisedCosine | Family::Exponential | Family::Zero => Some(f64::INFINITY),
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let ax = x.abs();
        let g = self.gamma;
        match self.family {
            Family::Ws => {
                if ax > 1.0 {
                    0.0
                } else {
                    g * 0.5 * (self.s + 1.0) * (1.0 - ax.powf(1.0 / self.s))
                }
            }
            Family::WsIndicator => {
                if ax <= 1.0 {
                    0.5 * g
                } else {
                    0.0
                }
            }
            Family::WsLogCusp => {
                if ax < 1.0 {
                    if ax == 0.0 {
                        f64::INFINITY * g.signum()
                    } else {
                        -0.5 * g * ax.ln()
                    }
                } else {
                    0.0
                }
            }
            Family::TopHat => {
                if ax <= self.radius {
                    g / (2.0 * self.radius)
                } else {
                    0.0
                }
            }
            Family::RaisedCosine => {
                let r = self.radius;
                if ax <= r {
                    g / (2.0 * r) * (1.0 + (PI * ax / r).cos())
                } else {
                    0.0
                }
            }
            Family::Exponential => 0.5 * g * self.rate * (-self.rate * ax).exp(),
            Family::Zero => 0.0,
        }
    }

    /// Pointwise weak derivative away from jumps.
    ///
    /// Jump kernels (indicator, top hat) return the absolutely continuous
    /// part, which is zero; their singular part lives at ±radius.
    pub fn eval_grad(&self, x: f64) -> Result<f64> {
        let ax = x.abs();
        let sg = if x > 0.0 { -1.0 } else if x < 0.0 { 1.0 } else { 0.0 };
        let g = self.gamma;
        Ok(match self.family {
            Family::Ws => {
                let s = self.s;
                if x == 0.0 && s > 1.0 {
                    return Err(Error::SingularPoint(x));
                }
                if ax > 1.0 || x == 0.0 {
                    0.0
                } else {
                    g * (s + 1.0) / (2.0 * s) * sg * ax.powf(1.0 / s - 1.0)
                }
            }
            Family::WsLogCusp => {
                if x == 0.0 {
                    return Err(Error::SingularPoint(x));
                }
                if ax < 1.0 {
                    0.5 * g * sg / ax
                } else {
                    0.0
                }
            }
            Family::WsIndicator | Family::TopHat | Family::Zero => 0.0,
            Family::RaisedCosine => {
                let r = self.radius;
                if ax <= r {
                    g * sg * PI / (2.0 * r * r) * (PI * ax / r).sin()
                } else {
                    0.0
                }
            }
            Family::Exponential => 0.5 * g * sg * self.rate * self.rate * (-self.rate * ax).exp(),
        })
    }

    /// G(z) = ∫_0^z K(y) dy, an odd function saturating at ±γ/2.
    pub fn eval_cumulative(&self, z: f64) -> f64 {
        let sg = z.signum();
        let az = z.abs();
        let g = self.gamma;
        let v = match self.family {
            Family::Ws => {
                let t = az.min(1.0);
                let e = 1.0 + 1.0 / self.s;
                0.5 * (self.s + 1.0) * (t - t.powf(e) / e)
            }
            Family::WsIndicator => 0.5 * az.min(1.0),
            Family::WsLogCusp => {
                let t = az.min(1.0);
                if t == 0.0 {
                    0.0
                } else {
                    0.5 * (t - t * t.ln())
                }
            }
            Family::TopHat => az.min(self.radius) / (2.0 * self.radius),
            Family::RaisedCosine => {
                let r = self.radius;
                let t = az.min(r);
                (t + r / PI * (PI * t / r).sin()) / (2.0 * r)
            }
            Family::Exponential => 0.5 * (1.0 - (-self.rate * az).exp()),
            Family::Zero => 0.0,
        };
        g * sg * v
    }

    /// ‖∇K‖_{L^q(ℝ)}.
    ///
    /// Closed forms for the W_s family and jump kernels (whose gradient is a
    /// measure with total variation |γ|/R, finite for q = 1 only); adaptive
    /// quadrature for the smooth families.
    pub fn grad_lq_norm(&self, q: f64) -> Result<f64> {
        if !(q >= 1.0) || !q.is_finite() {
            return Err(Error::Invalid(format!("norm exponent must be finite and ≥ 1, got {q}")));
        }
        let g = self.gamma.abs();
        match self.family {
            Family::Zero => Ok(0.0),
            Family::Ws => {
                let s = self.s;
                let qbar = if s > 1.0 { s / (s - 1.0) } else { f64::INFINITY };
                if q >= qbar {
                    return Err(Error::DivergentNorm { q, qbar });
                }
                let c = (s + 1.0) / (2.0 * s);
                let base = 1.0 - q * (1.0 - 1.0 / s);
                Ok(2f64.powf(1.0 / q) * c * base.powf(-1.0 / q) * g)
            }
            Family::WsIndicator | Family::TopHat => {
                if q > 1.0 {
                    Err(Error::DivergentNorm { q, qbar: 1.0 })
                } else {
                    Ok(g / self.support_radius())
                }
            }
            Family::WsLogCusp => Err(Error::DivergentNorm { q, qbar: 1.0 }),
            Family::RaisedCosine | Family::Exponential => {
                if g == 0.0 {
                    return Ok(0.0);
                }
                let r = self.support_radius();
                let unit = KernelSpec { gamma: 1.0, ..*self };
                let f = |x: f64| unit.eval_grad(x).unwrap().abs().powf(q);
                let half = quad::integrate(f, 0.0, r, 1e-12, 4000).value;
                Ok(g * (2.0 * half).powf(1.0 / q))
            }
        }
    }

    /// Fourier coefficients K̂(k_n) = ∫ K(x) e^{−i k_n x} dx for k_n = πn/L,
    /// laid out in FFT order (n = 0..M/2, then −M/2+1..−1).
    ///
    /// With cell spacing 2L/M, IDFT(K̂ · DFT(u)) is the periodic convolution
    /// K ∗ u sampled on the grid.
    pub fn fourier_coefficients(&self, l: f64, m: usize) -> Result<Vec<Complex64>> {
        if m == 0 || !m.is_power_of_two() {
            return Err(Error::BadResolution(format!("M = {m} must be a power of two")));
        }
        if self.is_zero() {
            return Ok(vec![Complex64::new(0.0, 0.0); m]);
        }
        let r = self.support_radius();
        if r >= l {
            return Err(Error::DomainTooSmall { l, radius: r });
        }
        // All families are even, so K̂ is real: 2∫_0^r K(x) cos(kx) dx.
        let unit = KernelSpec { gamma: 1.0, ..*self };
        let mut half = vec![0.0; m / 2 + 1];
        for (n, h) in half.iter_mut().enumerate() {
            let k = PI * n as f64 / l;
            *h = self.gamma * cosine_transform(&unit, k, r);
        }
        let mut out = Vec::with_capacity(m);
        for idx in 0..m {
            let n = if idx <= m / 2 { idx } else { m - idx };
            out.push(Complex64::new(half[n], 0.0));
        }
        Ok(out)
    }
}

/// 2∫_0^r K(x) cos(kx) dx, split at the oscillation half-periods so each
/// panel is smooth apart from the (integrable) origin behaviour.
fn cosine_transform(k: &KernelSpec, wave: f64, r: f64) -> f64 {
    let f = |x: f64| k.eval(x) * (wave * x).cos();
    let panels = ((wave * r / PI).ceil() as usize).max(1);
    let h = r / panels as f64;
    let mut acc = 0.0;
    for p in 0..panels {
        let a = p as f64 * h;
        let b = if p + 1 == panels { r } else { a + h };
        acc += quad::integrate(f, a, b, 1e-14, 2000).value;
    }
    2.0 * acc
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + b.abs())
    }

    #[test]
    fn eval_examples() {
        assert_eq!(KernelSpec::ws(1.0, 1.0).eval(0.0), 1.0);
        assert_eq!(KernelSpec::ws(1.0, 2.0).eval(1.0), 0.0);
        assert!(close(KernelSpec::ws(3.0, 2.0).eval(0.25), 2.25, 1e-15));
        assert_eq!(KernelSpec::ws(1.0, 2.0).eval(1.5), 0.0);
    }

    #[test]
    fn grad_examples() {
        assert!(close(KernelSpec::ws(1.0, 1.0).eval_grad(0.5).unwrap(), -1.0, 1e-15));
        assert!(close(KernelSpec::ws(1.0, 2.0).eval_grad(-0.25).unwrap(), 1.5, 1e-15));
        assert_eq!(KernelSpec::ws(1.0, 2.0).eval_grad(2.0).unwrap(), 0.0);
        assert!(matches!(KernelSpec::ws(1.0, 2.0).eval_grad(0.0), Err(Error::SingularPoint(_))));
        // finite-difference cross-check away from the origin
        let k = KernelSpec::ws(1.0, 2.0);
        let h = 1e-6;
        let fd = (k.eval(-0.25 + h) - k.eval(-0.25 - h)) / (2.0 * h);
        assert!(close(fd, 1.5, 1e-8));
    }

    #[test]
    fn norm_examples() {
        assert!(close(KernelSpec::ws(1.0, 1.0).grad_lq_norm(2.0).unwrap(), 2f64.sqrt(), 1e-14));
        assert!(close(KernelSpec::ws(2.0, 1.0).grad_lq_norm(1.0).unwrap(), 4.0, 1e-14));
        assert!(matches!(KernelSpec::ws(1.0, 2.0).grad_lq_norm(2.0), Err(Error::DivergentNorm { .. })));
        assert!(matches!(KernelSpec::top_hat(1.0, 1.0).grad_lq_norm(2.0), Err(Error::DivergentNorm { .. })));
        assert!(close(KernelSpec::top_hat(2.0, 0.5).grad_lq_norm(1.0).unwrap(), 4.0, 1e-15));
    }

    #[test]
    fn exponential_norm_matches_closed_form() {
        // ‖K'‖_q^q = 2 (λ²/2)^q / (qλ) for unit γ
        for &(lam, q) in &[(1.0, 1.0), (2.0, 2.0), (0.5, 3.5)] {
            let k = KernelSpec::exponential(1.0, lam);
            let exact = (2.0 * (lam * lam / 2.0f64).powf(q) / (q * lam)).powf(1.0 / q);
            assert!(close(k.grad_lq_norm(q).unwrap(), exact, 1e-10));
        }
    }

    #[test]
    fn zero_fourier() {
        let c = KernelSpec::zero().fourier_coefficients(20.0, 64).unwrap();
        assert!(c.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn top_hat_fourier_is_sinc() {
        let l = 20.0;
        let m = 256;
        let c = KernelSpec::top_hat(1.0, 1.0).fourier_coefficients(l, m).unwrap();
        assert!(close(c[0].re, 1.0, 1e-13));
        for (idx, z) in c.iter().enumerate() {
            let n = if idx <= m / 2 { idx as f64 } else { idx as f64 - m as f64 };
            let k = PI * n / l;
            let exact = if k == 0.0 { 1.0 } else { k.sin() / k };
            assert!((z.re - exact).abs() < 1e-12, "mode {n}: {} vs {exact}", z.re);
        }
    }

    #[test]
    fn ws_fourier_unit_mass() {
        let c = KernelSpec::ws(1.0, 1.0).fourier_coefficients(20.0, 128).unwrap();
        assert!(close(c[0].re, 1.0, 1e-13));
        let c = KernelSpec::ws(1.0, 3.75).fourier_coefficients(20.0, 128).unwrap();
        assert!(close(c[0].re, 1.0, 1e-12));
    }

    #[test]
    fn domain_too_small() {
        assert!(matches!(
            KernelSpec::top_hat(1.0, 3.0).fourier_coefficients(2.0, 64),
            Err(Error::DomainTooSmall { .. })
        ));
        assert!(matches!(KernelSpec::ws(1.0, 2.0).fourier_coefficients(2.0, 100), Err(Error::BadResolution(_))));
    }

    #[test]
    fn cumulative_matches_quadrature() {
        let ks = [
            KernelSpec::ws(1.3, 3.75),
            KernelSpec::ws(1.0, 0.4),
            KernelSpec::ws_indicator(1.0),
            KernelSpec::ws_log_cusp(1.0),
            KernelSpec::top_hat(0.7, 2.0),
            KernelSpec::raised_cosine(1.0, 1.5),
            KernelSpec::exponential(2.0, 3.0),
        ];
        for k in ks {
            for &z in &[-2.5f64, -0.7, 0.1, 0.5, 1.0, 3.0] {
                let q = quad::integrate(|y| k.eval(y), 0.0, z.abs(), 1e-13, 4000).value * z.signum();
                assert!((k.eval_cumulative(z) - q).abs() < 1e-10, "{k:?} z={z}");
            }
        }
    }

    #[test]
    fn serde_rejects_unknown_and_invalid() {
        let k: KernelSpec = serde_json::from_str(r#"{"family":"Ws","gamma":2.0,"s":3.75}"#).unwrap();
        assert_eq!(k, KernelSpec::ws(2.0, 3.75));
        assert!(serde_json::from_str::<KernelSpec>(r#"{"family":"Ws","sigma":1}"#).is_err());
        assert!(serde_json::from_str::<KernelSpec>(r#"{"family":"Ws","s":-1}"#).is_err());
    }
}
