//! The model: N species, their diffusion constants, the kernel matrix, the
//! integrability exponents, and the initial data.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;

use crate::error::{Error, Result};
use crate::kernel::{Family, KernelSpec};

/// Offset below the critical exponent at which the gradient norm is taken
/// when λ is evaluated at the supremum exponent itself.
pub const QBAR_EPS: f64 = 1e-3;

/// Exponent used for families with no critical exponent.
pub const DEFAULT_Q: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum InitialData {
    Indicator {
        #[serde(default = "minus_one")]
        left: f64,
        #[serde(default = "plus_one")]
        right: f64,
        #[serde(default = "plus_one")]
        height: f64,
    },
    /// amplitude · exp(−((x − center)/width)²)
    Gaussian {
        #[serde(default)]
        center: f64,
        #[serde(default = "plus_one")]
        width: f64,
        #[serde(default = "plus_one")]
        amplitude: f64,
    },
    Zero,
    /// A seeded sum of Gaussian bumps with centres in [−2, 2].
    RandomBumps { count: usize, seed: u64 },
}

fn minus_one() -> f64 {
    -1.0
}
fn plus_one() -> f64 {
    1.0
}

impl InitialData {
    pub fn indicator() -> Self {
        InitialData::Indicator { left: -1.0, right: 1.0, height: 1.0 }
    }

    pub fn gaussian(center: f64, width: f64, amplitude: f64) -> Self {
        InitialData::Gaussian { center, width, amplitude }
    }

    fn bumps(count: usize, seed: u64) -> Vec<(f64, f64, f64)> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|_| (rng.random_range(-2.0..2.0), rng.random_range(0.2..1.0), rng.random_range(0.1..1.0)))
            .collect()
    }

    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            InitialData::Indicator { left, right, height } => {
                if x >= left && x <= right {
                    height
                } else {
                    0.0
                }
            }
            InitialData::Gaussian { center, width, amplitude } => amplitude * (-((x - center) / width).powi(2)).exp(),
            InitialData::Zero => 0.0,
            InitialData::RandomBumps { count, seed } => Self::bumps(count, seed)
                .iter()
                .map(|&(c, w, a)| a * (-((x - c) / w).powi(2)).exp())
                .sum(),
        }
    }

    /// ∫_a^b u_0, exact for every preset.
    pub fn cell_integral(&self, a: f64, b: f64) -> f64 {
        let gauss = |c: f64, w: f64, amp: f64| {
            0.5 * amp * w * std::f64::consts::PI.sqrt() * (erf((b - c) / w) - erf((a - c) / w))
        };
        match *self {
            InitialData::Indicator { left, right, height } => height * (b.min(right) - a.max(left)).max(0.0),
            InitialData::Gaussian { center, width, amplitude } => gauss(center, width, amplitude),
            InitialData::Zero => 0.0,
            InitialData::RandomBumps { count, seed } => {
                Self::bumps(count, seed).iter().map(|&(c, w, amp)| gauss(c, w, amp)).sum()
            }
        }
    }

    /// Total mass on ℝ.
    pub fn mass(&self) -> f64 {
        let sp = std::f64::consts::PI.sqrt();
        match *self {
            InitialData::Indicator { left, right, height } => height * (right - left).max(0.0),
            InitialData::Gaussian { width, amplitude, .. } => amplitude * width * sp,
            InitialData::Zero => 0.0,
            InitialData::RandomBumps { count, seed } => {
                Self::bumps(count, seed).iter().map(|&(_, w, a)| a * w * sp).sum()
            }
        }
    }

    /// Radius beyond which the data is below 1e−18 of its peak.
    pub fn support_radius(&self) -> f64 {
        match *self {
            InitialData::Indicator { left, right, .. } => left.abs().max(right.abs()),
            InitialData::Gaussian { center, width, .. } => center.abs() + 6.5 * width,
            InitialData::Zero => 0.0,
            InitialData::RandomBumps { count, seed } => Self::bumps(count, seed)
                .iter()
                .map(|&(c, w, _)| c.abs() + 6.5 * w)
                .fold(0.0, f64::max),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            InitialData::Indicator { left, right, height } if !(right > left) || height < 0.0 => {
                Err(Error::Invalid("indicator needs left < right and height ≥ 0".into()))
            }
            InitialData::Gaussian { width, amplitude, .. } if !(width > 0.0) || amplitude < 0.0 => {
                Err(Error::Invalid("gaussian needs width > 0 and amplitude ≥ 0".into()))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InteractionSystem {
    /// Spatial dimension. The PDE solver is one-dimensional; d > 1 is only
    /// meaningful for the regularity and dynamics arithmetic.
    #[serde(default = "one_usize")]
    pub d: usize,
    pub diffusion: Vec<f64>,
    /// kernels[i][j] = K_ij, how species i perceives species j.
    pub kernels: Vec<Vec<KernelSpec>>,
    /// Energy exponents p_i (defaults to 2).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<Vec<f64>>,
    /// Integrability exponents q_ij. Defaults follow [`InteractionSystem::default_exponent`].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<Vec<Vec<f64>>>,
    /// Mass override; otherwise the masses of the initial data.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub masses: Option<Vec<f64>>,
    #[serde(default)]
    pub initial: Vec<InitialData>,
}

fn one_usize() -> usize {
    1
}

impl InteractionSystem {
    pub fn new(diffusion: Vec<f64>, kernels: Vec<Vec<KernelSpec>>, initial: Vec<InitialData>) -> Self {
        InteractionSystem { d: 1, diffusion, kernels, p: None, q: None, masses: None, initial }
    }

    pub fn n(&self) -> usize {
        self.diffusion.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        if n == 0 {
            return Err(Error::Invalid("system needs at least one species".into()));
        }
        if self.d == 0 {
            return Err(Error::Invalid("dimension must be ≥ 1".into()));
        }
        if self.kernels.len() != n || self.kernels.iter().any(|r| r.len() != n) {
            return Err(Error::Invalid(format!("kernel matrix must be {n}×{n}")));
        }
        if self.diffusion.iter().any(|&d| !(d > 0.0 && d.is_finite())) {
            return Err(Error::Invalid("diffusion constants must be positive".into()));
        }
        for k in self.kernels.iter().flatten() {
            k.validate()?;
        }
        if let Some(p) = &self.p {
            if p.len() != n || p.iter().any(|&x| !(x >= 2.0 && x.is_finite())) {
                return Err(Error::Invalid("p must have N entries, each ≥ 2".into()));
            }
        }
        if let Some(q) = &self.q {
            if q.len() != n || q.iter().any(|r| r.len() != n || r.iter().any(|&x| !(x >= 1.0))) {
                return Err(Error::Invalid("q must be N×N with entries ≥ 1".into()));
            }
        }
        if let Some(m) = &self.masses {
            if m.len() != n || m.iter().any(|&x| !(x >= 0.0 && x.is_finite())) {
                return Err(Error::Invalid("masses must have N non-negative entries".into()));
            }
        }
        if !self.initial.is_empty() && self.initial.len() != n {
            return Err(Error::Invalid(format!("initial data must list {n} species")));
        }
        for u in &self.initial {
            u.validate()?;
        }
        Ok(())
    }

    pub fn p(&self) -> Vec<f64> {
        self.p.clone().unwrap_or_else(|| vec![2.0; self.n()])
    }

    pub fn masses(&self) -> Vec<f64> {
        if let Some(m) = &self.masses {
            return m.clone();
        }
        if self.initial.is_empty() {
            return vec![1.0; self.n()];
        }
        self.initial.iter().map(InitialData::mass).collect()
    }

    /// Default integrability exponent for a kernel: the critical exponent
    /// s/(s−1) for W_s with s > 1, 1 for jump kernels, [`DEFAULT_Q`] otherwise.
    pub fn default_exponent(k: &KernelSpec) -> f64 {
        match k.qbar() {
            Some(q) if q.is_finite() => q,
            Some(_) => DEFAULT_Q,
            None => 1.0,
        }
    }

    /// q_ij used for λ_ij = d/q_ij.
    pub fn exponents(&self) -> Vec<Vec<f64>> {
        if let Some(q) = &self.q {
            return q.clone();
        }
        self.kernels.iter().map(|row| row.iter().map(Self::default_exponent).collect()).collect()
    }

    /// ‖∇K_ij‖ at exponent q, stepping just below the critical exponent when
    /// q sits exactly on it.
    pub fn grad_norm_at(k: &KernelSpec, q: f64) -> Result<f64> {
        if k.is_zero() {
            return Ok(0.0);
        }
        match k.qbar() {
            Some(qbar) if qbar.is_finite() && q >= qbar && k.family == Family::Ws => {
                if q > qbar {
                    return Err(Error::DivergentNorm { q, qbar });
                }
                k.grad_lq_norm((qbar - QBAR_EPS).max(1.0))
            }
            _ => k.grad_lq_norm(q),
        }
    }

    /// Largest radius any kernel or initial datum reaches.
    pub fn support_radius(&self) -> f64 {
        let kr = self.kernels.iter().flatten().map(|k| k.support_radius()).fold(0.0, f64::max);
        let ur = self.initial.iter().map(|u| u.support_radius()).fold(0.0, f64::max);
        kr.max(ur)
    }

    /// Two-species preset with self-perception only: K_11 = γW_{s1}, K_22 = γW_{s2}.
    pub fn self_perception(gamma: f64, s1: f64, s2: f64, diffusion: f64) -> Self {
        Self::new(
            vec![diffusion; 2],
            vec![
                vec![KernelSpec::ws(gamma, s1), KernelSpec::zero()],
                vec![KernelSpec::zero(), KernelSpec::ws(gamma, s2)],
            ],
            vec![InitialData::indicator(), InitialData::indicator()],
        )
    }

    /// Two-species preset with cross-perception only: K_12 = γW_{s1}, K_21 = γW_{s2}.
    pub fn cross_perception(gamma: f64, s1: f64, s2: f64, diffusion: f64) -> Self {
        Self::new(
            vec![diffusion; 2],
            vec![
                vec![KernelSpec::zero(), KernelSpec::ws(gamma, s1)],
                vec![KernelSpec::ws(gamma, s2), KernelSpec::zero()],
            ],
            vec![InitialData::indicator(), InitialData::indicator()],
        )
    }

    /// Scale the strength of every non-zero kernel to γ.
    pub fn with_uniform_gamma(&self, gamma: f64) -> Self {
        let mut out = self.clone();
        for k in out.kernels.iter_mut().flatten() {
            if k.family != Family::Zero {
                k.gamma = gamma;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn masses_are_exact() {
        assert_eq!(InitialData::indicator().mass(), 2.0);
        let g = InitialData::gaussian(0.3, 1.0, 1.0);
        assert!((g.mass() - std::f64::consts::PI.sqrt()).abs() < 1e-15);
        assert!((g.cell_integral(-30.0, 30.0) - g.mass()).abs() < 1e-14);
        let r = InitialData::RandomBumps { count: 4, seed: 9 };
        assert!((r.cell_integral(-30.0, 30.0) - r.mass()).abs() < 1e-13);
    }

    #[test]
    fn indicator_cell_coverage() {
        let u = InitialData::indicator();
        assert!((u.cell_integral(0.9, 1.2) - 0.1).abs() < 1e-15);
        assert_eq!(u.cell_integral(1.5, 2.0), 0.0);
    }

    #[test]
    fn default_exponents() {
        let sys = InteractionSystem::self_perception(1.0, 3.75, 2.4, 0.1);
        let q = sys.exponents();
        assert!((q[0][0] - 15.0 / 11.0).abs() < 1e-15);
        assert!((q[1][1] - 12.0 / 7.0).abs() < 1e-15);
        assert_eq!(q[0][1], DEFAULT_Q);
    }

    #[test]
    fn json_roundtrip_and_rejects_unknown() {
        let sys = InteractionSystem::cross_perception(2.0, 3.75, 2.4, 0.1);
        let s = serde_json::to_string(&sys).unwrap();
        let back: InteractionSystem = serde_json::from_str(&s).unwrap();
        assert_eq!(back, sys);
        let bad = s.replacen("\"diffusion\"", "\"bogus\":1,\"diffusion\"", 1);
        assert!(serde_json::from_str::<InteractionSystem>(&bad).is_err());
    }
}
