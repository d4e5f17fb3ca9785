//! Numerical laboratory for heterogeneous nonlocal advection–diffusion
//! systems: ∂u_i/∂t = D_i Δu_i − ∇·(u_i ∇F_i[u]), F_i = Σ_j K_ij ∗ u_j.

pub mod cyclegraph;
pub mod diagnostics;
pub mod error;
pub mod harness;
pub mod kernel;
pub mod quad;
pub mod rhodynamics;
pub mod solver;
pub mod system;

pub use error::{Error, Result};
