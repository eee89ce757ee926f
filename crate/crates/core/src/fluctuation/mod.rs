//! Linearized quantum fluctuations around the classical steady state.
//!
//! Quadrature basis throughout: (δX_c, δY_c, δX_m, δY_m, δq, δp).

mod covariance;
mod dd;
mod linear;
pub mod quadrature;
mod spectrum;
mod stability;

pub use covariance::{covariance_lyapunov, variance_lyapunov};
pub use linear::{build_linearized, LinearizedSystem, NoiseModel, DIM};
pub use spectrum::{
    mechanical_susceptibility, nsd_explicit, nsd_grid, nsd_resolvent, spectral_hints,
    variance_spectral, QuadConfig, SpectrumMethod, SpectrumSample, SPECTRAL_REL_TOL,
};
pub use stability::{stability, RouthVerdict, StabilityReport};

use serde::{Deserialize, Serialize};

/// Index of δY_c in the quadrature vector.
pub const Y_C: usize = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceMethod {
    Spectral,
    Lyapunov,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadDiagnostics {
    pub panels: usize,
    pub evaluations: usize,
    /// Estimated absolute error of the finite-range integral.
    pub abs_error: f64,
    /// Analytic estimate of the contribution beyond ±omega_max.
    pub tail: f64,
    pub omega_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VarianceResult {
    /// Steady-state ⟨δY_c²⟩.
    pub variance: f64,
    pub method: VarianceMethod,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<QuadDiagnostics>,
}
