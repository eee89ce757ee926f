use std::f64::consts::SQRT_2;

use nalgebra::SMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::params::SystemParams;
use crate::steady::SteadyState;

pub const DIM: usize = 6;

pub type Mat6 = SMatrix<f64, DIM, DIM>;

/// Symmetrized intensities of the white input noises, per unit decay rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    /// ⟨X_c^in X_c^in⟩_sym; 1/2 for vacuum, anti-squeezed otherwise.
    pub cavity_x: f64,
    /// ⟨Y_c^in Y_c^in⟩_sym; 1/2 for vacuum, squeezed otherwise.
    pub cavity_y: f64,
    /// Magnon quadrature noise n_m + 1/2.
    pub magnon: f64,
    /// Mechanical bath 2n_b + 1.
    pub mechanical: f64,
}

impl NoiseModel {
    /// Thermal magnon and phonon baths, vacuum or phase-squeezed cavity input.
    pub fn from_params(p: &SystemParams) -> Self {
        let s = 10f64.powf(p.squeeze_db / 10.0);
        Self {
            cavity_x: 0.5 * s,
            cavity_y: 0.5 / s,
            magnon: p.n_m + 0.5,
            mechanical: 2.0 * p.n_b + 1.0,
        }
    }
}

/// Drift and diffusion matrices of the linearized quadrature dynamics
/// v̇ = A·v + n, ⟨n(t)nᵀ(t')⟩_sym = D·δ(t − t').
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearizedSystem {
    pub a: Mat6,
    pub d: Mat6,
    /// Optomechanical coupling √2·g_cb·|⟨c⟩| (cavity quadratures are taken
    /// relative to the mean-field phase).
    pub g_c: f64,
    /// Magnomechanical coupling √2·g_mb·⟨m⟩.
    pub g_m: Complex64,
    pub noise: NoiseModel,
}

pub fn build_linearized(p: &SystemParams, s: &SteadyState) -> LinearizedSystem {
    let g_c = SQRT_2 * p.g_cb * s.c_avg.norm();
    let g_m = SQRT_2 * p.g_mb * s.m_avg;
    let (kc, km) = (0.5 * p.kappa_c, 0.5 * p.kappa_m);
    let (dc, dm) = (s.delta_c_eff, s.delta_m_eff);
    let (re, im) = (g_m.re, g_m.im);
    let wb = p.omega_b;

    #[rustfmt::skip]
    let a = Mat6::from_row_slice(&[
        -kc,  dc,  0.0, 0.0, 0.0,  0.0,
        -dc, -kc,  0.0, 0.0, g_c,  0.0,
        0.0, 0.0, -km,  dm,  im,   0.0,
        0.0, 0.0, -dm, -km, -re,   0.0,
        0.0, 0.0,  0.0, 0.0, 0.0,  wb,
        g_c, 0.0, -re, -im, -wb, -p.gamma_b,
    ]);

    let noise = NoiseModel::from_params(p);
    let mut d = Mat6::zeros();
    d[(0, 0)] = p.kappa_c * noise.cavity_x;
    d[(1, 1)] = p.kappa_c * noise.cavity_y;
    d[(2, 2)] = p.kappa_m * noise.magnon;
    d[(3, 3)] = p.kappa_m * noise.magnon;
    d[(5, 5)] = p.gamma_b * noise.mechanical;

    LinearizedSystem {
        a,
        d,
        g_c,
        g_m,
        noise,
    }
}

impl LinearizedSystem {
    /// Largest absolute entry of A, used to normalize numerical work.
    pub fn scale(&self) -> f64 {
        self.a.amax().max(f64::MIN_POSITIVE)
    }
}
