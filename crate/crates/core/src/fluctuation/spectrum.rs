//! Symmetrized noise spectral density of the cavity phase quadrature and its
//! frequency integral.

use std::f64::consts::{PI, SQRT_2};

use nalgebra::SMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::linear::{LinearizedSystem, NoiseModel, DIM};
use super::quadrature::integrate;
use super::{stability, variance_lyapunov, QuadDiagnostics, VarianceMethod, VarianceResult, Y_C};
use crate::error::{Error, Result};
use crate::params::SystemParams;
use crate::steady::SteadyState;

type CMat6 = SMatrix<Complex64, DIM, DIM>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectrumMethod {
    Resolvent,
    Explicit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSample {
    /// Angular frequency, rad/s.
    pub omega: f64,
    pub s_yc: f64,
    pub method: SpectrumMethod,
}

fn require_stable(lin: &LinearizedSystem) -> Result<()> {
    let report = stability(lin);
    if report.stable {
        Ok(())
    } else {
        Err(Error::Unstable {
            margin: report.margin,
        })
    }
}

/// S_Yc(ω) = [M D M†]_YY with M = (−iω − A)⁻¹, without the stability check.
pub(crate) fn s_resolvent(lin: &LinearizedSystem, omega: f64) -> f64 {
    // The Y_c row r of M solves Bᵀ rᵀ = e_Y with B = −iω − A.
    let bt = CMat6::from_fn(|i, j| {
        let diag = if i == j {
            Complex64::new(0.0, -omega)
        } else {
            Complex64::new(0.0, 0.0)
        };
        diag - lin.a[(j, i)]
    });
    let mut e = SMatrix::<Complex64, DIM, 1>::zeros();
    e[Y_C] = Complex64::new(1.0, 0.0);
    let Some(r) = bt.lu().solve(&e) else {
        return f64::INFINITY;
    };
    let mut s = 0.0;
    for j in 0..DIM {
        for k in 0..DIM {
            let djk = lin.d[(j, k)];
            if djk != 0.0 {
                s += (r[j] * djk * r[k].conj()).re;
            }
        }
    }
    s.max(0.0)
}

/// Mechanical susceptibility ω_b/(ω_b² − ω² − iγ_bω).
pub fn mechanical_susceptibility(p: &SystemParams, omega: f64) -> Complex64 {
    p.omega_b / Complex64::new(p.omega_b * p.omega_b - omega * omega, -p.gamma_b * omega)
}

/// Phase-quadrature response to each input noise, written mode by mode:
/// the bare cavity response plus the back-action carried by the mechanics,
/// which is itself driven by the cavity amplitude, the magnon quadratures and
/// the thermal force.
pub(crate) fn s_explicit(p: &SystemParams, s: &SteadyState, omega: f64) -> f64 {
    let i = Complex64::i();
    let noise = NoiseModel::from_params(p);
    let g_c = SQRT_2 * p.g_cb * s.c_avg.norm();
    let g_m = SQRT_2 * p.g_mb * s.m_avg;
    let (dc, dm) = (s.delta_c_eff, s.delta_m_eff);
    let (sk_c, sk_m) = (p.kappa_c.sqrt(), p.kappa_m.sqrt());

    let a_c = 0.5 * p.kappa_c - i * omega;
    let a_m = 0.5 * p.kappa_m - i * omega;
    let chi_c = 1.0 / (a_c * a_c + dc * dc);
    let chi_m = 1.0 / (a_m * a_m + dm * dm);
    let chi_b = mechanical_susceptibility(p, omega);

    let den = 1.0 - chi_b * (g_c * g_c * dc * chi_c + g_m.norm_sqr() * dm * chi_m);
    // δY_c per unit mechanical force.
    let k = g_c * chi_b * a_c * chi_c / den;

    let c_xc = chi_c * (-dc * sk_c) + k * sk_c * chi_c * g_c * a_c;
    let c_yc = chi_c * a_c * sk_c + k * sk_c * chi_c * g_c * dc;
    let c_xm = -k * sk_m * chi_m * (g_m.re * a_m - g_m.im * dm);
    let c_ym = -k * sk_m * chi_m * (g_m.re * dm + g_m.im * a_m);

    let val = c_xc.norm_sqr() * noise.cavity_x
        + c_yc.norm_sqr() * noise.cavity_y
        + (c_xm.norm_sqr() + c_ym.norm_sqr()) * noise.magnon
        + k.norm_sqr() * p.gamma_b * noise.mechanical;
    val.max(0.0)
}

pub fn nsd_resolvent(lin: &LinearizedSystem, omega: f64) -> Result<SpectrumSample> {
    require_stable(lin)?;
    Ok(SpectrumSample {
        omega,
        s_yc: s_resolvent(lin, omega),
        method: SpectrumMethod::Resolvent,
    })
}

/// Same spectrum from the closed-form susceptibilities; `lin` only supplies
/// the stability check.
pub fn nsd_explicit(
    p: &SystemParams,
    s: &SteadyState,
    lin: &LinearizedSystem,
    omega: f64,
) -> Result<SpectrumSample> {
    require_stable(lin)?;
    Ok(SpectrumSample {
        omega,
        s_yc: s_explicit(p, s, omega),
        method: SpectrumMethod::Explicit,
    })
}

/// Spectrum on a frequency grid, evaluated in parallel; output keeps grid order.
pub fn nsd_grid(
    p: &SystemParams,
    s: &SteadyState,
    lin: &LinearizedSystem,
    omegas: &[f64],
    method: SpectrumMethod,
) -> Result<Vec<SpectrumSample>> {
    require_stable(lin)?;
    Ok(omegas
        .par_iter()
        .map(|&omega| {
            let s_yc = match method {
                SpectrumMethod::Resolvent => s_resolvent(lin, omega),
                SpectrumMethod::Explicit => s_explicit(p, s, omega),
            };
            SpectrumSample {
                omega,
                s_yc,
                method,
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadConfig {
    pub rel_tol: f64,
    pub max_panels: usize,
    /// Integration half-range, rad/s; defaults to 8·max(ω_b, |Δ̃_m|, κ_c, κ_m).
    pub omega_max: Option<f64>,
    /// Place panel boundaries around the resonances.
    pub use_hints: bool,
}

impl Default for QuadConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-7,
            max_panels: 20_000,
            omega_max: None,
            use_hints: true,
        }
    }
}

/// Acceptance threshold on the estimated relative quadrature error.
pub const SPECTRAL_REL_TOL: f64 = 1e-3;

fn default_omega_max(p: &SystemParams, s: &SteadyState) -> f64 {
    8.0 * p
        .omega_b
        .max(s.delta_m_eff.abs())
        .max(p.kappa_c)
        .max(p.kappa_m)
}

/// Panel boundaries clustered geometrically (ratio 4) around each resonance of
/// the integrand, clipped to [−omega_max, omega_max].
pub fn spectral_hints(
    p: &SystemParams,
    s: &SteadyState,
    lin: &LinearizedSystem,
    omega_max: f64,
) -> Vec<f64> {
    let mut features = vec![
        (p.omega_b, p.gamma_b),
        (-p.omega_b, p.gamma_b),
        (s.delta_m_eff, p.kappa_m),
        (-s.delta_m_eff, p.kappa_m),
        (0.0, 0.5 * p.kappa_c),
    ];
    for z in stability(lin).eigenvalues {
        if z.re < 0.0 {
            features.push((z.im, -z.re));
        }
    }
    let mut points = vec![-omega_max, omega_max];
    for (centre, width) in features {
        if !(width > 0.0) || centre.abs() >= omega_max {
            continue;
        }
        points.push(centre);
        let mut h = width;
        while h < 2.0 * omega_max {
            points.push(centre - h);
            points.push(centre + h);
            h *= 4.0;
        }
    }
    points.retain(|x| x.abs() <= omega_max);
    points.sort_by(f64::total_cmp);
    points.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * omega_max);
    points
}

/// (1/2π)∫_{|ω|>Ω} S_Yc dω. The even part E(ω) = S(ω) + S(−ω) of a rational
/// spectrum expands as c/ω² + d/ω⁴ + …; c and d are fitted at Ω and 2Ω.
fn spectral_tail(lin: &LinearizedSystem, omega_max: f64) -> f64 {
    let even = |w: f64| (s_resolvent(lin, w) + s_resolvent(lin, -w)) * w * w;
    let (e1, e2) = (even(omega_max), even(2.0 * omega_max));
    let d = 4.0 / 3.0 * (e1 - e2);
    let c = e1 - d;
    (c + d / 3.0) / (2.0 * PI * omega_max)
}

/// ⟨δY_c²⟩ = (1/2π)∫S_Yc(ω)dω by adaptive quadrature plus an asymptotic tail.
pub fn variance_spectral(
    p: &SystemParams,
    s: &SteadyState,
    lin: &LinearizedSystem,
    cfg: &QuadConfig,
) -> Result<VarianceResult> {
    require_stable(lin)?;
    let omega_max = cfg.omega_max.unwrap_or_else(|| default_omega_max(p, s));
    let breaks = if cfg.use_hints {
        spectral_hints(p, s, lin, omega_max)
    } else {
        vec![-omega_max, omega_max]
    };
    let out = integrate(
        |w| s_resolvent(lin, w),
        &breaks,
        cfg.rel_tol,
        0.0,
        cfg.max_panels,
    );
    let tail = spectral_tail(lin, omega_max);
    let variance = out.value / (2.0 * PI) + tail;
    let relative_error = out.abs_error / out.value.abs();
    if !(relative_error <= SPECTRAL_REL_TOL) {
        let lyapunov = variance_lyapunov(lin)
            .map(|v| v.variance)
            .unwrap_or(f64::NAN);
        return Err(Error::Quadrature {
            relative_error,
            panels: out.panels,
            value: variance,
            lyapunov,
        });
    }
    Ok(VarianceResult {
        variance,
        method: VarianceMethod::Spectral,
        diagnostics: Some(QuadDiagnostics {
            panels: out.panels,
            evaluations: out.evaluations,
            abs_error: out.abs_error / (2.0 * PI),
            tail,
            omega_max,
        }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fluctuation::build_linearized;
    use crate::params::{derive_params, DriveMode, RawConfig, Units};
    use crate::steady::solve_steady_state;

    fn noise_params(temperature: f64) -> (SystemParams, SteadyState, LinearizedSystem) {
        let p = derive_params(&RawConfig {
            units: Units::Hz,
            omega_m: 10e9,
            omega_b: 10e6,
            omega_c: None,
            kappa_m: 1e6,
            kappa_c: 1e5,
            gamma_b: 100.0,
            g_mb: 1.0,
            g_cb: 10.0,
            delta_m_eff: Some(0.5e6),
            delta_m: None,
            delta_c: None,
            laser_power: 1e-6,
            laser_wavelength: 1064e-9,
            temperature,
            drive_mode: DriveMode::Population { n_m: 1e10 },
            squeeze_db: 0.0,
        })
        .unwrap();
        let s = *solve_steady_state(&p).unwrap().default_state();
        let lin = build_linearized(&p, &s);
        (p, s, lin)
    }

    #[test]
    fn resolvent_matches_explicit() {
        let (p, s, lin) = noise_params(293.0);
        for k in 0..200 {
            let w = -3.0 * p.omega_b + 6.0 * p.omega_b * (k as f64 + 0.37) / 200.0;
            let a = nsd_resolvent(&lin, w).unwrap().s_yc;
            let b = nsd_explicit(&p, &s, &lin, w).unwrap().s_yc;
            assert!((a - b).abs() <= 1e-9 * a, "ω = {w}: {a} vs {b}");
        }
    }

    #[test]
    fn mechanical_susceptibility_on_resonance_is_q() {
        let (p, ..) = noise_params(293.0);
        let chi = mechanical_susceptibility(&p, p.omega_b);
        assert!((p.omega_b * chi.norm() - p.q_mech).abs() < 1e-9 * p.q_mech);
        assert!((chi.re).abs() < 1e-9 * chi.norm());
    }

    #[test]
    fn no_optomechanical_coupling_gives_bare_cavity() {
        let (mut p, s, _) = noise_params(293.0);
        p.g_cb = 0.0;
        let mut s0 = s;
        s0.delta_c_eff = 0.0;
        let lin = build_linearized(&p, &s0);
        for w in [0.0, 1e5, p.omega_b, 3.3e8] {
            let bare = 0.5 * p.kappa_c / (0.25 * p.kappa_c * p.kappa_c + w * w);
            assert!((s_explicit(&p, &s0, w) - bare).abs() < 1e-12 * bare);
            assert!((s_resolvent(&lin, w) - bare).abs() < 1e-12 * bare);
        }
        let v = variance_spectral(&p, &s0, &lin, &QuadConfig::default()).unwrap();
        assert!((v.variance - 0.5).abs() < 1e-6, "{}", v.variance);
    }

    #[test]
    fn mechanical_peak_dominates() {
        let (p, _, lin) = noise_params(293.0);
        let peak = s_resolvent(&lin, p.omega_b);
        assert!(peak > 1e3 * s_resolvent(&lin, 0.0));
        assert!(peak > 1e3 * s_resolvent(&lin, 2.0 * p.omega_b));
    }

    #[test]
    fn spectral_agrees_with_lyapunov() {
        for t in [293.0, 4.0, 0.01] {
            let (p, s, lin) = noise_params(t);
            let spec = variance_spectral(&p, &s, &lin, &QuadConfig::default()).unwrap();
            let lyap = variance_lyapunov(&lin).unwrap().variance;
            assert!(
                (spec.variance - lyap).abs() < 1e-3 * lyap,
                "T = {t}: {} vs {lyap}",
                spec.variance
            );
            assert!(spec.diagnostics.unwrap().tail > 0.0);
        }
    }

    #[test]
    fn hints_are_load_bearing() {
        // At the acceptance tolerance a blind adaptive pass declares convergence
        // on the smooth background before it ever resolves the mechanical line.
        let (p, s, lin) = noise_params(4.0);
        let cfg = QuadConfig {
            rel_tol: SPECTRAL_REL_TOL,
            ..QuadConfig::default()
        };
        let hinted = variance_spectral(&p, &s, &lin, &cfg).unwrap().variance;
        let lyap = variance_lyapunov(&lin).unwrap().variance;
        assert!((hinted - lyap).abs() < 1e-6 * lyap);
        let blind = variance_spectral(
            &p,
            &s,
            &lin,
            &QuadConfig {
                use_hints: false,
                ..cfg
            },
        )
        .unwrap()
        .variance;
        assert!(
            (hinted - blind).abs() > SPECTRAL_REL_TOL * hinted,
            "{hinted} vs {blind}"
        );
    }

    #[test]
    fn grid_matches_pointwise() {
        let (p, s, lin) = noise_params(293.0);
        let omegas: Vec<f64> = (0..64).map(|k| k as f64 * 2e6).collect();
        let a = nsd_grid(&p, &s, &lin, &omegas, SpectrumMethod::Resolvent).unwrap();
        let b = nsd_grid(&p, &s, &lin, &omegas, SpectrumMethod::Explicit).unwrap();
        for ((x, y), w) in a.iter().zip(&b).zip(&omegas) {
            assert_eq!(x.omega, *w);
            assert_eq!(x.s_yc, nsd_resolvent(&lin, *w).unwrap().s_yc);
            assert!((x.s_yc - y.s_yc).abs() <= 1e-9 * x.s_yc);
        }
    }

    #[test]
    fn unstable_system_refused() {
        let (_, _, mut lin) = noise_params(293.0);
        lin.a[(0, 0)] = 1e6;
        assert!(matches!(
            nsd_resolvent(&lin, 0.0),
            Err(Error::Unstable { .. })
        ));
    }
}
