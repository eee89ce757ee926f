//! Classical steady state of the driven magnon-phonon-cavity system.
//!
//! The coupled mean-field equations reduce to one real equation for the
//! mechanical displacement q: both detunings depend on q, and q depends on both
//! mode populations. [`FixedPointMap`] is that scalar map; its roots are found by
//! a bracketed scan so that every branch of a multistable response is reported.

use std::f64::consts::SQRT_2;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{MagnonDrive, SystemParams};

/// Relative residual required of every returned root.
pub const ROOT_RESIDUAL_TOL: f64 = 1e-12;

/// Threshold on Δ̃_c/κ_c below which the phase meter is treated as linear.
pub const LINEAR_DETUNING_RATIO: f64 = 0.1;

/// Default reading of "much less than" in the measuring-range inequalities.
pub const DEFAULT_WINDOW_MARGIN: f64 = 0.1;

const SCAN_INTERVALS: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteadyState {
    pub m_avg: Complex64,
    pub c_avg: Complex64,
    pub q_avg: f64,
    pub p_avg: f64,
    pub delta_m_eff: f64,
    pub delta_c_eff: f64,
    /// Bare magnon detuning (back-solved in population mode).
    pub delta_m: f64,
    /// Bare cavity detuning.
    pub delta_c: f64,
    /// Magnon Rabi frequency (back-solved in population mode).
    pub rabi: f64,
    pub n_m: f64,
    pub n_c: f64,
    /// |F(q_avg)| of the scalar self-consistency map.
    pub residual: f64,
}

/// All roots of the self-consistency map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteadySolution {
    pub roots: Vec<SteadyState>,
    /// Index of the root reached by ramping the drives up from zero.
    pub default_index: usize,
    pub multistable: bool,
}

impl SteadySolution {
    pub fn default_state(&self) -> &SteadyState {
        &self.roots[self.default_index]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum MagnonForce {
    /// Population is held fixed.
    Fixed { n_m: f64 },
    /// Population follows the Lorentzian response to a fixed Rabi drive.
    Driven {
        omega_sq: f64,
        delta_m: f64,
        kappa_m: f64,
    },
}

/// Scalar self-consistency map
/// F(q) = [g_cb·N_c(q) − g_mb·N_m(q)]/ω_b − q.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPointMap {
    g_cb: f64,
    g_mb: f64,
    omega_b: f64,
    e_sq: f64,
    delta_c: f64,
    kappa_c: f64,
    magnon: MagnonForce,
}

impl FixedPointMap {
    pub fn new(p: &SystemParams) -> Self {
        let magnon = match p.drive {
            MagnonDrive::Population { n_m, .. } => MagnonForce::Fixed { n_m },
            MagnonDrive::Rabi { omega, delta_m } => MagnonForce::Driven {
                omega_sq: omega * omega,
                delta_m,
                kappa_m: p.kappa_m,
            },
        };
        Self {
            g_cb: p.g_cb,
            g_mb: p.g_mb,
            omega_b: p.omega_b,
            e_sq: p.e_drive * p.e_drive,
            delta_c: p.bare_cavity_detuning(),
            kappa_c: p.kappa_c,
            magnon,
        }
    }

    pub fn cavity_population(&self, q: f64) -> f64 {
        let d = self.delta_c - self.g_cb * q;
        self.e_sq / (d * d + 0.25 * self.kappa_c * self.kappa_c)
    }

    pub fn magnon_population(&self, q: f64) -> f64 {
        match self.magnon {
            MagnonForce::Fixed { n_m } => n_m,
            MagnonForce::Driven {
                omega_sq,
                delta_m,
                kappa_m,
            } => {
                let d = delta_m + self.g_mb * q;
                omega_sq / (d * d + 0.25 * kappa_m * kappa_m)
            }
        }
    }

    pub fn eval(&self, q: f64) -> f64 {
        (self.g_cb * self.cavity_population(q) - self.g_mb * self.magnon_population(q))
            / self.omega_b
            - q
    }

    /// Interval guaranteed to contain every root, padded so that F changes sign
    /// strictly across it.
    pub fn bracket(&self) -> (f64, f64) {
        let cav_max = self.g_cb * self.e_sq / (0.25 * self.kappa_c * self.kappa_c) / self.omega_b;
        let mag_max = match self.magnon {
            MagnonForce::Fixed { n_m } => self.g_mb * n_m / self.omega_b,
            MagnonForce::Driven {
                omega_sq, kappa_m, ..
            } => self.g_mb * omega_sq / (0.25 * kappa_m * kappa_m) / self.omega_b,
        };
        let lo = -1.5 * mag_max;
        let hi = 1.5 * cav_max;
        let pad = 0.05 * (hi - lo);
        (lo - pad, hi + pad)
    }

    /// Displacements where one of the Lorentzian responses peaks, with their
    /// half-widths in q.
    fn features(&self) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        if self.g_cb > 0.0 && self.e_sq > 0.0 {
            out.push((self.delta_c / self.g_cb, 0.5 * self.kappa_c / self.g_cb));
        }
        if let MagnonForce::Driven {
            omega_sq,
            delta_m,
            kappa_m,
        } = self.magnon
        {
            if self.g_mb > 0.0 && omega_sq > 0.0 {
                out.push((-delta_m / self.g_mb, 0.5 * kappa_m / self.g_mb));
            }
        }
        out
    }

    /// Same map with both drive intensities scaled by `s`.
    fn scaled(&self, s: f64) -> Self {
        let mut m = *self;
        m.e_sq *= s;
        m.magnon = match self.magnon {
            MagnonForce::Fixed { n_m } => MagnonForce::Fixed { n_m: n_m * s },
            MagnonForce::Driven {
                omega_sq,
                delta_m,
                kappa_m,
            } => MagnonForce::Driven {
                omega_sq: omega_sq * s,
                delta_m,
                kappa_m,
            },
        };
        m
    }

    /// Scan nodes: a uniform grid plus geometric clusters around each
    /// Lorentzian peak, so narrow features are never stepped over.
    fn scan_nodes(&self, lo: f64, hi: f64) -> Vec<f64> {
        let mut nodes: Vec<f64> = (0..=SCAN_INTERVALS)
            .map(|i| lo + (hi - lo) * i as f64 / SCAN_INTERVALS as f64)
            .collect();
        for (center, width) in self.features() {
            let mut offset = width / 256.0;
            while offset < (hi - lo) {
                for x in [center - offset, center + offset] {
                    if x > lo && x < hi {
                        nodes.push(x);
                    }
                }
                offset *= 1.25;
            }
            if center > lo && center < hi {
                nodes.push(center);
            }
        }
        nodes.sort_by(f64::total_cmp);
        nodes.dedup();
        nodes
    }

    /// Every sign-change root in the bracket, polished to machine precision.
    pub fn roots(&self) -> Vec<f64> {
        let (lo, hi) = self.bracket();
        if hi - lo == 0.0 {
            return vec![0.0];
        }
        let nodes = self.scan_nodes(lo, hi);
        let values: Vec<f64> = nodes.iter().map(|&q| self.eval(q)).collect();
        let mut roots = Vec::new();
        for i in 0..nodes.len() {
            if values[i] == 0.0 {
                roots.push(nodes[i]);
                continue;
            }
            if i + 1 < nodes.len()
                && values[i + 1] != 0.0
                && values[i].signum() != values[i + 1].signum()
            {
                roots.push(brent(
                    |q| self.eval(q),
                    nodes[i],
                    nodes[i + 1],
                    values[i],
                    values[i + 1],
                ));
            }
        }
        roots
    }
}

/// Brent's method on a sign-changing bracket, run to floating-point convergence.
fn brent(f: impl Fn(f64) -> f64, a0: f64, b0: f64, fa0: f64, fb0: f64) -> f64 {
    let (mut a, mut b, mut fa, mut fb) = (a0, b0, fa0, fb0);
    if fa.abs() < fb.abs() {
        std::mem::swap(&mut a, &mut b);
        std::mem::swap(&mut fa, &mut fb);
    }
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut bisected = true;
    for _ in 0..200 {
        if fb == 0.0 {
            return b;
        }
        let tol = 2.0 * f64::EPSILON * b.abs().max(f64::MIN_POSITIVE);
        if (b - a).abs() <= tol {
            break;
        }
        let mut s = if fa != fc && fb != fc {
            a * fb * fc / ((fa - fb) * (fa - fc))
                + b * fa * fc / ((fb - fa) * (fb - fc))
                + c * fa * fb / ((fc - fa) * (fc - fb))
        } else {
            b - fb * (b - a) / (fb - fa)
        };
        let m = 0.25 * (3.0 * a + b);
        let out_of_range = !((s > m.min(b) && s < m.max(b)) || s == b);
        if out_of_range
            || (bisected && (s - b).abs() >= 0.5 * (b - c).abs())
            || (!bisected && (s - b).abs() >= 0.5 * (c - d).abs())
            || (bisected && (b - c).abs() < tol)
            || (!bisected && (c - d).abs() < tol)
        {
            s = 0.5 * (a + b);
            bisected = true;
        } else {
            bisected = false;
        }
        let fs = f(s);
        d = c;
        c = b;
        fc = fb;
        if fa.signum() != fs.signum() {
            b = s;
            fb = fs;
        } else {
            a = s;
            fa = fs;
        }
        if fa.abs() < fb.abs() {
            std::mem::swap(&mut a, &mut b);
            std::mem::swap(&mut fa, &mut fb);
        }
    }
    b
}

fn assemble(p: &SystemParams, map: &FixedPointMap, q: f64) -> SteadyState {
    let delta_c = p.bare_cavity_detuning();
    let mut delta_c_eff = delta_c - p.g_cb * q;
    // A difference at the rounding level of Δ_c carries no information.
    if delta_c_eff.abs() <= 4.0 * f64::EPSILON * delta_c.abs() {
        delta_c_eff = 0.0;
    }
    let c_avg = p.e_drive / Complex64::new(0.5 * p.kappa_c, delta_c_eff);
    let (delta_m, delta_m_eff, rabi) = match p.drive {
        MagnonDrive::Population { n_m, delta_m_eff } => {
            let rabi = n_m.sqrt() * delta_m_eff.hypot(0.5 * p.kappa_m);
            (delta_m_eff - p.g_mb * q, delta_m_eff, rabi)
        }
        MagnonDrive::Rabi { omega, delta_m } => (delta_m, delta_m + p.g_mb * q, omega),
    };
    let m_avg = rabi / Complex64::new(0.5 * p.kappa_m, delta_m_eff);
    SteadyState {
        m_avg,
        c_avg,
        q_avg: q,
        p_avg: 0.0,
        delta_m_eff,
        delta_c_eff,
        delta_m,
        delta_c,
        rabi,
        n_m: m_avg.norm_sqr(),
        n_c: c_avg.norm_sqr(),
        residual: map.eval(q).abs(),
    }
}

/// Root reached by ramping both drive intensities from zero, tracking the
/// nearest root at each step.
fn continued_root(map: &FixedPointMap, candidates: &[f64]) -> usize {
    const STEPS: usize = 400;
    let mut q = 0.0;
    for k in 1..STEPS {
        let s = k as f64 / STEPS as f64;
        let roots = map.scaled(s).roots();
        if let Some(&next) = roots
            .iter()
            .min_by(|a, b| (*a - q).abs().total_cmp(&(*b - q).abs()))
        {
            q = next;
        }
    }
    candidates
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - q).abs().total_cmp(&(b.1 - q).abs()))
        .map(|(i, _)| i)
        .unwrap_or(0)
}

pub fn solve_steady_state(p: &SystemParams) -> Result<SteadySolution> {
    let map = FixedPointMap::new(p);
    let roots = map.roots();
    if roots.is_empty() {
        let (lo, hi) = map.bracket();
        return Err(Error::Solver {
            reason: "no sign change of the self-consistency map".into(),
            diagnostics: format!(
                "bracket [{lo:.6e}, {hi:.6e}], F(lo) = {:.6e}, F(hi) = {:.6e}",
                map.eval(lo),
                map.eval(hi)
            ),
        });
    }
    let default_index = if roots.len() > 1 {
        continued_root(&map, &roots)
    } else {
        0
    };
    let states: Vec<SteadyState> = roots.iter().map(|&q| assemble(p, &map, q)).collect();
    for s in &states {
        if s.residual > ROOT_RESIDUAL_TOL * s.q_avg.abs().max(1.0) {
            log::warn!(
                "steady-state root q = {:.6e} has residual {:.3e}",
                s.q_avg,
                s.residual
            );
        }
    }
    Ok(SteadySolution {
        multistable: states.len() > 1,
        roots: states,
        default_index,
    })
}

/// Cavity amplitude and phase quadratures of the mean field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quadratures {
    pub x_c: f64,
    pub y_c: f64,
}

pub fn cavity_quadratures(s: &SteadyState, p: &SystemParams) -> Quadratures {
    let d = s.delta_c_eff;
    let den = d * d + 0.25 * p.kappa_c * p.kappa_c;
    Quadratures {
        x_c: SQRT_2 * 0.5 * p.e_drive * p.kappa_c / den,
        y_c: -SQRT_2 * p.e_drive * d / den,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearEstimate {
    pub y_c: f64,
    /// Estimated Δ̃_c/κ_c at this population.
    pub detuning_ratio: f64,
    /// Whether the ratio is below [`LINEAR_DETUNING_RATIO`].
    pub linear: bool,
}

/// Phase per magnon of the linear meter, |Y_c|/N_m.
pub fn meter_slope(p: &SystemParams) -> f64 {
    4.0 * SQRT_2 * p.e_drive * p.g_cb * p.g_mb / (p.kappa_c * p.kappa_c * p.omega_b)
}

pub fn linear_phase_estimate(p: &SystemParams, n_m: f64) -> LinearEstimate {
    let ratio = p.g_cb * p.g_mb * n_m / (p.omega_b * p.kappa_c);
    LinearEstimate {
        y_c: -meter_slope(p) * n_m,
        detuning_ratio: ratio,
        linear: ratio < LINEAR_DETUNING_RATIO,
    }
}

/// Population whose linear-meter estimate equals the threshold detuning.
pub fn linear_range_limit(p: &SystemParams) -> f64 {
    LINEAR_DETUNING_RATIO * p.kappa_c * p.omega_b / (p.g_cb * p.g_mb)
}

/// Magnon population inferred from a measured phase quadrature.
///
/// Inside the linear range this is the exact inverse of
/// [`linear_phase_estimate`]. Outside it an [`Error::OutOfLinearRange`] is
/// returned carrying the inversion of the exact quadrature model as fallback.
pub fn invert_population(p: &SystemParams, y_measured: f64) -> Result<f64> {
    let slope = meter_slope(p);
    if !(slope > 0.0) {
        return Err(Error::Domain(
            "phase meter has zero slope (E, g_cb or g_mb vanish)".into(),
        ));
    }
    let y = y_measured.abs();
    let n_lin = linear_range_limit(p);
    let linear_max = slope * n_lin;
    if y <= linear_max {
        return Ok(y / slope);
    }
    Err(Error::OutOfLinearRange {
        measured: y,
        linear_max,
        fallback: invert_exact(p, y)?,
    })
}

fn exact_abs_phase(p: &SystemParams, n_m: f64) -> Result<f64> {
    let pn = p.with_population(n_m)?;
    let sol = solve_steady_state(&pn)?;
    Ok(cavity_quadratures(sol.default_state(), &pn).y_c.abs())
}

/// Bisection of |Y_c(N_m)| = y on the rising flank of the exact response.
fn invert_exact(p: &SystemParams, y: f64) -> Result<Option<f64>> {
    // The rising flank ends near Δ̃_c = κ_c/2.
    let n_half = 0.5 * p.kappa_c * p.omega_b / (p.g_cb * p.g_mb);
    let mut lo = 0.0;
    let mut hi = None;
    let mut prev = 0.0;
    for k in 1..=64 {
        let n = n_half * k as f64 / 32.0;
        let v = exact_abs_phase(p, n)?;
        if v >= y {
            hi = Some(n);
            break;
        }
        if v < prev {
            return Ok(None);
        }
        prev = v;
        lo = n;
    }
    let Some(mut hi) = hi else { return Ok(None) };
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if exact_abs_phase(p, mid)? < y {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Some(0.5 * (lo + hi)))
}

/// Population range in which the phase meter is both perturbative in the
/// cavity backaction and linear in the magnon-induced shift.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeterWindow {
    pub n_min: f64,
    pub n_max: f64,
    pub slope: f64,
    pub bound: f64,
    pub margin: f64,
}

pub fn measuring_window(p: &SystemParams, margin: f64) -> Result<MeterWindow> {
    if !(margin > 0.0 && margin < 1.0) {
        return Err(Error::validation(
            "margin",
            format!("must lie in (0, 1), got {margin}"),
        ));
    }
    let n_c = (2.0 * p.e_drive / p.kappa_c).powi(2);
    // g_cb²·N_c/ω_b = margin·g_cb·g_mb·N_min/ω_b
    let n_min = if p.g_cb == 0.0 {
        0.0
    } else if p.g_mb == 0.0 {
        f64::INFINITY
    } else {
        p.g_cb * n_c / (margin * p.g_mb)
    };
    // g_cb·g_mb·N_max/ω_b = margin·κ_c
    let coupling = p.g_cb * p.g_mb;
    let n_max = if coupling == 0.0 {
        f64::INFINITY
    } else {
        margin * p.kappa_c * p.omega_b / coupling
    };
    if n_min >= n_max {
        return Err(Error::WindowEmpty(format!(
            "g_cb^2 N_c/omega_b << g_cb g_mb N_m/omega_b << kappa_c cannot hold at margin {margin}: \
             N_min = {n_min:.4e} >= N_max = {n_max:.4e} (laser too strong or couplings too weak)"
        )));
    }
    Ok(MeterWindow {
        n_min,
        n_max,
        slope: meter_slope(p),
        bound: 2.0 * SQRT_2 * p.g_mb / (p.kappa_c * p.omega_b).sqrt(),
        margin,
    })
}
