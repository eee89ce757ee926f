//! Signal-to-noise ratio of the phase readout, magnon resolution and
//! parameter sweeps.
//!
//! Decibel figures use `10·log10` of the amplitude ratio |⟨Y_c⟩|/σ_Y.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fluctuation::{build_linearized, variance_lyapunov};
use crate::params::SystemParams;
use crate::steady::{
    cavity_quadratures, linear_range_limit, solve_steady_state, LINEAR_DETUNING_RATIO,
};

/// Relative tolerance of the unit-SNR bisection.
pub const RESOLUTION_REL_TOL: f64 = 1e-6;

/// Log-spaced probes used to check that the SNR rises over the search bracket.
const MONOTONE_PROBES: usize = 24;

pub fn to_db(snr_linear: f64) -> f64 {
    10.0 * snr_linear.log10()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensingPoint {
    pub n_m: f64,
    pub y_c_abs: f64,
    /// Steady-state ⟨δY_c²⟩.
    pub variance: f64,
    pub sigma_y: f64,
    pub snr_linear: f64,
    pub snr_db: f64,
    pub temperature: f64,
    pub laser_power: f64,
    pub squeeze_db: f64,
}

/// Full pipeline at the configured drive: steady state, stability, phase
/// mean and phase variance.
pub fn sensing_point(p: &SystemParams) -> Result<SensingPoint> {
    let s = *solve_steady_state(p)?.default_state();
    let y_c_abs = cavity_quadratures(&s, p).y_c.abs();
    let variance = variance_lyapunov(&build_linearized(p, &s))?.variance;
    let sigma_y = variance.sqrt();
    let snr_linear = y_c_abs / sigma_y;
    Ok(SensingPoint {
        n_m: s.n_m,
        y_c_abs,
        variance,
        sigma_y,
        snr_linear,
        snr_db: to_db(snr_linear),
        temperature: p.temperature,
        laser_power: p.laser_power,
        squeeze_db: p.squeeze_db,
    })
}

pub fn snr_at(p: &SystemParams, n_m: f64) -> Result<SensingPoint> {
    sensing_point(&p.with_population(n_m)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Resolution {
    /// Population detected at unit SNR.
    pub n_m: f64,
    /// The SNR already exceeds one at the lower end of the bracket.
    pub below_floor: bool,
    pub bracket: (f64, f64),
}

/// Magnon population at which the SNR equals one, by bisection in log N_m
/// over [1, linear-range limit].
pub fn resolution(p: &SystemParams) -> Result<Resolution> {
    let lo = 1.0;
    let hi = linear_range_limit(p);
    if !(hi.is_finite() && hi > lo) {
        return Err(Error::Domain(format!(
            "no linear meter range to search (limit {hi:.3e})"
        )));
    }
    unit_crossing(|n| snr_at(p, n).map(|x| x.snr_linear), lo, hi)
}

/// Where a rising `snr` crosses one in [lo, hi], by bisection in log N.
fn unit_crossing(snr: impl Fn(f64) -> Result<f64>, lo: f64, hi: f64) -> Result<Resolution> {
    let ratio = (hi / lo).ln();
    let mut prev = f64::NEG_INFINITY;
    for k in 0..MONOTONE_PROBES {
        let n = lo * (ratio * k as f64 / (MONOTONE_PROBES - 1) as f64).exp();
        let v = snr(n)?;
        if v < prev {
            return Err(Error::NonMonotone { lo, hi });
        }
        prev = v;
    }

    if snr(lo)? >= 1.0 {
        return Ok(Resolution {
            n_m: lo,
            below_floor: true,
            bracket: (lo, hi),
        });
    }
    if snr(hi)? < 1.0 {
        return Err(Error::Domain(format!(
            "SNR stays below 1 up to N_m = {hi:.3e}"
        )));
    }
    let (mut a, mut b) = (lo.ln(), hi.ln());
    while b - a > RESOLUTION_REL_TOL {
        let mid = 0.5 * (a + b);
        if snr(mid.exp())? < 1.0 {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok(Resolution {
        n_m: (0.5 * (a + b)).exp(),
        below_floor: false,
        bracket: (lo, hi),
    })
}

/// SNR improvement in dB from squeezing the cavity input by `s_db`, at the
/// drive configured in `p`.
pub fn squeezing_gain(p: &SystemParams, s_db: f64) -> Result<f64> {
    let plain = sensing_point(&p.with_squeeze_db(0.0)?)?;
    let squeezed = sensing_point(&p.with_squeeze_db(s_db)?)?;
    Ok(squeezed.snr_db - plain.snr_db)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SweepAxis {
    #[serde(rename = "N_m")]
    Population,
    #[serde(rename = "P_L")]
    LaserPower,
    #[serde(rename = "kappa_c")]
    KappaC,
    #[serde(rename = "T")]
    Temperature,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Population => "N_m",
            SweepAxis::LaserPower => "P_L",
            SweepAxis::KappaC => "kappa_c",
            SweepAxis::Temperature => "T",
        }
    }

    /// Copy of `p` with this axis set to `value` (angular units for κ_c).
    pub fn apply(self, p: &SystemParams, value: f64) -> Result<SystemParams> {
        match self {
            SweepAxis::Population => p.with_population(value),
            SweepAxis::LaserPower => p.with_laser_power(value),
            SweepAxis::KappaC => p.with_kappa_c(value),
            SweepAxis::Temperature => p.with_temperature(value),
        }
    }
}

impl std::str::FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "N_m" => Ok(SweepAxis::Population),
            "P_L" => Ok(SweepAxis::LaserPower),
            "kappa_c" => Ok(SweepAxis::KappaC),
            "T" => Ok(SweepAxis::Temperature),
            other => Err(Error::validation(
                "axis",
                format!("expected N_m, P_L, kappa_c or T, got `{other}`"),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    /// Classical quadratures only.
    Steady,
    /// Classical quadratures plus phase noise and SNR.
    Sensing,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteadyRow {
    pub n_m: f64,
    pub y_c: f64,
    pub x_c: f64,
    pub abs_y_c: f64,
    /// Δ̃_c, rad/s.
    pub delta_c_eff: f64,
    /// |Δ̃_c|/κ_c below the linear-meter threshold.
    pub linear: bool,
    pub multistable: bool,
}

pub fn steady_row(p: &SystemParams) -> Result<SteadyRow> {
    let sol = solve_steady_state(p)?;
    let s = sol.default_state();
    let q = cavity_quadratures(s, p);
    Ok(SteadyRow {
        n_m: s.n_m,
        y_c: q.y_c,
        x_c: q.x_c,
        abs_y_c: q.y_c.abs(),
        delta_c_eff: s.delta_c_eff,
        linear: s.delta_c_eff.abs() / p.kappa_c < LINEAR_DETUNING_RATIO,
        multistable: sol.multistable,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "status")]
pub enum PointOutcome {
    Steady(SteadyRow),
    Sensing(SensingPoint),
    /// Linearized dynamics unstable; the classical point is still reported.
    Unstable {
        steady: SteadyRow,
        margin: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub value: f64,
    pub outcome: PointOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub axis: SweepAxis,
    pub kind: SweepKind,
    /// Parameters the sweep started from.
    pub params: SystemParams,
    pub points: Vec<SweepPoint>,
}

fn sweep_point(
    p: &SystemParams,
    axis: SweepAxis,
    value: f64,
    kind: SweepKind,
) -> Result<SweepPoint> {
    let pv = axis.apply(p, value)?;
    let steady = steady_row(&pv)?;
    let outcome = match kind {
        SweepKind::Steady => PointOutcome::Steady(steady),
        SweepKind::Sensing => match sensing_point(&pv) {
            Ok(x) => PointOutcome::Sensing(x),
            Err(Error::Unstable { margin }) => PointOutcome::Unstable { steady, margin },
            Err(e) => return Err(e),
        },
    };
    Ok(SweepPoint { value, outcome })
}

/// Evaluate every grid point (in parallel); results keep grid order.
pub fn sweep(
    p: &SystemParams,
    axis: SweepAxis,
    grid: &[f64],
    kind: SweepKind,
) -> Result<SweepResult> {
    if grid.is_empty() {
        return Err(Error::validation("grid", "sweep grid is empty"));
    }
    if let Some(x) = grid.iter().find(|x| !x.is_finite()) {
        return Err(Error::validation(
            "grid",
            format!("non-finite grid value {x}"),
        ));
    }
    let increasing = grid.windows(2).all(|w| w[1] > w[0]);
    let decreasing = grid.windows(2).all(|w| w[1] < w[0]);
    if !(increasing || decreasing) {
        return Err(Error::validation(
            "grid",
            "sweep grid must be strictly monotone",
        ));
    }
    let points = grid
        .par_iter()
        .map(|&v| sweep_point(p, axis, v, kind))
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult {
        axis,
        kind,
        params: p.clone(),
        points,
    })
}
