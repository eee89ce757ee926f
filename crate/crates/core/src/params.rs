//! Raw experimental parameters, unit discipline and derived quantities.
//!
//! Every frequency and rate inside the crate is an angular frequency in rad/s.
//! Conversion happens exactly once, in [`derive_params`].

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Reduced Planck constant, J·s.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Boltzmann constant, J/K.
pub const K_B: f64 = 1.380_649e-23;
/// Speed of light in vacuum, m/s.
pub const C_LIGHT: f64 = 2.997_924_58e8;
/// Gyromagnetic ratio of YIG, rad/s/T (γ/2π = 28 GHz/T).
pub const GAMMA_YIG: f64 = TAU * 28.0e9;

/// Mechanical quality factor below which the Markovian bath model is flagged.
pub const MIN_MARKOV_Q: f64 = 1.0e3;

pub fn hz_to_rad(f: f64) -> f64 {
    f * TAU
}

pub fn rad_to_hz(w: f64) -> f64 {
    w / TAU
}

/// How frequencies in a [`RawConfig`] are to be read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Units {
    /// Ordinary frequencies (ω/2π); multiplied by 2π on ingestion.
    #[serde(rename = "Hz")]
    Hz,
    /// Already angular.
    #[serde(rename = "rad_s")]
    RadPerSecond,
}

impl Units {
    pub fn to_angular(self, x: f64) -> f64 {
        match self {
            Units::Hz => hz_to_rad(x),
            Units::RadPerSecond => x,
        }
    }
}

/// Magnon drive specification, exactly one of three forms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum DriveMode {
    /// Target steady-state magnon population; the Rabi frequency is back-solved.
    Population {
        #[serde(rename = "N_m")]
        n_m: f64,
    },
    /// Rabi frequency Ω in config frequency units.
    Rabi {
        #[serde(rename = "Omega")]
        omega: f64,
    },
    /// Microwave field amplitude (T) and total spin number of a YIG sphere.
    Field {
        #[serde(rename = "B0")]
        b0: f64,
        #[serde(rename = "N_spins")]
        n_spins: f64,
    },
}

/// Parameters as they appear in a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub units: Units,
    pub omega_m: f64,
    pub omega_b: f64,
    /// Optical cavity frequency; defaults to the laser frequency.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_c: Option<f64>,
    pub kappa_m: f64,
    pub kappa_c: f64,
    pub gamma_b: f64,
    pub g_mb: f64,
    pub g_cb: f64,
    /// Effective magnon detuning Δ̃_m (population mode).
    #[serde(
        rename = "Delta_m_eff",
        default,
        skip_serializing_if = "Option::is_none"
    )]
    pub delta_m_eff: Option<f64>,
    /// Bare magnon detuning Δ_m (Rabi and field modes).
    #[serde(rename = "Delta_m", default, skip_serializing_if = "Option::is_none")]
    pub delta_m: Option<f64>,
    /// Bare cavity detuning Δ_c. When absent the laser is locked to the
    /// loaded cavity resonance at zero magnon population.
    #[serde(rename = "Delta_c", default, skip_serializing_if = "Option::is_none")]
    pub delta_c: Option<f64>,
    /// Laser power, W.
    pub laser_power: f64,
    /// Laser wavelength, m.
    pub laser_wavelength: f64,
    /// Bath temperature, K.
    pub temperature: f64,
    pub drive_mode: DriveMode,
    /// Cavity input squeezing, dB.
    #[serde(default)]
    pub squeeze_db: f64,
}

impl RawConfig {
    pub fn from_json_str(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn from_path(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }
}

/// Magnon drive after unit conversion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MagnonDrive {
    /// Population held fixed at the configured effective detuning.
    Population { n_m: f64, delta_m_eff: f64 },
    /// Fixed Rabi frequency at a fixed bare detuning.
    Rabi { omega: f64, delta_m: f64 },
}

/// Laser-cavity detuning policy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CavityDetuning {
    /// Δ_c chosen so that Δ̃_c = 0 when no magnons are present.
    LockedAtZeroPopulation,
    /// Fixed bare detuning, rad/s.
    Bare(f64),
}

/// Physical parameters in angular units with all derived quantities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub omega_m: f64,
    pub omega_b: f64,
    pub omega_c: f64,
    pub omega_l: f64,
    pub kappa_m: f64,
    pub kappa_c: f64,
    pub gamma_b: f64,
    pub g_mb: f64,
    pub g_cb: f64,
    pub drive: MagnonDrive,
    pub cavity_detuning: CavityDetuning,
    pub laser_power: f64,
    pub laser_wavelength: f64,
    pub temperature: f64,
    pub squeeze_db: f64,
    /// Cavity drive strength E, rad/s.
    pub e_drive: f64,
    /// Thermal magnon occupation.
    pub n_m: f64,
    /// Thermal phonon occupation.
    pub n_b: f64,
    pub q_mech: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

fn positive(field: &str, x: f64) -> Result<f64> {
    if x.is_finite() && x > 0.0 {
        Ok(x)
    } else {
        Err(Error::validation(
            field,
            format!("must be a finite positive number, got {x}"),
        ))
    }
}

fn non_negative(field: &str, x: f64) -> Result<f64> {
    if x.is_finite() && x >= 0.0 {
        Ok(x)
    } else {
        Err(Error::validation(
            field,
            format!("must be finite and >= 0, got {x}"),
        ))
    }
}

fn finite(field: &str, x: f64) -> Result<f64> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(Error::validation(field, format!("must be finite, got {x}")))
    }
}

/// Bose-Einstein occupation of a mode at angular frequency `omega` (rad/s).
pub fn thermal_occupation(omega: f64, temperature: f64) -> Result<f64> {
    if !(omega > 0.0) || !omega.is_finite() {
        return Err(Error::Domain(format!(
            "mode frequency must be > 0, got {omega}"
        )));
    }
    if !(temperature >= 0.0) || !temperature.is_finite() {
        return Err(Error::Domain(format!(
            "temperature must be >= 0, got {temperature}"
        )));
    }
    if temperature == 0.0 {
        return Ok(0.0);
    }
    let x = HBAR * omega / (K_B * temperature);
    Ok(1.0 / x.exp_m1())
}

/// Laser angular frequency from a vacuum wavelength.
pub fn laser_angular_frequency(wavelength: f64) -> f64 {
    2.0 * PI * C_LIGHT / wavelength
}

/// Cavity drive strength E = sqrt(κ_c P_L / ħω_L).
pub fn cavity_drive(kappa_c: f64, laser_power: f64, omega_l: f64) -> f64 {
    (kappa_c * laser_power / (HBAR * omega_l)).sqrt()
}

/// Rabi frequency of a uniformly driven YIG sphere, Ω = (√5/4)·γ·√N·B₀.
pub fn sphere_rabi_frequency(b0: f64, n_spins: f64) -> f64 {
    5f64.sqrt() / 4.0 * GAMMA_YIG * n_spins.sqrt() * b0
}

pub fn derive_params(cfg: &RawConfig) -> Result<SystemParams> {
    let u = cfg.units;
    let omega_m = positive("omega_m", u.to_angular(cfg.omega_m))?;
    let omega_b = positive("omega_b", u.to_angular(cfg.omega_b))?;
    let kappa_m = positive("kappa_m", u.to_angular(cfg.kappa_m))?;
    let kappa_c = positive("kappa_c", u.to_angular(cfg.kappa_c))?;
    let gamma_b = positive("gamma_b", u.to_angular(cfg.gamma_b))?;
    let g_mb = non_negative("g_mb", u.to_angular(cfg.g_mb))?;
    let g_cb = non_negative("g_cb", u.to_angular(cfg.g_cb))?;
    let laser_power = non_negative("laser_power", cfg.laser_power)?;
    let laser_wavelength = positive("laser_wavelength", cfg.laser_wavelength)?;
    let temperature = non_negative("temperature", cfg.temperature)?;
    let squeeze_db = non_negative("squeeze_db", cfg.squeeze_db)?;

    let omega_l = laser_angular_frequency(laser_wavelength);
    let omega_c = match cfg.omega_c {
        Some(w) => positive("omega_c", u.to_angular(w))?,
        None => omega_l,
    };

    let drive = match cfg.drive_mode {
        DriveMode::Population { n_m } => {
            if cfg.delta_m.is_some() {
                return Err(Error::validation(
                    "Delta_m",
                    "population mode fixes the effective detuning; use Delta_m_eff",
                ));
            }
            let delta = cfg.delta_m_eff.ok_or_else(|| {
                Error::validation("Delta_m_eff", "required in population drive mode")
            })?;
            MagnonDrive::Population {
                n_m: non_negative("drive_mode.population.N_m", n_m)?,
                delta_m_eff: finite("Delta_m_eff", u.to_angular(delta))?,
            }
        }
        DriveMode::Rabi { omega } => MagnonDrive::Rabi {
            omega: non_negative("drive_mode.rabi.Omega", u.to_angular(omega))?,
            delta_m: bare_magnon_detuning(cfg)?,
        },
        DriveMode::Field { b0, n_spins } => {
            let b0 = non_negative("drive_mode.field.B0", b0)?;
            let n_spins = positive("drive_mode.field.N_spins", n_spins)?;
            MagnonDrive::Rabi {
                omega: sphere_rabi_frequency(b0, n_spins),
                delta_m: bare_magnon_detuning(cfg)?,
            }
        }
    };

    let cavity_detuning = match cfg.delta_c {
        Some(d) => CavityDetuning::Bare(finite("Delta_c", u.to_angular(d))?),
        None => CavityDetuning::LockedAtZeroPopulation,
    };

    let mut p = SystemParams {
        omega_m,
        omega_b,
        omega_c,
        omega_l,
        kappa_m,
        kappa_c,
        gamma_b,
        g_mb,
        g_cb,
        drive,
        cavity_detuning,
        laser_power,
        laser_wavelength,
        temperature,
        squeeze_db,
        e_drive: 0.0,
        n_m: 0.0,
        n_b: 0.0,
        q_mech: 0.0,
        warnings: Vec::new(),
    };
    p.refresh()?;
    Ok(p)
}

fn bare_magnon_detuning(cfg: &RawConfig) -> Result<f64> {
    if cfg.delta_m_eff.is_some() {
        return Err(Error::validation(
            "Delta_m_eff",
            "only meaningful in population mode; Rabi/field modes take the bare Delta_m",
        ));
    }
    let d = cfg
        .delta_m
        .ok_or_else(|| Error::validation("Delta_m", "required in rabi/field drive mode"))?;
    finite("Delta_m", cfg.units.to_angular(d))
}

impl SystemParams {
    /// Recompute every derived field from the primary ones.
    fn refresh(&mut self) -> Result<()> {
        self.e_drive = cavity_drive(self.kappa_c, self.laser_power, self.omega_l);
        self.n_m = thermal_occupation(self.omega_m, self.temperature)?;
        self.n_b = thermal_occupation(self.omega_b, self.temperature)?;
        self.q_mech = self.omega_b / self.gamma_b;
        self.warnings.clear();
        if self.q_mech < MIN_MARKOV_Q {
            let msg = format!(
                "mechanical Q = {:.3e} is below {MIN_MARKOV_Q:.0e}; the Markovian bath model may be inaccurate",
                self.q_mech
            );
            log::warn!("{msg}");
            self.warnings.push(msg);
        }
        Ok(())
    }

    /// Configured Rabi frequency, if the drive is not population-controlled.
    pub fn rabi_frequency(&self) -> Option<f64> {
        match self.drive {
            MagnonDrive::Rabi { omega, .. } => Some(omega),
            MagnonDrive::Population { .. } => None,
        }
    }

    /// Bare cavity detuning Δ_c actually applied.
    ///
    /// In locked mode this is g_cb·q₀ with q₀ = g_cb·(2E/κ_c)²/ω_b, the
    /// radiation-pressure displacement of the resonant cavity without magnons.
    pub fn bare_cavity_detuning(&self) -> f64 {
        match self.cavity_detuning {
            CavityDetuning::Bare(d) => d,
            CavityDetuning::LockedAtZeroPopulation => {
                let n_c0 = (2.0 * self.e_drive / self.kappa_c).powi(2);
                self.g_cb * self.g_cb * n_c0 / self.omega_b
            }
        }
    }

    pub fn with_laser_power(&self, laser_power: f64) -> Result<Self> {
        let mut p = self.clone();
        p.laser_power = non_negative("laser_power", laser_power)?;
        p.refresh()?;
        Ok(p)
    }

    pub fn with_kappa_c(&self, kappa_c: f64) -> Result<Self> {
        let mut p = self.clone();
        p.kappa_c = positive("kappa_c", kappa_c)?;
        p.refresh()?;
        Ok(p)
    }

    pub fn with_temperature(&self, temperature: f64) -> Result<Self> {
        let mut p = self.clone();
        p.temperature = non_negative("temperature", temperature)?;
        p.refresh()?;
        Ok(p)
    }

    pub fn with_squeeze_db(&self, squeeze_db: f64) -> Result<Self> {
        let mut p = self.clone();
        p.squeeze_db = non_negative("squeeze_db", squeeze_db)?;
        Ok(p)
    }

    pub fn with_g_mb(&self, g_mb: f64) -> Result<Self> {
        let mut p = self.clone();
        p.g_mb = non_negative("g_mb", g_mb)?;
        Ok(p)
    }

    /// Same parameters driven to a different magnon population.
    ///
    /// Only valid in population mode; the effective detuning is kept.
    pub fn with_population(&self, n_m: f64) -> Result<Self> {
        let n_m = non_negative("N_m", n_m)?;
        match self.drive {
            MagnonDrive::Population { delta_m_eff, .. } => {
                let mut p = self.clone();
                p.drive = MagnonDrive::Population { n_m, delta_m_eff };
                Ok(p)
            }
            MagnonDrive::Rabi { .. } => Err(Error::validation(
                "drive_mode",
                "population sweeps require drive_mode = population",
            )),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn reference_json() -> String {
        r#"{
            "units": "Hz",
            "omega_m": 10e9, "omega_b": 10e6,
            "kappa_m": 1e6, "kappa_c": 1e5, "gamma_b": 100,
            "g_mb": 1, "g_cb": 10,
            "Delta_m_eff": 0.5e6,
            "laser_power": 1e-6, "laser_wavelength": 1064e-9,
            "temperature": 293,
            "drive_mode": {"population": {"N_m": 1e10}}
        }"#
        .to_string()
    }

    #[test]
    fn drive_strength_matches_independent_evaluation() {
        let p = derive_params(&RawConfig::from_json_str(&reference_json()).unwrap()).unwrap();
        // 40-digit evaluation of sqrt(κ_c P_L λ / (2π ħ c)).
        assert_relative_eq!(p.e_drive, 1_834_519_709.802_83, max_relative = 1e-12);
        assert_relative_eq!(p.kappa_c, TAU * 1e5, max_relative = 1e-15);
        assert_relative_eq!(p.n_b, 610_512.440_687_707_4, max_relative = 1e-10);
    }

    #[test]
    fn zero_power_and_zero_field_give_zero_drive() {
        let mut cfg = RawConfig::from_json_str(&reference_json()).unwrap();
        cfg.laser_power = 0.0;
        assert_eq!(derive_params(&cfg).unwrap().e_drive, 0.0);

        cfg.drive_mode = DriveMode::Field {
            b0: 0.0,
            n_spins: 1e18,
        };
        cfg.delta_m_eff = None;
        cfg.delta_m = Some(0.5e6);
        let p = derive_params(&cfg).unwrap();
        assert_eq!(p.rabi_frequency(), Some(0.0));
    }

    #[test]
    fn field_mode_rabi_frequency() {
        let mut cfg = RawConfig::from_json_str(&reference_json()).unwrap();
        cfg.drive_mode = DriveMode::Field {
            b0: 1e-6,
            n_spins: 4e18,
        };
        cfg.delta_m_eff = None;
        cfg.delta_m = Some(0.0);
        let p = derive_params(&cfg).unwrap();
        let expected = 5f64.sqrt() / 4.0 * TAU * 28e9 * 2e9 * 1e-6;
        assert_relative_eq!(p.rabi_frequency().unwrap(), expected, max_relative = 1e-14);
    }

    #[test]
    fn thermal_occupation_reference_values() {
        assert_eq!(thermal_occupation(1e9, 0.0).unwrap(), 0.0);
        let n = thermal_occupation(TAU * 10e9, 0.01).unwrap();
        assert_relative_eq!(n, 1.435_992_501_216_95e-21, max_relative = 1e-9);
        let n4 = thermal_occupation(TAU * 10e6, 4.0).unwrap();
        assert_relative_eq!(n4, 8_334.147_664_436_25, max_relative = 1e-11);
        assert!(thermal_occupation(0.0, 1.0).is_err());
        assert!(thermal_occupation(-1.0, 1.0).is_err());
    }

    #[test]
    fn validation_names_the_field() {
        let mut cfg = RawConfig::from_json_str(&reference_json()).unwrap();
        cfg.kappa_c = -1.0;
        match derive_params(&cfg) {
            Err(Error::Validation { field, .. }) => assert_eq!(field, "kappa_c"),
            other => panic!("expected validation error, got {other:?}"),
        }
        let mut cfg = RawConfig::from_json_str(&reference_json()).unwrap();
        cfg.gamma_b = 0.0;
        assert!(
            matches!(derive_params(&cfg), Err(Error::Validation { field, .. }) if field == "gamma_b")
        );
    }

    #[test]
    fn unknown_keys_and_ambiguous_drive_are_rejected() {
        let typo = reference_json().replace("\"gamma_b\"", "\"gama_b\"");
        assert!(matches!(
            RawConfig::from_json_str(&typo),
            Err(Error::Parse(_))
        ));

        let two = reference_json().replace(
            r#"{"population": {"N_m": 1e10}}"#,
            r#"{"population": {"N_m": 1e10}, "rabi": {"Omega": 1e6}}"#,
        );
        assert!(RawConfig::from_json_str(&two).is_err());

        let mut cfg = RawConfig::from_json_str(&reference_json()).unwrap();
        cfg.delta_m = Some(1.0);
        assert!(matches!(derive_params(&cfg), Err(Error::Validation { .. })));
    }

    #[test]
    fn low_q_is_flagged() {
        let mut cfg = RawConfig::from_json_str(&reference_json()).unwrap();
        cfg.gamma_b = 1e5;
        let p = derive_params(&cfg).unwrap();
        assert_eq!(p.warnings.len(), 1);
    }

    #[test]
    fn rad_s_units_are_taken_verbatim() {
        let mut cfg = RawConfig::from_json_str(&reference_json()).unwrap();
        cfg.units = Units::RadPerSecond;
        let p = derive_params(&cfg).unwrap();
        assert_eq!(p.omega_b, 10e6);
        assert_eq!(p.kappa_c, 1e5);
    }

    proptest! {
        #[test]
        fn hz_round_trip(f in 1e-3f64..1e15) {
            let back = rad_to_hz(hz_to_rad(f));
            prop_assert!((back - f).abs() <= 2.0 * f64::EPSILON * f);
        }

        #[test]
        fn occupation_monotone(w in 1e3f64..1e12, t in 1e-3f64..1e3, dw in 1.0f64..10.0, dt in 1.0f64..10.0) {
            let n = thermal_occupation(w, t).unwrap();
            prop_assert!(thermal_occupation(w, t * dt).unwrap() >= n);
            prop_assert!(thermal_occupation(w * dw, t).unwrap() <= n);
        }

        #[test]
        fn classical_asymptote(t in 1.0f64..1e3, ratio in 1e-8f64..1e-3) {
            let w = ratio * K_B * t / HBAR;
            let n = thermal_occupation(w, t).unwrap();
            let classical = K_B * t / (HBAR * w);
            prop_assert!((n - classical).abs() / n < 1e-3);
        }
    }
}
