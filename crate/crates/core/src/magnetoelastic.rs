//! Magnon-phonon coupling strength from a mechanical mode shape.
//!
//! For a uniformly magnetized sphere the dispersive coupling of the Kittel
//! mode to a mechanical mode χ is
//!
//! ```text
//! g_mb = (b₁/M_S)·(γ/V)·d_zpm·∫ (∂χ_x/∂x + ∂χ_y/∂y − 2∂χ_z/∂z) dV
//! ```
//!
//! The mode is sampled on a regular grid; derivatives use second-order finite
//! differences and the volume integral the composite trapezoid rule.

use std::io::Read;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on ∫|χ|²dV = V before a mode is flagged as not normalized.
pub const NORMALIZATION_TOL: f64 = 0.01;

/// Largest number of missing nodes spelled out in an error message.
const MISSING_LISTED: usize = 20;

/// Regular grid metadata, also the JSON sidecar of a mode file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeMeta {
    /// Zero-point amplitude of the mode, m.
    pub d_zpm: f64,
    /// Magnet volume V, m³.
    pub volume: f64,
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub dx: f64,
    pub dy: f64,
    pub dz: f64,
    #[serde(default)]
    pub origin: [f64; 3],
}

impl ModeMeta {
    fn validate(&self) -> Result<()> {
        for (name, n) in [("nx", self.nx), ("ny", self.ny), ("nz", self.nz)] {
            if n < 3 {
                return Err(Error::validation(
                    name,
                    format!("need at least 3 nodes per axis, got {n}"),
                ));
            }
        }
        for (name, h) in [
            ("dx", self.dx),
            ("dy", self.dy),
            ("dz", self.dz),
            ("volume", self.volume),
        ] {
            if !(h.is_finite() && h > 0.0) {
                return Err(Error::validation(
                    name,
                    format!("must be a finite positive number, got {h}"),
                ));
            }
        }
        if !self.d_zpm.is_finite() {
            return Err(Error::validation("d_zpm", "must be finite"));
        }
        if self.origin.iter().any(|x| !x.is_finite()) {
            return Err(Error::validation("origin", "must be finite"));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Flat index of node (i, j, k); z varies fastest.
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.ny + j) * self.nz + k
    }

    pub fn position(&self, i: usize, j: usize, k: usize) -> [f64; 3] {
        [
            self.origin[0] + i as f64 * self.dx,
            self.origin[1] + j as f64 * self.dy,
            self.origin[2] + k as f64 * self.dz,
        ]
    }
}

/// Displacement mode sampled on a regular grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeField {
    pub meta: ModeMeta,
    /// (χ_x, χ_y, χ_z) per node, indexed by [`ModeMeta::index`].
    pub chi: Vec<[f64; 3]>,
}

impl ModeField {
    pub fn new(meta: ModeMeta, chi: Vec<[f64; 3]>) -> Result<Self> {
        meta.validate()?;
        if chi.len() != meta.len() {
            return Err(Error::ModeField(format!(
                "expected {} nodes for a {}x{}x{} grid, got {}",
                meta.len(),
                meta.nx,
                meta.ny,
                meta.nz,
                chi.len()
            )));
        }
        if chi.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::ModeField("non-finite displacement value".into()));
        }
        Ok(Self { meta, chi })
    }

    /// Sample `f(x, y, z)` at every node.
    pub fn from_fn(meta: ModeMeta, f: impl Fn(f64, f64, f64) -> [f64; 3]) -> Result<Self> {
        meta.validate()?;
        let mut chi = Vec::with_capacity(meta.len());
        for i in 0..meta.nx {
            for j in 0..meta.ny {
                for k in 0..meta.nz {
                    let [x, y, z] = meta.position(i, j, k);
                    chi.push(f(x, y, z));
                }
            }
        }
        Self::new(meta, chi)
    }

    /// Load a CSV mode file (`x,y,z,chi_x,chi_y,chi_z`) and its JSON sidecar.
    pub fn from_files(csv_path: impl AsRef<Path>, sidecar_path: impl AsRef<Path>) -> Result<Self> {
        let sidecar = std::fs::read_to_string(sidecar_path.as_ref())?;
        let meta: ModeMeta = serde_json::from_str(&sidecar)
            .map_err(|e| Error::Parse(format!("{}: {e}", sidecar_path.as_ref().display())))?;
        let file = std::fs::File::open(csv_path.as_ref())?;
        Self::from_csv_reader(file, meta)
    }

    /// Parse mode samples from CSV. Rows may come in any order but must cover
    /// every grid node exactly once.
    pub fn from_csv_reader(reader: impl Read, meta: ModeMeta) -> Result<Self> {
        meta.validate()?;
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        let header: Vec<String> = rdr
            .headers()
            .map_err(|e| Error::ModeField(e.to_string()))?
            .iter()
            .map(str::to_string)
            .collect();
        let expected = ["x", "y", "z", "chi_x", "chi_y", "chi_z"];
        if header != expected {
            return Err(Error::ModeField(format!(
                "header must be `{}`, got `{}`",
                expected.join(","),
                header.join(",")
            )));
        }

        let locate = |value: f64, origin: f64, h: f64, n: usize, line: u64| -> Result<usize> {
            let t = (value - origin) / h;
            let idx = t.round();
            if (t - idx).abs() > 1e-6 || idx < 0.0 || idx >= n as f64 {
                return Err(Error::ModeField(format!(
                    "line {line}: coordinate {value} is not a grid node"
                )));
            }
            Ok(idx as usize)
        };

        let mut slots: Vec<Option<[f64; 3]>> = vec![None; meta.len()];
        for record in rdr.records() {
            let record = record.map_err(|e| Error::ModeField(e.to_string()))?;
            let line = record.position().map_or(0, |p| p.line());
            let mut v = [0.0; 6];
            for (slot, field) in v.iter_mut().zip(record.iter()) {
                *slot = field.parse().map_err(|_| {
                    Error::ModeField(format!("line {line}: cannot parse `{field}`"))
                })?;
            }
            if record.len() != 6 {
                return Err(Error::ModeField(format!(
                    "line {line}: expected 6 fields, got {}",
                    record.len()
                )));
            }
            let i = locate(v[0], meta.origin[0], meta.dx, meta.nx, line)?;
            let j = locate(v[1], meta.origin[1], meta.dy, meta.ny, line)?;
            let k = locate(v[2], meta.origin[2], meta.dz, meta.nz, line)?;
            let slot = &mut slots[meta.index(i, j, k)];
            if slot.is_some() {
                return Err(Error::ModeField(format!(
                    "line {line}: duplicate node ({i}, {j}, {k})"
                )));
            }
            *slot = Some([v[3], v[4], v[5]]);
        }

        let mut missing = Vec::new();
        for i in 0..meta.nx {
            for j in 0..meta.ny {
                for k in 0..meta.nz {
                    if slots[meta.index(i, j, k)].is_none() {
                        missing.push((i, j, k));
                    }
                }
            }
        }
        if !missing.is_empty() {
            let listed: Vec<String> = missing
                .iter()
                .take(MISSING_LISTED)
                .map(|&(i, j, k)| format!("({i}, {j}, {k})"))
                .collect();
            let more = missing.len().saturating_sub(MISSING_LISTED);
            let suffix = if more > 0 {
                format!(" and {more} more")
            } else {
                String::new()
            };
            return Err(Error::ModeField(format!(
                "{} missing grid nodes: {}{suffix}",
                missing.len(),
                listed.join(", ")
            )));
        }
        let chi = slots
            .into_iter()
            .map(|x| x.expect("checked above"))
            .collect();
        Self::new(meta, chi)
    }

    /// ∫|χ|²dV by the trapezoid rule.
    pub fn norm_integral(&self) -> f64 {
        let values: Vec<f64> = self
            .chi
            .iter()
            .map(|c| c[0] * c[0] + c[1] * c[1] + c[2] * c[2])
            .collect();
        trapezoid(&self.meta, &values)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialParams {
    /// Magnetoelastic coefficient b₁, J/m³.
    pub b1: f64,
    /// Saturation magnetization, A/m.
    #[serde(rename = "M_S")]
    pub m_s: f64,
    /// Gyromagnetic ratio, rad/s/T.
    pub gamma: f64,
}

impl MaterialParams {
    pub fn from_json_str(s: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))?;
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, x) in [("b1", self.b1), ("M_S", self.m_s), ("gamma", self.gamma)] {
            if !(x.is_finite() && x > 0.0) {
                return Err(Error::validation(
                    name,
                    format!("must be a finite positive number, got {x}"),
                ));
            }
        }
        Ok(())
    }
}

/// Symmetric strain ε_ij = ½(∂_j χ_i + ∂_i χ_j), one grid per component.
#[derive(Debug, Clone, PartialEq)]
pub struct StrainField {
    pub xx: Vec<f64>,
    pub yy: Vec<f64>,
    pub zz: Vec<f64>,
    pub xy: Vec<f64>,
    pub xz: Vec<f64>,
    pub yz: Vec<f64>,
}

/// Derivative along one axis at position `m` of `n` samples spaced `h`.
#[inline]
fn diff(at: impl Fn(usize) -> f64, m: usize, n: usize, h: f64) -> f64 {
    if m == 0 {
        let f0 = at(0);
        (4.0 * (at(1) - f0) - (at(2) - f0)) / (2.0 * h)
    } else if m == n - 1 {
        let f0 = at(n - 1);
        (4.0 * (f0 - at(n - 2)) - (f0 - at(n - 3))) / (2.0 * h)
    } else {
        (at(m + 1) - at(m - 1)) / (2.0 * h)
    }
}

/// Full displacement gradient ∂χ_a/∂l_b at every node, as [a][b].
fn gradient(field: &ModeField) -> Vec<[[f64; 3]; 3]> {
    let m = &field.meta;
    let chi = &field.chi;
    (0..m.nx)
        .into_par_iter()
        .flat_map_iter(|i| {
            (0..m.ny).flat_map(move |j| {
                (0..m.nz).map(move |k| {
                    let mut g = [[0.0; 3]; 3];
                    for (a, row) in g.iter_mut().enumerate() {
                        row[0] = diff(|t| chi[m.index(t, j, k)][a], i, m.nx, m.dx);
                        row[1] = diff(|t| chi[m.index(i, t, k)][a], j, m.ny, m.dy);
                        row[2] = diff(|t| chi[m.index(i, j, t)][a], k, m.nz, m.dz);
                    }
                    g
                })
            })
        })
        .collect()
}

pub fn strain_tensor(field: &ModeField) -> Result<StrainField> {
    field.meta.validate()?;
    let grad = gradient(field);
    let pick = |a: usize, b: usize| -> Vec<f64> {
        grad.iter().map(|g| 0.5 * (g[a][b] + g[b][a])).collect()
    };
    Ok(StrainField {
        xx: pick(0, 0),
        yy: pick(1, 1),
        zz: pick(2, 2),
        xy: pick(0, 1),
        xz: pick(0, 2),
        yz: pick(1, 2),
    })
}

/// Composite trapezoid rule over the grid. Slabs are summed in parallel and
/// then combined in a fixed order, so the result does not depend on the
/// thread count.
fn trapezoid(m: &ModeMeta, values: &[f64]) -> f64 {
    let weight = |idx: usize, n: usize, h: f64| if idx == 0 || idx == n - 1 { 0.5 * h } else { h };
    let slabs: Vec<f64> = (0..m.nx)
        .into_par_iter()
        .map(|i| {
            let mut acc = 0.0;
            for j in 0..m.ny {
                let wy = weight(j, m.ny, m.dy);
                for k in 0..m.nz {
                    acc += wy * weight(k, m.nz, m.dz) * values[m.index(i, j, k)];
                }
            }
            weight(i, m.nx, m.dx) * acc
        })
        .collect();
    slabs.iter().sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingReport {
    /// Signed coupling strength, rad/s.
    pub g_mb: f64,
    /// |g_mb|, the value used by the readout model.
    pub magnitude: f64,
    /// ∫(ε_xx + ε_yy − 2ε_zz)dV, m³ per unit length.
    pub integral: f64,
    /// ∫|χ|²dV.
    pub norm_integral: f64,
    /// Whether ∫|χ|²dV matches V within [`NORMALIZATION_TOL`].
    pub normalized: bool,
    /// Largest grid spacing, m.
    pub spacing: f64,
}

pub fn coupling_strength(field: &ModeField, mat: &MaterialParams) -> Result<CouplingReport> {
    mat.validate()?;
    let strain = strain_tensor(field)?;
    let integrand: Vec<f64> = strain
        .xx
        .iter()
        .zip(&strain.yy)
        .zip(&strain.zz)
        .map(|((xx, yy), zz)| xx + yy - 2.0 * zz)
        .collect();
    let m = &field.meta;
    let integral = trapezoid(m, &integrand);
    let g_mb = (mat.b1 / mat.m_s) * (mat.gamma / m.volume) * m.d_zpm * integral;
    let norm_integral = field.norm_integral();
    let normalized = ((norm_integral - m.volume) / m.volume).abs() <= NORMALIZATION_TOL;
    if !normalized {
        log::warn!(
            "mode normalization ∫|χ|²dV = {norm_integral:.6e} differs from V = {:.6e}",
            m.volume
        );
    }
    Ok(CouplingReport {
        g_mb,
        magnitude: g_mb.abs(),
        integral,
        norm_integral,
        normalized,
        spacing: m.dx.max(m.dy).max(m.dz),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    /// Couplings from coarsest to finest grid.
    pub levels: Vec<CouplingReport>,
    /// Successive differences g_{k} − g_{k+1}.
    pub differences: Vec<f64>,
    /// Ratios of successive differences; about 4 for second-order convergence
    /// under spacing halving.
    pub ratios: Vec<f64>,
    /// Observed order log2(ratio) of the last pair, when available.
    pub observed_order: Option<f64>,
    /// Richardson extrapolation of the two finest levels, assuming order 2.
    pub extrapolated: Option<f64>,
}

/// Richardson-style study over a sequence of fields whose spacing halves from
/// one level to the next.
pub fn convergence_study(fields: &[ModeField], mat: &MaterialParams) -> Result<ConvergenceReport> {
    if fields.len() < 2 {
        return Err(Error::validation(
            "mode",
            "a convergence study needs at least two grids",
        ));
    }
    let levels = fields
        .iter()
        .map(|f| coupling_strength(f, mat))
        .collect::<Result<Vec<_>>>()?;
    for w in levels.windows(2) {
        let r = w[0].spacing / w[1].spacing;
        if (r - 2.0).abs() > 1e-6 {
            return Err(Error::validation(
                "mode",
                format!("grid spacing must halve between levels (ratio {r})"),
            ));
        }
    }
    let differences: Vec<f64> = levels.windows(2).map(|w| w[0].g_mb - w[1].g_mb).collect();
    let ratios: Vec<f64> = differences.windows(2).map(|d| d[0] / d[1]).collect();
    let observed_order = ratios.last().map(|r| r.abs().log2());
    let n = levels.len();
    let extrapolated = Some(levels[n - 1].g_mb + (levels[n - 1].g_mb - levels[n - 2].g_mb) / 3.0);
    Ok(ConvergenceReport {
        levels,
        differences,
        ratios,
        observed_order,
        extrapolated,
    })
}
