use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::json;

use magnomech::fluctuation::{build_linearized, nsd_grid, stability, SpectrumMethod};
use magnomech::magnetoelastic::{convergence_study, coupling_strength, MaterialParams, ModeField};
use magnomech::params::{derive_params, rad_to_hz, RawConfig, SystemParams, Units};
use magnomech::sensing::{sweep, PointOutcome, SweepAxis, SweepKind, SweepResult};
use magnomech::steady::{
    cavity_quadratures, linear_phase_estimate, measuring_window, solve_steady_state,
};

use crate::grid::GridSpec;
use crate::output::{emit, flag, json, num, Format, RunManifest, Table};
use crate::plot::{self, Layout};

/// Error in the command-line arguments themselves (exit code 2).
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// Signals that the output was produced but reports an unstable system.
#[derive(Debug, thiserror::Error)]
#[error("the linearized system is unstable (max Re λ = {0:.6e} rad/s)")]
pub struct ReportedUnstable(pub f64);

pub struct Loaded {
    pub path: PathBuf,
    pub units: Units,
    pub params: SystemParams,
}

pub fn load_config(path: &Path) -> Result<Loaded> {
    let raw =
        RawConfig::from_path(path).with_context(|| format!("reading config {}", path.display()))?;
    let params = derive_params(&raw)?;
    Ok(Loaded {
        path: path.to_path_buf(),
        units: raw.units,
        params,
    })
}

fn manifest(command: &str, inputs: &[PathBuf], params: &impl Serialize) -> Result<RunManifest> {
    RunManifest::new(command, inputs, serde_json::to_value(params)?)
}

#[derive(Serialize)]
struct RootReport {
    default: bool,
    #[serde(flatten)]
    state: magnomech::steady::SteadyState,
    x_c: f64,
    y_c: f64,
    abs_y_c: f64,
    delta_c_eff_hz: f64,
}

pub fn steady(cfg: &Path, out: Option<&Path>, format: Format, margin: f64) -> Result<()> {
    let loaded = load_config(cfg)?;
    let p = &loaded.params;
    let sol = solve_steady_state(p)?;
    let roots: Vec<RootReport> = sol
        .roots
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let q = cavity_quadratures(s, p);
            RootReport {
                default: i == sol.default_index,
                state: *s,
                x_c: q.x_c,
                y_c: q.y_c,
                abs_y_c: q.y_c.abs(),
                delta_c_eff_hz: rad_to_hz(s.delta_c_eff),
            }
        })
        .collect();
    let contents = match format {
        Format::Json => {
            let s = sol.default_state();
            let (window, window_error) = match measuring_window(p, margin) {
                Ok(w) => (Some(w), None),
                Err(e) => (None, Some(e.to_string())),
            };
            json(&json!({
                "params": p,
                "multistable": sol.multistable,
                "default_index": sol.default_index,
                "roots": roots,
                "linear_estimate": linear_phase_estimate(p, s.n_m),
                "meter_window": window,
                "meter_window_error": window_error,
            }))?
        }
        Format::Csv => {
            let mut t = Table::new(&[
                "root",
                "default",
                "q_avg",
                "N_m",
                "N_c",
                "Yc",
                "Xc",
                "abs_Yc",
                "Delta_c_eff_hz",
                "Delta_m_eff_hz",
            ]);
            for (i, r) in roots.iter().enumerate() {
                t.push(vec![
                    i.to_string(),
                    flag(r.default),
                    num(r.state.q_avg),
                    num(r.state.n_m),
                    num(r.state.n_c),
                    num(r.y_c),
                    num(r.x_c),
                    num(r.abs_y_c),
                    num(r.delta_c_eff_hz),
                    num(rad_to_hz(r.state.delta_m_eff)),
                ]);
            }
            t.render()
        }
    };
    emit(
        out,
        &contents,
        Some(manifest("steady", std::slice::from_ref(&loaded.path), p)?),
    )
}

pub fn stability_cmd(cfg: &Path, out: Option<&Path>) -> Result<()> {
    let loaded = load_config(cfg)?;
    let p = &loaded.params;
    let s = *solve_steady_state(p)?.default_state();
    let lin = build_linearized(p, &s);
    let report = stability(&lin);
    let contents = json(&json!({
        "stable": report.stable,
        "margin": report.margin,
        "routh_hurwitz": report.routh_hurwitz,
        "eigenvalues": report.eigenvalues,
        "g_c": lin.g_c,
        "g_m": lin.g_m,
        "drift_matrix": (0..lin.a.nrows()).map(|i| lin.a.row(i).iter().copied().collect::<Vec<f64>>()).collect::<Vec<_>>(),
    }))?;
    emit(
        out,
        &contents,
        Some(manifest(
            "stability",
            std::slice::from_ref(&loaded.path),
            p,
        )?),
    )?;
    if report.stable {
        Ok(())
    } else {
        Err(ReportedUnstable(report.margin).into())
    }
}

/// Points added around each mechanical resonance on top of the uniform grid.
const REFINE_POINTS: usize = 401;
/// Half-width of the refined band in linewidths.
const REFINE_WIDTHS: f64 = 20.0;

pub struct SpectrumArgs {
    pub omega_min_hz: Option<f64>,
    pub omega_max_hz: Option<f64>,
    pub n_points: usize,
    pub method: SpectrumMethod,
    pub check: bool,
    pub plot: Option<PathBuf>,
}

pub fn spectrum(cfg: &Path, out: Option<&Path>, format: Format, args: &SpectrumArgs) -> Result<()> {
    let loaded = load_config(cfg)?;
    let p = &loaded.params;
    let s = *solve_steady_state(p)?.default_state();
    let lin = build_linearized(p, &s);
    let report = stability(&lin);
    if !report.stable {
        return Err(magnomech::Error::Unstable {
            margin: report.margin,
        }
        .into());
    }

    let f_b = rad_to_hz(p.omega_b);
    let lo = args.omega_min_hz.unwrap_or(0.0);
    let hi = args.omega_max_hz.unwrap_or(2.0 * f_b);
    if !(lo.is_finite() && hi.is_finite() && hi > lo) {
        return Err(usage(format!("empty frequency range [{lo}, {hi}]")));
    }
    if args.n_points < 2 {
        return Err(usage("--n-points must be at least 2"));
    }
    let mut freqs: Vec<f64> = (0..args.n_points)
        .map(|i| lo + (hi - lo) * i as f64 / (args.n_points - 1) as f64)
        .collect();
    // The mechanical line is far narrower than any practical uniform step.
    let mut centres = vec![(f_b, rad_to_hz(p.gamma_b))];
    if let Some(z) = report
        .eigenvalues
        .iter()
        .filter(|z| z.im > 0.0)
        .min_by(|a, b| {
            (a.im - p.omega_b)
                .abs()
                .total_cmp(&(b.im - p.omega_b).abs())
        })
    {
        centres.push((rad_to_hz(z.im), rad_to_hz(2.0 * z.re.abs())));
    }
    for (c, w) in centres {
        for sign in [1.0, -1.0] {
            let c = sign * c;
            for i in 0..REFINE_POINTS {
                let f = c + REFINE_WIDTHS * w * (2.0 * i as f64 / (REFINE_POINTS - 1) as f64 - 1.0);
                if f >= lo && f <= hi {
                    freqs.push(f);
                }
            }
        }
    }
    freqs.sort_by(f64::total_cmp);
    freqs.dedup();

    let omegas: Vec<f64> = freqs
        .iter()
        .map(|f| magnomech::params::hz_to_rad(*f))
        .collect();
    let primary = nsd_grid(p, &s, &lin, &omegas, args.method)?;
    let other = if args.check {
        let alt = match args.method {
            SpectrumMethod::Resolvent => SpectrumMethod::Explicit,
            SpectrumMethod::Explicit => SpectrumMethod::Resolvent,
        };
        Some(nsd_grid(p, &s, &lin, &omegas, alt)?)
    } else {
        None
    };

    let mut max_rel = 0.0f64;
    let contents = match format {
        Format::Csv => {
            let mut t = if other.is_some() {
                Table::new(&["omega_hz", "S_Yc", "S_Yc_check", "rel_diff"])
            } else {
                Table::new(&["omega_hz", "S_Yc"])
            };
            for (i, (f, x)) in freqs.iter().zip(&primary).enumerate() {
                let mut row = vec![num(*f), num(x.s_yc)];
                if let Some(o) = &other {
                    let rel = (x.s_yc - o[i].s_yc).abs() / x.s_yc.abs().max(f64::MIN_POSITIVE);
                    max_rel = max_rel.max(rel);
                    row.push(num(o[i].s_yc));
                    row.push(num(rel));
                }
                t.push(row);
            }
            t.render()
        }
        Format::Json => {
            if let Some(o) = &other {
                for (x, y) in primary.iter().zip(o) {
                    max_rel =
                        max_rel.max((x.s_yc - y.s_yc).abs() / x.s_yc.abs().max(f64::MIN_POSITIVE));
                }
            }
            json(
                &json!({ "method": args.method, "samples": primary, "check": other, "max_rel_diff": other.as_ref().map(|_| max_rel) }),
            )?
        }
    };
    emit(
        out,
        &contents,
        Some(manifest("spectrum", std::slice::from_ref(&loaded.path), p)?),
    )?;
    if let (Some(script), Some(csv)) = (&args.plot, out) {
        emit(
            Some(script),
            &plot::script(csv, Layout::Spectrum, &[], ""),
            None,
        )?;
    }
    if args.check {
        eprintln!("max relative difference between methods: {max_rel:.3e}");
        if max_rel > 1e-9 {
            return Err(magnomech::Error::Solver {
                reason: "spectral methods disagree".into(),
                diagnostics: format!("max relative difference {max_rel:.3e}"),
            }
            .into());
        }
    }
    Ok(())
}

pub struct SweepArgs {
    pub axis: String,
    pub grid: GridSpec,
    pub nm_grid: Option<GridSpec>,
    pub kind: SweepKind,
    pub margin: f64,
    pub plot: Option<PathBuf>,
}

#[derive(Serialize)]
struct Family {
    axis_value: Option<f64>,
    result: SweepResult,
}

fn window_of(p: &SystemParams, margin: f64) -> Result<(f64, f64)> {
    let w = measuring_window(p, margin)?;
    Ok((w.n_min, w.n_max))
}

pub fn sweep_cmd(cfg: &Path, out: Option<&Path>, format: Format, args: &SweepArgs) -> Result<()> {
    let loaded = load_config(cfg)?;
    let p = &loaded.params;
    let axis: SweepAxis = args.axis.parse()?;
    // κ_c grids are given in the config's frequency units.
    let to_internal = |v: f64| {
        if axis == SweepAxis::KappaC {
            loaded.units.to_angular(v)
        } else {
            v
        }
    };

    let families: Vec<Family> = if axis == SweepAxis::Population {
        if args.nm_grid.is_some() {
            return Err(usage("--nm-grid only applies to axes other than N_m"));
        }
        let window = if args.grid.is_window() {
            Some(window_of(p, args.margin)?)
        } else {
            None
        };
        let grid = args.grid.values(window)?;
        vec![Family {
            axis_value: None,
            result: sweep(p, axis, &grid, args.kind)?,
        }]
    } else if let Some(nm) = &args.nm_grid {
        let outer = args.grid.values(None)?;
        if outer.is_empty() {
            return Err(magnomech::Error::Validation {
                field: "grid".into(),
                reason: "sweep grid is empty".into(),
            }
            .into());
        }
        outer
            .iter()
            .map(|&v| {
                let pv = axis.apply(p, to_internal(v))?;
                let window = if nm.is_window() {
                    Some(window_of(&pv, args.margin)?)
                } else {
                    None
                };
                let inner = nm.values(window)?;
                Ok(Family {
                    axis_value: Some(v),
                    result: sweep(&pv, SweepAxis::Population, &inner, args.kind)?,
                })
            })
            .collect::<Result<Vec<_>>>()?
    } else {
        let grid: Vec<f64> = args.grid.values(None)?;
        let internal: Vec<f64> = grid.iter().map(|v| to_internal(*v)).collect();
        let mut result = sweep(p, axis, &internal, args.kind)?;
        for (pt, v) in result.points.iter_mut().zip(&grid) {
            pt.value = *v;
        }
        vec![Family {
            axis_value: None,
            result,
        }]
    };

    let family_col = axis != SweepAxis::Population;
    let contents = match format {
        Format::Json => json(&families)?,
        Format::Csv => {
            let base: &[&str] = match args.kind {
                SweepKind::Steady => {
                    &["N_m", "Yc", "Xc", "abs_Yc", "Delta_c_eff_hz", "linear_flag"]
                }
                SweepKind::Sensing => &["N_m", "abs_Yc", "sigma_Y", "snr_db", "stable"],
            };
            let mut header: Vec<&str> = Vec::new();
            if family_col {
                header.push(axis.name());
            }
            header.extend_from_slice(base);
            let mut t = Table::new(&header);
            for fam in &families {
                for pt in &fam.result.points {
                    let mut row = Vec::new();
                    if family_col {
                        row.push(num(fam.axis_value.unwrap_or(pt.value)));
                    }
                    let n_m = |n: f64| {
                        if fam.axis_value.is_some() || !family_col {
                            pt.value
                        } else {
                            n
                        }
                    };
                    match &pt.outcome {
                        PointOutcome::Steady(r) => row.extend([
                            num(n_m(r.n_m)),
                            num(r.y_c),
                            num(r.x_c),
                            num(r.abs_y_c),
                            num(rad_to_hz(r.delta_c_eff)),
                            flag(r.linear),
                        ]),
                        PointOutcome::Sensing(x) => row.extend([
                            num(n_m(x.n_m)),
                            num(x.y_c_abs),
                            num(x.sigma_y),
                            num(x.snr_db),
                            flag(true),
                        ]),
                        PointOutcome::Unstable { steady, .. } => row.extend([
                            num(n_m(steady.n_m)),
                            num(steady.abs_y_c),
                            String::new(),
                            String::new(),
                            flag(false),
                        ]),
                    }
                    t.push(row);
                }
            }
            t.render()
        }
    };
    emit(
        out,
        &contents,
        Some(manifest("sweep", std::slice::from_ref(&loaded.path), p)?),
    )?;

    if let Some(script) = &args.plot {
        let Some(csv) = out else {
            return Err(usage(
                "--plot requires --out so the script can reference the data file",
            ));
        };
        let labels: Vec<String> = if family_col {
            match &args.nm_grid {
                Some(_) => families
                    .iter()
                    .filter_map(|f| f.axis_value)
                    .map(num)
                    .collect(),
                None => families[0]
                    .result
                    .points
                    .iter()
                    .map(|pt| num(pt.value))
                    .collect(),
            }
        } else {
            Vec::new()
        };
        let layout = match args.kind {
            SweepKind::Steady => Layout::Steady { family: family_col },
            SweepKind::Sensing => Layout::Sensing { family: family_col },
        };
        emit(
            Some(script),
            &plot::script(csv, layout, &labels, axis.name()),
            None,
        )?;
    }
    Ok(())
}

fn sidecar_for(mode: &Path) -> PathBuf {
    mode.with_extension("json")
}

pub fn coupling(
    material: &Path,
    modes: &[PathBuf],
    sidecars: &[PathBuf],
    out: Option<&Path>,
    format: Format,
) -> Result<()> {
    if modes.is_empty() {
        return Err(usage("at least one --mode file is required"));
    }
    if !sidecars.is_empty() && sidecars.len() != modes.len() {
        return Err(usage("give either no --sidecar or one per --mode"));
    }
    let text = std::fs::read_to_string(material)
        .with_context(|| format!("reading {}", material.display()))?;
    let mat = MaterialParams::from_json_str(&text)?;
    let sidecars: Vec<PathBuf> = if sidecars.is_empty() {
        modes.iter().map(|m| sidecar_for(m)).collect()
    } else {
        sidecars.to_vec()
    };
    let fields = modes
        .iter()
        .zip(&sidecars)
        .map(|(m, s)| {
            ModeField::from_files(m, s).with_context(|| format!("loading mode {}", m.display()))
        })
        .collect::<Result<Vec<_>>>()?;
    let study = if fields.len() == 1 {
        None
    } else {
        Some(convergence_study(&fields, &mat)?)
    };
    let reports = match &study {
        Some(c) => c.levels.clone(),
        None => vec![coupling_strength(&fields[0], &mat)?],
    };
    for r in &reports {
        if !r.normalized {
            eprintln!(
                "warning: mode normalization ∫|χ|²dV = {:.6e} does not match V",
                r.norm_integral
            );
        }
    }
    let contents = match format {
        Format::Json => {
            if let Some(c) = &study {
                json(&json!({ "convergence": c, "material": mat }))?
            } else {
                let r = &reports[0];
                json(&json!({ "report": r, "g_mb_hz": rad_to_hz(r.g_mb), "material": mat }))?
            }
        }
        Format::Csv => {
            let mut t = Table::new(&["level", "spacing_m", "g_mb", "g_mb_hz", "normalized"]);
            for (i, r) in reports.iter().enumerate() {
                t.push(vec![
                    i.to_string(),
                    num(r.spacing),
                    num(r.g_mb),
                    num(rad_to_hz(r.g_mb)),
                    flag(r.normalized),
                ]);
            }
            t.render()
        }
    };
    let mut inputs = vec![material.to_path_buf()];
    inputs.extend(modes.iter().cloned());
    inputs.extend(sidecars.iter().cloned());
    emit(out, &contents, Some(manifest("coupling", &inputs, &mat)?))
}
