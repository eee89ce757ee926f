use std::path::PathBuf;
use std::process::{Command, Output};

const FIG: &str = r#"{
  "units": "Hz",
  "omega_m": 10e9,
  "omega_b": 10e6,
  "kappa_m": 1e6,
  "kappa_c": 1e5,
  "gamma_b": 100.0,
  "g_mb": 1.0,
  "g_cb": 10.0,
  "Delta_m_eff": 0.5e6,
  "laser_power": 1e-6,
  "laser_wavelength": 1064e-9,
  "temperature": 293.0,
  "drive_mode": { "population": { "N_m": 1e10 } }
}"#;

struct Fixture {
    dir: tempfile::TempDir,
}

impl Fixture {
    fn new() -> Self {
        Self {
            dir: tempfile::tempdir().unwrap(),
        }
    }

    fn file(&self, name: &str, contents: &str) -> PathBuf {
        let p = self.dir.path().join(name);
        std::fs::write(&p, contents).unwrap();
        p
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn config(&self, name: &str, edits: &[(&str, &str)]) -> PathBuf {
        let mut text = FIG.to_string();
        for (from, to) in edits {
            assert!(text.contains(from), "{from}");
            text = text.replace(from, to);
        }
        self.file(name, &text)
    }
}

fn run(args: &[&dyn AsRef<std::ffi::OsStr>]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_magnomech"));
    for a in args {
        cmd.arg(a);
    }
    cmd.env_remove("MAGNOMECH_THREADS").output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn parse_csv(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut lines = text.lines();
    let header = lines
        .next()
        .unwrap()
        .split(',')
        .map(str::to_string)
        .collect();
    let rows = lines
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect();
    (header, rows)
}

fn assert_cells_finite(rows: &[Vec<String>]) {
    for row in rows {
        for cell in row {
            if !cell.is_empty() {
                let x: f64 = cell.parse().unwrap_or_else(|_| panic!("cell `{cell}`"));
                assert!(x.is_finite());
            }
        }
    }
}

#[test]
fn steady_reports_roots_and_window() {
    let fx = Fixture::new();
    let cfg = fx.config("meter_params.json", &[]);
    let o = run(&[&"steady", &"--config", &cfg]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["roots"].as_array().unwrap().len(), 1);
    assert_eq!(v["roots"][0]["default"], true);
    assert!(
        v["meter_window"]["n_max"].as_f64().unwrap() > v["meter_window"]["n_min"].as_f64().unwrap()
    );
    let y = v["roots"][0]["y_c"].as_f64().unwrap();
    assert!((y.abs() / 1590.05 - 1.0).abs() < 1e-3, "{y}");
}

#[test]
fn steady_zero_drive_is_zero() {
    let fx = Fixture::new();
    let cfg = fx.config(
        "zero.json",
        &[
            ("\"laser_power\": 1e-6", "\"laser_power\": 0.0"),
            ("1e10 }", "0.0 }"),
        ],
    );
    let o = run(&[&"steady", &"--config", &cfg, &"--format", &"csv"]);
    assert_eq!(code(&o), 0);
    let (h, rows) = parse_csv(&stdout(&o));
    assert_eq!(rows.len(), 1);
    for col in ["q_avg", "N_m", "N_c", "Yc", "Xc"] {
        let i = h.iter().position(|c| c == col).unwrap();
        assert_eq!(rows[0][i].parse::<f64>().unwrap(), 0.0, "{col}");
    }
}

#[test]
fn steady_lists_all_roots_of_a_bistable_point() {
    let fx = Fixture::new();
    let cfg = fx.file(
        "bistable.json",
        r#"{"units":"rad_s","omega_m":1000.0,"omega_b":1.0,"kappa_m":1.0,"kappa_c":1.0,"gamma_b":0.001,
            "g_mb":1.0,"g_cb":0.0,"Delta_m":3.0,"laser_power":1e-6,"laser_wavelength":1064e-9,
            "temperature":0.0,"drive_mode":{"rabi":{"Omega":1.5811388300841898}}}"#,
    );
    let o = run(&[&"steady", &"--config", &cfg]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["multistable"], true);
    let roots = v["roots"].as_array().unwrap();
    assert_eq!(roots.len(), 3);
    assert_eq!(roots.iter().filter(|r| r["default"] == true).count(), 1);
}

#[test]
fn input_errors_exit_2() {
    let fx = Fixture::new();
    let typo = fx.config("typo.json", &[("\"g_cb\"", "\"g_cbb\"")]);
    let negative = fx.config("neg.json", &[("\"kappa_c\": 1e5", "\"kappa_c\": -1e5")]);
    let missing = fx.path("missing.json");
    for cfg in [&typo, &negative, &missing] {
        for cmd in ["steady", "spectrum", "stability"] {
            let o = run(&[&cmd, &"--config", cfg]);
            assert_eq!(code(&o), 2, "{cmd} {}", cfg.display());
        }
    }
    let o = run(&[&"sweep", &"--config", &typo, &"--grid", &"lin:0:1:3"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn sweep_empty_grid_exits_2() {
    let fx = Fixture::new();
    let cfg = fx.config("fig.json", &[]);
    for grid in ["list:", "lin:0:1e9:0"] {
        let o = run(&[&"sweep", &"--config", &cfg, &"--grid", &grid]);
        assert_eq!(code(&o), 2, "{grid}");
    }
    let o = run(&[&"sweep", &"--config", &cfg, &"--grid", &"list:1e9,3e9,2e9"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn sweep_over_temperature_writes_three_families() {
    let fx = Fixture::new();
    let cfg = fx.config("sensing_params.json", &[]);
    let out = fx.path("sensing_params.csv");
    let gp = fx.path("sensing_params.gp");
    let o = run(&[
        &"sweep",
        &"--config",
        &cfg,
        &"--axis",
        &"T",
        &"--grid",
        &"list:293,4,0.01",
        &"--nm-grid",
        &"lin:1.7e9:1.5e10:6",
        &"--out",
        &out,
        &"--plot",
        &gp,
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let (h, rows) = parse_csv(&std::fs::read_to_string(&out).unwrap());
    assert_eq!(h, ["T", "N_m", "abs_Yc", "sigma_Y", "snr_db", "stable"]);
    assert_eq!(rows.len(), 18);
    assert_cells_finite(&rows);
    assert!(rows.iter().all(|r| r[5] == "1"));
    for i in 0..6 {
        let s: Vec<f64> = (0..3)
            .map(|f| rows[6 * f + i][3].parse().unwrap())
            .collect();
        assert!(s[2] <= s[1] && s[1] <= s[0]);
    }
    let script = std::fs::read_to_string(&gp).unwrap();
    assert!(script.contains(&out.display().to_string()));

    let manifest: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(fx.path("sensing_params.csv.manifest.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(manifest["command"], "sweep");
    assert_eq!(manifest["inputs"].as_array().unwrap().len(), 1);
    assert_eq!(manifest["inputs"][0]["sha256"].as_str().unwrap().len(), 64);
    assert!(manifest["params"]["omega_b"].as_f64().is_some());
}

#[test]
fn steady_sweep_schema_and_window_grid() {
    let fx = Fixture::new();
    let cfg = fx.config("meter_params.json", &[]);
    let o = run(&[
        &"sweep",
        &"--config",
        &cfg,
        &"--kind",
        &"steady",
        &"--grid",
        &"window:5",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let (h, rows) = parse_csv(&stdout(&o));
    assert_eq!(
        h,
        ["N_m", "Yc", "Xc", "abs_Yc", "Delta_c_eff_hz", "linear_flag"]
    );
    assert_eq!(rows.len(), 5);
    assert_cells_finite(&rows);
}

#[test]
fn sweep_output_is_deterministic() {
    let fx = Fixture::new();
    let cfg = fx.config("fig.json", &[]);
    let outputs: Vec<Vec<u8>> = ["1", "4"]
        .iter()
        .map(|threads| {
            Command::new(env!("CARGO_BIN_EXE_magnomech"))
                .args(["sweep", "--config"])
                .arg(&cfg)
                .args([
                    "--axis",
                    "P_L",
                    "--grid",
                    "log:1e-8:1e-6:5",
                    "--nm-grid",
                    "log:1e8:1e10:7",
                ])
                .env("MAGNOMECH_THREADS", threads)
                .output()
                .unwrap()
                .stdout
        })
        .collect();
    assert!(!outputs[0].is_empty());
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn invalid_thread_count_exits_2() {
    let fx = Fixture::new();
    let cfg = fx.config("fig.json", &[]);
    let o = Command::new(env!("CARGO_BIN_EXE_magnomech"))
        .args(["stability", "--config"])
        .arg(&cfg)
        .env("MAGNOMECH_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
}

fn peak(csv: &str) -> (f64, f64) {
    let (_, rows) = parse_csv(csv);
    assert_cells_finite(&rows);
    rows.iter()
        .map(|r| (r[0].parse::<f64>().unwrap(), r[1].parse::<f64>().unwrap()))
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap()
}

#[test]
fn spectrum_peaks_at_mechanical_frequency() {
    let fx = Fixture::new();
    let cfg = fx.config("noise_params.json", &[]);
    let out = fx.path("noise_params.csv");
    let o = run(&[&"spectrum", &"--config", &cfg, &"--out", &out]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("omega_hz,S_Yc\n"));
    let (f, _) = peak(&text);
    assert!((f - 10e6).abs() <= 300.0, "peak at {f} Hz");
}

#[test]
fn spectrum_without_optomechanics_is_flat_vacuum() {
    let fx = Fixture::new();
    let cfg = fx.config("free.json", &[("\"g_cb\": 10.0", "\"g_cb\": 0.0")]);
    let o = run(&[&"spectrum", &"--config", &cfg, &"--n-points", &"101"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let (_, rows) = parse_csv(&stdout(&o));
    // Only the filtered input vacuum remains: S = ½·κ_c/((κ_c/2)² + ω²).
    let kappa = 2.0 * std::f64::consts::PI * 1e5;
    let lorentz = |w: f64| 0.5 * kappa / (kappa * kappa / 4.0 + w * w);
    for r in &rows {
        let f: f64 = r[0].parse().unwrap();
        let s: f64 = r[1].parse().unwrap();
        let w = 2.0 * std::f64::consts::PI * f;
        assert!((s / lorentz(w) - 1.0).abs() < 1e-9, "{f}: {s}");
    }
}

#[test]
fn spectrum_check_mode_compares_methods() {
    let fx = Fixture::new();
    let cfg = fx.config("noise_params.json", &[]);
    let o = run(&[
        &"spectrum",
        &"--config",
        &cfg,
        &"--check",
        &"--n-points",
        &"301",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let (h, rows) = parse_csv(&stdout(&o));
    assert_eq!(h, ["omega_hz", "S_Yc", "S_Yc_check", "rel_diff"]);
    for r in &rows {
        assert!(r[3].parse::<f64>().unwrap() < 1e-9);
    }
}

fn unstable_config(fx: &Fixture) -> PathBuf {
    fx.config(
        "unstable.json",
        &[
            ("\"laser_power\": 1e-6", "\"laser_power\": 1e-1"),
            (
                "\"Delta_m_eff\": 0.5e6,",
                "\"Delta_m_eff\": 0.5e6, \"Delta_c\": -10e6,",
            ),
            ("1e10 }", "1e9 }"),
        ],
    )
}

#[test]
fn unstable_system_exits_4() {
    let fx = Fixture::new();
    let cfg = unstable_config(&fx);
    let o = run(&[&"spectrum", &"--config", &cfg]);
    assert_eq!(code(&o), 4);
    let out = fx.path("stab.json");
    let o = run(&[&"stability", &"--config", &cfg, &"--out", &out]);
    assert_eq!(code(&o), 4);
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["stable"], false);
    assert!(v["margin"].as_f64().unwrap() > 0.0);
    let o = run(&[&"stability", &"--config", &fx.config("fig.json", &[])]);
    assert_eq!(code(&o), 0);
}

#[test]
fn unstable_sweep_points_are_blank_not_nan() {
    let fx = Fixture::new();
    let cfg = unstable_config(&fx);
    let o = run(&[&"sweep", &"--config", &cfg, &"--grid", &"list:1e9,2e9"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let (_, rows) = parse_csv(&stdout(&o));
    assert_cells_finite(&rows);
    assert!(rows
        .iter()
        .any(|r| r[4] == "0" && r[2].is_empty() && r[3].is_empty()));
}

fn write_mode(
    fx: &Fixture,
    stem: &str,
    n: usize,
    chi: impl Fn(f64, f64, f64) -> [f64; 3],
) -> PathBuf {
    let h = 1.0 / (n - 1) as f64;
    let meta = serde_json::json!({
        "d_zpm": 1e-15, "volume": 1.0, "nx": n, "ny": n, "nz": n, "dx": h, "dy": h, "dz": h
    });
    fx.file(&format!("{stem}.json"), &meta.to_string());
    let mut csv = String::from("x,y,z,chi_x,chi_y,chi_z\n");
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                let (x, y, z) = (i as f64 * h, j as f64 * h, k as f64 * h);
                let c = chi(x, y, z);
                csv.push_str(&format!(
                    "{x:e},{y:e},{z:e},{:e},{:e},{:e}\n",
                    c[0], c[1], c[2]
                ));
            }
        }
    }
    fx.file(&format!("{stem}.csv"), &csv)
}

fn material(fx: &Fixture) -> PathBuf {
    fx.file(
        "material.json",
        r#"{"b1": 3.48e5, "M_S": 1.4e5, "gamma": 1.76e11}"#,
    )
}

#[test]
fn coupling_linear_mode_matches_analytic_value() {
    let fx = Fixture::new();
    let mode = write_mode(&fx, "lin", 5, |_, _, z| [0.0, 0.0, z]);
    let o = run(&[&"coupling", &"--material", &material(&fx), &"--mode", &mode]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let g = v["report"]["g_mb"].as_f64().unwrap();
    let expected = (3.48e5 / 1.4e5) * 1.76e11 * 1e-15 * -2.0;
    assert!((g / expected - 1.0).abs() < 1e-10, "{g} vs {expected}");
}

#[test]
fn coupling_rigid_translation_is_zero() {
    let fx = Fixture::new();
    let mode = write_mode(&fx, "rigid", 4, |_, _, _| [0.3, -0.2, 1.0]);
    let o = run(&[
        &"coupling",
        &"--config",
        &material(&fx),
        &"--mode",
        &mode,
        &"--format",
        &"csv",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let (_, rows) = parse_csv(&stdout(&o));
    assert_eq!(rows[0][2].parse::<f64>().unwrap(), 0.0);
}

#[test]
fn coupling_refinement_reports_convergence() {
    let fx = Fixture::new();
    let mat = material(&fx);
    let f = |x: f64, y: f64, z: f64| [x * x * y, 0.0, (z * z * z) / 3.0 + x];
    let modes: Vec<PathBuf> = [9, 17, 33]
        .iter()
        .map(|&n| write_mode(&fx, &format!("m{n}"), n, f))
        .collect();
    let o = run(&[
        &"coupling",
        &"--material",
        &mat,
        &"--mode",
        &modes[0],
        &"--mode",
        &modes[1],
        &"--mode",
        &modes[2],
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["convergence"]["levels"].as_array().unwrap().len(), 3);
    assert!(v["convergence"]["observed_order"].as_f64().unwrap() > 1.5);
}

#[test]
fn coupling_input_errors_exit_2() {
    let fx = Fixture::new();
    let mat = material(&fx);
    let bad = fx.file("bad.csv", "x,y,z,chi_x,chi_y\n0,0,0,0,0\n");
    fx.file(
        "bad.json",
        r#"{"d_zpm":1,"volume":1,"nx":3,"ny":3,"nz":3,"dx":1,"dy":1,"dz":1}"#,
    );
    let o = run(&[&"coupling", &"--material", &mat, &"--mode", &bad]);
    assert_eq!(code(&o), 2);
    let sparse = fx.file("sparse.csv", "x,y,z,chi_x,chi_y,chi_z\n0,0,0,0,0,0\n");
    fx.file(
        "sparse.json",
        r#"{"d_zpm":1,"volume":1,"nx":3,"ny":3,"nz":3,"dx":1,"dy":1,"dz":1}"#,
    );
    let o = run(&[&"coupling", &"--material", &mat, &"--mode", &sparse]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing grid nodes"));
    let o = run(&[
        &"coupling",
        &"--material",
        &fx.path("nope.json"),
        &"--mode",
        &sparse,
    ]);
    assert_eq!(code(&o), 2);
}
