//! Standalone gnuplot scripts for the CSV outputs.

use std::fmt::Write;
use std::path::Path;

/// Column layout of a CSV the script should plot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    /// `N_m,Yc,Xc,abs_Yc,Delta_c_eff_hz,linear_flag`, optionally prefixed by
    /// a family column.
    Steady { family: bool },
    /// `N_m,abs_Yc,sigma_Y,snr_db,stable`, optionally prefixed by a family
    /// column.
    Sensing { family: bool },
    /// `omega_hz,S_Yc`.
    Spectrum,
}

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

/// Script that renders `csv` to `<csv stem>.png` when run with gnuplot.
pub fn script(csv: &Path, layout: Layout, families: &[String], family_name: &str) -> String {
    let data = quote(&csv.display().to_string());
    let png = quote(&csv.with_extension("png").display().to_string());
    let mut s = String::new();
    let _ = writeln!(s, "# Generated by magnomech {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(s, "set datafile separator ','");
    let _ = writeln!(s, "set key autotitle columnhead");
    let _ = writeln!(s, "set terminal pngcairo size 1200,500");
    let _ = writeln!(s, "set output {png}");
    let _ = writeln!(s, "data = {data}");

    let curves = |s: &mut String, x: usize, y: usize, off: usize| {
        if families.is_empty() {
            let _ = writeln!(
                s,
                "plot data using {}:{} with lines notitle",
                x + off,
                y + off
            );
        } else {
            let list = families.join(" ");
            let _ = writeln!(
                s,
                "plot for [v in \"{list}\"] data using {}:(strcol(1) eq v ? column({}) : NaN) with lines title \"{family_name} = \".v",
                x + off,
                y + off
            );
        }
    };

    match layout {
        Layout::Steady { family } => {
            let off = usize::from(family);
            let _ = writeln!(s, "set multiplot layout 1,2");
            let _ = writeln!(s, "set xlabel 'N_m'");
            let _ = writeln!(s, "set ylabel '|<Y_c>|'");
            curves(&mut s, 1, 4, off);
            let _ = writeln!(s, "set ylabel '<X_c>'");
            curves(&mut s, 1, 3, off);
            let _ = writeln!(s, "unset multiplot");
        }
        Layout::Sensing { family } => {
            let off = usize::from(family);
            let _ = writeln!(s, "set multiplot layout 1,2");
            let _ = writeln!(s, "set xlabel 'N_m'");
            let _ = writeln!(s, "set ylabel 'sigma_Y'");
            curves(&mut s, 1, 3, off);
            let _ = writeln!(s, "set ylabel 'SNR (dB)'");
            curves(&mut s, 1, 4, off);
            let _ = writeln!(s, "unset multiplot");
        }
        Layout::Spectrum => {
            let _ = writeln!(s, "set xlabel 'omega/2pi (Hz)'");
            let _ = writeln!(s, "set ylabel 'S_Yc'");
            let _ = writeln!(s, "set logscale y");
            curves(&mut s, 1, 2, 0);
        }
    }
    s
}
