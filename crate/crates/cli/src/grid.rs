//! Sweep grid specifications.
//!
//! * `lin:START:STOP:N`: N evenly spaced values, endpoints included.
//! * `log:START:STOP:N`: N log-spaced values (both endpoints > 0).
//! * `list:A,B,C`: explicit values in the given order.
//! * `window:N`: N log-spaced populations spanning the measuring window
//!   (population axis only; resolved by the caller).

use std::str::FromStr;

use anyhow::{bail, Context, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum GridSpec {
    Lin { start: f64, stop: f64, n: usize },
    Log { start: f64, stop: f64, n: usize },
    List(Vec<f64>),
    Window { n: usize },
}

fn number(s: &str) -> Result<f64> {
    let x: f64 = s
        .trim()
        .parse()
        .with_context(|| format!("`{s}` is not a number"))?;
    if !x.is_finite() {
        bail!("`{s}` is not finite");
    }
    Ok(x)
}

fn count(s: &str) -> Result<usize> {
    s.trim()
        .parse()
        .with_context(|| format!("`{s}` is not a point count"))
}

impl FromStr for GridSpec {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, rest) = s
            .split_once(':')
            .with_context(|| format!("grid `{s}` has no `kind:` prefix"))?;
        let parts: Vec<&str> = rest.split(':').collect();
        match (kind, parts.as_slice()) {
            ("lin", [a, b, n]) => Ok(GridSpec::Lin {
                start: number(a)?,
                stop: number(b)?,
                n: count(n)?,
            }),
            ("log", [a, b, n]) => {
                let (start, stop) = (number(a)?, number(b)?);
                if start <= 0.0 || stop <= 0.0 {
                    bail!("log grid endpoints must be positive");
                }
                Ok(GridSpec::Log {
                    start,
                    stop,
                    n: count(n)?,
                })
            }
            ("list", [items]) => {
                let values = items
                    .split(',')
                    .filter(|x| !x.trim().is_empty())
                    .map(number)
                    .collect::<Result<Vec<_>>>()?;
                Ok(GridSpec::List(values))
            }
            ("window", [n]) => Ok(GridSpec::Window { n: count(n)? }),
            _ => bail!(
                "unrecognized grid `{s}` (expected lin:A:B:N, log:A:B:N, list:A,B,... or window:N)"
            ),
        }
    }
}

fn spaced(
    start: f64,
    stop: f64,
    n: usize,
    map: impl Fn(f64) -> f64,
    unmap: impl Fn(f64) -> f64,
) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![start],
        _ => {
            let (a, b) = (map(start), map(stop));
            (0..n)
                .map(|i| {
                    if i == 0 {
                        start
                    } else if i == n - 1 {
                        stop
                    } else {
                        unmap(a + (b - a) * i as f64 / (n - 1) as f64)
                    }
                })
                .collect()
        }
    }
}

impl GridSpec {
    /// Materialize the grid; `window` is the (N_min, N_max) pair for
    /// `window:N` specs.
    pub fn values(&self, window: Option<(f64, f64)>) -> Result<Vec<f64>> {
        Ok(match self {
            GridSpec::Lin { start, stop, n } => spaced(*start, *stop, *n, |x| x, |x| x),
            GridSpec::Log { start, stop, n } => spaced(*start, *stop, *n, f64::ln, f64::exp),
            GridSpec::List(v) => v.clone(),
            GridSpec::Window { n } => {
                let Some((lo, hi)) = window else {
                    bail!("`window:N` grids are only available for the N_m axis");
                };
                if lo > 0.0 {
                    spaced(lo, hi, *n, f64::ln, f64::exp)
                } else {
                    spaced(lo, hi, *n, |x| x, |x| x)
                }
            }
        })
    }

    pub fn is_window(&self) -> bool {
        matches!(self, GridSpec::Window { .. })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_all_kinds() {
        assert_eq!(
            "lin:0:1:3"
                .parse::<GridSpec>()
                .unwrap()
                .values(None)
                .unwrap(),
            vec![0.0, 0.5, 1.0]
        );
        let g = "log:1e6:1e9:4"
            .parse::<GridSpec>()
            .unwrap()
            .values(None)
            .unwrap();
        assert_eq!(g.len(), 4);
        assert_eq!(g[0], 1e6);
        assert_eq!(g[3], 1e9);
        assert!((g[1] / 1e7 - 1.0).abs() < 1e-12);
        assert_eq!(
            "list:293,4,0.01"
                .parse::<GridSpec>()
                .unwrap()
                .values(None)
                .unwrap(),
            vec![293.0, 4.0, 0.01]
        );
        let w = "window:3".parse::<GridSpec>().unwrap();
        assert_eq!(
            w.values(Some((1.0, 100.0))).unwrap(),
            vec![1.0, 10.000000000000002, 100.0]
        );
        assert!(w.values(None).is_err());
    }

    #[test]
    fn empty_and_malformed() {
        assert!("list:"
            .parse::<GridSpec>()
            .unwrap()
            .values(None)
            .unwrap()
            .is_empty());
        assert!("lin:0:1:0"
            .parse::<GridSpec>()
            .unwrap()
            .values(None)
            .unwrap()
            .is_empty());
        for bad in [
            "lin:0:1",
            "log:0:1:3",
            "cubic:1:2:3",
            "list:a,b",
            "lin:0:inf:3",
            "5",
        ] {
            assert!(bad.parse::<GridSpec>().is_err(), "{bad}");
        }
    }
}
