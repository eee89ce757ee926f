//! Output formatting, atomic file writes and run manifests.

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// CSV cell for a float: shortest round-trip representation, empty when the
/// value is not finite. Negative zero prints as `0e0`.
pub fn num(x: f64) -> String {
    if x == 0.0 {
        "0e0".to_string()
    } else if x.is_finite() {
        format!("{x:e}")
    } else {
        String::new()
    }
}

pub fn flag(b: bool) -> String {
    if b { "1" } else { "0" }.to_string()
}

#[derive(Debug, Clone, Default)]
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// Write `contents` to `path` through a temporary file in the same directory
/// followed by a rename, so readers never see a partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .with_context(|| format!("cannot create a temporary file in {}", dir.display()))?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path)
        .with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

#[derive(Debug, Clone, Serialize)]
pub struct InputHash {
    pub path: String,
    pub sha256: String,
}

/// Provenance record written next to every output file.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub arguments: Vec<String>,
    pub tool_version: String,
    pub timestamp: String,
    pub inputs: Vec<InputHash>,
    pub output: String,
    pub params: serde_json::Value,
}

impl RunManifest {
    pub fn new(command: &str, inputs: &[PathBuf], params: serde_json::Value) -> Result<Self> {
        let inputs = inputs
            .iter()
            .map(|p| {
                Ok(InputHash {
                    path: p.display().to_string(),
                    sha256: sha256_file(p)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            command: command.to_string(),
            arguments: std::env::args().skip(1).collect(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            inputs,
            output: String::new(),
            params,
        })
    }
}

pub fn manifest_path(out: &Path) -> PathBuf {
    let mut name = out
        .file_name()
        .map(|s| s.to_os_string())
        .unwrap_or_default();
    name.push(".manifest.json");
    out.with_file_name(name)
}

/// Emit `contents` to `out` (plus its manifest) or to stdout.
pub fn emit(out: Option<&Path>, contents: &str, manifest: Option<RunManifest>) -> Result<()> {
    match out {
        Some(path) => {
            write_atomic(path, contents.as_bytes())?;
            if let Some(mut m) = manifest {
                m.output = path.display().to_string();
                let text = serde_json::to_string_pretty(&m)? + "\n";
                write_atomic(&manifest_path(path), text.as_bytes())?;
            }
            log::info!("wrote {}", path.display());
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            lock.write_all(contents.as_bytes())?;
            lock.flush()?;
        }
    }
    Ok(())
}

pub fn json<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip_and_hide_non_finite() {
        for x in [0.0, 1.5e10, -2.25e-7, 0.1 + 0.2, 1e300] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(num(-0.0), "0e0");
        assert_eq!(num(f64::NAN), "");
        assert_eq!(num(f64::NEG_INFINITY), "");
    }

    #[test]
    fn atomic_write_and_manifest_name() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("out.csv");
        write_atomic(&p, b"a,b\n").unwrap();
        write_atomic(&p, b"c,d\n").unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "c,d\n");
        assert_eq!(manifest_path(&p), dir.path().join("out.csv.manifest.json"));
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn table_rendering() {
        let mut t = Table::new(&["x", "y"]);
        t.push(vec![num(1.0), num(f64::INFINITY)]);
        assert_eq!(t.render(), "x,y\n1e0,\n");
    }
}
