//! File writers and the run manifest. Data files carry no timestamps, so a
//! repeated run with the same configuration writes identical bytes.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::{CliError, Result};

pub const SCHEMA_VERSION: &str = "1.0.0";
pub const ENGINE_VERSION: &str = env!("CARGO_PKG_VERSION");
pub const BUNDLE_FILE: &str = "bundle.json";

/// 17 significant digits, exact on round trip.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ManifestEntry {
    pub path: String,
    pub format: String,
    pub rows: Option<usize>,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub command: String,
    pub engine_version: String,
    pub schema_version: String,
    pub grid: GridParameters,
    pub config: RunConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridParameters {
    pub n1: usize,
    pub n2: usize,
    /// Nodes per axis after the D-points and 0 are inserted.
    pub axis1_nodes: usize,
    pub axis2_nodes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExportBundle {
    pub files: Vec<ManifestEntry>,
    pub provenance: Provenance,
}

/// Collects files for one run under a single output directory.
#[derive(Debug)]
pub struct Exporter {
    dir: PathBuf,
    files: Vec<ManifestEntry>,
}

impl Exporter {
    pub fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        Ok(Exporter {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn write(&mut self, name: &str, format: &str, rows: Option<usize>, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
        self.files.push(ManifestEntry {
            path: name.to_string(),
            format: format.to_string(),
            rows,
            sha256: hex(&Sha256::digest(bytes)),
        });
        Ok(())
    }

    /// Writes a CSV table; every record must match the header width.
    pub fn csv(&mut self, name: &str, header: &[&str], records: &[Vec<String>]) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        let path = self.dir.join(name);
        let to_io = |e: csv::Error| CliError::io(&path, std::io::Error::other(e));
        w.write_record(header).map_err(to_io)?;
        for r in records {
            debug_assert_eq!(r.len(), header.len());
            w.write_record(r).map_err(to_io)?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| CliError::io(&path, std::io::Error::other(e.to_string())))?;
        self.write(name, "csv", Some(records.len()), &bytes)
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value)
            .map_err(|e| CliError::io(self.dir.join(name), std::io::Error::other(e)))?;
        bytes.push(b'\n');
        self.write(name, "json", None, &bytes)
    }

    /// Writes `bundle.json` listing every file written so far.
    pub fn finish(self, provenance: Provenance) -> Result<ExportBundle> {
        let bundle = ExportBundle {
            files: self.files,
            provenance,
        };
        let path = self.dir.join(BUNDLE_FILE);
        let mut bytes = serde_json::to_vec_pretty(&bundle)
            .map_err(|e| CliError::io(&path, std::io::Error::other(e)))?;
        bytes.push(b'\n');
        fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
        Ok(bundle)
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for x in [
            0.1,
            1.0 / 3.0,
            -2.0 * std::f64::consts::PI / 3.0,
            1e-300,
            0.0,
        ] {
            let s = fmt_float(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
        }
        assert_eq!(fmt_float(1.0), "1.0000000000000000e0");
    }

    #[test]
    fn manifest_checksums_match_file_bytes() {
        let dir = tempfile::tempdir().unwrap();
        let mut ex = Exporter::new(dir.path()).unwrap();
        ex.csv("t.csv", &["a", "b"], &[vec!["1".into(), "2".into()]])
            .unwrap();
        let bytes = fs::read(dir.path().join("t.csv")).unwrap();
        assert_eq!(bytes, b"a,b\n1,2\n");
        assert_eq!(ex.files[0].sha256, hex(&Sha256::digest(&bytes)));
        assert_eq!(ex.files[0].rows, Some(1));
    }
}
