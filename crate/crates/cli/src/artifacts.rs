//! CSV tables, JSON reports and the run manifest. Every file goes through
//! [`Writer`], which records its hash and size for the manifest.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::config::hex;

/// Columns of equal length under a header row; values in `{:.16e}`, which
/// round-trips every double.
pub fn csv(header: &[&str], cols: &[&[f64]]) -> String {
    assert_eq!(header.len(), cols.len());
    let n = cols.first().map_or(0, |c| c.len());
    assert!(cols.iter().all(|c| c.len() == n), "ragged csv columns");
    let mut s = header.join(",");
    s.push('\n');
    for i in 0..n {
        for (j, c) in cols.iter().enumerate() {
            if j > 0 {
                s.push(',');
            }
            write!(s, "{:.16e}", c[i]).unwrap();
        }
        s.push('\n');
    }
    s
}

/// File label for a coupling value: `1e4`, `2.5e6`.
pub fn g_label(g: f64) -> String {
    format!("g_{g:e}")
}

#[derive(Clone, Debug, Serialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: usize,
}

pub struct Writer {
    root: PathBuf,
    pub files: Vec<FileEntry>,
}

impl Writer {
    pub fn new(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).with_context(|| format!("creating {}", root.display()))?;
        Ok(Self { root: root.to_path_buf(), files: Vec::new() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Write `text` at `rel` under the output root.
    pub fn put(&mut self, rel: &str, text: &str) -> Result<()> {
        let path = self.root.join(rel);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        }
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        self.files.push(FileEntry { path: rel.into(), sha256: hex(&Sha256::digest(text.as_bytes())), bytes: text.len() });
        Ok(())
    }

    pub fn put_json(&mut self, rel: &str, v: &Value) -> Result<()> {
        let mut text = serde_json::to_string_pretty(v)?;
        text.push('\n');
        self.put(rel, &text)
    }
}

pub fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

#[derive(Clone, Debug, Serialize)]
pub struct StageStatus {
    pub stage: String,
    pub pass: bool,
    pub message: String,
}

/// Run metadata kept apart from the report, so the report stays byte-stable.
#[derive(Clone, Debug, Serialize)]
pub struct Manifest {
    pub schema: &'static str,
    pub command: String,
    pub config_hash: String,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub threads: usize,
    pub profile_cache: String,
    pub stages: Vec<StageStatus>,
    pub timings_seconds: Value,
    pub files: Vec<FileEntry>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_values_round_trip() {
        let xs = [0.1, -1.0 / 3.0, 1e-300, 6.02214076e23];
        let text = csv(&["x", "y"], &[&xs, &xs]);
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("x,y"));
        for (line, &x) in lines.zip(&xs) {
            let back: Vec<f64> = line.split(',').map(|t| t.parse().unwrap()).collect();
            assert_eq!(back, vec![x, x]);
        }
    }

    #[test]
    fn labels() {
        assert_eq!(g_label(1e4), "g_1e4");
        assert_eq!(g_label(2.5e6), "g_2.5e6");
    }
}
