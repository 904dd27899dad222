//! Columnar text output and the run manifest.
//!
//! Every numeric file is tab-separated text: `#`-prefixed metadata lines, one
//! `#` header row naming the columns, then data rows. Floats print in Rust's
//! shortest round-trip form, so re-reading a file reproduces every value bit
//! for bit and reruns with the same seed produce byte-identical files.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{config_hash, ExperimentConfig};

/// A columnar table headed by metadata comments.
pub struct Table {
    pub comments: Vec<String>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Table {
            comments: Vec::new(),
            columns: columns.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn comment(mut self, line: impl Into<String>) -> Self {
        self.comments.push(line.into());
        self
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for c in &self.comments {
            out.push_str("# ");
            out.push_str(c);
            out.push('\n');
        }
        out.push_str("# ");
        out.push_str(&self.columns.join("\t"));
        out.push('\n');
        for row in &self.rows {
            let mut first = true;
            for v in row {
                if !first {
                    out.push('\t');
                }
                out.push_str(&format_float(*v));
                first = false;
            }
            out.push('\n');
        }
        out
    }
}

/// Shortest round-trip decimal form.
pub fn format_float(v: f64) -> String {
    format!("{v}")
}

/// Write a table under `dir`, creating the directory if needed.
pub fn write_table(dir: &Path, name: &str, table: &Table) -> std::io::Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    let mut file = fs::File::create(&path)?;
    file.write_all(table.render().as_bytes())?;
    Ok(path)
}

/// Parse a table written by [`write_table`]: comments are skipped, every
/// remaining line is whitespace-separated floats.
pub fn read_table(path: &Path) -> std::io::Result<Vec<Vec<f64>>> {
    let text = fs::read_to_string(path)?;
    let mut rows = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row: Result<Vec<f64>, _> = line.split_whitespace().map(str::parse::<f64>).collect();
        rows.push(row.map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?);
    }
    Ok(rows)
}

/// Reproducibility record for one run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub label: String,
    pub seed: u64,
    pub package: String,
    pub version: String,
    /// FNV-1a hash of the canonical TOML configuration, hex.
    pub config_hash: String,
    /// Output files, in creation order, relative to the output directory.
    pub outputs: Vec<String>,
}

impl Manifest {
    pub fn new(command: &str, cfg: &ExperimentConfig) -> Self {
        Manifest {
            command: command.to_string(),
            label: cfg.label.clone(),
            seed: cfg.seed,
            package: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: format!("{:016x}", config_hash(cfg)),
            outputs: Vec::new(),
        }
    }

    pub fn record(&mut self, path: &Path) {
        if let Some(name) = path.file_name() {
            self.outputs.push(name.to_string_lossy().into_owned());
        }
    }

    pub fn write(&self, dir: &Path) -> std::io::Result<PathBuf> {
        fs::create_dir_all(dir)?;
        let path = dir.join("manifest.json");
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        fs::write(&path, text)?;
        Ok(path)
    }
}
