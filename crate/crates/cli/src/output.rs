//! Report and table writers.

use std::fs::{self, File};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

use crate::config::RunConfig;

/// Envelope shared by every JSON report.
#[derive(Debug, Serialize)]
pub struct Report<'a, T> {
    pub command: &'static str,
    pub seed: u64,
    pub passed: bool,
    pub failed_checks: Vec<String>,
    pub config: &'a RunConfig,
    pub results: T,
}

/// One thresholded quantity.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Check {
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    pub fn at_most(value: f64, tolerance: f64) -> Self {
        Check {
            value,
            tolerance,
            passed: value <= tolerance,
        }
    }
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))
}

pub fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<PathBuf> {
    ensure_dir(dir)?;
    let path = dir.join(name);
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))?;
    Ok(path)
}

pub fn csv_writer(dir: &Path, name: &str) -> Result<(csv::Writer<File>, PathBuf)> {
    ensure_dir(dir)?;
    let path = dir.join(name);
    let w = csv::Writer::from_path(&path).with_context(|| format!("cannot write {}", path.display()))?;
    Ok((w, path))
}

/// `q1..qn, p1..pn, z` column names.
pub fn point_header(dim: usize) -> Vec<String> {
    (1..=dim)
        .map(|i| format!("q{i}"))
        .chain((1..=dim).map(|i| format!("p{i}")))
        .chain(["z".to_string()])
        .collect()
}

pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}
