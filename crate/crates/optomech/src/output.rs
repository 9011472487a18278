//! Output staging. Commands build every file in memory first, so a run
//! that fails early leaves nothing behind; each file is then written to a
//! temporary name and renamed into place.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use optomech_core::phase_space::HusimiGrid;
use serde::Serialize;

use crate::error::CliError;

/// Files produced by a command plus an optional failure that should set the
/// exit code after the files are written.
#[derive(Debug, Default)]
pub struct Outcome {
    pub files: Vec<(String, Vec<u8>)>,
    pub failure: Option<CliError>,
}

impl Outcome {
    pub fn add(&mut self, name: impl Into<String>, contents: impl Into<Vec<u8>>) {
        self.files.push((name.into(), contents.into()));
    }

    pub fn add_json<T: Serialize>(&mut self, name: impl Into<String>, value: &T) {
        self.add(name, to_json(value));
    }

    /// Keeps the first failure; later ones do not override it.
    pub fn fail(&mut self, err: CliError) {
        if self.failure.is_none() {
            self.failure = Some(err);
        }
    }

    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        self.files.iter().map(|(name, data)| write_atomic(&dir.join(name), data)).collect()
    }
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("output types serialize") + "\n"
}

fn write_atomic(path: &Path, data: &[u8]) -> Result<PathBuf, CliError> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, data).map_err(|e| CliError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| CliError::io(path, e))?;
    Ok(path.to_path_buf())
}

/// `re,im,q` rows in storage order.
pub fn grid_csv(grid: &HusimiGrid) -> String {
    let g = grid.geometry();
    let mut out = String::with_capacity(g.len() * 40);
    out.push_str("re,im,q\n");
    for (i, q) in grid.values().iter().enumerate() {
        let beta = g.point_at(i);
        writeln!(out, "{},{},{:e}", beta.re, beta.im, q).expect("write to string");
    }
    out
}

/// A CSV table with a fixed header; cells are written as given.
#[derive(Debug, Clone)]
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

/// Shortest round-tripping scientific notation.
pub fn num(x: f64) -> String {
    format!("{x:e}")
}
