//! Deterministic CSV/JSON rendering and overwrite-safe file output.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::CliError;

/// Scientific notation with ten significant digits; non-finite values as `inf`, `-inf`, `nan`.
pub fn sci(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.9e}")
    } else if v.is_nan() {
        "nan".to_owned()
    } else if v > 0.0 {
        "inf".to_owned()
    } else {
        "-inf".to_owned()
    }
}

/// Comma-separated rows with `\n` endings.
#[derive(Debug, Default)]
pub struct Csv {
    text: String,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        let mut csv = Self::default();
        csv.row(header.iter().map(|h| (*h).to_owned()));
        csv
    }

    pub fn row<I: IntoIterator<Item = String>>(&mut self, cells: I) {
        for (i, cell) in cells.into_iter().enumerate() {
            if i > 0 {
                self.text.push(',');
            }
            self.text.push_str(&cell);
        }
        self.text.push('\n');
    }

    pub fn into_string(self) -> String {
        self.text
    }
}

pub fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("output values serialize");
    s.push('\n');
    s
}

/// Files produced by one command, written together once everything is computed.
#[derive(Debug, Default)]
pub struct Bundle {
    files: Vec<(PathBuf, String)>,
}

impl Bundle {
    pub fn add(&mut self, name: impl Into<PathBuf>, contents: String) {
        self.files.push((name.into(), contents));
    }

    pub fn names(&self) -> impl Iterator<Item = &Path> {
        self.files.iter().map(|(p, _)| p.as_path())
    }

    /// Write every file under `dir`. Without `overwrite`, any existing target aborts the
    /// whole write before a single byte is touched.
    pub fn write(&self, dir: &Path, overwrite: bool) -> Result<(), CliError> {
        if !overwrite {
            let existing: Vec<String> = self
                .files
                .iter()
                .map(|(p, _)| dir.join(p))
                .filter(|p| p.exists())
                .map(|p| p.display().to_string())
                .collect();
            if !existing.is_empty() {
                let mut msg = String::from("refusing to overwrite existing output (pass --overwrite):");
                for p in existing {
                    let _ = write!(msg, "\n  {p}");
                }
                return Err(CliError::Output(msg));
            }
        }
        for (name, contents) in &self.files {
            let path = dir.join(name);
            if let Some(parent) = path.parent() {
                fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
            }
            fs::write(&path, contents).map_err(|e| CliError::io(&path, e))?;
        }
        Ok(())
    }
}
