//! Deterministic CSV and JSON writers. Floats use Rust's shortest
//! round-trip formatting so identical runs give identical bytes.

use std::fs;
use std::path::{Path, PathBuf};

use psi_hilfer::grid::GridFunction;
use serde::Serialize;

use crate::error::CliError;

pub struct OutputDir {
    root: PathBuf,
    written: Vec<String>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root).map_err(|e| CliError::io(root, e))?;
        Ok(Self { root: root.to_path_buf(), written: Vec::new() })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    /// Names of the files written so far, in order.
    pub fn written(&self) -> &[String] {
        &self.written
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        let path = self.path(name);
        fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        self.written.push(name.to_string());
        Ok(())
    }

    pub fn table(&mut self, name: &str, header: &[&str], rows: &[Vec<f64>]) -> Result<(), CliError> {
        let path = self.path(name);
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(header)?;
        for row in rows {
            w.write_record(row.iter().map(|v| v.to_string()))?;
        }
        w.flush().map_err(|e| CliError::io(&path, e))?;
        self.written.push(name.to_string());
        Ok(())
    }

    /// Plot-ready solution curve.
    pub fn solution(&mut self, name: &str, y: &GridFunction) -> Result<(), CliError> {
        let g = y.grid();
        let rows: Vec<Vec<f64>> =
            (0..g.len()).map(|i| vec![g.t(i), g.u(i), y.weighted()[i], y.unweighted(i)]).collect();
        self.table(name, &SOLUTION_COLUMNS, &rows)
    }
}

pub const SOLUTION_COLUMNS: [&str; 4] = ["t", "psi_increment", "weighted_value", "unweighted_value"];
