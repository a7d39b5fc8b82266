//! Run directory, JSON report and CSV tables. Files carry no timestamps so
//! identical inputs give identical bytes.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{CliError, Status};

pub const SCHEMA_VERSION: &str = "lambda-surf/1";

pub struct RunDir {
    path: PathBuf,
}

impl RunDir {
    /// Uses `out` if given, otherwise `<command>-<local timestamp>` in the
    /// working directory.
    pub fn create(out: Option<&Path>, command: &str) -> Result<Self, CliError> {
        let path = match out {
            Some(p) => p.to_path_buf(),
            None => PathBuf::from(format!("{command}-{}", chrono::Local::now().format("%Y%m%d-%H%M%S"))),
        };
        fs::create_dir_all(&path).map_err(|source| CliError::Write { path: path.clone(), source })?;
        Ok(Self { path })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn write_report<C: Serialize, R: Serialize>(
        &self,
        command: &str,
        seed: u64,
        status: Status,
        config: &C,
        results: &R,
    ) -> Result<(), CliError> {
        #[derive(Serialize)]
        struct Envelope<'a, C, R> {
            schema_version: &'a str,
            command: &'a str,
            status: &'a str,
            seed: u64,
            config: &'a C,
            results: &'a R,
        }
        let env = Envelope { schema_version: SCHEMA_VERSION, command, status: status.label(), seed, config, results };
        let mut text = serde_json::to_string_pretty(&env)?;
        text.push('\n');
        let path = self.path.join("report.json");
        fs::write(&path, text).map_err(|source| CliError::Write { path, source })
    }

    pub fn write_csv(&self, name: &str, table: &Table) -> Result<(), CliError> {
        let path = self.path.join(name);
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(&table.header)?;
        for row in &table.rows {
            w.write_record(row)?;
        }
        w.flush().map_err(|source| CliError::Write { path, source })
    }
}

/// Header plus string rows.
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self { header: header.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }
}

/// 17 significant digits.
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}
