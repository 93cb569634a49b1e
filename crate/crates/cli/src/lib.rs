//! Batch front end for `privacy-funnel`: instance files, report assembly and sweeps.
//!
//! The `pfunnel` binary is a thin clap layer over [`commands`] and [`sweep`].

pub mod commands;
pub mod instance;
pub mod sweep;

use std::io::Write;

/// Errors surfaced by the command line, each with its exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),

    #[error(transparent)]
    Core(#[from] privacy_funnel::Error),

    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    /// 2 for bad input, 3 for infeasible or refused work, 4 for internal failures.
    pub fn exit_code(&self) -> i32 {
        use privacy_funnel::Error as E;
        match self {
            CliError::Validation(_) | CliError::Io { .. } => 2,
            CliError::Core(E::Invalid(_) | E::SupportViolation { .. } | E::Precondition(_)) => 2,
            CliError::Core(E::Infeasible(_) | E::Refused(_)) => 3,
            CliError::Core(E::Internal(_)) => 4,
            CliError::Csv(_) | CliError::Json(_) => 4,
        }
    }
}

pub fn validation(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

pub type Result<T> = std::result::Result<T, CliError>;

/// Shortest decimal form that parses back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

/// A long-format table destined for CSV.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(&self.header)?;
        for r in &self.rows {
            out.write_record(r)?;
        }
        out.flush().map_err(|e| CliError::Io { path: "csv output".into(), source: e })?;
        Ok(())
    }
}

/// Result of one command: a JSON document and, for most commands, a table.
#[derive(Clone, Debug)]
pub struct Output {
    pub name: &'static str,
    pub json: serde_json::Value,
    pub table: Option<Table>,
}
