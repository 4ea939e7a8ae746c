//! Artifact writers. Files are written to a temporary sibling and renamed into
//! place, so a failed run never leaves a partial file.

use std::fmt::Write as _;
use std::io::{self, Write};
use std::path::Path;

use serde::Serialize;
use tempfile::NamedTempFile;

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

pub const CSV_HEADER: &str = "x,g,J,u,p_tsallis,p_shannon_pushforward,transport_residual";

/// One grid row of the `transform` table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OutputRecord {
    pub x: f64,
    pub g: f64,
    #[serde(rename = "J")]
    pub j: f64,
    pub u: f64,
    pub p_tsallis: f64,
    pub p_shannon_pushforward: f64,
    pub transport_residual: f64,
}

impl OutputRecord {
    fn values(&self) -> [f64; 7] {
        [
            self.x,
            self.g,
            self.j,
            self.u,
            self.p_tsallis,
            self.p_shannon_pushforward,
            self.transport_residual,
        ]
    }

    pub fn is_finite(&self) -> bool {
        self.values().iter().all(|v| v.is_finite())
    }
}

/// 17 significant digits, enough to round-trip any double.
pub fn fmt_num(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn records_csv(rows: &[OutputRecord]) -> String {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let line: Vec<String> = r.values().iter().map(|&v| fmt_num(v)).collect();
        let _ = writeln!(out, "{}", line.join(","));
    }
    out
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(io::Error::other(e)))?;
    s.push('\n');
    Ok(s)
}

/// Writes `contents` to `path` atomically, or to standard output when `path`
/// is `None`.
pub fn emit(path: Option<&Path>, contents: &str) -> Result<(), CliError> {
    match path {
        None => {
            let mut stdout = io::stdout().lock();
            stdout.write_all(contents.as_bytes())?;
            stdout.flush()?;
        }
        Some(path) => {
            let dir = match path.parent() {
                Some(p) if !p.as_os_str().is_empty() => p,
                _ => Path::new("."),
            };
            let mut tmp = NamedTempFile::new_in(dir)?;
            tmp.write_all(contents.as_bytes())?;
            tmp.as_file().sync_all()?;
            tmp.persist(path).map_err(|e| CliError::Io(e.error))?;
        }
    }
    Ok(())
}
