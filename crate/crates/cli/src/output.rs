//! CSV emission. Tables are fully built before anything is written.

use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use crate::CliError;

/// A rendered table: header plus string cells.
pub struct Table {
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Table {
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    fn to_bytes(&self, banner: Option<&str>) -> Result<Vec<u8>, CliError> {
        let mut buf = Vec::new();
        if let Some(b) = banner {
            writeln!(buf, "# {b}").map_err(io)?;
        }
        let mut w = csv::Writer::from_writer(buf);
        w.write_record(&self.header).map_err(csv_err)?;
        for r in &self.rows {
            w.write_record(r).map_err(csv_err)?;
        }
        w.into_inner().map_err(|e| CliError::Runtime(e.to_string()))
    }
}

/// Formats a finite float with shortest round-trip digits.
pub fn num(x: f64) -> Result<String, CliError> {
    if x.is_finite() {
        Ok(x.to_string())
    } else {
        Err(CliError::Runtime(format!("non-finite value {x} in output")))
    }
}

pub fn banner(command: &str, no_banner: bool) -> Option<String> {
    if no_banner {
        return None;
    }
    let secs = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    Some(format!("qcs {command} generated at unix time {secs}"))
}

/// Writes `table` to `out`, or to stdout when no path is given.
pub fn emit(table: &Table, out: Option<&Path>, banner: Option<&str>) -> Result<(), CliError> {
    let bytes = table.to_bytes(banner)?;
    match out {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).map_err(io)?;
            }
            fs::write(path, bytes).map_err(io)
        }
        None => std::io::stdout().write_all(&bytes).map_err(io),
    }
}

pub fn io(e: std::io::Error) -> CliError {
    CliError::Runtime(e.to_string())
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Runtime(e.to_string())
}
