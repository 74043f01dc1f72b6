//! CSV and JSON export with whole-file atomic writes.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::controller::TuneTable;
use crate::error::{Error, Result};
use crate::harness::record::RunRecord;
use crate::mcmc::Histogram;
use crate::objectives::Grid;
use crate::repressilator::Trajectory;

/// Renders a real with at most 12 significant digits, in the shortest form
/// that parses back to the rounded value.
pub fn fmt_real(x: f64) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let rounded: f64 = format!("{x:.11e}").parse().expect("formatted float parses");
    let a = rounded.abs();
    if a != 0.0 && !(1e-6..1e16).contains(&a) {
        format!("{rounded:e}")
    } else {
        format!("{rounded}")
    }
}

/// A header plus rows of preformatted cells.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvTable {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        Self {
            header: header.iter().map(|h| h.as_ref().to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn header(&self) -> &[String] {
        &self.header
    }

    pub fn rows(&self) -> &[Vec<String>] {
        &self.rows
    }

    /// Appends a row; its width must equal the header's.
    pub fn push(&mut self, row: Vec<String>) -> Result<()> {
        if row.len() != self.header.len() {
            return Err(Error::Dimension {
                expected: self.header.len(),
                got: row.len(),
            });
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn push_reals(&mut self, row: &[f64]) -> Result<()> {
        self.push(row.iter().map(|v| fmt_real(*v)).collect())
    }

    pub fn to_csv_string(&self) -> String {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for r in &self.rows {
            w.write_record(r).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("cells are UTF-8")
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_csv_string().as_bytes())
    }
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes to a temporary file next to `path` and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io(path))?;
    tmp.write_all(bytes).map_err(io(path))?;
    tmp.as_file().sync_all().map_err(io(path))?;
    tmp.persist(path).map_err(|e| io(path)(e.error))?;
    Ok(())
}

pub fn to_json_string<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_atomic(path, to_json_string(value)?.as_bytes())
}

pub fn read_record(path: &Path) -> Result<RunRecord> {
    let bytes = std::fs::read(path).map_err(io(path))?;
    Ok(serde_json::from_slice(&bytes)?)
}

pub fn tune_csv(t: &TuneTable) -> CsvTable {
    let mut table = CsvTable::new(&TuneTable::CSV_HEADER.split(',').collect::<Vec<_>>());
    for r in &t.rows {
        table
            .push(vec![
                r.repetition.to_string(),
                fmt_real(r.alpha),
                r.iterations.to_string(),
                fmt_real(r.best_loss),
                r.verdict.to_string(),
            ])
            .expect("five columns");
    }
    table
}

pub fn grid_csv(g: &Grid) -> CsvTable {
    let mut table = CsvTable::new(&["x1", "x2", "value"]);
    for row in g.csv_rows() {
        table.push_reals(&row).expect("three columns");
    }
    table
}

pub fn histogram_csv(h: &Histogram) -> CsvTable {
    let mut table = CsvTable::new(&["bin_x", "bin_y", "count"]);
    for (bx, by, c) in h.csv_rows() {
        table
            .push(vec![bx.to_string(), by.to_string(), c.to_string()])
            .expect("three columns");
    }
    table
}

pub fn trajectory_csv(t: &Trajectory) -> CsvTable {
    let mut table = CsvTable::new(&Trajectory::CSV_HEADER);
    for row in t.csv_rows() {
        table.push_reals(&row).expect("seven columns");
    }
    table
}
