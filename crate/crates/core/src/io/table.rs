use std::fs::File;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use csv::{ReaderBuilder, StringRecord};

use crate::error::{Error, Result};

/// A CSV file with a fixed header, read record by record with positions
/// for diagnostics.
pub struct Table {
    path: PathBuf,
    header: &'static [&'static str],
    reader: csv::Reader<File>,
}

/// One data row with its 1-based line number.
pub struct Row<'a> {
    table: &'a Table,
    line: u64,
    record: StringRecord,
}

impl Table {
    pub fn open(path: &Path, header: &'static [&'static str]) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut reader = ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(file);
        let found = reader.headers().map_err(|e| csv_error(path, e))?.clone();
        if found.iter().ne(header.iter().copied()) {
            return Err(Error::Schema {
                file: path.to_path_buf(),
                message: format!(
                    "expected header `{}`, found `{}`",
                    header.join(","),
                    found.iter().collect::<Vec<_>>().join(",")
                ),
            });
        }
        Ok(Self {
            path: path.to_path_buf(),
            header,
            reader,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Calls `f` on every data row in file order.
    pub fn for_each(mut self, mut f: impl FnMut(&Row<'_>) -> Result<()>) -> Result<()> {
        let mut record = StringRecord::new();
        loop {
            let more = self
                .reader
                .read_record(&mut record)
                .map_err(|e| csv_error(&self.path, e))?;
            if !more {
                return Ok(());
            }
            let line = record.position().map_or(0, |p| p.line());
            let row = Row {
                table: &self,
                line,
                record: std::mem::take(&mut record),
            };
            f(&row)?;
            record = row.record;
        }
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    Error::Input {
        file: path.to_path_buf(),
        line,
        column: String::new(),
        message: e.to_string(),
    }
}

impl Row<'_> {
    pub fn line(&self) -> u64 {
        self.line
    }

    /// Input error pointing at `column` on this row.
    pub fn error(&self, column: &str, message: impl Into<String>) -> Error {
        Error::Input {
            file: self.table.path.clone(),
            line: self.line,
            column: column.to_string(),
            message: message.into(),
        }
    }

    pub fn str(&self, column: &str) -> Result<&str> {
        let idx = self
            .table
            .header
            .iter()
            .position(|&h| h == column)
            .expect("column belongs to the schema");
        self.record.get(idx).ok_or_else(|| self.error(column, "missing field"))
    }

    pub fn parse<T: FromStr>(&self, column: &str, what: &str) -> Result<T> {
        let s = self.str(column)?;
        s.parse()
            .map_err(|_| self.error(column, format!("expected {what}, found `{s}`")))
    }

    /// Finite real.
    pub fn real(&self, column: &str) -> Result<f64> {
        let v: f64 = self.parse(column, "a number")?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(self.error(column, "value must be finite"))
        }
    }

    pub fn count(&self, column: &str) -> Result<u32> {
        self.parse(column, "a non-negative integer")
    }

    /// Week index ≥ 1.
    pub fn week(&self, column: &str) -> Result<u32> {
        let w: u32 = self.parse(column, "a week number")?;
        if w == 0 {
            return Err(self.error(column, "weeks are numbered from 1"));
        }
        Ok(w)
    }
}
