use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// A CSV table of strings: the format of every table the harness writes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: Vec<String>) -> Self {
        Self { header, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn from_reader<R: Read>(r: R) -> Result<Self> {
        let mut rd = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
        let header = rd.headers()?.iter().map(str::to_string).collect();
        let rows: std::result::Result<Vec<Vec<String>>, csv::Error> =
            rd.records().map(|rec| rec.map(|r| r.iter().map(str::to_string).collect())).collect();
        Ok(Self { header, rows: rows? })
    }

    pub fn read_path(path: &Path) -> Result<Self> {
        Self::from_reader(std::fs::File::open(path)?)
    }

    pub fn to_writer<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(&self.header)?;
        for r in &self.rows {
            wr.write_record(r)?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn write_path(&self, path: &Path) -> Result<()> {
        self.to_writer(std::fs::File::create(path)?)
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Parse(format!("no column `{name}`")))
    }

    /// Values of a numeric column; empty cells read as NaN.
    pub fn column_f64(&self, name: &str) -> Result<Vec<f64>> {
        let k = self.column_index(name)?;
        self.rows
            .iter()
            .enumerate()
            .map(|(n, r)| {
                let cell = r[k].as_str();
                if cell.is_empty() {
                    Ok(f64::NAN)
                } else {
                    cell.parse().map_err(|_| Error::Parse(format!("row {}: `{cell}` in column `{name}` is not a number", n + 1)))
                }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_byte_identical() {
        let mut t = Table::new(vec!["a".into(), "b, quoted".into()]);
        t.push(vec!["0.1".into(), "x\"y".into()]);
        t.push(vec!["".into(), "1e-300".into()]);
        let mut first = Vec::new();
        t.to_writer(&mut first).unwrap();
        let back = Table::from_reader(first.as_slice()).unwrap();
        assert_eq!(back, t);
        let mut second = Vec::new();
        back.to_writer(&mut second).unwrap();
        assert_eq!(first, second);
        let a = back.column_f64("a").unwrap();
        assert!(a[1].is_nan());
        assert!(back.column_f64("b, quoted").is_err());
        assert!(back.column_f64("missing").is_err());
    }
}
