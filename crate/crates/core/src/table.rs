//! Plot-ready result tables with CSV and JSON writers.
//!
//! CSV layout: `# key: value` metadata lines, one header row, then data rows.
//! Floats are written with 17 significant digits, exact rationals as `p/q`.

use std::io::Write;

use num_rational::BigRational;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(i64),
    Text(String),
    Rational(BigRational),
}

impl Cell {
    pub fn to_csv(&self) -> String {
        match self {
            Cell::Float(v) => format_float(*v),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => {
                if s.contains([',', '"', '\n']) {
                    format!("\"{}\"", s.replace('"', "\"\""))
                } else {
                    s.clone()
                }
            }
            Cell::Rational(r) => format!("{}/{}", r.numer(), r.denom()),
        }
    }

    pub fn to_json(&self) -> Value {
        match self {
            Cell::Float(v) if v.is_finite() => json!(v),
            Cell::Float(v) => json!(format_float(*v)),
            Cell::Int(v) => json!(v),
            Cell::Text(s) => json!(s),
            Cell::Rational(r) => json!(format!("{}/{}", r.numer(), r.denom())),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<i64> for Cell {
    fn from(v: i64) -> Self {
        Cell::Int(v)
    }
}

impl From<u32> for Cell {
    fn from(v: u32) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

impl From<BigRational> for Cell {
    fn from(v: BigRational) -> Self {
        Cell::Rational(v)
    }
}

/// 17 significant digits in scientific notation; `nan`, `inf`, `-inf` otherwise.
pub fn format_float(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.16e}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(Error::Config(format!("unknown output format {other:?}"))),
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub metadata: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

fn io_error(rows_written: usize) -> impl FnOnce(std::io::Error) -> Error {
    move |source| Error::Io { rows_written, source }
}

impl Table {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Self {
            metadata: Vec::new(),
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push_meta(&mut self, key: impl Into<String>, value: impl Into<String>) {
        self.metadata.push((key.into(), value.into()));
    }

    pub fn push_row(&mut self, row: Vec<Cell>) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(Error::Shape(format!(
                "row has {} cells, table has {} columns",
                row.len(),
                self.columns.len()
            )));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn write_csv_header(&self, w: &mut dyn Write) -> Result<()> {
        for (k, v) in &self.metadata {
            writeln!(w, "# {k}: {v}").map_err(io_error(0))?;
        }
        writeln!(w, "{}", self.columns.join(",")).map_err(io_error(0))
    }

    pub fn write_csv_row(row: &[Cell], w: &mut dyn Write, rows_written: usize) -> Result<()> {
        let line: Vec<String> = row.iter().map(Cell::to_csv).collect();
        writeln!(w, "{}", line.join(",")).map_err(io_error(rows_written))
    }

    pub fn write_csv(&self, w: &mut dyn Write) -> Result<()> {
        self.write_csv_header(w)?;
        for (i, row) in self.rows.iter().enumerate() {
            Self::write_csv_row(row, w, i)?;
        }
        w.flush().map_err(io_error(self.rows.len()))
    }

    pub fn to_json(&self) -> Value {
        let meta: Map<String, Value> = self
            .metadata
            .iter()
            .map(|(k, v)| (k.clone(), Value::String(v.clone())))
            .collect();
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|row| {
                let obj: Map<String, Value> = self
                    .columns
                    .iter()
                    .zip(row)
                    .map(|(c, cell)| (c.clone(), cell.to_json()))
                    .collect();
                Value::Object(obj)
            })
            .collect();
        json!({ "metadata": meta, "columns": self.columns, "rows": rows })
    }

    pub fn write_json(&self, w: &mut dyn Write) -> Result<()> {
        let text = serde_json::to_string_pretty(&self.to_json()).map_err(|e| Error::Parse(e.to_string()))?;
        writeln!(w, "{text}").map_err(io_error(0))?;
        w.flush().map_err(io_error(self.rows.len()))
    }

    pub fn write(&self, format: Format, w: &mut dyn Write) -> Result<()> {
        match format {
            Format::Csv => self.write_csv(w),
            Format::Json => self.write_json(w),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;

    #[test]
    fn csv_layout() {
        let mut t = Table::new(["x", "y", "r"]);
        t.push_meta("seed", "7");
        t.push_row(vec![1.5.into(), Cell::Int(3), BigRational::new(BigInt::from(2), BigInt::from(6)).into()])
            .unwrap();
        let mut out = Vec::new();
        t.write_csv(&mut out).unwrap();
        let s = String::from_utf8(out).unwrap();
        assert_eq!(s, "# seed: 7\nx,y,r\n1.5000000000000000e0,3,1/3\n");
    }

    #[test]
    fn float_round_trips() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23] {
            assert_eq!(format_float(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn row_width_checked() {
        let mut t = Table::new(["a"]);
        assert!(t.push_row(vec![1.0.into(), 2.0.into()]).is_err());
    }

    #[test]
    fn failing_sink_reports_rows() {
        // accepts a fixed number of bytes, then fails
        struct Fail(usize);
        impl Write for Fail {
            fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
                if self.0 == 0 {
                    return Err(std::io::Error::other("disk full"));
                }
                let n = buf.len().min(self.0);
                self.0 -= n;
                Ok(n)
            }
            fn flush(&mut self) -> std::io::Result<()> {
                Ok(())
            }
        }
        let mut t = Table::new(["a"]);
        for i in 0..5 {
            t.push_row(vec![Cell::Int(i)]).unwrap();
        }
        // header "a\n" plus rows "0\n" and "1\n"
        let err = t.write_csv(&mut Fail(6)).unwrap_err();
        assert!(matches!(err, Error::Io { rows_written: 2, .. }), "{err:?}");
    }
}
