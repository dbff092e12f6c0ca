//! Deterministic JSON and CSV emission. Floats carry 17 significant digits.

use std::io::{self, Write};

use serde::Serialize;
use serde_json::ser::{CompactFormatter, Formatter, Serializer};

/// `v` with 17 significant digits in scientific notation; `null` when not finite.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        "null".into()
    }
}

/// CSV cell for a float: like [`fmt_f64`] but spelling out non-finite values.
pub fn csv_f64(v: f64) -> String {
    if v.is_finite() {
        fmt_f64(v)
    } else {
        v.to_string()
    }
}

struct FloatFormatter;

impl Formatter for FloatFormatter {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, v: f64) -> io::Result<()> {
        w.write_all(fmt_f64(v).as_bytes())
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, v: f32) -> io::Result<()> {
        self.write_f64(w, v as f64)
    }

    fn write_null<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        CompactFormatter.write_null(w)
    }
}

pub fn write_json<T: Serialize, W: Write>(value: &T, mut out: W) -> io::Result<()> {
    let mut ser = Serializer::with_formatter(&mut out, FloatFormatter);
    value.serialize(&mut ser).map_err(io::Error::other)?;
    out.write_all(b"\n")
}

pub fn to_json<T: Serialize>(value: &T) -> io::Result<String> {
    let mut buf = Vec::new();
    write_json(value, &mut buf)?;
    String::from_utf8(buf).map_err(io::Error::other)
}

/// A CSV table with a fixed header.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.header.len(), "row width must match the header");
        self.rows.push(row);
    }

    pub fn write<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "{}", self.header.join(","))?;
        for r in &self.rows {
            writeln!(out, "{}", r.join(","))?;
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("utf-8 cells")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize)]
    struct Sample {
        b: f64,
        a: Vec<f64>,
        n: u32,
    }

    #[test]
    fn floats_have_seventeen_digits_and_order_is_stable() {
        let s = to_json(&Sample { b: 0.1, a: vec![1.0, f64::NAN], n: 3 }).unwrap();
        assert_eq!(s, "{\"b\":1.0000000000000001e-1,\"a\":[1.0000000000000000e0,null],\"n\":3}\n");
        let back: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(back["b"].as_f64(), Some(0.1));
    }

    #[test]
    fn csv_rows_follow_header() {
        let mut t = Table::new(&["x", "y"]);
        t.push(vec!["1".into(), csv_f64(0.5)]);
        assert_eq!(t.to_csv(), "x,y\n1,5.0000000000000000e-1\n");
    }
}
