//! Deterministic CSV and JSON emission.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::error::Result;

/// Significant digits kept in every emitted float.
pub const SIG_DIGITS: usize = 12;

/// Round to 12 significant digits and print the shortest representation
/// that round-trips the rounded value.
pub fn format_float(x: f64) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let rounded: f64 = format!("{:.*e}", SIG_DIGITS - 1, x).parse().unwrap_or(x);
    let a = rounded.abs();
    if (1e-4..1e15).contains(&a) {
        format!("{rounded}")
    } else {
        format!("{rounded:e}")
    }
}

/// In-memory CSV table with a header row.
#[derive(Debug, Clone, Default)]
pub struct CsvTable {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self { header: header.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn header(&self) -> &[String] {
        &self.header
    }

    pub fn rows(&self) -> &[Vec<String>] {
        &self.rows
    }

    /// Append a row of floats. Short rows are padded with empty fields.
    pub fn push_floats(&mut self, values: &[f64]) {
        self.push_fields(values.iter().map(|&v| format_float(v)).collect());
    }

    pub fn push_fields(&mut self, mut fields: Vec<String>) {
        fields.resize(self.header.len().max(fields.len()), String::new());
        self.rows.push(fields);
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        write_record(&mut out, &self.header);
        for r in &self.rows {
            write_record(&mut out, r);
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.render())?;
        Ok(())
    }
}

fn write_record(out: &mut String, fields: &[String]) {
    for (i, f) in fields.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        if f.contains([',', '"', '\n', '\r']) {
            let _ = write!(out, "\"{}\"", f.replace('"', "\"\""));
        } else {
            out.push_str(f);
        }
    }
    out.push_str("\r\n");
}

/// Pretty-printed JSON with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    std::fs::write(path, s)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(format_float(4.089), "4.089");
        assert_eq!(format_float(1.0 / 3.0), "0.333333333333");
        assert_eq!(format_float(-2.0e-7), "-2e-7");
        assert_eq!(format_float(123456789.1234567), "123456789.123");
        assert_eq!(format_float(0.0), "0");
        let x = 0.1 + 0.2;
        assert_eq!(format_float(x), "0.3");
    }

    #[test]
    fn quoting() {
        let mut t = CsvTable::new(["a", "b,c"]);
        t.push_fields(vec!["x\"y".into()]);
        assert_eq!(t.render(), "a,\"b,c\"\r\n\"x\"\"y\",\r\n");
    }
}
