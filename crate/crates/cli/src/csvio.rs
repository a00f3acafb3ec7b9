//! CSV emission: RFC-4180 quoting, LF line endings, '.' decimal
//! separator, 17 significant digits, and the literal token `inf` for
//! singular values (always paired with a flag column by the callers).

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};

/// One real, 17 significant digits; singular values as bare tokens.
pub fn fmt_real(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".to_string() } else { "-inf".to_string() }
    } else {
        format!("{x:.16e}")
    }
}

fn quote(field: &str) -> String {
    if field.contains(',') || field.contains('"') || field.contains('\n') {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

pub struct CsvWriter {
    out: BufWriter<fs::File>,
    columns: usize,
}

impl CsvWriter {
    pub fn create(path: &Path, header: &[&str]) -> Result<Self> {
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        let file = fs::File::create(path)
            .with_context(|| format!("cannot create {}", path.display()))?;
        let mut w = CsvWriter { out: BufWriter::new(file), columns: header.len() };
        let line: Vec<String> = header.iter().map(|h| quote(h)).collect();
        w.out.write_all(line.join(",").as_bytes())?;
        w.out.write_all(b"\n")?;
        Ok(w)
    }

    pub fn row(&mut self, fields: &[String]) -> Result<()> {
        debug_assert_eq!(fields.len(), self.columns, "column count mismatch");
        let line: Vec<String> = fields.iter().map(|f| quote(f)).collect();
        self.out.write_all(line.join(",").as_bytes())?;
        self.out.write_all(b"\n")?;
        Ok(())
    }

    pub fn reals(&mut self, values: &[f64]) -> Result<()> {
        let fields: Vec<String> = values.iter().map(|&v| fmt_real(v)).collect();
        self.row(&fields)
    }

    pub fn finish(mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }
}
