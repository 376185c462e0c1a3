//! Small helpers for CSV output: header row, LF line endings, '.' decimals.

use csv::{Terminator, WriterBuilder};

use crate::error::Error;

/// Formats a float with the shortest round-trip representation, switching to
/// exponent notation for very small or very large magnitudes.
pub fn fmt_f64(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || (1e-4..1e15).contains(&a) || !x.is_finite() {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

/// Renders a header plus rows into a CSV document.
pub fn render<I, R>(header: &[String], rows: I) -> Result<String, Error>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = WriterBuilder::new().terminator(Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.into_iter().collect::<Vec<_>>())?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}
