//! Report serialization helpers.
//!
//! JSON reports keep full float precision and carry a `schema_version`
//! field; CSV reports round floats to 6 significant digits for readable
//! tables. Nothing here embeds timestamps, so repeated runs are
//! byte-identical.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::CliError;

pub const SCHEMA_VERSION: &str = "1";

/// A float formatted to 6 significant digits, positional below 1e6 and
/// scientific above.
pub fn fmt_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    // take the decimal exponent from the rounded scientific form so that
    // rounding carries (0.99999951 -> 1.00000) are handled
    let scientific = format!("{x:.5e}");
    let exponent: i32 = scientific
        .split('e')
        .nth(1)
        .and_then(|e| e.parse().ok())
        .unwrap_or(0);
    if exponent >= 6 {
        scientific
    } else {
        let decimals = (5 - exponent).max(0) as usize;
        format!("{x:.decimals$}")
    }
}

/// An optional float for CSV cells; absent values serialize as empty fields.
pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_sig).unwrap_or_default()
}

/// Writes a pretty-printed JSON report plus trailing newline.
pub fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let file = File::create(path)?;
    let mut writer = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut writer, value)?;
    writer.write_all(b"\n")?;
    writer.flush()?;
    println!("wrote {}", path.display());
    Ok(())
}

/// Writes raw text (CSV, SVG) to a file.
pub fn write_text(path: &Path, content: &str) -> Result<(), CliError> {
    let file = File::create(path)?;
    let mut writer = BufWriter::new(file);
    writer.write_all(content.as_bytes())?;
    writer.flush()?;
    println!("wrote {}", path.display());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_significant_digits() {
        assert_eq!(fmt_sig(0.0), "0");
        assert_eq!(fmt_sig(0.47904706), "0.479047");
        assert_eq!(fmt_sig(-0.47904706), "-0.479047");
        assert_eq!(fmt_sig(45534.23), "45534.2");
        assert_eq!(fmt_sig(0.000123456789), "0.000123457");
        assert_eq!(fmt_sig(1.0), "1.00000");
        assert_eq!(fmt_sig(1234567.0), "1.23457e6");
    }
}
