pub mod calibrate;
pub mod compare;
pub mod curve;
pub mod sample;
pub mod survey;
pub mod threshold;

use std::fs;
use std::path::Path;

use crate::error::CliError;

/// Creates the output directory if needed.
pub fn ensure_out_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir)?;
    Ok(())
}
