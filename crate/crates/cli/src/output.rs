//! CSV rendering: a `#`-prefixed provenance header (tool version and the
//! sha256 of the resolved config) followed by a fixed, versioned column row.

use sha2::{Digest, Sha256};

use crate::CliError;

pub fn config_hash(canonical: &str) -> String {
    let digest = Sha256::digest(canonical.as_bytes());
    let mut hex = String::with_capacity(64);
    for byte in digest {
        hex.push_str(&format!("{byte:02x}"));
    }
    hex
}

pub fn render(
    command: &str,
    hash: &str,
    columns: &[&str],
    rows: Vec<Vec<String>>,
) -> Result<Vec<u8>, CliError> {
    let mut out = Vec::new();
    out.extend_from_slice(
        format!("# entangler {} {command}\n", env!("CARGO_PKG_VERSION")).as_bytes(),
    );
    out.extend_from_slice(format!("# config sha256 {hash}\n").as_bytes());
    let mut writer = csv::Writer::from_writer(out);
    writer
        .write_record(columns)
        .and_then(|()| rows.into_iter().try_for_each(|row| writer.write_record(&row)))
        .map_err(|e| CliError::Config(format!("csv write error: {e}")))?;
    writer
        .into_inner()
        .map_err(|e| CliError::Config(format!("csv write error: {e}")))
}

/// Shortest round-trip decimal for a float; deterministic across runs.
pub fn num(v: f64) -> String {
    format!("{v}")
}
