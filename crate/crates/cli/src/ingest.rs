//! Single-column CSV ingestion: one real value per row, an optional single
//! header line, and precise line numbers on parse failures.

use std::path::Path;

use volterra::TimeSeries;

use crate::error::{CliError, CliResult};

/// Reads a single-column CSV file into a series labelled with the file stem.
pub fn ingest_csv(path: &Path) -> CliResult<TimeSeries> {
    let raw = std::fs::read_to_string(path)
        .map_err(|e| CliError::data(format!("reading {}: {e}", path.display())))?;
    let label = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "series".to_string());
    parse_single_column(&raw, &label, &path.display().to_string())
}

/// Parses CSV text that is already in memory; `source` names it in errors.
pub fn parse_single_column(raw: &str, label: &str, source: &str) -> CliResult<TimeSeries> {
    let mut values = Vec::new();
    let mut saw_header = false;
    for (idx, line) in raw.lines().enumerate() {
        let line_no = idx + 1;
        // A UTF-8 byte order mark on the first line is tool noise, not data.
        let line = if idx == 0 {
            line.trim_start_matches('\u{feff}')
        } else {
            line
        };
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        match trimmed.parse::<f64>() {
            Ok(v) if v.is_finite() => values.push(v),
            Ok(_) => {
                return Err(CliError::data(format!(
                    "{source}:{line_no}: non-finite value {trimmed:?}"
                )))
            }
            Err(_) if idx == 0 && !saw_header => {
                // One non-numeric first line is a header; anything later is
                // a parse error.
                saw_header = true;
            }
            Err(_) => {
                return Err(CliError::data(format!(
                    "{source}:{line_no}: cannot parse {trimmed:?} as a real number"
                )))
            }
        }
    }
    if values.is_empty() {
        return Err(CliError::data(format!("{source}: no data rows")));
    }
    Ok(TimeSeries::with_label(values, label)?)
}
