//! Bundled demonstration series, embedded so every command works without
//! external files. Provenance notes live in `data/PROVENANCE.md`.

use volterra::TimeSeries;

use crate::error::CliResult;
use crate::ingest::parse_single_column;

const DEATH_CSV: &str = include_str!("../data/death.csv");
const NILE_CSV: &str = include_str!("../data/nile.csv");

/// Monthly accidental deaths in the USA, 1973-1978; 72 values.
pub fn death_series() -> CliResult<TimeSeries> {
    parse_single_column(DEATH_CSV, "death", "bundled death.csv")
}

/// Annual Nile flow at Aswan, 1871-1970; 100 values.
pub fn nile_series() -> CliResult<TimeSeries> {
    parse_single_column(NILE_CSV, "nile", "bundled nile.csv")
}
