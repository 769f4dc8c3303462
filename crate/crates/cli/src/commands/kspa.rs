//! `kspa`: distribution-level comparison of two error samples.

use std::path::Path;

use serde::Serialize;
use volterra::kspa::{kspa_one_sided, kspa_two_sided, Ecdf, ErrorSample, ErrorTransform, KspaResult};

use crate::config::RunConfig;
use crate::error::CliResult;
use crate::ingest::ingest_csv;
use crate::report::{self, SCHEMA_VERSION};

#[derive(Debug, Serialize)]
struct KspaReport {
    schema_version: &'static str,
    command: &'static str,
    first: String,
    second: String,
    transform: ErrorTransform,
    n1: usize,
    n2: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    family_size: Option<usize>,
    two_sided: KspaResult,
    one_sided: KspaResult,
}

pub fn run(first: &Path, second: &Path, cfg: &RunConfig) -> CliResult<()> {
    let transform = super::build_transform(cfg.transform.as_deref().unwrap_or("abs"))?;

    let sample = |path: &Path| -> CliResult<ErrorSample> {
        let series = ingest_csv(path)?;
        let label = series.label().unwrap_or("errors").to_string();
        Ok(ErrorSample::from_raw_errors(series.values(), transform, label)?)
    };
    let s1 = sample(first)?;
    let s2 = sample(second)?;

    let mut two_sided = kspa_two_sided(&s1, &s2)?;
    let mut one_sided = kspa_one_sided(&s1, &s2)?;
    if let Some(family) = cfg.family_size {
        two_sided = two_sided.with_adjustment(family)?;
        one_sided = one_sided.with_adjustment(family)?;
    }

    let report = KspaReport {
        schema_version: SCHEMA_VERSION,
        command: "kspa",
        first: s1.label().to_string(),
        second: s2.label().to_string(),
        transform,
        n1: s1.len(),
        n2: s2.len(),
        family_size: cfg.family_size,
        two_sided,
        one_sided,
    };

    match &cfg.out {
        Some(dir) => {
            report::write_json(dir, "kspa.json", &report)?;
            let curves = vec![
                (s1.label().to_string(), Ecdf::from_sample(&s1).steps()),
                (s2.label().to_string(), Ecdf::from_sample(&s2).steps()),
            ];
            report::write_atomic(&dir.join("ecdf.csv"), &report::ecdf_csv(&curves))?;
            Ok(())
        }
        None => {
            print!("{}", report::to_json(&report)?);
            Ok(())
        }
    }
}
