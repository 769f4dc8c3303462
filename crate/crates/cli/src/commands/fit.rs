//! `fit`: one configuration on one series, emitting the reconstruction and
//! the per-degree operator contributions.

use std::path::Path;

use serde::Serialize;
use volterra::kernels::block_dimension;
use volterra::solver::{FitOptions, VolterraModel};
use volterra::{embed, KernelSpec};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::ingest::ingest_csv;
use crate::report::{self, Csv, SCHEMA_VERSION};

/// Coefficient vectors beyond this total size are left out of the report.
const COEFFICIENT_EMIT_LIMIT: usize = 10_000;

#[derive(Debug, Serialize)]
struct ReconstructionRow {
    row: usize,
    target: f64,
    prediction: f64,
    error: f64,
}

#[derive(Debug, Serialize)]
struct FitReport {
    schema_version: &'static str,
    command: &'static str,
    input: String,
    observations: usize,
    memory: usize,
    kernel: KernelSpec,
    lambda: f64,
    prescale: bool,
    scale: f64,
    jitter: f64,
    rows: usize,
    training_rmse: f64,
    reconstruction: Vec<ReconstructionRow>,
    /// Per-row `H_0(x) ... H_p(x)`, present for the sum kernel only.
    #[serde(skip_serializing_if = "Option::is_none")]
    operator_contributions: Option<Vec<Vec<f64>>>,
    /// Recovered monomial coefficients per degree, when the basis is small
    /// enough to print.
    #[serde(skip_serializing_if = "Option::is_none")]
    coefficients: Option<Vec<Vec<f64>>>,
}

pub fn run(cfg: &RunConfig) -> CliResult<()> {
    let input = cfg
        .input
        .as_ref()
        .ok_or_else(|| CliError::config("fit needs --input FILE"))?;
    let memory = cfg
        .memory
        .ok_or_else(|| CliError::config("fit needs --memory"))?;
    let lambda = cfg.lambda.unwrap_or(0.0);
    let kernel_name = cfg.kernel.as_deref().unwrap_or("sum");
    let spec = super::build_kernel(kernel_name, cfg.order, cfg.sigma)?;
    let prescale = cfg.prescale.unwrap_or(false);

    let series = ingest_csv(input)?;
    let trajectory = embed(&series, memory)?;
    let model =
        VolterraModel::fit_with_options(&trajectory, &spec, lambda, FitOptions { prescale })?;

    let fitted = model.reconstruct()?;
    let reconstruction: Vec<ReconstructionRow> = (0..trajectory.len())
        .map(|i| {
            let target = trajectory.targets()[i];
            let prediction = fitted[i];
            ReconstructionRow {
                row: i,
                target,
                prediction,
                error: target - prediction,
            }
        })
        .collect();

    let operator_contributions = match &spec {
        KernelSpec::SumPolynomial { .. } => {
            let mut rows = Vec::with_capacity(trajectory.len());
            for i in 0..trajectory.len() {
                let decomposition = model.operator_contributions(trajectory.row(i))?;
                rows.push(decomposition.contributions().to_vec());
            }
            Some(rows)
        }
        _ => None,
    };

    let coefficients = match &spec {
        KernelSpec::SumPolynomial { order }
            if coefficient_total(memory, *order)
                .is_some_and(|total| total <= COEFFICIENT_EMIT_LIMIT) =>
        {
            Some(
                model
                    .recover_all_coefficients()?
                    .into_iter()
                    .map(|block| block.to_vec())
                    .collect(),
            )
        }
        _ => None,
    };

    let report = FitReport {
        schema_version: SCHEMA_VERSION,
        command: "fit",
        input: series.label().unwrap_or("series").to_string(),
        observations: series.len(),
        memory,
        kernel: spec,
        lambda,
        prescale,
        scale: model.scale(),
        jitter: model.jitter(),
        rows: trajectory.len(),
        training_rmse: model.training_rmse()?,
        reconstruction,
        operator_contributions,
        coefficients,
    };

    match &cfg.out {
        Some(dir) => write_files(dir, &report),
        None => {
            print!("{}", report::to_json(&report)?);
            Ok(())
        }
    }
}

fn coefficient_total(memory: usize, order: usize) -> Option<usize> {
    let mut total = 0usize;
    for degree in 0..=order {
        total = total.checked_add(block_dimension(memory, degree).ok()?)?;
    }
    Some(total)
}

fn write_files(dir: &Path, report: &FitReport) -> CliResult<()> {
    report::write_json(dir, "fit.json", report)?;

    let mut csv = Csv::new(&["row", "target", "prediction", "error"]);
    for r in &report.reconstruction {
        csv.row(&[
            r.row.to_string(),
            report::num(r.target),
            report::num(r.prediction),
            report::num(r.error),
        ]);
    }
    report::write_atomic(&dir.join("reconstruction.csv"), &csv.finish())?;

    if let Some(contributions) = &report.operator_contributions {
        let order = contributions.first().map_or(0, |c| c.len().saturating_sub(1));
        let labels: Vec<String> = (0..=order).map(|d| format!("h{d}")).collect();
        let mut header: Vec<&str> = vec!["row"];
        header.extend(labels.iter().map(String::as_str));
        let mut csv = Csv::new(&header);
        for (i, row) in contributions.iter().enumerate() {
            let mut fields = vec![i.to_string()];
            fields.extend(row.iter().map(|v| report::num(*v)));
            csv.row(&fields);
        }
        report::write_atomic(&dir.join("operators.csv"), &csv.finish())?;
    }
    Ok(())
}
