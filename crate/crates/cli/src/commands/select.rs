//! `select`: k-fold cross-validation over the hyperparameter grid, refit of
//! the winner and a held-out test score.

use std::path::Path;

use serde::Serialize;
use volterra::selection::{select_and_refit, CvReport, SearchGrid};
use volterra::solver::FitOptions;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::ingest::ingest_csv;
use crate::report::{self, Csv, SCHEMA_VERSION};

#[derive(Debug, Serialize)]
struct SelectReport {
    schema_version: &'static str,
    command: &'static str,
    input: String,
    observations: usize,
    grid: SearchGrid,
    prescale: bool,
    cv: CvReport,
}

pub fn run(cfg: &RunConfig) -> CliResult<()> {
    let input = cfg
        .input
        .as_ref()
        .ok_or_else(|| CliError::config("select needs --input FILE"))?;
    let family = super::build_family(cfg.kernel.as_deref().unwrap_or("sum"))?;
    let mut grid = SearchGrid::default();
    if let Some(lambda) = cfg.lambda {
        grid.lambdas = vec![lambda];
    }
    if let Some(memory) = cfg.memory {
        grid.memories = vec![memory];
    }
    if let Some(order) = cfg.order {
        grid.orders = vec![order];
    }
    if let Some(sigma) = cfg.sigma {
        grid.sigmas = vec![sigma];
    }
    if let Some(folds) = cfg.folds {
        grid.folds = folds;
    }
    if let Some(fraction) = cfg.train_fraction {
        grid.train_fraction = fraction;
    }
    let prescale = cfg.prescale.unwrap_or(false);

    let series = ingest_csv(input)?;
    let (_, cv) = select_and_refit(&series, &grid, family, FitOptions { prescale })?;

    let report = SelectReport {
        schema_version: SCHEMA_VERSION,
        command: "select",
        input: series.label().unwrap_or("series").to_string(),
        observations: series.len(),
        grid,
        prescale,
        cv,
    };

    match &cfg.out {
        Some(dir) => write_files(dir, &report),
        None => {
            print!("{}", report::to_json(&report)?);
            Ok(())
        }
    }
}

fn write_files(dir: &Path, report: &SelectReport) -> CliResult<()> {
    report::write_json(dir, "select.json", report)?;

    let folds = report.grid.folds;
    let fold_labels: Vec<String> = (1..=folds).map(|f| format!("fold{f}")).collect();
    let mut header = vec!["memory", "order", "lambda", "sigma", "mean_rmse"];
    header.extend(fold_labels.iter().map(String::as_str));
    let mut csv = Csv::new(&header);
    for candidate in &report.cv.candidates {
        let mut fields = vec![
            candidate.config.memory.to_string(),
            candidate.config.order.to_string(),
            report::num(candidate.config.lambda),
            report::opt_num(candidate.sigma),
            report::num(candidate.mean_rmse),
        ];
        fields.extend(candidate.fold_rmses.iter().map(|v| report::num(*v)));
        csv.row(&fields);
    }
    report::write_atomic(&dir.join("candidates.csv"), &csv.finish())?;
    Ok(())
}
