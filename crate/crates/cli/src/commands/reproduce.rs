//! `reproduce`: the full benchmark pipeline. Every artefact is a pure
//! function of the master seed, so repeated runs produce byte-identical
//! files.
//!
//! Targets:
//! * `table1`: Monte-Carlo method comparison on three synthetic processes.
//! * `table2`: distribution tests on one series per synthetic process.
//! * `table3`: accuracy and distribution tests on the bundled real series.
//! * `figure1`: Gaussian width sweep on the death series.
//! * `figure2` / `figure3`: error histograms and ECDFs on the real series.
//! * `all` (default): everything above.

use std::path::Path;

use serde::Serialize;
use volterra::kernels::median_heuristic_sigma;
use volterra::kspa::{kspa_one_sided, kspa_two_sided, ErrorSample, ErrorTransform, KspaResult, TestDirection};
use volterra::metrics::std_dev;
use volterra::selection::{cross_validate, one_step_errors, KernelFamily, SearchGrid};
use volterra::simulation::{generate, run_monte_carlo, ArBaseline, McSummary, Method, ProcessSpec};
use volterra::{embed, FitOptions, KernelSpec, ModelConfig, TimeSeries, VolterraModel};

use super::simulate::{lambda_policy, standard_processes, summary_csv, DEFAULT_SEED};
use crate::config::RunConfig;
use crate::data;
use crate::error::{CliError, CliResult};
use crate::report::{self, Csv, Histogram, SigmaSweep, SCHEMA_VERSION};

/// Four simultaneous comparisons per series: {two-sided, one-sided} against
/// each of the two rival methods.
const FAMILY_SIZE: usize = 4;

/// Settings for the real-series benchmarks.
const REAL_CONFIG: ModelConfig = ModelConfig {
    memory: 10,
    order: 5,
    lambda: 1e-8,
};

/// Settings for the single-series synthetic benchmarks.
const SYNTH_CONFIG: ModelConfig = ModelConfig {
    memory: 8,
    order: 3,
    lambda: 0.0,
};

pub fn run(cfg: &RunConfig) -> CliResult<()> {
    let dir = cfg
        .out
        .as_ref()
        .ok_or_else(|| CliError::config("reproduce needs --out DIR"))?;
    let target = cfg.target.as_deref().unwrap_or("all");
    match target {
        "all" | "table1" | "table2" | "table3" | "figure1" | "figure2" | "figure3" => {}
        other => {
            return Err(CliError::config(format!(
                "unknown target {other:?}; expected all, table1, table2, table3, figure1, figure2 or figure3"
            )))
        }
    }
    let seed = cfg.seed.unwrap_or(DEFAULT_SEED);
    let runs = cfg.runs.unwrap_or(100);
    let length = cfg.length.unwrap_or(100);

    let wants = |name: &str| target == "all" || target == name;
    let mut files = Vec::new();
    if wants("table1") {
        files.extend(table1(dir, seed, runs, length)?);
    }
    if wants("table2") {
        files.extend(table2(dir, seed, length)?);
    }
    if wants("table3") {
        files.extend(table3(dir)?);
    }
    if wants("figure1") {
        files.extend(figure1(dir)?);
    }
    if wants("figure2") {
        files.extend(error_figure(dir, "figure2", &data::death_series()?)?);
    }
    if wants("figure3") {
        files.extend(error_figure(dir, "figure3", &data::nile_series()?)?);
    }

    let manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        command: "reproduce",
        target: target.to_string(),
        master_seed: seed,
        runs,
        length,
        files,
    };
    report::write_json(dir, "manifest.json", &manifest)?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct Manifest {
    schema_version: &'static str,
    command: &'static str,
    target: String,
    master_seed: u64,
    runs: usize,
    length: usize,
    /// Artefacts written for the chosen target, in emission order.
    files: Vec<String>,
}

// ---------------------------------------------------------------- table 1

#[derive(Debug, Serialize)]
struct Table1Report {
    schema_version: &'static str,
    target: &'static str,
    master_seed: u64,
    length: usize,
    processes: Vec<ProcessSpec>,
    summary: McSummary,
}

fn table1(dir: &Path, seed: u64, runs: usize, length: usize) -> CliResult<Vec<String>> {
    let processes = standard_processes(seed, length);
    let configs = [
        ModelConfig {
            memory: 10,
            order: 5,
            lambda: 0.0,
        },
        SYNTH_CONFIG,
    ];
    let policy = lambda_policy(None);
    let summary = run_monte_carlo(&processes, &configs, runs, &policy)?;

    let mut csv = Csv::new(&[
        "process", "memory", "order", "volterra", "gaussian_ridge", "ar_ols",
    ]);
    for process in &processes {
        let label = process.kind.to_string();
        for config in &configs {
            let mean = |method| {
                summary
                    .cell(&label, config, method)
                    .and_then(|cell| cell.mean_rmse)
            };
            csv.row(&[
                label.clone(),
                config.memory.to_string(),
                config.order.to_string(),
                report::opt_num(mean(Method::Volterra)),
                report::opt_num(mean(Method::GaussianRidge)),
                report::opt_num(mean(Method::ArOls)),
            ]);
        }
    }

    let report_doc = Table1Report {
        schema_version: SCHEMA_VERSION,
        target: "table1",
        master_seed: seed,
        length,
        processes,
        summary,
    };
    report::write_json(dir, "table1.json", &report_doc)?;
    report::write_atomic(&dir.join("table1.csv"), &csv.finish())?;
    report::write_atomic(
        &dir.join("table1_cells.csv"),
        &summary_csv(&report_doc.summary),
    )?;
    Ok(strings(&["table1.json", "table1.csv", "table1_cells.csv"]))
}

// ---------------------------------------------------------------- shared

/// In-sample one-step error samples of the three methods on one series,
/// everything on identical embedding rows.
struct MethodErrors {
    volterra: ErrorSample,
    gaussian: ErrorSample,
    ar: ErrorSample,
    volterra_lambda: f64,
    gaussian_lambda: f64,
    sigma: f64,
}

impl MethodErrors {
    fn rmse(&self) -> MethodRmse {
        MethodRmse {
            volterra: sample_rmse(&self.volterra),
            gaussian_ridge: sample_rmse(&self.gaussian),
            ar_ols: sample_rmse(&self.ar),
        }
    }
}

#[derive(Debug, Serialize)]
struct MethodRmse {
    volterra: f64,
    gaussian_ridge: f64,
    ar_ols: f64,
}

/// Root mean square of absolute errors, i.e. the ordinary RMSE.
fn sample_rmse(sample: &ErrorSample) -> f64 {
    let n = sample.len() as f64;
    (sample.values().iter().map(|v| v * v).sum::<f64>() / n).sqrt()
}

/// Picks lambda for one method by cross-validation with every other
/// hyperparameter pinned.
fn cv_lambda(
    series: &TimeSeries,
    config: &ModelConfig,
    family: KernelFamily,
    sigma: Option<f64>,
    options: FitOptions,
) -> CliResult<f64> {
    let grid = SearchGrid {
        lambdas: SearchGrid::default().lambdas,
        memories: vec![config.memory],
        orders: vec![config.order],
        sigmas: sigma.map(|s| vec![s]).unwrap_or_default(),
        folds: 5,
        train_fraction: 0.8,
    };
    Ok(cross_validate(series, &grid, family, options)?
        .selected
        .config
        .lambda)
}

fn sample_from_pairs(pairs: &[(f64, f64)], label: &str) -> CliResult<ErrorSample> {
    let actual: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let estimated: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    Ok(ErrorSample::from_predictions(
        &actual,
        &estimated,
        ErrorTransform::Absolute,
        label,
    )?)
}

/// Fits all three methods on `series`. With `select_lambda` the ridge
/// weights come from per-method cross-validation, otherwise from `config`.
fn method_errors(
    series: &TimeSeries,
    config: &ModelConfig,
    options: FitOptions,
    select_lambda: bool,
) -> CliResult<MethodErrors> {
    let trajectory = embed(series, config.memory)?;

    let volterra_lambda = if select_lambda {
        cv_lambda(series, config, KernelFamily::SumPolynomial, None, options)?
    } else {
        config.lambda
    };
    let spec = KernelSpec::sum_polynomial(config.order);
    let model = VolterraModel::fit_with_options(&trajectory, &spec, volterra_lambda, options)?;
    let volterra = sample_from_pairs(&one_step_errors(&model, series)?, "volterra")?;

    let sigma = median_heuristic_sigma(trajectory.inputs());
    let gaussian_lambda = if select_lambda {
        cv_lambda(series, config, KernelFamily::Gaussian, Some(sigma), options)?
    } else {
        config.lambda
    };
    let gaussian_spec = KernelSpec::gaussian(sigma)?;
    let gaussian_model =
        VolterraModel::fit_with_options(&trajectory, &gaussian_spec, gaussian_lambda, options)?;
    let gaussian = sample_from_pairs(&one_step_errors(&gaussian_model, series)?, "gaussian_ridge")?;

    let baseline = ArBaseline::fit(series, config.memory)?;
    let fitted = baseline.reconstruct(series)?;
    let ar = ErrorSample::from_predictions(
        trajectory.targets().as_slice().expect("contiguous targets"),
        fitted.as_slice().expect("contiguous fitted"),
        ErrorTransform::Absolute,
        "ar_ols",
    )?;

    Ok(MethodErrors {
        volterra,
        gaussian,
        ar,
        volterra_lambda,
        gaussian_lambda,
        sigma,
    })
}

#[derive(Debug, Serialize)]
struct KspaRow {
    comparison: String,
    result: KspaResult,
}

fn direction_name(direction: TestDirection) -> &'static str {
    match direction {
        TestDirection::TwoSided => "two_sided",
        TestDirection::OneSided => "one_sided",
    }
}

/// The four-way family: {two-sided, one-sided} x {each rival}, all carrying
/// the family-adjusted p-value.
fn four_tests(errors: &MethodErrors) -> CliResult<Vec<KspaRow>> {
    let mut out = Vec::new();
    for rival in [&errors.gaussian, &errors.ar] {
        let comparison = format!("volterra_vs_{}", rival.label());
        for result in [
            kspa_two_sided(&errors.volterra, rival)?,
            kspa_one_sided(&errors.volterra, rival)?,
        ] {
            out.push(KspaRow {
                comparison: comparison.clone(),
                result: result.with_adjustment(FAMILY_SIZE)?,
            });
        }
    }
    Ok(out)
}

fn kspa_csv_rows(csv: &mut Csv, label: &str, tests: &[KspaRow]) {
    for row in tests {
        csv.row(&[
            label.to_string(),
            row.comparison.clone(),
            direction_name(row.result.direction).to_string(),
            report::num(row.result.statistic),
            report::num(row.result.p_value),
            report::opt_num(row.result.adjusted_p),
        ]);
    }
}

fn strings(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

// ---------------------------------------------------------------- table 2

#[derive(Debug, Serialize)]
struct Table2Entry {
    process: String,
    observations: usize,
    rows: usize,
    volterra_lambda: f64,
    gaussian_lambda: f64,
    sigma: f64,
    rmse: MethodRmse,
    tests: Vec<KspaRow>,
}

#[derive(Debug, Serialize)]
struct Table2Report {
    schema_version: &'static str,
    target: &'static str,
    master_seed: u64,
    length: usize,
    memory: usize,
    order: usize,
    family_size: usize,
    entries: Vec<Table2Entry>,
}

fn table2(dir: &Path, seed: u64, length: usize) -> CliResult<Vec<String>> {
    let processes = standard_processes(seed, length);
    let mut entries = Vec::new();
    let mut csv = Csv::new(&[
        "process",
        "comparison",
        "direction",
        "statistic",
        "p_value",
        "adjusted_p",
    ]);
    for process in &processes {
        let series = generate(process)?;
        let errors = method_errors(&series, &SYNTH_CONFIG, FitOptions::default(), true)?;
        let tests = four_tests(&errors)?;
        let label = process.kind.to_string();
        kspa_csv_rows(&mut csv, &label, &tests);
        entries.push(Table2Entry {
            process: label,
            observations: series.len(),
            rows: errors.volterra.len(),
            volterra_lambda: errors.volterra_lambda,
            gaussian_lambda: errors.gaussian_lambda,
            sigma: errors.sigma,
            rmse: errors.rmse(),
            tests,
        });
    }
    let report_doc = Table2Report {
        schema_version: SCHEMA_VERSION,
        target: "table2",
        master_seed: seed,
        length,
        memory: SYNTH_CONFIG.memory,
        order: SYNTH_CONFIG.order,
        family_size: FAMILY_SIZE,
        entries,
    };
    report::write_json(dir, "table2.json", &report_doc)?;
    report::write_atomic(&dir.join("table2.csv"), &csv.finish())?;
    Ok(strings(&["table2.json", "table2.csv"]))
}

// ---------------------------------------------------------------- table 3

#[derive(Debug, Serialize)]
struct Table3Entry {
    series: String,
    observations: usize,
    rows: usize,
    sd: f64,
    sigma: f64,
    rmse: MethodRmse,
    tests: Vec<KspaRow>,
}

#[derive(Debug, Serialize)]
struct Table3Report {
    schema_version: &'static str,
    target: &'static str,
    memory: usize,
    order: usize,
    lambda: f64,
    prescale: bool,
    family_size: usize,
    entries: Vec<Table3Entry>,
}

fn real_series() -> CliResult<Vec<TimeSeries>> {
    Ok(vec![data::death_series()?, data::nile_series()?])
}

fn table3(dir: &Path) -> CliResult<Vec<String>> {
    let options = FitOptions { prescale: true };
    let mut entries = Vec::new();
    let mut rmse_csv = Csv::new(&[
        "series",
        "observations",
        "sd",
        "volterra",
        "gaussian_ridge",
        "ar_ols",
    ]);
    let mut kspa_csv = Csv::new(&[
        "series",
        "comparison",
        "direction",
        "statistic",
        "p_value",
        "adjusted_p",
    ]);
    for series in real_series()? {
        let name = series.label().unwrap_or("series").to_string();
        let errors = method_errors(&series, &REAL_CONFIG, options, false)?;
        let tests = four_tests(&errors)?;
        let rmse = errors.rmse();
        rmse_csv.row(&[
            name.clone(),
            series.len().to_string(),
            report::num(std_dev(series.values())),
            report::num(rmse.volterra),
            report::num(rmse.gaussian_ridge),
            report::num(rmse.ar_ols),
        ]);
        kspa_csv_rows(&mut kspa_csv, &name, &tests);
        entries.push(Table3Entry {
            series: name,
            observations: series.len(),
            rows: errors.volterra.len(),
            sd: std_dev(series.values()),
            sigma: errors.sigma,
            rmse,
            tests,
        });
    }
    let report_doc = Table3Report {
        schema_version: SCHEMA_VERSION,
        target: "table3",
        memory: REAL_CONFIG.memory,
        order: REAL_CONFIG.order,
        lambda: REAL_CONFIG.lambda,
        prescale: true,
        family_size: FAMILY_SIZE,
        entries,
    };
    report::write_json(dir, "table3.json", &report_doc)?;
    report::write_atomic(&dir.join("table3.csv"), &rmse_csv.finish())?;
    report::write_atomic(&dir.join("table3_kspa.csv"), &kspa_csv.finish())?;
    Ok(strings(&["table3.json", "table3.csv", "table3_kspa.csv"]))
}

// ---------------------------------------------------------------- figures

#[derive(Debug, Serialize)]
struct Figure1Report {
    schema_version: &'static str,
    target: &'static str,
    series: String,
    observations: usize,
    sweep: SigmaSweep,
}

fn figure1(dir: &Path) -> CliResult<Vec<String>> {
    let series = data::death_series()?;
    let sweep = report::sigma_sweep(&series, 5, 1e-6)?;

    let mut grid_csv = Csv::new(&["sigma", "cv_rmse"]);
    for (sigma, rmse) in sweep.grid.iter().zip(&sweep.cv_rmse) {
        grid_csv.row(&[report::num(*sigma), report::num(*rmse)]);
    }
    let curves = report::sigma_sweep_csv(&series, &sweep);

    let report_doc = Figure1Report {
        schema_version: SCHEMA_VERSION,
        target: "figure1",
        series: series.label().unwrap_or("series").to_string(),
        observations: series.len(),
        sweep,
    };
    report::write_json(dir, "figure1.json", &report_doc)?;
    report::write_atomic(&dir.join("figure1.csv"), &curves)?;
    report::write_atomic(&dir.join("figure1_cv.csv"), &grid_csv.finish())?;
    Ok(strings(&["figure1.json", "figure1.csv", "figure1_cv.csv"]))
}

#[derive(Debug, Serialize)]
struct ErrorFigureReport {
    schema_version: &'static str,
    target: String,
    series: String,
    observations: usize,
    rows: usize,
    memory: usize,
    order: usize,
    lambda: f64,
    sigma: f64,
    histograms: Vec<(String, Histogram)>,
}

fn error_figure(dir: &Path, target: &str, series: &TimeSeries) -> CliResult<Vec<String>> {
    let errors = method_errors(series, &REAL_CONFIG, FitOptions { prescale: true }, false)?;
    let samples = [&errors.volterra, &errors.gaussian];

    let mut histograms = Vec::new();
    let mut ecdfs = Vec::new();
    for sample in samples {
        histograms.push((sample.label().to_string(), report::histogram(sample.values())?));
        ecdfs.push((sample.label().to_string(), report::ecdf_points(sample.values())?));
    }

    let hist_name = format!("{target}_hist.csv");
    let ecdf_name = format!("{target}_ecdf.csv");
    report::write_atomic(&dir.join(&hist_name), &report::histogram_csv(&histograms))?;
    report::write_atomic(&dir.join(&ecdf_name), &report::ecdf_csv(&ecdfs))?;

    let report_doc = ErrorFigureReport {
        schema_version: SCHEMA_VERSION,
        target: target.to_string(),
        series: series.label().unwrap_or("series").to_string(),
        observations: series.len(),
        rows: errors.volterra.len(),
        memory: REAL_CONFIG.memory,
        order: REAL_CONFIG.order,
        lambda: REAL_CONFIG.lambda,
        sigma: errors.sigma,
        histograms,
    };
    let json_name = format!("{target}.json");
    report::write_json(dir, &json_name, &report_doc)?;
    Ok(vec![json_name, hist_name, ecdf_name])
}
