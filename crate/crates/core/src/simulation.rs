//! Seeded process generators, a least-squares AR baseline and the
//! Monte-Carlo comparison harness.

use ndarray::{Array1, Array2, ArrayView1};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, VolterraError};
use crate::kernels::{median_heuristic_sigma, KernelSpec};
use crate::metrics::{self, rmse};
use crate::selection::{cross_validate, KernelFamily, SearchGrid};
use crate::series::{embed, ModelConfig, TimeSeries};
use crate::solver::{linalg, FitOptions, VolterraModel};

/// Linear process families available to the generator. The moving-average
/// convention is `... + e_t + theta * e_{t-1}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProcessKind {
    /// `y_t = phi y_{t-1} + e_t`
    Ar1 { phi: f64 },
    /// `y_t = e_t + theta e_{t-1}`
    Ma1 { theta: f64 },
    /// `y_t = phi y_{t-1} + e_t + theta e_{t-1}`
    Arma11 { phi: f64, theta: f64 },
    /// `y_t = phi1 y_{t-1} + phi2 y_{t-2} + e_t + theta e_{t-1}`
    Arma21 { phi1: f64, phi2: f64, theta: f64 },
}

impl ProcessKind {
    fn validate(&self) -> Result<()> {
        let params: Vec<f64> = match self {
            ProcessKind::Ar1 { phi } => vec![*phi],
            ProcessKind::Ma1 { theta } => vec![*theta],
            ProcessKind::Arma11 { phi, theta } => vec![*phi, *theta],
            ProcessKind::Arma21 { phi1, phi2, theta } => vec![*phi1, *phi2, *theta],
        };
        if params.iter().any(|p| !p.is_finite()) {
            return Err(VolterraError::InvalidConfig {
                reason: format!("process parameters must be finite: {self}"),
            });
        }
        match self {
            ProcessKind::Ar1 { phi } | ProcessKind::Arma11 { phi, .. } if phi.abs() >= 1.0 => {
                Err(VolterraError::NonStationary {
                    reason: format!("|phi| = {} must be below 1", phi.abs()),
                })
            }
            ProcessKind::Arma21 { phi1, phi2, .. }
                if phi2.abs() >= 1.0 || phi1 + phi2 >= 1.0 || phi2 - phi1 >= 1.0 =>
            {
                Err(VolterraError::NonStationary {
                    reason: format!(
                        "AR(2) coefficients ({phi1}, {phi2}) outside the stationarity triangle"
                    ),
                })
            }
            _ => Ok(()),
        }
    }
}

impl std::fmt::Display for ProcessKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ProcessKind::Ar1 { phi } => write!(f, "ar1({phi})"),
            ProcessKind::Ma1 { theta } => write!(f, "ma1({theta})"),
            ProcessKind::Arma11 { phi, theta } => write!(f, "arma11({phi},{theta})"),
            ProcessKind::Arma21 { phi1, phi2, theta } => {
                write!(f, "arma21({phi1},{phi2},{theta})")
            }
        }
    }
}

/// Full recipe for one simulated series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProcessSpec {
    pub kind: ProcessKind,
    /// Standard deviation of the innovations; zero gives the deterministic
    /// skeleton of the recursion.
    pub noise_sd: f64,
    /// Number of observations kept after burn-in.
    pub length: usize,
    /// Warm-up steps discarded so the initial state washes out.
    pub burn_in: usize,
    /// Seed of the ChaCha8 generator; equal specs generate equal series.
    pub seed: u64,
    /// Value the recursion state starts from.
    pub initial: f64,
}

impl ProcessSpec {
    /// Spec with unit noise, burn-in of 100 and zero initial state.
    pub fn new(kind: ProcessKind, length: usize, seed: u64) -> Self {
        Self {
            kind,
            noise_sd: 1.0,
            length,
            burn_in: 100,
            seed,
            initial: 0.0,
        }
    }

    pub fn with_noise_sd(mut self, noise_sd: f64) -> Self {
        self.noise_sd = noise_sd;
        self
    }

    pub fn with_burn_in(mut self, burn_in: usize) -> Self {
        self.burn_in = burn_in;
        self
    }

    pub fn with_initial(mut self, initial: f64) -> Self {
        self.initial = initial;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// Simulates the process deterministically from its seed. Exactly one
/// innovation is drawn per step, so equal specs give byte-identical output.
pub fn generate(spec: &ProcessSpec) -> Result<TimeSeries> {
    spec.kind.validate()?;
    if spec.length == 0 {
        return Err(VolterraError::InvalidConfig {
            reason: "length must be at least 1".into(),
        });
    }
    if !spec.noise_sd.is_finite() || spec.noise_sd < 0.0 {
        return Err(VolterraError::InvalidConfig {
            reason: format!("noise sd must be finite and non-negative, got {}", spec.noise_sd),
        });
    }
    if !spec.initial.is_finite() {
        return Err(VolterraError::InvalidConfig {
            reason: "initial state must be finite".into(),
        });
    }
    let total = spec.burn_in + spec.length;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let normal = if spec.noise_sd > 0.0 {
        Some(Normal::new(0.0, spec.noise_sd).expect("validated noise sd"))
    } else {
        None
    };
    let mut y1 = spec.initial;
    let mut y2 = spec.initial;
    let mut e1 = 0.0;
    let mut values = Vec::with_capacity(total);
    for _ in 0..total {
        let e = normal.as_ref().map_or(0.0, |n| n.sample(&mut rng));
        let y = match spec.kind {
            ProcessKind::Ar1 { phi } => phi * y1 + e,
            ProcessKind::Ma1 { theta } => e + theta * e1,
            ProcessKind::Arma11 { phi, theta } => phi * y1 + e + theta * e1,
            ProcessKind::Arma21 { phi1, phi2, theta } => phi1 * y1 + phi2 * y2 + e + theta * e1,
        };
        values.push(y);
        y2 = y1;
        y1 = y;
        e1 = e;
    }
    TimeSeries::with_label(values.split_off(spec.burn_in), spec.kind.to_string())
}

/// Autoregressive baseline fitted by ordinary least squares with an
/// intercept.
#[derive(Debug, Clone, PartialEq)]
pub struct ArBaseline {
    intercept: f64,
    coefficients: Array1<f64>,
}

impl ArBaseline {
    /// Fits an AR(`order`) model on the delay-embedded rows. The design
    /// matrix must have full rank; a constant series, for example, is
    /// rejected as singular rather than silently fitted.
    pub fn fit(series: &TimeSeries, order: usize) -> Result<Self> {
        if order == 0 {
            return Err(VolterraError::InvalidMemory);
        }
        if series.len() < order + 2 {
            return Err(VolterraError::InsufficientData {
                reason: format!(
                    "need more than {} observations for an AR({order}) fit, got {}",
                    order + 1,
                    series.len()
                ),
            });
        }
        let trajectory = embed(series, order)?;
        let n = trajectory.len();
        let cols = order + 1;
        let mut x = Array2::zeros((n, cols));
        for i in 0..n {
            x[[i, 0]] = 1.0;
            for j in 0..order {
                x[[i, j + 1]] = trajectory.inputs()[[i, j]];
            }
        }
        let a = x.t().dot(&x);
        let b = x.t().dot(trajectory.targets());
        let factor = linalg::Cholesky::decompose(&a).ok_or(VolterraError::SingularSystem)?;
        // A rank-deficient design sneaks through with a microscopic pivot;
        // compare the smallest against the diagonal scale to catch it.
        let max_diag = a.diag().iter().cloned().fold(0.0f64, f64::max);
        if factor.min_pivot().powi(2) <= 1e-12 * max_diag {
            return Err(VolterraError::SingularSystem);
        }
        let beta = factor.solve(&b);
        Ok(Self {
            intercept: beta[0],
            coefficients: beta.slice(ndarray::s![1..]).to_owned(),
        })
    }

    /// One-step prediction from a window in ascending time order;
    /// `coefficients()[j]` multiplies the j-th oldest value in the window.
    pub fn predict(&self, window: ArrayView1<'_, f64>) -> Result<f64> {
        if window.len() != self.order() {
            return Err(VolterraError::DimensionMismatch {
                expected: self.order(),
                actual: window.len(),
            });
        }
        Ok(self.intercept + self.coefficients.dot(&window))
    }

    /// Fitted one-step values over the embedded rows of `series`.
    pub fn reconstruct(&self, series: &TimeSeries) -> Result<Array1<f64>> {
        let trajectory = embed(series, self.order())?;
        let mut out = Array1::zeros(trajectory.len());
        for i in 0..trajectory.len() {
            out[i] = self.predict(trajectory.row(i))?;
        }
        Ok(out)
    }

    /// RMSE of the one-step fit on `series`.
    pub fn residual_rmse(&self, series: &TimeSeries) -> Result<f64> {
        let trajectory = embed(series, self.order())?;
        let fitted = self.reconstruct(series)?;
        rmse(
            trajectory.targets().as_slice().expect("contiguous targets"),
            fitted.as_slice().expect("contiguous fitted"),
        )
    }

    pub fn order(&self) -> usize {
        self.coefficients.len()
    }

    pub fn intercept(&self) -> f64 {
        self.intercept
    }

    pub fn coefficients(&self) -> &Array1<f64> {
        &self.coefficients
    }
}

/// Fits the least-squares AR baseline; see [`ArBaseline::fit`].
pub fn fit_ar_baseline(series: &TimeSeries, order: usize) -> Result<ArBaseline> {
    ArBaseline::fit(series, order)
}

/// Competing estimators in the Monte-Carlo harness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Sum-polynomial kernel ridge (the Volterra model).
    Volterra,
    /// Gaussian kernel ridge with the median-heuristic width.
    GaussianRidge,
    /// Ordinary least squares AR of the same memory.
    ArOls,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            Method::Volterra => "volterra",
            Method::GaussianRidge => "gaussian_ridge",
            Method::ArOls => "ar_ols",
        };
        f.write_str(name)
    }
}

/// How the regularisation weight is chosen inside each Monte-Carlo run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum LambdaPolicy {
    /// Use the weight from the model configuration as-is.
    Fixed,
    /// Pick the weight per run by k-fold cross-validation over a list.
    CrossValidated { lambdas: Vec<f64>, folds: usize },
}

/// Scores of one (process, configuration, method) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McCell {
    /// Label of the generating process.
    pub process: String,
    pub config: ModelConfig,
    pub method: Method,
    /// In-sample one-step RMSE per run; `None` where the fit failed.
    pub per_run: Vec<Option<f64>>,
    /// Mean over the successful runs; `None` if every run failed.
    pub mean_rmse: Option<f64>,
    /// Number of failed runs.
    pub failures: usize,
}

/// Results of a full Monte-Carlo study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McSummary {
    pub runs: usize,
    pub lambda_policy: LambdaPolicy,
    pub cells: Vec<McCell>,
}

impl McSummary {
    /// The cell for one (process label, config, method) combination.
    pub fn cell(&self, process: &str, config: &ModelConfig, method: Method) -> Option<&McCell> {
        self.cells
            .iter()
            .find(|c| c.process == process && c.config == *config && c.method == method)
    }
}

fn resolve_lambda(
    series: &TimeSeries,
    config: &ModelConfig,
    family: KernelFamily,
    sigma: Option<f64>,
    policy: &LambdaPolicy,
) -> Result<f64> {
    match policy {
        LambdaPolicy::Fixed => Ok(config.lambda),
        LambdaPolicy::CrossValidated { lambdas, folds } => {
            let grid = SearchGrid {
                lambdas: lambdas.clone(),
                memories: vec![config.memory],
                orders: vec![config.order],
                sigmas: sigma.map(|s| vec![s]).unwrap_or_default(),
                folds: *folds,
                train_fraction: 0.8,
            };
            let report = cross_validate(series, &grid, family, FitOptions::default())?;
            Ok(report.selected.config.lambda)
        }
    }
}

fn volterra_run_rmse(
    series: &TimeSeries,
    config: &ModelConfig,
    policy: &LambdaPolicy,
) -> Result<f64> {
    let lambda = resolve_lambda(series, config, KernelFamily::SumPolynomial, None, policy)?;
    let trajectory = embed(series, config.memory)?;
    let spec = KernelSpec::sum_polynomial(config.order);
    let model = VolterraModel::fit(&trajectory, &spec, lambda)?;
    model.training_rmse()
}

fn gaussian_run_rmse(
    series: &TimeSeries,
    config: &ModelConfig,
    policy: &LambdaPolicy,
) -> Result<f64> {
    let trajectory = embed(series, config.memory)?;
    let sigma = median_heuristic_sigma(trajectory.inputs());
    let lambda = resolve_lambda(series, config, KernelFamily::Gaussian, Some(sigma), policy)?;
    let spec = KernelSpec::gaussian(sigma)?;
    let model = VolterraModel::fit(&trajectory, &spec, lambda)?;
    model.training_rmse()
}

fn ar_run_rmse(series: &TimeSeries, config: &ModelConfig) -> Result<f64> {
    let baseline = ArBaseline::fit(series, config.memory)?;
    baseline.residual_rmse(series)
}

/// Runs the three-way method comparison over every process and
/// configuration.
///
/// Run `i` of a process re-seeds the generator with `seed + i`, so the whole
/// study is a pure function of its arguments; repeated calls return
/// identical summaries. Runs execute in parallel, which does not affect the
/// result.
pub fn run_monte_carlo(
    processes: &[ProcessSpec],
    configs: &[ModelConfig],
    runs: usize,
    policy: &LambdaPolicy,
) -> Result<McSummary> {
    if runs == 0 {
        return Err(VolterraError::InvalidConfig {
            reason: "at least one run is required".into(),
        });
    }
    if processes.is_empty() || configs.is_empty() {
        return Err(VolterraError::InvalidConfig {
            reason: "processes and configurations must be non-empty".into(),
        });
    }
    if let LambdaPolicy::CrossValidated { lambdas, folds } = policy {
        if lambdas.is_empty() || *folds < 2 {
            return Err(VolterraError::InvalidConfig {
                reason: "cross-validated policy needs lambdas and at least 2 folds".into(),
            });
        }
    }
    let mut cells = Vec::new();
    for process in processes {
        process.kind.validate()?;
        for config in configs {
            let triples: Vec<(Option<f64>, Option<f64>, Option<f64>)> = (0..runs)
                .into_par_iter()
                .map(|run| {
                    let spec = process.with_seed(process.seed.wrapping_add(run as u64));
                    let series = match generate(&spec) {
                        Ok(s) => s,
                        Err(_) => return (None, None, None),
                    };
                    (
                        volterra_run_rmse(&series, config, policy).ok(),
                        gaussian_run_rmse(&series, config, policy).ok(),
                        ar_run_rmse(&series, config).ok(),
                    )
                })
                .collect();
            let label = process.kind.to_string();
            for (method, pick) in [
                (Method::Volterra, 0usize),
                (Method::GaussianRidge, 1),
                (Method::ArOls, 2),
            ] {
                let per_run: Vec<Option<f64>> = triples
                    .iter()
                    .map(|t| match pick {
                        0 => t.0,
                        1 => t.1,
                        _ => t.2,
                    })
                    .collect();
                let ok: Vec<f64> = per_run.iter().flatten().copied().collect();
                let failures = runs - ok.len();
                let mean_rmse = if ok.is_empty() {
                    None
                } else {
                    Some(metrics::mean(&ok))
                };
                cells.push(McCell {
                    process: label.clone(),
                    config: *config,
                    method,
                    per_run,
                    mean_rmse,
                    failures,
                });
            }
        }
    }
    Ok(McSummary {
        runs,
        lambda_policy: policy.clone(),
        cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noise_free_ar1_is_the_deterministic_skeleton() {
        let spec = ProcessSpec::new(ProcessKind::Ar1 { phi: 0.5 }, 3, 9)
            .with_noise_sd(0.0)
            .with_burn_in(0)
            .with_initial(1.0);
        let series = generate(&spec).unwrap();
        assert_eq!(series.values(), &[0.5, 0.25, 0.125]);
        assert_eq!(series.label(), Some("ar1(0.5)"));
    }

    #[test]
    fn generation_is_seed_deterministic() {
        let spec = ProcessSpec::new(ProcessKind::Arma11 { phi: 0.1, theta: -0.8 }, 200, 42);
        let a = generate(&spec).unwrap();
        let b = generate(&spec).unwrap();
        assert_eq!(a, b);
        let c = generate(&spec.with_seed(43)).unwrap();
        assert_ne!(a.values(), c.values());
    }

    #[test]
    fn ma1_sample_variance_matches_theory() {
        // Var(e_t - 0.9 e_{t-1}) = 1 + 0.81 = 1.81 at unit noise.
        let spec = ProcessSpec::new(ProcessKind::Ma1 { theta: -0.9 }, 20_000, 7);
        let series = generate(&spec).unwrap();
        let sd = series.std_dev();
        let var = sd * sd;
        assert!((var - 1.81).abs() < 0.08, "sample variance {var}");
    }

    #[test]
    fn ar1_lag_one_autocorrelation_matches_theory() {
        let spec = ProcessSpec::new(ProcessKind::Ar1 { phi: 0.5 }, 20_000, 11);
        let series = generate(&spec).unwrap();
        let v = series.values();
        let m = series.mean();
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..v.len() {
            den += (v[i] - m) * (v[i] - m);
            if i > 0 {
                num += (v[i] - m) * (v[i - 1] - m);
            }
        }
        let rho = num / den;
        assert!((rho - 0.5).abs() < 0.03, "lag-1 autocorrelation {rho}");
    }

    #[test]
    fn non_stationary_specs_are_rejected() {
        let unit_root = ProcessSpec::new(ProcessKind::Ar1 { phi: 1.0 }, 10, 0);
        assert!(matches!(
            generate(&unit_root),
            Err(VolterraError::NonStationary { .. })
        ));
        let explosive = ProcessSpec::new(
            ProcessKind::Arma21 {
                phi1: 1.5,
                phi2: 0.0,
                theta: 0.0,
            },
            10,
            0,
        );
        assert!(matches!(
            generate(&explosive),
            Err(VolterraError::NonStationary { .. })
        ));
        // The second-order pair (1.0, -0.9) sits inside the triangle.
        let fine = ProcessSpec::new(
            ProcessKind::Arma21 {
                phi1: 1.0,
                phi2: -0.9,
                theta: -0.8,
            },
            50,
            0,
        );
        assert!(generate(&fine).is_ok());
    }

    #[test]
    fn ar_baseline_recovers_the_generating_coefficient() {
        let spec = ProcessSpec::new(ProcessKind::Ar1 { phi: 0.5 }, 10_000, 17);
        let series = generate(&spec).unwrap();
        let baseline = ArBaseline::fit(&series, 1).unwrap();
        assert!((baseline.coefficients()[0] - 0.5).abs() < 0.04);
        assert!(baseline.intercept().abs() < 0.05);
        // In-sample RMSE approaches the innovation scale.
        let r = baseline.residual_rmse(&series).unwrap();
        assert!((r - 1.0).abs() < 0.05, "residual rmse {r}");
    }

    #[test]
    fn ar_baseline_rejects_constant_and_short_series() {
        let constant = TimeSeries::new(vec![2.0; 30]).unwrap();
        assert_eq!(
            ArBaseline::fit(&constant, 2),
            Err(VolterraError::SingularSystem)
        );
        let short = TimeSeries::new(vec![1.0, 2.0, 3.0]).unwrap();
        assert!(matches!(
            ArBaseline::fit(&short, 2),
            Err(VolterraError::InsufficientData { .. })
        ));
    }

    #[test]
    fn ar_baseline_coefficients_align_with_ascending_windows() {
        // y_t = 0.25 y_{t-2} + 0.5 y_{t-1} + intercept-free recursion,
        // learned exactly from its own noise-free orbit.
        let mut values = vec![1.0, 1.0];
        for _ in 0..40 {
            let n = values.len();
            values.push(0.25 * values[n - 2] + 0.5 * values[n - 1] + 0.1);
        }
        let series = TimeSeries::new(values).unwrap();
        let baseline = ArBaseline::fit(&series, 2).unwrap();
        assert!((baseline.coefficients()[0] - 0.25).abs() < 1e-6);
        assert!((baseline.coefficients()[1] - 0.5).abs() < 1e-6);
        assert!((baseline.intercept() - 0.1).abs() < 1e-6);
    }

    #[test]
    fn monte_carlo_is_reproducible() {
        let processes = [ProcessSpec::new(ProcessKind::Ar1 { phi: 0.5 }, 60, 3)];
        let configs = [ModelConfig::new(2, 2, 1e-2).unwrap()];
        let a = run_monte_carlo(&processes, &configs, 5, &LambdaPolicy::Fixed).unwrap();
        let b = run_monte_carlo(&processes, &configs, 5, &LambdaPolicy::Fixed).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.cells.len(), 3);
        let cell = a
            .cell("ar1(0.5)", &configs[0], Method::Volterra)
            .expect("cell present");
        assert_eq!(cell.per_run.len(), 5);
        assert_eq!(cell.failures, 0);
    }

    #[test]
    fn cross_validated_policy_picks_a_grid_lambda() {
        let processes = [ProcessSpec::new(ProcessKind::Ma1 { theta: -0.9 }, 80, 21)];
        let configs = [ModelConfig::new(3, 2, 0.0).unwrap()];
        let policy = LambdaPolicy::CrossValidated {
            lambdas: vec![1e-4, 1e-2, 1.0],
            folds: 5,
        };
        let summary = run_monte_carlo(&processes, &configs, 3, &policy).unwrap();
        for cell in &summary.cells {
            if cell.method != Method::ArOls {
                assert_eq!(cell.failures, 0, "{}", cell.method);
            }
        }
    }

    #[test]
    fn volterra_beats_linear_baseline_on_quadratic_data() {
        // A noisy quadratic recursion is linear-unfriendly by construction.
        let mut rng_spec = ProcessSpec::new(ProcessKind::Ar1 { phi: 0.3 }, 120, 5);
        rng_spec.noise_sd = 0.05;
        let driver = generate(&rng_spec).unwrap();
        let mut values = vec![0.1, 0.1];
        for i in 0..118 {
            let n = values.len();
            let next =
                1.0 - 1.4 * values[n - 1] * values[n - 1] + 0.3 * values[n - 2] + 0.02 * driver.values()[i];
            values.push(next);
        }
        let series = TimeSeries::new(values).unwrap();
        let trajectory = embed(&series, 2).unwrap();
        let model =
            VolterraModel::fit(&trajectory, &KernelSpec::sum_polynomial(2), 1e-8).unwrap();
        let volterra_rmse = model.training_rmse().unwrap();
        let ar = ArBaseline::fit(&series, 2).unwrap();
        let ar_rmse = ar.residual_rmse(&series).unwrap();
        assert!(
            volterra_rmse < 0.2 * ar_rmse,
            "volterra {volterra_rmse} vs ar {ar_rmse}"
        );
    }
}
