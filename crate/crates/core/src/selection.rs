//! Hyperparameter selection by k-fold cross-validation on trajectory rows.
//!
//! Folds are contiguous blocks of embedded rows, the final train/test split
//! is chronological, and every candidate is scored by its mean held-out
//! RMSE. Ties are broken toward the most parsimonious model: smallest basis
//! dimension, then smallest regularisation, then smallest memory.

use ndarray::ArrayView1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, VolterraError};
use crate::kernels::KernelSpec;
use crate::metrics::{self, rmse};
use crate::series::{embed, ModelConfig, TimeSeries};
use crate::solver::{FitOptions, VolterraModel};

/// Kernel family searched by cross-validation. Polynomial families sweep the
/// order axis of the grid, the Gaussian family sweeps the width axis, the
/// exponential kernel has no shape parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelFamily {
    SumPolynomial,
    InhomogeneousPolynomial,
    Exponential,
    Gaussian,
}

impl KernelFamily {
    /// Whether the family has a polynomial order axis.
    pub fn has_order(&self) -> bool {
        matches!(
            self,
            KernelFamily::SumPolynomial | KernelFamily::InhomogeneousPolynomial
        )
    }

    /// Whether the family has a width axis.
    pub fn has_sigma(&self) -> bool {
        matches!(self, KernelFamily::Gaussian)
    }

    fn build_spec(&self, order: usize, sigma: Option<f64>) -> Result<KernelSpec> {
        match self {
            KernelFamily::SumPolynomial => Ok(KernelSpec::sum_polynomial(order)),
            KernelFamily::InhomogeneousPolynomial => {
                Ok(KernelSpec::inhomogeneous_polynomial(order))
            }
            KernelFamily::Exponential => Ok(KernelSpec::exponential()),
            KernelFamily::Gaussian => {
                let sigma = sigma.ok_or_else(|| VolterraError::InvalidConfig {
                    reason: "gaussian family requires a width".into(),
                })?;
                KernelSpec::gaussian(sigma)
            }
        }
    }
}

impl std::fmt::Display for KernelFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            KernelFamily::SumPolynomial => "sum_polynomial",
            KernelFamily::InhomogeneousPolynomial => "inhomogeneous_polynomial",
            KernelFamily::Exponential => "exponential",
            KernelFamily::Gaussian => "gaussian",
        };
        f.write_str(name)
    }
}

/// The hyperparameter grid and cross-validation settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchGrid {
    /// Regularisation weights to try.
    pub lambdas: Vec<f64>,
    /// Window lengths to try.
    pub memories: Vec<usize>,
    /// Polynomial orders to try (ignored by orderless families).
    pub orders: Vec<usize>,
    /// Gaussian widths to try (ignored by other families).
    pub sigmas: Vec<f64>,
    /// Number of folds.
    pub folds: usize,
    /// Fraction of the series given to training in [`split`].
    pub train_fraction: f64,
}

impl Default for SearchGrid {
    fn default() -> Self {
        Self {
            lambdas: vec![0.0, 1e-8, 1e-6, 1e-4, 1e-2, 1.0],
            memories: (1..=10).collect(),
            orders: (1..=5).collect(),
            sigmas: vec![0.01, 0.1, 1.0, 10.0, 100.0, 1000.0],
            folds: 5,
            train_fraction: 0.8,
        }
    }
}

impl SearchGrid {
    /// Checks ranges and non-emptiness of the family-independent axes.
    pub fn validate(&self) -> Result<()> {
        if self.folds < 2 {
            return Err(VolterraError::InvalidConfig {
                reason: format!("at least 2 folds required, got {}", self.folds),
            });
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(VolterraError::InvalidConfig {
                reason: format!(
                    "train fraction must lie strictly between 0 and 1, got {}",
                    self.train_fraction
                ),
            });
        }
        if self.lambdas.is_empty() {
            return Err(VolterraError::InvalidConfig {
                reason: "lambda grid must be non-empty".into(),
            });
        }
        if let Some(bad) = self.lambdas.iter().find(|l| !(l.is_finite() && **l >= 0.0)) {
            return Err(VolterraError::InvalidConfig {
                reason: format!("lambda grid contains invalid value {bad}"),
            });
        }
        if self.memories.is_empty() {
            return Err(VolterraError::InvalidConfig {
                reason: "memory grid must be non-empty".into(),
            });
        }
        if self.memories.contains(&0) {
            return Err(VolterraError::InvalidMemory);
        }
        if let Some(bad) = self.sigmas.iter().find(|s| !(s.is_finite() && **s > 0.0)) {
            return Err(VolterraError::InvalidKernel {
                reason: format!("width grid contains invalid value {bad}"),
            });
        }
        Ok(())
    }

    fn max_memory(&self) -> usize {
        self.memories.iter().copied().max().unwrap_or(0)
    }
}

/// Score of one grid candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    /// Memory, order and lambda of the candidate (order 0 for orderless
    /// families).
    pub config: ModelConfig,
    /// Gaussian width, present only for the Gaussian family.
    pub sigma: Option<f64>,
    /// Held-out RMSE per fold; infinite where the fit or prediction failed.
    pub fold_rmses: Vec<f64>,
    /// Mean of the fold RMSEs; infinite if any fold failed.
    pub mean_rmse: f64,
}

/// Full record of a cross-validation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    /// Kernel family that was searched.
    pub family: KernelFamily,
    /// Every candidate with its per-fold scores, in grid order.
    pub candidates: Vec<CandidateScore>,
    /// The winning candidate.
    pub selected: CandidateScore,
    /// RMSE on the held-out chronological test split, filled in by
    /// [`select_and_refit`].
    pub test_rmse: Option<f64>,
}

/// Chronological split: the first `ceil(len * train_fraction)` observations
/// become the training series, the rest the test series.
pub fn split(series: &TimeSeries, train_fraction: f64) -> Result<(TimeSeries, TimeSeries)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(VolterraError::InvalidConfig {
            reason: format!(
                "train fraction must lie strictly between 0 and 1, got {train_fraction}"
            ),
        });
    }
    let n = series.len();
    let n_train = ((n as f64) * train_fraction).ceil() as usize;
    if n_train == 0 || n_train >= n {
        return Err(VolterraError::InsufficientData {
            reason: format!("fraction {train_fraction} leaves no test data in {n} observations"),
        });
    }
    Ok((series.head(n_train)?, series.tail_from(n_train)?))
}

/// Contiguous fold boundaries over `n` rows: the first `k - 1` folds hold
/// `n / k` rows each and the last fold absorbs the remainder.
pub(crate) fn fold_ranges(n: usize, k: usize) -> Vec<(usize, usize)> {
    let base = n / k;
    let mut out = Vec::with_capacity(k);
    for f in 0..k {
        let start = f * base;
        let end = if f == k - 1 { n } else { start + base };
        out.push((start, end));
    }
    out
}

/// Scores every candidate of `grid` on `train` by k-fold cross-validation.
///
/// A candidate that fails on any fold (embedding too long, singular system,
/// numerical overflow) scores infinity. If every candidate is infinite the
/// call fails with [`VolterraError::NoViableCandidate`].
pub fn cross_validate(
    train: &TimeSeries,
    grid: &SearchGrid,
    family: KernelFamily,
    options: FitOptions,
) -> Result<CvReport> {
    grid.validate()?;
    if family.has_order() && grid.orders.is_empty() {
        return Err(VolterraError::InvalidConfig {
            reason: "order grid must be non-empty for polynomial families".into(),
        });
    }
    if family.has_sigma() && grid.sigmas.is_empty() {
        return Err(VolterraError::InvalidConfig {
            reason: "width grid must be non-empty for the gaussian family".into(),
        });
    }
    let min_rows = train.len().saturating_sub(grid.max_memory());
    if min_rows < 2 * grid.folds {
        return Err(VolterraError::InsufficientData {
            reason: format!(
                "largest memory {} leaves {} rows for {} folds; need at least {}",
                grid.max_memory(),
                min_rows,
                grid.folds,
                2 * grid.folds
            ),
        });
    }
    let combos = enumerate_candidates(grid, family);
    let candidates: Vec<CandidateScore> = combos
        .par_iter()
        .map(|(config, sigma)| score_candidate(train, grid.folds, family, *config, *sigma, options))
        .collect();
    let selected = pick_best(family, &candidates)?;
    Ok(CvReport {
        family,
        candidates,
        selected,
        test_rmse: None,
    })
}

/// Runs the full pipeline: chronological split, cross-validation on the
/// training part, refit of the winner on the whole training part, and a
/// one-step RMSE on the test part using true past values as inputs.
pub fn select_and_refit(
    series: &TimeSeries,
    grid: &SearchGrid,
    family: KernelFamily,
    options: FitOptions,
) -> Result<(VolterraModel, CvReport)> {
    let (train, _test) = split(series, grid.train_fraction)?;
    let mut report = cross_validate(&train, grid, family, options)?;
    let config = report.selected.config;
    let spec = family.build_spec(config.order, report.selected.sigma)?;
    let trajectory = embed(&train, config.memory)?;
    let model = VolterraModel::fit_with_options(&trajectory, &spec, config.lambda, options)?;

    // Test rows come from embedding the full series: windows may straddle
    // the split boundary but every target lies in the test part.
    let full = embed(series, config.memory)?;
    let first_test_row = train.len() - config.memory;
    let mut actual = Vec::new();
    let mut predicted = Vec::new();
    for r in first_test_row..full.len() {
        actual.push(full.targets()[r]);
        predicted.push(model.predict(full.row(r))?);
    }
    report.test_rmse = Some(rmse(&actual, &predicted)?);
    Ok((model, report))
}

fn enumerate_candidates(
    grid: &SearchGrid,
    family: KernelFamily,
) -> Vec<(ModelConfig, Option<f64>)> {
    let mut out = Vec::new();
    for &lambda in &grid.lambdas {
        for &memory in &grid.memories {
            match family {
                KernelFamily::SumPolynomial | KernelFamily::InhomogeneousPolynomial => {
                    for &order in &grid.orders {
                        out.push((
                            ModelConfig {
                                memory,
                                order,
                                lambda,
                            },
                            None,
                        ));
                    }
                }
                KernelFamily::Exponential => out.push((
                    ModelConfig {
                        memory,
                        order: 0,
                        lambda,
                    },
                    None,
                )),
                KernelFamily::Gaussian => {
                    for &sigma in &grid.sigmas {
                        out.push((
                            ModelConfig {
                                memory,
                                order: 0,
                                lambda,
                            },
                            Some(sigma),
                        ));
                    }
                }
            }
        }
    }
    out
}

fn score_candidate(
    train: &TimeSeries,
    folds: usize,
    family: KernelFamily,
    config: ModelConfig,
    sigma: Option<f64>,
    options: FitOptions,
) -> CandidateScore {
    let fold_rmses = match candidate_fold_rmses(train, folds, family, config, sigma, options) {
        Ok(v) => v,
        Err(_) => vec![f64::INFINITY; folds],
    };
    let mean_rmse = if fold_rmses.iter().all(|v| v.is_finite()) {
        metrics::mean(&fold_rmses)
    } else {
        f64::INFINITY
    };
    CandidateScore {
        config,
        sigma,
        fold_rmses,
        mean_rmse,
    }
}

fn candidate_fold_rmses(
    train: &TimeSeries,
    folds: usize,
    family: KernelFamily,
    config: ModelConfig,
    sigma: Option<f64>,
    options: FitOptions,
) -> Result<Vec<f64>> {
    let spec = family.build_spec(config.order, sigma)?;
    let trajectory = embed(train, config.memory)?;
    let n = trajectory.len();
    let mut fold_rmses = Vec::with_capacity(folds);
    for (start, end) in fold_ranges(n, folds) {
        let train_rows: Vec<usize> = (0..start).chain(end..n).collect();
        let val_rows: Vec<usize> = (start..end).collect();
        if train_rows.is_empty() || val_rows.is_empty() {
            fold_rmses.push(f64::INFINITY);
            continue;
        }
        let score = (|| -> Result<f64> {
            let sub = trajectory.select_rows(&train_rows)?;
            let model = VolterraModel::fit_with_options(&sub, &spec, config.lambda, options)?;
            let mut actual = Vec::with_capacity(val_rows.len());
            let mut predicted = Vec::with_capacity(val_rows.len());
            for &r in &val_rows {
                actual.push(trajectory.targets()[r]);
                predicted.push(model.predict(trajectory.row(r))?);
            }
            rmse(&actual, &predicted)
        })();
        fold_rmses.push(score.unwrap_or(f64::INFINITY));
    }
    Ok(fold_rmses)
}

/// Basis dimension used for the parsimony tie-break; orderless and
/// non-polynomial families count as unbounded.
fn candidate_dimension(family: KernelFamily, config: &ModelConfig) -> u64 {
    if family.has_order() {
        metrics::volterra_dimension(config.memory, config.order).unwrap_or(u64::MAX)
    } else {
        u64::MAX
    }
}

fn pick_best(family: KernelFamily, candidates: &[CandidateScore]) -> Result<CandidateScore> {
    let min_mean = candidates
        .iter()
        .map(|c| c.mean_rmse)
        .filter(|m| m.is_finite())
        .fold(f64::INFINITY, f64::min);
    if !min_mean.is_finite() {
        return Err(VolterraError::NoViableCandidate);
    }
    // Scores within rounding noise of the minimum count as ties and are
    // resolved by parsimony; the absolute floor keeps machine-zero scores
    // from being ranked on noise.
    let tolerance = (1e-12 * min_mean).max(1e-10);
    let best = candidates
        .iter()
        .filter(|c| c.mean_rmse <= min_mean + tolerance)
        .min_by(|a, b| {
            candidate_dimension(family, &a.config)
                .cmp(&candidate_dimension(family, &b.config))
                .then(a.config.lambda.total_cmp(&b.config.lambda))
                .then(a.config.memory.cmp(&b.config.memory))
                .then(
                    a.sigma
                        .unwrap_or(0.0)
                        .total_cmp(&b.sigma.unwrap_or(0.0)),
                )
        })
        .expect("at least one finite candidate");
    Ok(best.clone())
}

/// Convenience wrapper: predictions of `model` on every row of the
/// trajectory of `series`, paired with the true targets.
pub fn one_step_errors(model: &VolterraModel, series: &TimeSeries) -> Result<Vec<(f64, f64)>> {
    let trajectory = embed(series, model.memory())?;
    let mut out = Vec::with_capacity(trajectory.len());
    for i in 0..trajectory.len() {
        out.push((trajectory.targets()[i], model.predict(trajectory.row(i))?));
    }
    Ok(out)
}

/// One-step prediction of a fitted model at the most recent window of a
/// series, the value a forecaster would emit next.
pub fn next_value(model: &VolterraModel, series: &TimeSeries) -> Result<f64> {
    let m = model.memory();
    if series.len() < m {
        return Err(VolterraError::InsufficientData {
            reason: format!("series of {} values is shorter than memory {m}", series.len()),
        });
    }
    let window = &series.values()[series.len() - m..];
    model.predict(ArrayView1::from(window))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn henon(n: usize) -> TimeSeries {
        let mut values = vec![0.1, 0.1];
        while values.len() < n + 50 {
            let len = values.len();
            let next = 1.0 - 1.4 * values[len - 1] * values[len - 1] + 0.3 * values[len - 2];
            values.push(next);
        }
        TimeSeries::new(values[values.len() - n..].to_vec()).unwrap()
    }

    #[test]
    fn split_is_chronological_with_ceiling() {
        let series = TimeSeries::new((0..72).map(f64::from).collect()).unwrap();
        let (train, test) = split(&series, 0.8).unwrap();
        assert_eq!(train.len(), 58);
        assert_eq!(test.len(), 14);
        assert_eq!(train.values()[57], 57.0);
        assert_eq!(test.values()[0], 58.0);
    }

    #[test]
    fn split_rejects_degenerate_fractions() {
        let series = TimeSeries::new((0..10).map(f64::from).collect()).unwrap();
        assert!(matches!(
            split(&series, 0.99),
            Err(VolterraError::InsufficientData { .. })
        ));
        assert!(matches!(
            split(&series, 0.0),
            Err(VolterraError::InvalidConfig { .. })
        ));
        assert!(matches!(
            split(&series, 1.0),
            Err(VolterraError::InvalidConfig { .. })
        ));
    }

    #[test]
    fn fold_ranges_put_remainder_in_last_fold() {
        assert_eq!(
            fold_ranges(11, 5),
            vec![(0, 2), (2, 4), (4, 6), (6, 8), (8, 11)]
        );
        assert_eq!(fold_ranges(10, 5).iter().map(|(a, b)| b - a).sum::<usize>(), 10);
    }

    #[test]
    fn candidate_count_is_product_of_axes() {
        let grid = SearchGrid {
            lambdas: vec![0.0, 0.1],
            memories: vec![1, 2, 3],
            orders: vec![1, 2],
            sigmas: vec![1.0],
            folds: 2,
            train_fraction: 0.8,
        };
        assert_eq!(
            enumerate_candidates(&grid, KernelFamily::SumPolynomial).len(),
            12
        );
        assert_eq!(
            enumerate_candidates(&grid, KernelFamily::Exponential).len(),
            6
        );
        assert_eq!(enumerate_candidates(&grid, KernelFamily::Gaussian).len(), 6);
    }

    #[test]
    fn recovers_memory_and_order_on_noise_free_quadratic_recursion() {
        let series = henon(80);
        let grid = SearchGrid {
            lambdas: vec![0.0],
            memories: vec![1, 2, 3],
            orders: vec![1, 2, 3],
            sigmas: vec![],
            folds: 5,
            train_fraction: 0.8,
        };
        let report =
            cross_validate(&series, &grid, KernelFamily::SumPolynomial, FitOptions::default())
                .unwrap();
        assert_eq!(report.selected.config.memory, 2);
        assert_eq!(report.selected.config.order, 2);
        assert!(report.selected.mean_rmse < 1e-8);
    }

    #[test]
    fn lambda_ties_resolve_toward_smaller_lambda() {
        // Noise-free linear recursion: both lambda values fit to machine
        // precision, so the tie must fall to the smaller one even though it
        // comes later in the grid.
        let mut values = vec![1.0];
        for _ in 0..59 {
            values.push(values.last().unwrap() * 0.9);
        }
        let series = TimeSeries::new(values).unwrap();
        let grid = SearchGrid {
            lambdas: vec![1e-12, 0.0],
            memories: vec![1],
            orders: vec![1],
            sigmas: vec![],
            folds: 5,
            train_fraction: 0.8,
        };
        let report =
            cross_validate(&series, &grid, KernelFamily::SumPolynomial, FitOptions::default())
                .unwrap();
        assert_eq!(report.selected.config.lambda, 0.0);
    }

    #[test]
    fn overflowing_candidates_score_infinity() {
        let series = TimeSeries::new((0..40).map(|i| 40.0 + i as f64).collect()).unwrap();
        let grid = SearchGrid {
            lambdas: vec![0.0],
            memories: vec![1],
            orders: vec![],
            sigmas: vec![],
            folds: 4,
            train_fraction: 0.8,
        };
        // exp(dot) overflows for values around 80, so every fold fails.
        let err =
            cross_validate(&series, &grid, KernelFamily::Exponential, FitOptions::default())
                .unwrap_err();
        assert_eq!(err, VolterraError::NoViableCandidate);
    }

    #[test]
    fn insufficient_rows_per_fold_is_rejected() {
        let series = TimeSeries::new((0..30).map(f64::from).collect()).unwrap();
        let grid = SearchGrid {
            lambdas: vec![0.0],
            memories: vec![25],
            orders: vec![1],
            sigmas: vec![],
            folds: 5,
            train_fraction: 0.8,
        };
        assert!(matches!(
            cross_validate(&series, &grid, KernelFamily::SumPolynomial, FitOptions::default()),
            Err(VolterraError::InsufficientData { .. })
        ));
    }

    #[test]
    fn select_and_refit_reports_test_rmse() {
        let series = henon(100);
        let grid = SearchGrid {
            lambdas: vec![0.0, 1e-4],
            memories: vec![1, 2],
            orders: vec![1, 2],
            sigmas: vec![],
            folds: 5,
            train_fraction: 0.8,
        };
        let (model, report) =
            select_and_refit(&series, &grid, KernelFamily::SumPolynomial, FitOptions::default())
                .unwrap();
        assert_eq!(model.memory(), report.selected.config.memory);
        let test_rmse = report.test_rmse.unwrap();
        // The quadratic recursion is learned exactly, so held-out one-step
        // predictions are near machine precision.
        assert!(test_rmse < 1e-8, "test rmse {test_rmse}");
        assert_eq!(report.candidates.len(), 8);
    }

    #[test]
    fn constant_series_selects_and_predicts_the_constant() {
        // Every window is identical, so the Gram matrix is rank one and the
        // solver leans on jitter; the pipeline must still come back with a
        // model that reproduces the constant.
        let series = TimeSeries::new(vec![5.0; 60]).unwrap();
        let grid = SearchGrid {
            lambdas: vec![0.0],
            memories: vec![1, 2],
            orders: vec![1],
            sigmas: vec![],
            folds: 5,
            train_fraction: 0.8,
        };
        let (model, report) =
            select_and_refit(&series, &grid, KernelFamily::SumPolynomial, FitOptions::default())
                .unwrap();
        assert!(report.test_rmse.unwrap() < 1e-6);
        let p = next_value(&model, &series).unwrap();
        assert!((p - 5.0).abs() < 1e-6, "prediction {p}");
    }

    #[test]
    fn singleton_grid_selects_its_only_candidate() {
        let series = henon(70);
        let grid = SearchGrid {
            lambdas: vec![1e-4],
            memories: vec![3],
            orders: vec![2],
            sigmas: vec![],
            folds: 3,
            train_fraction: 0.8,
        };
        let report =
            cross_validate(&series, &grid, KernelFamily::SumPolynomial, FitOptions::default())
                .unwrap();
        assert_eq!(report.candidates.len(), 1);
        assert_eq!(report.selected.config, ModelConfig::new(3, 2, 1e-4).unwrap());
        assert!(report.selected.mean_rmse.is_finite());
    }

    #[test]
    fn next_value_uses_latest_window() {
        let series = henon(60);
        let grid = SearchGrid {
            lambdas: vec![0.0],
            memories: vec![2],
            orders: vec![2],
            sigmas: vec![],
            folds: 5,
            train_fraction: 0.8,
        };
        let (model, _) =
            select_and_refit(&series, &grid, KernelFamily::SumPolynomial, FitOptions::default())
                .unwrap();
        let predicted = next_value(&model, &series).unwrap();
        let v = series.values();
        let expect = 1.0 - 1.4 * v[59] * v[59] + 0.3 * v[58];
        assert!((predicted - expect).abs() < 1e-8);
    }
}
