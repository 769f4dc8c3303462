//! Report emission. JSON is the machine-readable source of truth; every CSV
//! is a rendering of values present in the JSON. All files are written
//! atomically (temp file in the target directory, then rename).

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use ndarray::{Array1, Array2};
use serde::Serialize;
use volterra::kspa::Ecdf;
use volterra::solver::{FitOptions, VolterraModel};
use volterra::{KernelSpec, TimeSeries, TrajectoryMatrix};

use crate::error::{CliError, CliResult};

/// Schema identifier stamped into every JSON report.
pub const SCHEMA_VERSION: &str = "1";

/// Writes `content` to `path` via a temporary sibling and an atomic rename.
pub fn write_atomic(path: &Path, content: &str) -> CliResult<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    if let Some(dir) = dir {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::Io(format!("creating {}: {e}", dir.display())))?;
    }
    let file_name = path
        .file_name()
        .ok_or_else(|| CliError::Io(format!("{} has no file name", path.display())))?;
    let mut tmp = PathBuf::from(path);
    tmp.set_file_name(format!(".{}.tmp", file_name.to_string_lossy()));
    std::fs::write(&tmp, content)
        .map_err(|e| CliError::Io(format!("writing {}: {e}", tmp.display())))?;
    std::fs::rename(&tmp, path)
        .map_err(|e| CliError::Io(format!("renaming into {}: {e}", path.display())))?;
    Ok(())
}

/// Serialises a report to pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(report: &T) -> CliResult<String> {
    let mut text = serde_json::to_string_pretty(report)?;
    text.push('\n');
    Ok(text)
}

/// Writes the JSON form of `report` to `dir/name`.
pub fn write_json<T: Serialize>(dir: &Path, name: &str, report: &T) -> CliResult<()> {
    write_atomic(&dir.join(name), &to_json(report)?)
}

/// Minimal CSV builder; fields never need quoting here (labels are
/// identifier-like, numbers use the shortest round-trip form).
pub struct Csv {
    text: String,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        let mut text = String::new();
        let _ = writeln!(text, "{}", header.join(","));
        Csv { text }
    }

    pub fn row(&mut self, fields: &[String]) {
        let _ = writeln!(self.text, "{}", fields.join(","));
    }

    pub fn finish(self) -> String {
        self.text
    }
}

/// Shortest round-trip rendering of a float, `NA` for missing cells.
pub fn num(value: f64) -> String {
    value.to_string()
}

pub fn opt_num(value: Option<f64>) -> String {
    value.map(num).unwrap_or_else(|| "NA".to_string())
}

/// One histogram of non-negative errors with Freedman-Diaconis binning and
/// a floor of five bins.
#[derive(Debug, Clone, Serialize)]
pub struct Histogram {
    /// `bins + 1` ascending bin edges.
    pub edges: Vec<f64>,
    /// Occupancy per bin.
    pub counts: Vec<usize>,
}

/// Linear-interpolation quantile of already sorted values.
fn sorted_quantile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn histogram(values: &[f64]) -> CliResult<Histogram> {
    if values.is_empty() {
        return Err(CliError::data("cannot build a histogram of nothing"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let min = sorted[0];
    let max = *sorted.last().expect("non-empty");
    let range = max - min;
    let iqr = sorted_quantile(&sorted, 0.75) - sorted_quantile(&sorted, 0.25);
    let fd_width = 2.0 * iqr / (values.len() as f64).cbrt();
    let bins = if range > 0.0 && fd_width > 0.0 {
        ((range / fd_width).ceil() as usize).max(5)
    } else {
        5
    };
    // A degenerate (single-valued) sample still gets a visible bin around it.
    let width = if range > 0.0 { range / bins as f64 } else { 1.0 };
    let edges: Vec<f64> = (0..=bins).map(|i| min + width * i as f64).collect();
    let mut counts = vec![0usize; bins];
    for v in values {
        let idx = if range > 0.0 {
            (((v - min) / width) as usize).min(bins - 1)
        } else {
            0
        };
        counts[idx] += 1;
    }
    Ok(Histogram { edges, counts })
}

/// ECDF step points `(value, cumulative fraction)` of an error sample.
pub fn ecdf_points(values: &[f64]) -> CliResult<Vec<(f64, f64)>> {
    Ok(Ecdf::from_values(values)
        .map_err(CliError::from)?
        .steps())
}

/// Renders per-method histograms as `method,bin_left,bin_right,count` rows.
pub fn histogram_csv(samples: &[(String, Histogram)]) -> String {
    let mut csv = Csv::new(&["method", "bin_left", "bin_right", "count"]);
    for (label, hist) in samples {
        for (i, count) in hist.counts.iter().enumerate() {
            csv.row(&[
                label.clone(),
                num(hist.edges[i]),
                num(hist.edges[i + 1]),
                count.to_string(),
            ]);
        }
    }
    csv.finish()
}

/// Renders per-method ECDF steps as `method,error,fraction` rows.
pub fn ecdf_csv(samples: &[(String, Vec<(f64, f64)>)]) -> String {
    let mut csv = Csv::new(&["method", "error", "fraction"]);
    for (label, steps) in samples {
        for (x, f) in steps {
            csv.row(&[label.clone(), num(*x), num(*f)]);
        }
    }
    csv.finish()
}

/// Gaussian-kernel ridge regression of the series values on their index,
/// used to illustrate the effect of the kernel width.
#[derive(Debug, Clone, Serialize)]
pub struct SigmaSweep {
    /// Width grid searched by cross-validation.
    pub grid: Vec<f64>,
    /// Mean validation RMSE per grid width, aligned with `grid`.
    pub cv_rmse: Vec<f64>,
    /// The winning width.
    pub sigma_star: f64,
    /// Ridge weight used for every fit.
    pub lambda: f64,
    /// Widths of the emitted curves: undersmoothed, selected, oversmoothed.
    pub sigmas: Vec<f64>,
    /// Fitted values per width, each aligned with the series index.
    pub fits: Vec<Vec<f64>>,
}

fn index_trajectory(series: &TimeSeries, rows: &[usize]) -> CliResult<TrajectoryMatrix> {
    let inputs = Array2::from_shape_fn((rows.len(), 1), |(i, _)| rows[i] as f64);
    let targets = Array1::from_iter(rows.iter().map(|&r| series.values()[r]));
    Ok(TrajectoryMatrix::from_parts(inputs, targets)?)
}

fn fit_on_index(series: &TimeSeries, rows: &[usize], sigma: f64, lambda: f64) -> CliResult<VolterraModel> {
    let trajectory = index_trajectory(series, rows)?;
    let spec = KernelSpec::gaussian(sigma)?;
    Ok(VolterraModel::fit_with_options(
        &trajectory,
        &spec,
        lambda,
        FitOptions { prescale: true },
    )?)
}

/// Runs the width sweep: `sigma_star` by contiguous k-fold cross-validation
/// over the index rows, then full-series fits at 0.01x, 1x and 100x the
/// winner.
pub fn sigma_sweep(series: &TimeSeries, folds: usize, lambda: f64) -> CliResult<SigmaSweep> {
    let n = series.len();
    if n < 2 * folds {
        return Err(CliError::data(format!(
            "{n} observations cannot support {folds} folds"
        )));
    }
    let grid: Vec<f64> = (-2..=6).map(|e| 10f64.powi(e)).collect();
    let base = n / folds;
    let mut cv_rmse = Vec::with_capacity(grid.len());
    for &sigma in &grid {
        let mut fold_scores = Vec::with_capacity(folds);
        for f in 0..folds {
            let (start, end) = (f * base, if f == folds - 1 { n } else { (f + 1) * base });
            let train: Vec<usize> = (0..start).chain(end..n).collect();
            let score = (|| -> CliResult<f64> {
                let model = fit_on_index(series, &train, sigma, lambda)?;
                let mut se = 0.0;
                for r in start..end {
                    let p = model.predict(Array1::from(vec![r as f64]).view())?;
                    se += (series.values()[r] - p).powi(2);
                }
                Ok((se / (end - start) as f64).sqrt())
            })();
            fold_scores.push(score.unwrap_or(f64::INFINITY));
        }
        let mean = fold_scores.iter().sum::<f64>() / folds as f64;
        cv_rmse.push(mean);
    }
    let best = cv_rmse
        .iter()
        .enumerate()
        .filter(|(_, v)| v.is_finite())
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .ok_or_else(|| CliError::Numerical("every width failed cross-validation".into()))?;
    let sigma_star = grid[best];
    let sigmas = vec![0.01 * sigma_star, sigma_star, 100.0 * sigma_star];
    let all_rows: Vec<usize> = (0..n).collect();
    let mut fits = Vec::with_capacity(sigmas.len());
    for &sigma in &sigmas {
        let model = fit_on_index(series, &all_rows, sigma, lambda)?;
        let mut fitted = Vec::with_capacity(n);
        for r in 0..n {
            fitted.push(model.predict(Array1::from(vec![r as f64]).view())?);
        }
        fits.push(fitted);
    }
    Ok(SigmaSweep {
        grid,
        cv_rmse,
        sigma_star,
        lambda,
        sigmas,
        fits,
    })
}

/// Renders the sweep as `index,value,fit_small,fit_selected,fit_large` rows.
pub fn sigma_sweep_csv(series: &TimeSeries, sweep: &SigmaSweep) -> String {
    let mut csv = Csv::new(&["index", "value", "fit_small", "fit_selected", "fit_large"]);
    for i in 0..series.len() {
        csv.row(&[
            i.to_string(),
            num(series.values()[i]),
            num(sweep.fits[0][i]),
            num(sweep.fits[1][i]),
            num(sweep.fits[2][i]),
        ]);
    }
    csv.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn histogram_follows_freedman_diaconis_with_floor() {
        // 8 equally spaced points: IQR 3.5, width 2*3.5/2 = 3.5, range 7 ->
        // 2 raw bins, floored to 5.
        let values: Vec<f64> = (0..8).map(f64::from).collect();
        let h = histogram(&values).unwrap();
        assert_eq!(h.counts.len(), 5);
        assert_eq!(h.counts.iter().sum::<usize>(), 8);
        assert_eq!(h.edges.first(), Some(&0.0));
        assert_eq!(h.edges.last(), Some(&7.0));
    }

    #[test]
    fn histogram_splits_wide_samples_beyond_the_floor() {
        // A tight IQR against a wide range forces more than five bins.
        let mut values: Vec<f64> = (0..100).map(|i| (i % 10) as f64 * 0.01).collect();
        values.push(100.0);
        let h = histogram(&values).unwrap();
        assert!(h.counts.len() > 5, "got {} bins", h.counts.len());
        assert_eq!(h.counts.iter().sum::<usize>(), 101);
    }

    #[test]
    fn degenerate_histogram_still_has_five_bins() {
        let h = histogram(&[2.0; 12]).unwrap();
        assert_eq!(h.counts.len(), 5);
        assert_eq!(h.counts[0], 12);
    }

    #[test]
    fn ecdf_points_match_the_canonical_example() {
        let steps = ecdf_points(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(
            steps,
            vec![(1.0, 1.0 / 3.0), (2.0, 2.0 / 3.0), (3.0, 1.0)]
        );
    }

    #[test]
    fn sigma_sweep_prefers_moderate_widths_on_smooth_data() {
        let values: Vec<f64> = (0..60)
            .map(|i| (i as f64 * 0.2).sin() * 10.0 + 50.0)
            .collect();
        let series = TimeSeries::new(values).unwrap();
        let sweep = sigma_sweep(&series, 5, 1e-6).unwrap();
        assert_eq!(sweep.fits.len(), 3);
        assert_eq!(sweep.fits[0].len(), 60);
        // The undersmoothed and oversmoothed curves bracket the winner.
        assert!(sweep.sigmas[0] < sweep.sigma_star);
        assert!(sweep.sigmas[2] > sweep.sigma_star);
        let rmse = |fit: &Vec<f64>| {
            (fit.iter()
                .zip(series.values())
                .map(|(f, y)| (f - y) * (f - y))
                .sum::<f64>()
                / 60.0)
                .sqrt()
        };
        // The selected width tracks the signal; the oversmoothed one cannot.
        assert!(rmse(&sweep.fits[1]) < 0.5 * rmse(&sweep.fits[2]));
    }

    #[test]
    fn atomic_write_replaces_content_and_leaves_no_temp() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("report.json");
        write_atomic(&path, "first\n").unwrap();
        write_atomic(&path, "second\n").unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "second\n");
        let names: Vec<_> = std::fs::read_dir(dir.path())
            .unwrap()
            .map(|e| e.unwrap().file_name())
            .collect();
        assert_eq!(names.len(), 1);
    }
}
