//! Regularised kernel fitting, prediction and Volterra operator recovery.
//!
//! Fitting solves the dual system `(K + lambda I) gamma = y` by Cholesky
//! factorisation. When the factorisation fails (a rank-deficient Gram matrix
//! at tiny `lambda` is the usual cause) a diagonal jitter proportional to
//! `trace(K) / n` is added and escalated by factors of ten until the
//! factorisation succeeds or the escalation cap is reached. The solution is
//! polished with two iterative-refinement steps against the unjittered
//! system.

use ndarray::{Array1, Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{Result, VolterraError};
use crate::kernels::{
    self, feature_block, feature_dimension, feature_map, gram, kernel_vector, KernelSpec,
};
use crate::metrics;
use crate::series::TrajectoryMatrix;

/// Largest stacked feature basis `fit_explicit` will materialise. The
/// explicit path builds the full design matrix, so it is meant for
/// oracle-scale problems, not production fits.
pub const EXPLICIT_FEATURE_GUARD: u64 = 100_000;

pub(crate) mod linalg {
    use super::*;

    /// Relative jitter bounds: escalation starts at `JITTER_START * scale`
    /// and stops after `JITTER_CAP * scale`.
    const JITTER_START: f64 = 1e-12;
    const JITTER_CAP: f64 = 1e-6;

    /// Lower-triangular Cholesky factor.
    pub(crate) struct Cholesky {
        l: Array2<f64>,
    }

    impl Cholesky {
        /// Factorises a symmetric matrix; `None` when a pivot is not
        /// strictly positive and finite.
        pub(crate) fn decompose(a: &Array2<f64>) -> Option<Self> {
            let n = a.nrows();
            let mut l = Array2::zeros((n, n));
            for j in 0..n {
                let mut d = a[[j, j]];
                for k in 0..j {
                    d -= l[[j, k]] * l[[j, k]];
                }
                if !(d.is_finite() && d > 0.0) {
                    return None;
                }
                let pivot = d.sqrt();
                l[[j, j]] = pivot;
                for i in (j + 1)..n {
                    let mut s = a[[i, j]];
                    for k in 0..j {
                        s -= l[[i, k]] * l[[j, k]];
                    }
                    let v = s / pivot;
                    if !v.is_finite() {
                        return None;
                    }
                    l[[i, j]] = v;
                }
            }
            Some(Self { l })
        }

        /// Smallest diagonal entry of the factor; near-zero against the
        /// matrix scale signals rank deficiency that squeaked past the
        /// positivity check.
        pub(crate) fn min_pivot(&self) -> f64 {
            self.l.diag().iter().cloned().fold(f64::INFINITY, f64::min)
        }

        /// Solves `L L^T x = b` by forward and back substitution.
        pub(crate) fn solve(&self, b: &Array1<f64>) -> Array1<f64> {
            let n = self.l.nrows();
            let mut z = Array1::zeros(n);
            for i in 0..n {
                let mut s = b[i];
                for k in 0..i {
                    s -= self.l[[i, k]] * z[k];
                }
                z[i] = s / self.l[[i, i]];
            }
            let mut x = Array1::zeros(n);
            for i in (0..n).rev() {
                let mut s = z[i];
                for k in (i + 1)..n {
                    s -= self.l[[k, i]] * x[k];
                }
                x[i] = s / self.l[[i, i]];
            }
            x
        }
    }

    /// Solves `a x = b` for a symmetric positive semi-definite `a`.
    ///
    /// `scale` sets the jitter unit, normally `trace(a) / n` of the
    /// unregularised matrix. Returns the solution and the jitter that was
    /// actually added (zero when the plain factorisation succeeded).
    pub(crate) fn solve_spd(
        a: &Array2<f64>,
        b: &Array1<f64>,
        scale: f64,
    ) -> Result<(Array1<f64>, f64)> {
        let unit = if scale > 0.0 { scale } else { 1.0 };
        let mut jitter = 0.0;
        let mut factor = loop {
            let candidate = if jitter == 0.0 {
                Cholesky::decompose(a)
            } else {
                let mut shifted = a.clone();
                for i in 0..shifted.nrows() {
                    shifted[[i, i]] += jitter;
                }
                Cholesky::decompose(&shifted)
            };
            match candidate {
                Some(f) => break f,
                None => {
                    jitter = if jitter == 0.0 {
                        JITTER_START * unit
                    } else {
                        jitter * 10.0
                    };
                    if jitter > JITTER_CAP * unit * (1.0 + 1e-9) {
                        return Err(VolterraError::SingularSystem);
                    }
                }
            }
        };
        let mut x = factor.solve(b);
        // Two refinement sweeps against the unjittered matrix. With the
        // factor of `a + jitter I` the error contracts by jitter over
        // (sigma_min + jitter), so the sweeps never diverge.
        for _ in 0..2 {
            let residual = b - &a.dot(&x);
            if residual.iter().any(|v| !v.is_finite()) {
                break;
            }
            let correction = factor.solve(&residual);
            x = &x + &correction;
        }
        if x.iter().any(|v| !v.is_finite()) {
            // Retry once at the cap before giving up; a barely positive
            // pivot can poison the substitution with overflow.
            jitter = JITTER_CAP * unit;
            let mut shifted = a.clone();
            for i in 0..shifted.nrows() {
                shifted[[i, i]] += jitter;
            }
            factor = Cholesky::decompose(&shifted).ok_or(VolterraError::SingularSystem)?;
            x = factor.solve(b);
            if x.iter().any(|v| !v.is_finite()) {
                return Err(VolterraError::SingularSystem);
            }
        }
        Ok((x, jitter))
    }
}

/// Options controlling a fit.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// Divide inputs and targets by the targets' standard deviation before
    /// fitting. Keeps high-order polynomial Gram matrices tame for series
    /// far from unit scale; predictions and recovered coefficients are
    /// mapped back to the raw scale.
    pub prescale: bool,
}

impl FitOptions {
    /// Options with prescaling enabled.
    pub fn prescaled() -> Self {
        Self { prescale: true }
    }
}

/// A kernel ridge model over delay-embedded windows.
#[derive(Debug, Clone, PartialEq)]
pub struct VolterraModel {
    spec: KernelSpec,
    lambda: f64,
    scale: f64,
    inputs: Array2<f64>,
    targets: Array1<f64>,
    gamma: Array1<f64>,
    jitter: f64,
}

impl VolterraModel {
    /// Fits the model on raw data (no prescaling).
    pub fn fit(trajectory: &TrajectoryMatrix, spec: &KernelSpec, lambda: f64) -> Result<Self> {
        Self::fit_with_options(trajectory, spec, lambda, FitOptions::default())
    }

    /// Fits the model with explicit options.
    pub fn fit_with_options(
        trajectory: &TrajectoryMatrix,
        spec: &KernelSpec,
        lambda: f64,
        options: FitOptions,
    ) -> Result<Self> {
        spec.validate()?;
        if !lambda.is_finite() || lambda < 0.0 {
            return Err(VolterraError::InvalidConfig {
                reason: format!("lambda must be finite and non-negative, got {lambda}"),
            });
        }
        let raw_targets = trajectory.targets().clone();
        let sd = metrics::std_dev(raw_targets.as_slice().expect("contiguous targets"));
        let scale = if options.prescale && sd > 0.0 { sd } else { 1.0 };
        let inputs = trajectory.inputs() / scale;
        let targets = &raw_targets / scale;
        let k = gram(spec, &inputs)?;
        let n = k.n();
        let jitter_scale = k.trace() / n as f64;
        let mut a = k.entries().clone();
        for i in 0..n {
            a[[i, i]] += lambda;
        }
        let (gamma, jitter) = linalg::solve_spd(&a, &targets, jitter_scale)?;
        Ok(Self {
            spec: spec.clone(),
            lambda,
            scale,
            inputs,
            targets: raw_targets,
            gamma,
            jitter,
        })
    }

    /// One-step prediction for a raw-scale window of length `memory`.
    pub fn predict(&self, x: ArrayView1<'_, f64>) -> Result<f64> {
        if x.len() != self.memory() {
            return Err(VolterraError::DimensionMismatch {
                expected: self.memory(),
                actual: x.len(),
            });
        }
        let scaled = x.mapv(|v| v / self.scale);
        let k = kernel_vector(&self.spec, &self.inputs, scaled.view())?;
        Ok(self.scale * self.gamma.dot(&k))
    }

    /// Fitted values at the training rows, raw scale.
    pub fn reconstruct(&self) -> Result<Array1<f64>> {
        let mut out = Array1::zeros(self.len());
        for i in 0..self.len() {
            let k = kernel_vector(&self.spec, &self.inputs, self.inputs.row(i))?;
            out[i] = self.scale * self.gamma.dot(&k);
        }
        Ok(out)
    }

    /// RMSE of the fitted values against the training targets.
    pub fn training_rmse(&self) -> Result<f64> {
        let fitted = self.reconstruct()?;
        metrics::rmse(
            self.targets.as_slice().expect("contiguous targets"),
            fitted.as_slice().expect("contiguous fitted"),
        )
    }

    /// Multi-step closed-loop forecast: predictions are fed back as inputs.
    /// `seed_window` is the most recent raw window, oldest value first.
    pub fn rollout(&self, seed_window: ArrayView1<'_, f64>, steps: usize) -> Result<Vec<f64>> {
        if seed_window.len() != self.memory() {
            return Err(VolterraError::DimensionMismatch {
                expected: self.memory(),
                actual: seed_window.len(),
            });
        }
        let mut window: Vec<f64> = seed_window.to_vec();
        let mut out = Vec::with_capacity(steps);
        for _ in 0..steps {
            let next = self.predict(ArrayView1::from(&window[..]))?;
            if !next.is_finite() {
                return Err(VolterraError::NonFiniteInput);
            }
            out.push(next);
            window.rotate_left(1);
            let m = window.len();
            window[m - 1] = next;
        }
        Ok(out)
    }

    /// Splits the prediction at `x` into per-degree Volterra operator
    /// contributions `H_0(x) ... H_order(x)`. Sum-polynomial kernels only:
    /// each degree of that kernel is itself a kernel, so the dual weights
    /// evaluate every operator separately.
    pub fn operator_contributions(&self, x: ArrayView1<'_, f64>) -> Result<OperatorDecomposition> {
        let order = self.require_sum_polynomial()?;
        if x.len() != self.memory() {
            return Err(VolterraError::DimensionMismatch {
                expected: self.memory(),
                actual: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(VolterraError::NonFiniteInput);
        }
        let scaled = x.mapv(|v| v / self.scale);
        let dots: Vec<f64> = self
            .inputs
            .rows()
            .into_iter()
            .map(|row| row.dot(&scaled))
            .collect();
        let mut per_degree = Vec::with_capacity(order + 1);
        let mut powers = vec![1.0; dots.len()];
        for degree in 0..=order {
            if degree > 0 {
                for (p, d) in powers.iter_mut().zip(&dots) {
                    *p *= d;
                }
            }
            let h: f64 = self
                .gamma
                .iter()
                .zip(&powers)
                .map(|(g, p)| g * p)
                .sum::<f64>()
                * self.scale;
            per_degree.push(h);
        }
        Ok(OperatorDecomposition {
            per_degree,
            eta: None,
        })
    }

    /// Like [`operator_contributions`](Self::operator_contributions) but also
    /// attaches the recovered coefficient vector of each operator.
    pub fn decompose_with_coefficients(
        &self,
        x: ArrayView1<'_, f64>,
    ) -> Result<OperatorDecomposition> {
        let mut decomposition = self.operator_contributions(x)?;
        let eta = self
            .recover_all_coefficients()?
            .into_iter()
            .map(|block| block.to_vec())
            .collect();
        decomposition.eta = Some(eta);
        Ok(decomposition)
    }

    /// Recovers the ordered monomial coefficients of the degree-`degree`
    /// Volterra operator, `memory^degree` values in the same lexicographic
    /// order as [`feature_block`]. Sum-polynomial kernels only.
    pub fn recover_coefficients(&self, degree: usize) -> Result<Array1<f64>> {
        let order = self.require_sum_polynomial()?;
        if degree > order {
            return Err(VolterraError::InvalidConfig {
                reason: format!("degree {degree} exceeds kernel order {order}"),
            });
        }
        let dim = kernels::block_dimension(self.memory(), degree)?;
        let mut eta = Array1::zeros(dim);
        for (i, row) in self.inputs.rows().into_iter().enumerate() {
            let phi = feature_block(row, degree)?;
            eta.scaled_add(self.gamma[i], &phi);
        }
        // Undo prescaling: the raw-scale operator applied to raw windows
        // must reproduce scale times the scaled-model operator.
        let factor = self.scale.powi(1 - degree as i32);
        Ok(eta * factor)
    }

    /// Recovers the coefficients of every operator `0..=order`.
    pub fn recover_all_coefficients(&self) -> Result<Vec<Array1<f64>>> {
        let order = self.require_sum_polynomial()?;
        (0..=order).map(|d| self.recover_coefficients(d)).collect()
    }

    fn require_sum_polynomial(&self) -> Result<usize> {
        match &self.spec {
            KernelSpec::SumPolynomial { order } => Ok(*order),
            other => Err(VolterraError::UnsupportedKernel {
                kernel: other.to_string(),
            }),
        }
    }

    /// The kernel the model was fitted with.
    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    /// Regularisation weight.
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Window length.
    pub fn memory(&self) -> usize {
        self.inputs.ncols()
    }

    /// Number of training rows.
    pub fn len(&self) -> usize {
        self.inputs.nrows()
    }

    /// Always false: models cannot be fitted on empty trajectories.
    pub fn is_empty(&self) -> bool {
        self.inputs.nrows() == 0
    }

    /// Dual weights of the (possibly prescaled) system.
    pub fn dual_weights(&self) -> &Array1<f64> {
        &self.gamma
    }

    /// Raw-scale training targets.
    pub fn targets(&self) -> &Array1<f64> {
        &self.targets
    }

    /// Scale divisor applied before fitting (1 when prescaling was off).
    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Diagonal jitter the solver had to add, zero for a clean factorisation.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }
}

/// Per-degree operator contributions at a single query window, optionally
/// carrying the recovered coefficient vectors of each operator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatorDecomposition {
    per_degree: Vec<f64>,
    eta: Option<Vec<Vec<f64>>>,
}

impl OperatorDecomposition {
    /// `H_0(x) ... H_order(x)`.
    pub fn contributions(&self) -> &[f64] {
        &self.per_degree
    }

    /// Recovered coefficient vectors per degree, when requested.
    pub fn coefficients(&self) -> Option<&[Vec<f64>]> {
        self.eta.as_deref()
    }

    /// Sum of all contributions; equals the model prediction.
    pub fn total(&self) -> f64 {
        self.per_degree.iter().sum()
    }
}

/// A ridge model over the explicit ordered monomial basis. Serves as the
/// primal-space counterpart of [`VolterraModel`] for validation and for
/// problems small enough to materialise the basis.
#[derive(Debug, Clone, PartialEq)]
pub struct ExplicitModel {
    coefficients: Array1<f64>,
    memory: usize,
    order: usize,
    lambda: f64,
}

/// Fits ridge regression on the stacked monomial features of the trajectory
/// rows. Solves the primal normal equations when the basis is no larger than
/// the number of rows, otherwise the dual system of the same size as the
/// Gram matrix; both give the same minimiser.
pub fn fit_explicit(
    trajectory: &TrajectoryMatrix,
    order: usize,
    lambda: f64,
) -> Result<ExplicitModel> {
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(VolterraError::InvalidConfig {
            reason: format!("lambda must be finite and non-negative, got {lambda}"),
        });
    }
    let memory = trajectory.memory();
    let n = trajectory.len();
    let dim = feature_dimension(memory, order)?;
    if dim as u64 > EXPLICIT_FEATURE_GUARD {
        return Err(VolterraError::FeatureSpaceTooLarge {
            dimension: dim as u128,
            limit: EXPLICIT_FEATURE_GUARD,
        });
    }
    let mut phi = Array2::zeros((n, dim));
    for i in 0..n {
        phi.row_mut(i).assign(&feature_map(trajectory.row(i), order)?);
    }
    let y = trajectory.targets();
    let coefficients = if dim <= n {
        let gram_primal = phi.t().dot(&phi);
        let scale = gram_primal.diag().sum() / dim as f64;
        let mut a = gram_primal;
        for i in 0..dim {
            a[[i, i]] += lambda;
        }
        let b = phi.t().dot(y);
        let (beta, _) = linalg::solve_spd(&a, &b, scale)?;
        beta
    } else {
        let gram_dual = phi.dot(&phi.t());
        let scale = gram_dual.diag().sum() / n as f64;
        let mut a = gram_dual;
        for i in 0..n {
            a[[i, i]] += lambda;
        }
        let (alpha, _) = linalg::solve_spd(&a, y, scale)?;
        phi.t().dot(&alpha)
    };
    Ok(ExplicitModel {
        coefficients,
        memory,
        order,
        lambda,
    })
}

impl ExplicitModel {
    /// One-step prediction for a window of length `memory`.
    pub fn predict(&self, x: ArrayView1<'_, f64>) -> Result<f64> {
        if x.len() != self.memory {
            return Err(VolterraError::DimensionMismatch {
                expected: self.memory,
                actual: x.len(),
            });
        }
        let phi = feature_map(x, self.order)?;
        Ok(phi.dot(&self.coefficients))
    }

    /// Predictions for every row of a trajectory.
    pub fn reconstruct(&self, trajectory: &TrajectoryMatrix) -> Result<Array1<f64>> {
        let mut out = Array1::zeros(trajectory.len());
        for i in 0..trajectory.len() {
            out[i] = self.predict(trajectory.row(i))?;
        }
        Ok(out)
    }

    /// The full stacked coefficient vector.
    pub fn coefficients(&self) -> &Array1<f64> {
        &self.coefficients
    }

    /// The slice of coefficients belonging to one degree block.
    pub fn block(&self, degree: usize) -> Result<Array1<f64>> {
        if degree > self.order {
            return Err(VolterraError::InvalidConfig {
                reason: format!("degree {degree} exceeds model order {}", self.order),
            });
        }
        let start = feature_dimension(self.memory, degree)? - kernels::block_dimension(self.memory, degree)?;
        let len = kernels::block_dimension(self.memory, degree)?;
        Ok(self.coefficients.slice(ndarray::s![start..start + len]).to_owned())
    }

    /// Window length.
    pub fn memory(&self) -> usize {
        self.memory
    }

    /// Polynomial order.
    pub fn order(&self) -> usize {
        self.order
    }

    /// Regularisation weight.
    pub fn lambda(&self) -> f64 {
        self.lambda
    }
}
