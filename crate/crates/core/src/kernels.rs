//! Kernel evaluation, Gram matrices and explicit monomial feature maps.

use ndarray::{Array1, Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{Result, VolterraError};
use crate::metrics;

/// Largest ordered monomial block (`memory^degree`) the explicit feature
/// routines will materialise.
pub const FEATURE_GUARD: u64 = 10_000_000;

/// Supported kernel families.
///
/// The sum-polynomial kernel `sum_{n=0..order} (x1 . x2)^n` is the workhorse:
/// its RKHS is spanned by all monomials of degree at most `order`, one block
/// per degree, which is what makes Volterra operator recovery possible. The
/// other families are provided for comparison fits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum KernelSpec {
    /// `sum_{n=0..order} (x1 . x2)^n`
    SumPolynomial { order: usize },
    /// `(1 + x1 . x2)^order`
    InhomogeneousPolynomial { order: usize },
    /// `exp(x1 . x2)`
    Exponential,
    /// `exp(-||x1 - x2||^2 / sigma)`
    Gaussian { sigma: f64 },
}

impl KernelSpec {
    /// Sum-of-monomials polynomial kernel of the given order.
    pub fn sum_polynomial(order: usize) -> Self {
        KernelSpec::SumPolynomial { order }
    }

    /// Inhomogeneous polynomial kernel of the given order.
    pub fn inhomogeneous_polynomial(order: usize) -> Self {
        KernelSpec::InhomogeneousPolynomial { order }
    }

    /// Exponential (infinite-order polynomial) kernel.
    pub fn exponential() -> Self {
        KernelSpec::Exponential
    }

    /// Gaussian kernel; `sigma` must be finite and positive.
    pub fn gaussian(sigma: f64) -> Result<Self> {
        let spec = KernelSpec::Gaussian { sigma };
        spec.validate()?;
        Ok(spec)
    }

    /// Checks the parameters of the variant.
    pub fn validate(&self) -> Result<()> {
        match self {
            KernelSpec::Gaussian { sigma } if !(sigma.is_finite() && *sigma > 0.0) => {
                Err(VolterraError::InvalidKernel {
                    reason: format!("gaussian width must be finite and positive, got {sigma}"),
                })
            }
            _ => Ok(()),
        }
    }

    /// Polynomial order for the two polynomial families, `None` otherwise.
    pub fn order(&self) -> Option<usize> {
        match self {
            KernelSpec::SumPolynomial { order } | KernelSpec::InhomogeneousPolynomial { order } => {
                Some(*order)
            }
            _ => None,
        }
    }
}

impl std::fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            KernelSpec::SumPolynomial { order } => write!(f, "sum_polynomial(order={order})"),
            KernelSpec::InhomogeneousPolynomial { order } => {
                write!(f, "inhomogeneous_polynomial(order={order})")
            }
            KernelSpec::Exponential => write!(f, "exponential"),
            KernelSpec::Gaussian { sigma } => write!(f, "gaussian(sigma={sigma})"),
        }
    }
}

/// Evaluates the kernel on a pair of equal-length vectors.
pub fn kernel_eval(spec: &KernelSpec, x1: ArrayView1<'_, f64>, x2: ArrayView1<'_, f64>) -> Result<f64> {
    spec.validate()?;
    if x1.len() != x2.len() {
        return Err(VolterraError::DimensionMismatch {
            expected: x1.len(),
            actual: x2.len(),
        });
    }
    if x1.is_empty() {
        return Err(VolterraError::EmptyInput);
    }
    if x1.iter().chain(x2.iter()).any(|v| !v.is_finite()) {
        return Err(VolterraError::NonFiniteInput);
    }
    let value = match spec {
        KernelSpec::SumPolynomial { order } => {
            let d = x1.dot(&x2);
            let mut acc = 1.0;
            let mut power = 1.0;
            for _ in 1..=*order {
                power *= d;
                acc += power;
            }
            acc
        }
        KernelSpec::InhomogeneousPolynomial { order } => (1.0 + x1.dot(&x2)).powi(*order as i32),
        KernelSpec::Exponential => x1.dot(&x2).exp(),
        KernelSpec::Gaussian { sigma } => {
            let mut sq = 0.0;
            for (a, b) in x1.iter().zip(x2.iter()) {
                let d = a - b;
                sq += d * d;
            }
            (-sq / sigma).exp()
        }
    };
    if !value.is_finite() {
        return Err(VolterraError::NonFiniteInput);
    }
    Ok(value)
}

/// Symmetric Gram matrix of a kernel over a set of input rows.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    entries: Array2<f64>,
    spec: KernelSpec,
}

impl GramMatrix {
    /// Kernel values, `entries[[i, j]] = k(x_i, x_j)`.
    pub fn entries(&self) -> &Array2<f64> {
        &self.entries
    }

    /// The kernel that produced the matrix.
    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    /// Number of rows (and columns).
    pub fn n(&self) -> usize {
        self.entries.nrows()
    }

    /// Trace of the matrix; used to scale jitter during factorisation.
    pub fn trace(&self) -> f64 {
        self.entries.diag().sum()
    }
}

/// Builds the Gram matrix of `spec` over the rows of `inputs`. Only the lower
/// triangle is evaluated; the upper triangle is mirrored, so the result is
/// exactly symmetric.
pub fn gram(spec: &KernelSpec, inputs: &Array2<f64>) -> Result<GramMatrix> {
    spec.validate()?;
    let n = inputs.nrows();
    if n == 0 {
        return Err(VolterraError::EmptyInput);
    }
    let mut entries = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            let value = kernel_eval(spec, inputs.row(i), inputs.row(j))?;
            entries[[i, j]] = value;
            entries[[j, i]] = value;
        }
    }
    Ok(GramMatrix {
        entries,
        spec: spec.clone(),
    })
}

/// Kernel evaluations of one query vector against every input row.
pub fn kernel_vector(
    spec: &KernelSpec,
    inputs: &Array2<f64>,
    x: ArrayView1<'_, f64>,
) -> Result<Array1<f64>> {
    let mut out = Array1::zeros(inputs.nrows());
    for (i, row) in inputs.rows().into_iter().enumerate() {
        out[i] = kernel_eval(spec, row, x)?;
    }
    Ok(out)
}

/// Size of the ordered monomial basis of exactly `degree` in `memory`
/// variables, i.e. `memory^degree`, guarded against blow-up.
pub fn block_dimension(memory: usize, degree: usize) -> Result<usize> {
    if memory == 0 {
        return Err(VolterraError::InvalidMemory);
    }
    let dim = (memory as u128)
        .checked_pow(degree as u32)
        .ok_or(VolterraError::Overflow)?;
    if dim > FEATURE_GUARD as u128 {
        return Err(VolterraError::FeatureSpaceTooLarge {
            dimension: dim,
            limit: FEATURE_GUARD,
        });
    }
    Ok(dim as usize)
}

/// Total length of the stacked feature map for orders `0..=order`:
/// `sum_n memory^n`.
pub fn feature_dimension(memory: usize, order: usize) -> Result<usize> {
    let mut total: u128 = 0;
    for degree in 0..=order {
        total += block_dimension(memory, degree)? as u128;
    }
    if total > FEATURE_GUARD as u128 {
        return Err(VolterraError::FeatureSpaceTooLarge {
            dimension: total,
            limit: FEATURE_GUARD,
        });
    }
    Ok(total as usize)
}

/// Ordered monomials of exactly `degree` in the entries of `x`, in
/// lexicographic index order with the first index most significant. The
/// degree-zero block is the single constant `1`.
pub fn feature_block(x: ArrayView1<'_, f64>, degree: usize) -> Result<Array1<f64>> {
    if x.is_empty() {
        return Err(VolterraError::EmptyInput);
    }
    block_dimension(x.len(), degree)?;
    let mut block = vec![1.0];
    for _ in 0..degree {
        let mut next = Vec::with_capacity(block.len() * x.len());
        for &xi in x.iter() {
            for &b in &block {
                next.push(xi * b);
            }
        }
        block = next;
    }
    Ok(Array1::from(block))
}

/// Stacked feature map for all degrees `0..=order`. Its inner product with
/// another feature map reproduces the sum-polynomial kernel exactly.
pub fn feature_map(x: ArrayView1<'_, f64>, order: usize) -> Result<Array1<f64>> {
    let total = feature_dimension(x.len(), order)?;
    let mut out = Vec::with_capacity(total);
    for degree in 0..=order {
        out.extend(feature_block(x, degree)?.into_iter());
    }
    Ok(Array1::from(out))
}

/// Median of the pairwise squared distances between input rows, the usual
/// width heuristic for Gaussian kernels. Falls back to 1 when fewer than two
/// rows exist or all rows coincide.
pub fn median_heuristic_sigma(inputs: &Array2<f64>) -> f64 {
    let n = inputs.nrows();
    if n < 2 {
        return 1.0;
    }
    let mut dists = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            let mut sq = 0.0;
            for (a, b) in inputs.row(i).iter().zip(inputs.row(j).iter()) {
                let d = a - b;
                sq += d * d;
            }
            dists.push(sq);
        }
    }
    let med = metrics::median(&dists);
    if med > 0.0 {
        med
    } else {
        1.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const TOL: f64 = 1e-12;

    #[test]
    fn kernel_values_match_hand_computation() {
        let x1 = array![1.0, 1.0];
        let x2 = array![1.0, 2.0];
        // dot product is 3
        let sum = kernel_eval(&KernelSpec::sum_polynomial(2), x1.view(), x2.view()).unwrap();
        assert!((sum - 13.0).abs() < TOL);
        let inhom =
            kernel_eval(&KernelSpec::inhomogeneous_polynomial(2), x1.view(), x2.view()).unwrap();
        assert!((inhom - 16.0).abs() < TOL);
        let expo = kernel_eval(&KernelSpec::exponential(), x1.view(), x2.view()).unwrap();
        assert!((expo - 3.0f64.exp()).abs() < TOL);
        let gauss =
            kernel_eval(&KernelSpec::gaussian(2.0).unwrap(), x1.view(), x2.view()).unwrap();
        assert!((gauss - (-0.5f64).exp()).abs() < TOL);
    }

    #[test]
    fn order_zero_sum_polynomial_is_constant_one() {
        let x1 = array![4.0, -2.0];
        let x2 = array![0.5, 9.0];
        let got = kernel_eval(&KernelSpec::sum_polynomial(0), x1.view(), x2.view()).unwrap();
        assert_eq!(got, 1.0);
    }

    #[test]
    fn kernels_are_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let specs = [
            KernelSpec::sum_polynomial(3),
            KernelSpec::inhomogeneous_polynomial(4),
            KernelSpec::exponential(),
            KernelSpec::gaussian(1.5).unwrap(),
        ];
        for _ in 0..50 {
            let x1: Array1<f64> = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();
            let x2: Array1<f64> = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();
            for spec in &specs {
                let a = kernel_eval(spec, x1.view(), x2.view()).unwrap();
                let b = kernel_eval(spec, x2.view(), x1.view()).unwrap();
                assert_eq!(a, b, "{spec}");
            }
        }
    }

    #[test]
    fn kernel_eval_rejects_bad_input() {
        let x1 = array![1.0, 2.0];
        let short = array![1.0];
        assert_eq!(
            kernel_eval(&KernelSpec::exponential(), x1.view(), short.view()),
            Err(VolterraError::DimensionMismatch {
                expected: 2,
                actual: 1
            })
        );
        let bad = array![1.0, f64::NAN];
        assert_eq!(
            kernel_eval(&KernelSpec::exponential(), x1.view(), bad.view()),
            Err(VolterraError::NonFiniteInput)
        );
        assert!(matches!(
            KernelSpec::gaussian(0.0),
            Err(VolterraError::InvalidKernel { .. })
        ));
    }

    #[test]
    fn gram_is_exactly_symmetric_with_unit_free_diagonal_structure() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let inputs = Array2::from_shape_fn((12, 3), |_| rng.random_range(-1.0..1.0));
        for spec in [
            KernelSpec::sum_polynomial(4),
            KernelSpec::gaussian(3.0).unwrap(),
        ] {
            let g = gram(&spec, &inputs).unwrap();
            for i in 0..g.n() {
                for j in 0..g.n() {
                    assert_eq!(g.entries()[[i, j]], g.entries()[[j, i]]);
                }
            }
        }
        // The Gaussian diagonal is identically one.
        let g = gram(&KernelSpec::gaussian(3.0).unwrap(), &inputs).unwrap();
        for i in 0..g.n() {
            assert_eq!(g.entries()[[i, i]], 1.0);
        }
    }

    #[test]
    fn feature_map_is_ordered_monomials() {
        let x = array![2.0, 3.0];
        let phi = feature_map(x.view(), 2).unwrap();
        // Degree 0, then (x1, x2), then (x1x1, x1x2, x2x1, x2x2).
        assert_eq!(phi.to_vec(), vec![1.0, 2.0, 3.0, 4.0, 6.0, 6.0, 9.0]);
        assert_eq!(phi.len(), feature_dimension(2, 2).unwrap());
    }

    #[test]
    fn feature_block_dimensions_are_powers_of_memory() {
        let x = array![1.0, 2.0, 3.0];
        for degree in 0..5 {
            let block = feature_block(x.view(), degree).unwrap();
            assert_eq!(block.len(), 3usize.pow(degree as u32));
        }
    }

    #[test]
    fn feature_map_inner_product_reproduces_sum_polynomial_kernel() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..100 {
            let m = rng.random_range(1..=4);
            let p = rng.random_range(0..=5);
            let x1: Array1<f64> = (0..m).map(|_| rng.random_range(-1.5..1.5)).collect();
            let x2: Array1<f64> = (0..m).map(|_| rng.random_range(-1.5..1.5)).collect();
            let phi1 = feature_map(x1.view(), p).unwrap();
            let phi2 = feature_map(x2.view(), p).unwrap();
            let via_features = phi1.dot(&phi2);
            let direct =
                kernel_eval(&KernelSpec::sum_polynomial(p), x1.view(), x2.view()).unwrap();
            let scale = direct.abs().max(1.0);
            assert!(
                (via_features - direct).abs() <= 1e-10 * scale,
                "m={m} p={p}: {via_features} vs {direct}"
            );
        }
    }

    #[test]
    fn feature_guard_rejects_oversized_bases() {
        let x = Array1::from(vec![1.0; 100]);
        // 100^4 = 1e8 exceeds the guard.
        assert!(matches!(
            feature_block(x.view(), 4),
            Err(VolterraError::FeatureSpaceTooLarge { .. })
        ));
        assert!(block_dimension(10, 7).is_ok());
        assert!(block_dimension(10, 8).is_err());
    }

    #[test]
    fn median_heuristic_handles_degenerate_inputs() {
        let inputs = Array2::from_shape_vec((3, 1), vec![5.0, 5.0, 5.0]).unwrap();
        assert_eq!(median_heuristic_sigma(&inputs), 1.0);
        let single = Array2::from_shape_vec((1, 2), vec![1.0, 2.0]).unwrap();
        assert_eq!(median_heuristic_sigma(&single), 1.0);
        let spread = Array2::from_shape_vec((2, 1), vec![0.0, 2.0]).unwrap();
        assert_eq!(median_heuristic_sigma(&spread), 4.0);
    }
}
