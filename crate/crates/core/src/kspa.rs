//! Kolmogorov-Smirnov tests for comparing predictive accuracy.
//!
//! Two models are compared through the empirical distributions of their
//! error magnitudes. Small problems (`n1 * n2 <= 64`) get an exact
//! permutation p-value computed by a tie-aware counting recursion over the
//! pooled sample; larger problems use the classical asymptotic formulas.
//! All supremum statistics are evaluated at the pooled data points, which
//! handles ties correctly.

use serde::{Deserialize, Serialize};

use crate::error::{Result, VolterraError};
use crate::metrics::binomial;

/// Cutoff on `n1 * n2` below which the exact permutation distribution is
/// enumerated.
pub const EXACT_LIMIT: usize = 64;

/// How raw residuals are turned into non-negative errors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorTransform {
    /// `|actual - estimated|`
    Absolute,
    /// `(actual - estimated)^2`
    Squared,
}

impl ErrorTransform {
    /// Applies the transform to one raw residual.
    pub fn apply(&self, residual: f64) -> f64 {
        match self {
            ErrorTransform::Absolute => residual.abs(),
            ErrorTransform::Squared => residual * residual,
        }
    }
}

/// A sample of non-negative prediction errors from one model.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorSample {
    values: Vec<f64>,
    transform: ErrorTransform,
    label: String,
}

impl ErrorSample {
    /// Wraps already-transformed error magnitudes; every value must be
    /// finite and non-negative.
    pub fn new(
        values: Vec<f64>,
        transform: ErrorTransform,
        label: impl Into<String>,
    ) -> Result<Self> {
        if values.is_empty() {
            return Err(VolterraError::EmptySample);
        }
        for (index, v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(VolterraError::NonFiniteValue { index });
            }
            if *v < 0.0 {
                return Err(VolterraError::NegativeError { index });
            }
        }
        Ok(Self {
            values,
            transform,
            label: label.into(),
        })
    }

    /// Applies `transform` to raw signed residuals.
    pub fn from_raw_errors(
        residuals: &[f64],
        transform: ErrorTransform,
        label: impl Into<String>,
    ) -> Result<Self> {
        let values = residuals.iter().map(|r| transform.apply(*r)).collect();
        Self::new(values, transform, label)
    }

    /// Builds the sample from paired actual and estimated values.
    pub fn from_predictions(
        actual: &[f64],
        estimated: &[f64],
        transform: ErrorTransform,
        label: impl Into<String>,
    ) -> Result<Self> {
        if actual.len() != estimated.len() {
            return Err(VolterraError::LengthMismatch {
                left: actual.len(),
                right: estimated.len(),
            });
        }
        let residuals: Vec<f64> = actual.iter().zip(estimated).map(|(a, e)| a - e).collect();
        Self::from_raw_errors(&residuals, transform, label)
    }

    /// The transformed error values.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Number of errors in the sample.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    /// Always false: empty samples cannot be constructed.
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// The transform the values went through.
    pub fn transform(&self) -> ErrorTransform {
        self.transform
    }

    /// Label identifying the model that produced the errors.
    pub fn label(&self) -> &str {
        &self.label
    }

    /// Mean of the error values.
    pub fn mean(&self) -> f64 {
        crate::metrics::mean(&self.values)
    }
}

/// Empirical cumulative distribution function of a sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Ecdf {
    sorted: Vec<f64>,
}

impl Ecdf {
    /// ECDF of an error sample.
    pub fn from_sample(sample: &ErrorSample) -> Self {
        Self::from_values(sample.values()).expect("error samples are never empty")
    }

    /// ECDF of arbitrary finite values.
    pub fn from_values(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(VolterraError::EmptySample);
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(VolterraError::NonFiniteValue { index });
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(|a, b| a.total_cmp(b));
        Ok(Self { sorted })
    }

    /// Fraction of the sample less than or equal to `z`.
    pub fn evaluate(&self, z: f64) -> f64 {
        let count = self.sorted.partition_point(|v| *v <= z);
        count as f64 / self.sorted.len() as f64
    }

    /// The step points `(value, cumulative fraction)` at each distinct
    /// sample value, ascending.
    pub fn steps(&self) -> Vec<(f64, f64)> {
        let n = self.sorted.len() as f64;
        let mut out: Vec<(f64, f64)> = Vec::new();
        for (i, v) in self.sorted.iter().enumerate() {
            let frac = (i + 1) as f64 / n;
            match out.last_mut() {
                Some(last) if last.0 == *v => last.1 = frac,
                _ => out.push((*v, frac)),
            }
        }
        out
    }

    /// Number of underlying observations.
    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    /// Always false by construction.
    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }
}

/// Which alternative the test addresses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestDirection {
    /// The two error distributions differ.
    TwoSided,
    /// The first sample is stochastically smaller (its ECDF lies above),
    /// i.e. the first model is more accurate.
    OneSided,
}

/// How the p-value was computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PvalueMethod {
    /// Exact permutation enumeration.
    Exact,
    /// Large-sample limiting distribution.
    Asymptotic,
}

/// Outcome of one Kolmogorov-Smirnov comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KspaResult {
    /// Supremum statistic: `D` for two-sided, `D+` (floored at zero) for
    /// one-sided.
    pub statistic: f64,
    /// Probability of a statistic at least as large under exchangeability.
    pub p_value: f64,
    pub direction: TestDirection,
    pub method: PvalueMethod,
    pub n1: usize,
    pub n2: usize,
    /// Multiplicity-adjusted p-value, set when the result belongs to a family
    /// of simultaneous comparisons.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub adjusted_p: Option<f64>,
}

impl KspaResult {
    /// Returns a copy carrying the Bonferroni-adjusted p-value for a family
    /// of `family_size` simultaneous comparisons.
    pub fn with_adjustment(mut self, family_size: usize) -> Result<Self> {
        let adjusted = bonferroni(&[self.p_value], family_size)?;
        self.adjusted_p = Some(adjusted[0]);
        Ok(self)
    }
}

/// Pooled distinct values with cumulative counts from each sample, plus the
/// integer-numerator deviations at each boundary. Deviations are expressed
/// over the common denominator `n1 * n2` so all comparisons stay exact.
struct Pooled {
    group_counts: Vec<usize>,
    n1: usize,
    n2: usize,
    two_sided_num: i64,
    one_sided_num: i64,
}

fn pool(e1: &ErrorSample, e2: &ErrorSample) -> Pooled {
    let n1 = e1.len();
    let n2 = e2.len();
    let mut tagged: Vec<(f64, bool)> = e1
        .values()
        .iter()
        .map(|v| (*v, true))
        .chain(e2.values().iter().map(|v| (*v, false)))
        .collect();
    tagged.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut group_counts = Vec::new();
    let mut two_sided_num = 0i64;
    let mut one_sided_num = 0i64;
    let mut c1 = 0i64;
    let mut c2 = 0i64;
    let mut idx = 0;
    while idx < tagged.len() {
        let value = tagged[idx].0;
        let mut count = 0;
        while idx < tagged.len() && tagged[idx].0 == value {
            if tagged[idx].1 {
                c1 += 1;
            } else {
                c2 += 1;
            }
            count += 1;
            idx += 1;
        }
        group_counts.push(count);
        let signed = c1 * n2 as i64 - c2 * n1 as i64;
        two_sided_num = two_sided_num.max(signed.abs());
        one_sided_num = one_sided_num.max(signed);
    }
    one_sided_num = one_sided_num.max(0);
    Pooled {
        group_counts,
        n1,
        n2,
        two_sided_num,
        one_sided_num,
    }
}

/// Exact permutation p-value: the fraction of assignments of the pooled
/// values into groups of sizes `n1` and `n2` whose deviation reaches
/// `threshold_num` at some boundary. Counts are propagated per distinct
/// value, so tied observations are handled without enumeration blow-up.
fn exact_p(pooled: &Pooled, threshold_num: i64, one_sided: bool) -> f64 {
    let n1 = pooled.n1;
    let n2 = pooled.n2;
    let mut ways = vec![0.0f64; n1 + 1];
    ways[0] = 1.0;
    let mut processed = 0usize;
    for &count in &pooled.group_counts {
        let mut next = vec![0.0f64; n1 + 1];
        for (i, w) in ways.iter().enumerate() {
            if *w == 0.0 {
                continue;
            }
            for a in 0..=count.min(n1 - i) {
                let ni = i + a;
                let nj = processed + count - ni;
                if nj > n2 {
                    continue;
                }
                let c = binomial(count as u64, a as u64).expect("small binomial") as f64;
                next[ni] += w * c;
            }
        }
        processed += count;
        for (i, w) in next.iter_mut().enumerate() {
            if *w == 0.0 {
                continue;
            }
            let j = (processed - i) as i64;
            let signed = (i as i64) * n2 as i64 - j * n1 as i64;
            let dev = if one_sided { signed } else { signed.abs() };
            if dev >= threshold_num {
                *w = 0.0;
            }
        }
        ways = next;
    }
    let surviving = ways[n1];
    let total = binomial((n1 + n2) as u64, n1 as u64).expect("small binomial") as f64;
    1.0 - surviving / total
}

/// Two-sided asymptotic survival function `Q(t) = 2 sum (-1)^(j-1)
/// exp(-2 j^2 t^2)`, truncated once terms drop below 1e-12.
pub(crate) fn kolmogorov_q(t: f64) -> f64 {
    if t < 1e-8 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for j in 1..1000 {
        let term = (-2.0 * (j as f64) * (j as f64) * t * t).exp();
        sum += sign * term;
        if term < 1e-12 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

fn check_comparable(e1: &ErrorSample, e2: &ErrorSample) -> Result<()> {
    if e1.transform() != e2.transform() {
        return Err(VolterraError::InvalidConfig {
            reason: "error samples use different transforms".into(),
        });
    }
    Ok(())
}

/// Two-sided test of whether two error distributions differ.
pub fn kspa_two_sided(e1: &ErrorSample, e2: &ErrorSample) -> Result<KspaResult> {
    check_comparable(e1, e2)?;
    let pooled = pool(e1, e2);
    let n1 = pooled.n1;
    let n2 = pooled.n2;
    let nn = (n1 * n2) as f64;
    let statistic = pooled.two_sided_num as f64 / nn;
    let (p_value, method) = if n1 * n2 <= EXACT_LIMIT {
        (exact_p(&pooled, pooled.two_sided_num, false), PvalueMethod::Exact)
    } else {
        let t = (nn / (n1 + n2) as f64).sqrt() * statistic;
        (kolmogorov_q(t), PvalueMethod::Asymptotic)
    };
    Ok(KspaResult {
        statistic,
        p_value,
        direction: TestDirection::TwoSided,
        method,
        n1,
        n2,
        adjusted_p: None,
    })
}

/// One-sided test of whether the first sample's errors are stochastically
/// smaller, i.e. whether the first model predicts more accurately.
pub fn kspa_one_sided(e1: &ErrorSample, e2: &ErrorSample) -> Result<KspaResult> {
    check_comparable(e1, e2)?;
    let pooled = pool(e1, e2);
    let n1 = pooled.n1;
    let n2 = pooled.n2;
    let nn = (n1 * n2) as f64;
    let statistic = pooled.one_sided_num as f64 / nn;
    let (p_value, method) = if n1 * n2 <= EXACT_LIMIT {
        (exact_p(&pooled, pooled.one_sided_num, true), PvalueMethod::Exact)
    } else {
        let p = (-2.0 * statistic * statistic * nn / (n1 + n2) as f64).exp();
        (p.clamp(0.0, 1.0), PvalueMethod::Asymptotic)
    };
    Ok(KspaResult {
        statistic,
        p_value,
        direction: TestDirection::OneSided,
        method,
        n1,
        n2,
        adjusted_p: None,
    })
}

/// Bonferroni adjustment: each p-value is multiplied by `family_size` and
/// capped at one. `family_size` must cover at least the given p-values.
pub fn bonferroni(p_values: &[f64], family_size: usize) -> Result<Vec<f64>> {
    if family_size < p_values.len() {
        return Err(VolterraError::InvalidFamilySize {
            family_size,
            count: p_values.len(),
        });
    }
    for p in p_values {
        if !(p.is_finite() && (0.0..=1.0).contains(p)) {
            return Err(VolterraError::InvalidConfig {
                reason: format!("p-value {p} outside [0, 1]"),
            });
        }
    }
    Ok(p_values
        .iter()
        .map(|p| (p * family_size as f64).min(1.0))
        .collect())
}
