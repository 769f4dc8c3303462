//! RMSE, basis-dimension counting and small statistical helpers.

use crate::error::{Result, VolterraError};

/// Root mean squared error between paired actual and estimated values.
pub fn rmse(actual: &[f64], estimated: &[f64]) -> Result<f64> {
    if actual.len() != estimated.len() {
        return Err(VolterraError::LengthMismatch {
            left: actual.len(),
            right: estimated.len(),
        });
    }
    if actual.is_empty() {
        return Err(VolterraError::EmptyInput);
    }
    let sum: f64 = actual
        .iter()
        .zip(estimated)
        .map(|(a, e)| {
            let d = a - e;
            d * d
        })
        .sum();
    Ok((sum / actual.len() as f64).sqrt())
}

/// Number of monomials of total degree at most `order` in `memory` variables,
/// which is `C(memory + order, order)`. This is the size of the full Volterra
/// basis a polynomial kernel of that order spans.
pub fn volterra_dimension(memory: usize, order: usize) -> Result<u64> {
    if memory == 0 {
        return Err(VolterraError::InvalidMemory);
    }
    binomial((memory + order) as u64, order as u64).ok_or(VolterraError::Overflow)
}

/// Binomial coefficient with overflow detection.
pub fn binomial(n: u64, k: u64) -> Option<u64> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.checked_mul((n - i) as u128)?;
        acc /= (i + 1) as u128;
        if acc > u64::MAX as u128 {
            return None;
        }
    }
    Some(acc as u64)
}

/// Arithmetic mean; zero for an empty slice.
pub fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample standard deviation with denominator `n - 1`; zero when fewer than
/// two values are given.
pub fn std_dev(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    let ss: f64 = values
        .iter()
        .map(|v| {
            let d = v - m;
            d * d
        })
        .sum();
    (ss / (values.len() - 1) as f64).sqrt()
}

/// Median of a slice; zero for an empty slice. Does not require sorted input.
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("median input must be finite"));
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOL: f64 = 1e-12;

    #[test]
    fn rmse_matches_hand_computation() {
        // sqrt((3^2 + 4^2) / 2) = sqrt(12.5)
        let got = rmse(&[0.0, 0.0], &[3.0, 4.0]).unwrap();
        assert!((got - 12.5f64.sqrt()).abs() < TOL);
    }

    #[test]
    fn rmse_is_zero_on_identical_inputs() {
        let xs = [1.5, -2.0, 7.25];
        assert_eq!(rmse(&xs, &xs).unwrap(), 0.0);
    }

    #[test]
    fn rmse_rejects_mismatched_or_empty_input() {
        assert_eq!(
            rmse(&[1.0], &[1.0, 2.0]),
            Err(VolterraError::LengthMismatch { left: 1, right: 2 })
        );
        assert_eq!(rmse(&[], &[]), Err(VolterraError::EmptyInput));
    }

    #[test]
    fn volterra_dimension_matches_known_values() {
        assert_eq!(volterra_dimension(2, 2).unwrap(), 6);
        assert_eq!(volterra_dimension(10, 10).unwrap(), 184_756);
        assert_eq!(volterra_dimension(1, 5).unwrap(), 6);
        assert_eq!(volterra_dimension(3, 0).unwrap(), 1);
    }

    #[test]
    fn volterra_dimension_equals_sum_over_degrees() {
        // C(m + p, p) must equal sum over n of C(m + n - 1, n), the count of
        // ordered-degree blocks collapsed to multisets.
        for m in 1..=12u64 {
            for p in 0..=8u64 {
                let direct = volterra_dimension(m as usize, p as usize).unwrap();
                let summed: u64 = (0..=p).map(|n| binomial(m + n - 1, n).unwrap()).sum();
                assert_eq!(direct, summed, "m={m} p={p}");
            }
        }
    }

    #[test]
    fn volterra_dimension_flags_overflow_and_zero_memory() {
        assert_eq!(volterra_dimension(0, 2), Err(VolterraError::InvalidMemory));
        assert_eq!(volterra_dimension(500, 200), Err(VolterraError::Overflow));
    }

    #[test]
    fn binomial_edge_cases() {
        assert_eq!(binomial(5, 0), Some(1));
        assert_eq!(binomial(5, 5), Some(1));
        assert_eq!(binomial(5, 6), Some(0));
        assert_eq!(binomial(20, 10), Some(184_756));
        assert_eq!(binomial(u64::MAX, 2), None);
    }

    #[test]
    fn std_dev_uses_sample_denominator() {
        let got = std_dev(&[2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0]);
        assert!((got - (32.0f64 / 7.0).sqrt()).abs() < TOL);
        assert_eq!(std_dev(&[3.0]), 0.0);
    }

    #[test]
    fn median_handles_even_and_odd_lengths() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 3.0, 2.0]), 2.5);
        assert_eq!(median(&[]), 0.0);
    }
}
