//! Parity-constrained signed-sum maxima.
//!
//! `s_odd(a)` is the largest `Σ ±a_i` over sign vectors with an odd number of
//! minus signs, `s_even(a)` the same over an even number. Both have closed
//! forms in terms of `Σ|a_i|`, the smallest `|a_i|` and the sign of the
//! product; [`s_parity_exhaustive`] enumerates sign vectors directly.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Longest input accepted by the exhaustive enumeration (2^24 sign vectors).
pub const MAX_EXHAUSTIVE_LEN: usize = 24;

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum SignedSumError {
    #[error("signed sums need at least one value")]
    EmptyInput,
    #[error("exhaustive enumeration limited to {MAX_EXHAUSTIVE_LEN} values (got {0})")]
    TooLong(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
}

/// Sign of the product of all values: `None` when any value is zero.
fn product_sign(values: &[f64]) -> Option<bool> {
    if values.contains(&0.0) {
        return None;
    }
    let negatives = values.iter().filter(|&&a| a < 0.0).count();
    Some(negatives % 2 == 0)
}

fn abs_sum_and_min(values: &[f64]) -> (f64, f64) {
    values.iter().fold((0.0, f64::INFINITY), |(sum, min), &a| {
        (sum + a.abs(), min.min(a.abs()))
    })
}

/// Closed form for either parity.
pub fn s_parity(values: &[f64], parity: Parity) -> Result<f64, SignedSumError> {
    if values.is_empty() {
        return Err(SignedSumError::EmptyInput);
    }
    let (sum, min) = abs_sum_and_min(values);
    // The unconstrained optimum flips exactly the negative entries; its parity
    // matches the request unless the product has the wrong sign.
    let penalized = match (product_sign(values), parity) {
        (None, _) => false,
        (Some(positive), Parity::Odd) => positive,
        (Some(positive), Parity::Even) => !positive,
    };
    Ok(if penalized { sum - 2.0 * min } else { sum })
}

pub fn s_odd(values: &[f64]) -> Result<f64, SignedSumError> {
    s_parity(values, Parity::Odd)
}

pub fn s_even(values: &[f64]) -> Result<f64, SignedSumError> {
    s_parity(values, Parity::Even)
}

/// Brute-force maximum over every sign vector of the requested parity.
pub fn s_parity_exhaustive(values: &[f64], parity: Parity) -> Result<f64, SignedSumError> {
    if values.is_empty() {
        return Err(SignedSumError::EmptyInput);
    }
    if values.len() > MAX_EXHAUSTIVE_LEN {
        return Err(SignedSumError::TooLong(values.len()));
    }
    let want_odd = parity == Parity::Odd;
    let mut best = f64::NEG_INFINITY;
    for mask in 0u32..(1u32 << values.len()) {
        if (mask.count_ones() % 2 == 1) != want_odd {
            continue;
        }
        let total: f64 = values
            .iter()
            .enumerate()
            .map(|(i, &a)| if mask >> i & 1 == 1 { -a } else { a })
            .sum();
        best = best.max(total);
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12
    }

    #[test]
    fn odd_examples() {
        assert!(close(s_odd(&[1.0, 1.0, 1.0]).unwrap(), 1.0));
        assert!(close(s_odd(&[0.5, -0.3, 0.8]).unwrap(), 1.6));
        assert!(close(
            s_odd(&[-1.0, -1.0, -1.0, 1.0, 1.0, 1.0]).unwrap(),
            6.0
        ));
    }

    #[test]
    fn even_examples() {
        assert!(close(s_even(&[1.0, 1.0, 1.0]).unwrap(), 3.0));
        assert!(close(s_even(&[0.5, -0.3, 0.8]).unwrap(), 1.0));
    }

    #[test]
    fn single_entry_follows_enumeration() {
        // Only the all-plus vector has even parity.
        assert_eq!(s_parity_exhaustive(&[-0.7], Parity::Even).unwrap(), -0.7);
        assert_eq!(s_even(&[-0.7]).unwrap(), -0.7);
        assert_eq!(s_odd(&[-0.7]).unwrap(), 0.7);
        assert_eq!(s_odd(&[0.7]).unwrap(), -0.7);
    }

    #[test]
    fn zero_entry_absorbs_parity() {
        let values = [0.0, -0.4, 0.9];
        assert!(close(s_odd(&values).unwrap(), 1.3));
        assert!(close(s_even(&values).unwrap(), 1.3));
        assert_eq!(s_odd(&[0.0]).unwrap(), 0.0);
    }

    #[test]
    fn exhaustive_matches_examples() {
        assert!(close(
            s_parity_exhaustive(&[1.0, 1.0, 1.0], Parity::Odd).unwrap(),
            1.0
        ));
        assert!(close(
            s_parity_exhaustive(&[0.5, -0.3, 0.8], Parity::Even).unwrap(),
            1.0
        ));
        assert!(close(
            s_parity_exhaustive(&[0.5, -0.3, 0.8], Parity::Odd).unwrap(),
            1.6
        ));
        assert!(close(
            s_parity_exhaustive(&[-1.0, -1.0, -1.0, 1.0, 1.0, 1.0], Parity::Odd).unwrap(),
            6.0
        ));
    }

    #[test]
    fn errors() {
        assert_eq!(s_odd(&[]), Err(SignedSumError::EmptyInput));
        assert_eq!(s_even(&[]), Err(SignedSumError::EmptyInput));
        assert_eq!(
            s_parity_exhaustive(&[], Parity::Odd),
            Err(SignedSumError::EmptyInput)
        );
        assert_eq!(
            s_parity_exhaustive(&[0.1; 25], Parity::Odd),
            Err(SignedSumError::TooLong(25))
        );
    }
}
