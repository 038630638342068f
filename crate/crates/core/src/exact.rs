//! Exact rational arithmetic helpers.
//!
//! Several claims verified by this crate are stated with zero tolerance
//! (kernel limit laws, the smoothing bound, SNR dominance chains, greedy
//! subset optimality). Those paths run on arbitrary-precision rationals and
//! only convert to `f64` at the API boundary. Every finite `f64` is itself a
//! dyadic rational, so converting float weights into `BigRational` is lossless
//! and a final exact renormalization makes weight vectors sum to exactly one.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Rational from an integer pair.
pub fn ratio(numer: i64, denom: i64) -> BigRational {
    BigRational::new(BigInt::from(numer), BigInt::from(denom))
}

/// Lossless conversion of a finite `f64` into a rational.
pub fn ratio_from_f64(x: f64) -> Result<BigRational> {
    BigRational::from_f64(x)
        .ok_or_else(|| Error::InvalidInput(format!("non-finite value {x} has no rational form")))
}

/// Boundary conversion back to `f64`.
pub fn ratio_to_f64(x: &BigRational) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// Converts nonnegative weights to rationals and renormalizes them to an
/// exact sum of one. Rejects negative weights, zero totals, and totals drifted
/// further than `tol` from one.
pub fn normalized_weights(weights: &[f64], tol: f64) -> Result<Vec<BigRational>> {
    if weights.is_empty() {
        return Err(Error::InvalidInput("empty weight vector".into()));
    }
    let mut exact = Vec::with_capacity(weights.len());
    for &w in weights {
        if !w.is_finite() || w < 0.0 {
            return Err(Error::InvalidInput(format!("negative weight {w}")));
        }
        exact.push(ratio_from_f64(w)?);
    }
    let total: BigRational = exact.iter().sum();
    if total.is_zero() {
        return Err(Error::InvalidInput("weights sum to zero".into()));
    }
    let drift = (ratio_to_f64(&total) - 1.0).abs();
    if drift > tol {
        return Err(Error::InvalidInput(format!(
            "weights sum to {} (|sum - 1| = {drift:.3e} exceeds {tol:.1e})",
            ratio_to_f64(&total)
        )));
    }
    Ok(exact.into_iter().map(|w| w / &total).collect())
}

/// Exact integer power of a rational.
pub fn ratio_pow(base: &BigRational, exp: u32) -> BigRational {
    base.pow(exp as i32)
}

/// `|a - b|` on rationals.
pub fn ratio_abs_diff(a: &BigRational, b: &BigRational) -> BigRational {
    (a - b).abs()
}

/// Neumaier-compensated summation for the float paths that mix non-dyadic
/// weights.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}
