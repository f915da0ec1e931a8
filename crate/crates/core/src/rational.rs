//! Exact rational helpers shared by every module.
//!
//! Measures, probabilities and map coefficients are all [`BigRational`]. The
//! textual form used in config documents and reports is `"p/q"` (or a bare
//! integer when the denominator is one).

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

pub use num_rational::BigRational as Rational;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("cannot parse {0:?} as an exact rational")]
pub struct ParseRationalError(pub String);

/// Parses `"p/q"`, `"-p/q"` or an integer `"p"`.
pub fn parse(text: &str) -> Result<BigRational, ParseRationalError> {
    let err = || ParseRationalError(text.to_owned());
    let trimmed = text.trim();
    let (num, den) = match trimmed.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (trimmed, "1"),
    };
    let num: BigInt = num.parse().map_err(|_| err())?;
    let den: BigInt = den.parse().map_err(|_| err())?;
    if den.is_zero() {
        return Err(err());
    }
    Ok(BigRational::new(num, den))
}

/// Canonical text form: reduced, denominator positive, integers without `/1`.
pub fn format(value: &BigRational) -> String {
    if value.denom().is_one() {
        value.numer().to_string()
    } else {
        format!("{}/{}", value.numer(), value.denom())
    }
}

pub fn to_f64(value: &BigRational) -> f64 {
    value.to_f64().unwrap_or_else(|| {
        // Huge numerators/denominators overflow the direct conversion; fall
        // back to a ratio of scaled magnitudes.
        let n = value.numer();
        let d = value.denom();
        let shift = n.bits().max(d.bits()).saturating_sub(1000) as usize;
        let n = (n >> shift).to_f64().unwrap_or(0.0);
        let d = (d >> shift).to_f64().unwrap_or(f64::INFINITY);
        n / d
    })
}

pub fn int(value: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(value))
}

pub fn ratio(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

pub fn abs(value: &BigRational) -> BigRational {
    value.abs()
}

/// Integer weights `w_j` with `w_j / Σw = probs_j`, scaled to the common
/// denominator. Returns `None` when the scaled values do not fit in `u64`.
pub fn common_denominator_weights(probs: &[BigRational]) -> Option<Vec<u64>> {
    let lcm = probs.iter().fold(BigInt::one(), |acc, p| {
        num_integer::Integer::lcm(&acc, p.denom())
    });
    probs
        .iter()
        .map(|p| (p.numer() * (&lcm / p.denom())).to_u64())
        .collect()
}

/// Wrapper that (de)serializes a rational as its `"p/q"` string.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RatStr(pub BigRational);

impl fmt::Debug for RatStr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", format(&self.0))
    }
}

impl fmt::Display for RatStr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&format(&self.0))
    }
}

impl From<BigRational> for RatStr {
    fn from(value: BigRational) -> Self {
        RatStr(value)
    }
}

impl Serialize for RatStr {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&format(&self.0))
    }
}

impl<'de> Deserialize<'de> for RatStr {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        parse(&text).map(RatStr).map_err(serde::de::Error::custom)
    }
}

/// An exact value together with its decimal approximation, for JSON reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactValue {
    pub exact: RatStr,
    pub approx: f64,
}

impl From<&BigRational> for ExactValue {
    fn from(value: &BigRational) -> Self {
        ExactValue {
            exact: RatStr(value.clone()),
            approx: to_f64(value),
        }
    }
}

impl From<BigRational> for ExactValue {
    fn from(value: BigRational) -> Self {
        ExactValue::from(&value)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_format() {
        assert_eq!(parse("2/4").unwrap(), ratio(1, 2));
        assert_eq!(parse(" -3 / 9").unwrap(), ratio(-1, 3));
        assert_eq!(parse("7").unwrap(), int(7));
        assert_eq!(format(&ratio(6, -4)), "-3/2");
        assert_eq!(format(&int(5)), "5");
        assert!(parse("1/0").is_err());
        assert!(parse("x/2").is_err());
    }

    #[test]
    fn weights_share_denominator() {
        let w = common_denominator_weights(&[ratio(1, 2), ratio(1, 3), ratio(1, 6)]).unwrap();
        assert_eq!(w, vec![3, 2, 1]);
    }

    #[test]
    fn huge_values_convert() {
        let big = BigRational::new(BigInt::from(1) << 3000usize, (BigInt::from(1) << 3001usize) + 1);
        assert!((to_f64(&big) - 0.5).abs() < 1e-12);
    }
}
