use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::One;
use serde::{Deserialize, Serialize};

use super::ExactError;
use crate::environment::TransitionFunction;
use crate::map::{MapError, MarkovIntervalMap, DEFAULT_ENUMERATION_CAP};
use crate::rational::RatStr;

/// Divergence direction predicted by the certificate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    #[serde(rename = "+1")]
    Plus,
    #[serde(rename = "-1")]
    Minus,
    #[serde(rename = "none")]
    None,
}

impl std::fmt::Display for Direction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Direction::Plus => "+1",
            Direction::Minus => "-1",
            Direction::None => "none",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransienceCertificate {
    pub holds: bool,
    pub inf_h: f64,
    /// `½ ln(4 r (#β − r))`.
    pub threshold: f64,
    pub r: usize,
    pub cells: usize,
    /// `e^{2 inf h}`, the exact left side of the comparison.
    pub min_slope_squared: RatStr,
    /// `4 r (#β − r)`, the exact right side.
    pub product: u64,
    pub direction: Direction,
}

/// Decides `inf h > ½ ln 4r(#β−r)` exactly, as `min_j s_j² > 4r(#β−r)`.
///
/// Every function in `support` must map exactly `r` cells to `+1` and the
/// rest to `-1`.
pub fn transience_certificate(
    map: &MarkovIntervalMap,
    r: usize,
    support: &[TransitionFunction],
) -> Result<TransienceCertificate, ExactError> {
    let cells = map.len();
    if !map.is_full_branch() {
        return Err(ExactError::HypothesisViolated("base map is not full-branch".into()));
    }
    if r > cells {
        return Err(ExactError::HypothesisViolated(format!("r = {r} exceeds #β = {cells}")));
    }
    for (idx, g) in support.iter().enumerate() {
        if g.len() != cells {
            return Err(ExactError::HypothesisViolated(format!(
                "support function {idx} has {} cells, map has {cells}",
                g.len()
            )));
        }
        if !g.is_unit() {
            return Err(ExactError::HypothesisViolated(format!("support function {idx} has a jump other than ±1")));
        }
        if g.count(1) != r {
            return Err(ExactError::HypothesisViolated(format!(
                "support function {idx} maps {} cells to +1, expected r = {r}",
                g.count(1)
            )));
        }
    }
    let bounds = map.gibbs_bounds();
    let product = 4 * (r * (cells - r)) as u64;
    let min_slope_squared = &bounds.min_slope * &bounds.min_slope;
    let holds = min_slope_squared > BigRational::from_integer(product.into());
    let direction = match (holds, (2 * r).cmp(&cells)) {
        (true, std::cmp::Ordering::Greater) => Direction::Plus,
        (true, std::cmp::Ordering::Less) => Direction::Minus,
        _ => Direction::None,
    };
    Ok(TransienceCertificate {
        holds,
        inf_h: bounds.inf_h,
        threshold: 0.5 * (product as f64).ln(),
        r,
        cells,
        min_slope_squared: RatStr(min_slope_squared),
        product,
        direction,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReturnCylinderCount {
    pub n: usize,
    pub enumerated: u128,
    /// `r^n (#β−r)^n binom(2n, n)`.
    #[serde(with = "decimal")]
    pub bound: BigUint,
}

mod decimal {
    use num_bigint::BigUint;
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(value: &BigUint, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&value.to_str_radix(10))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigUint, D::Error> {
        let text = String::deserialize(d)?;
        BigUint::parse_bytes(text.as_bytes(), 10).ok_or_else(|| D::Error::custom(format!("bad integer {text:?}")))
    }
}

/// Rank-`2n+1` cylinders starting in element 0 and returning to
/// element 0 at site 0, for the fixed environment `plus_minus(#β, r)`.
pub fn return_cylinder_count(map: &MarkovIntervalMap, r: usize, n: usize) -> Result<ReturnCylinderCount, ExactError> {
    if r > map.len() {
        return Err(ExactError::HypothesisViolated(format!("r = {r} exceeds #β = {}", map.len())));
    }
    return_cylinder_count_for(map, &TransitionFunction::plus_minus(map.len(), r), 0, n)
}

/// As [`return_cylinder_count`] for an arbitrary `±1` function `f` and
/// start element `a`.
pub fn return_cylinder_count_for(
    map: &MarkovIntervalMap,
    f: &TransitionFunction,
    a: usize,
    n: usize,
) -> Result<ReturnCylinderCount, ExactError> {
    let cells = map.len();
    if !map.is_full_branch() {
        return Err(ExactError::HypothesisViolated("base map is not full-branch".into()));
    }
    if f.len() != cells || !f.is_unit() {
        return Err(ExactError::HypothesisViolated("transition function must have ±1 jumps on every cell".into()));
    }
    if a >= cells {
        return Err(ExactError::Map(MapError::BadSymbol(a)));
    }
    let rank = 2 * n + 1;
    let words = (cells as u128).checked_pow(2 * n as u32).unwrap_or(u128::MAX);
    if words > DEFAULT_ENUMERATION_CAP {
        return Err(ExactError::Map(MapError::EnumerationTooLarge {
            rank,
            count: words,
            cap: DEFAULT_ENUMERATION_CAP,
        }));
    }
    let mut enumerated = 0u128;
    map.for_each_admissible(&[a], rank, |w| {
        if w[rank - 1] == a {
            let site: i64 = w[..rank - 1].iter().map(|&s| f.jump(s)).sum();
            if site == 0 {
                enumerated += 1;
            }
        }
    });
    let r = f.count(1);
    let base = BigUint::from(r) * BigUint::from(cells - r);
    let bound = num_traits::pow(base, n) * binomial(2 * n, n);
    Ok(ReturnCylinderCount { n, enumerated, bound })
}

fn binomial(n: usize, k: usize) -> BigUint {
    let mut acc = BigUint::one();
    for i in 0..k {
        acc = acc * BigUint::from(n - i) / BigUint::from(i + 1);
    }
    acc
}
