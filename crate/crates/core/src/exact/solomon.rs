use std::collections::BTreeMap;

use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use super::ExactError;
use crate::environment::{EnvKind, EnvironmentModel, TransitionFunction};
use crate::map::MarkovIntervalMap;
use crate::rational;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trend {
    Left,
    Right,
    Recurrent,
}

impl std::fmt::Display for Trend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Trend::Left => "left",
            Trend::Right => "right",
            Trend::Recurrent => "recurrent",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolomonVerdict {
    /// `E ln((1−α)/α)`.
    pub expectation: f64,
    pub verdict: Trend,
    /// True when the law of α is invariant under `α ↦ 1−α`, which makes the
    /// expectation zero exactly.
    pub exact_zero: bool,
}

const TOLERANCE: f64 = 1e-12;

/// Solomon's criterion for the nearest-neighbour walk with rightward
/// probabilities `α` drawn from `support` (pairs `(α, weight)`).
pub fn solomon_classifier(support: &[(BigRational, BigRational)]) -> Result<SolomonVerdict, ExactError> {
    let zero = BigRational::zero();
    let one = BigRational::one();
    let mut total = BigRational::zero();
    let mut law: BTreeMap<BigRational, BigRational> = BTreeMap::new();
    for (alpha, weight) in support {
        if alpha <= &zero || alpha >= &one {
            return Err(ExactError::DegenerateAlpha(rational::format(alpha)));
        }
        if weight < &zero {
            return Err(ExactError::InvalidInput("negative weight".into()));
        }
        total += weight;
        *law.entry(alpha.clone()).or_insert_with(BigRational::zero) += weight;
    }
    if total != one {
        return Err(ExactError::InvalidInput(format!(
            "weights sum to {}, not 1",
            rational::format(&total)
        )));
    }
    let exact_zero = law
        .iter()
        .all(|(alpha, w)| law.get(&(&one - alpha)).is_some_and(|m| m == w));
    let expectation: f64 = if exact_zero {
        0.0
    } else {
        law.iter()
            .map(|(alpha, w)| {
                let a = rational::to_f64(alpha);
                rational::to_f64(w) * ((1.0 - a) / a).ln()
            })
            .sum()
    };
    let verdict = if exact_zero || expectation.abs() <= TOLERANCE {
        Trend::Recurrent
    } else if expectation < 0.0 {
        Trend::Right
    } else {
        Trend::Left
    };
    Ok(SolomonVerdict {
        expectation,
        verdict,
        exact_zero,
    })
}

/// Law of the per-site rightward probability `α_i = m(f_i = +1)` for a
/// full-branch map and a stationary environment model with `±1` jumps.
pub fn alpha_support(
    map: &MarkovIntervalMap,
    model: &EnvironmentModel,
) -> Result<Vec<(BigRational, BigRational)>, ExactError> {
    if !map.is_full_branch() {
        return Err(ExactError::UnsupportedBase);
    }
    if !model.support().iter().all(TransitionFunction::is_unit) {
        return Err(ExactError::UnsupportedJumps);
    }
    let alpha = |g: &TransitionFunction| -> BigRational {
        map.measures()
            .iter()
            .enumerate()
            .filter(|&(j, _)| g.jump(j) == 1)
            .map(|(_, m)| m.clone())
            .sum()
    };
    let support = model.support();
    let weights: Vec<BigRational> = match model.kind() {
        EnvKind::Iid { weights } => weights.clone(),
        EnvKind::Markov { stationary, .. } => stationary.clone(),
        EnvKind::Fixed { function, overrides } if overrides.is_empty() => {
            let mut w = vec![BigRational::zero(); support.len()];
            w[*function] = BigRational::one();
            w
        }
        EnvKind::Periodic { pattern } => {
            let mut w = vec![BigRational::zero(); support.len()];
            let share = BigRational::new(1.into(), (pattern.len() as i64).into());
            for &idx in pattern {
                w[idx] += &share;
            }
            w
        }
        other => {
            return Err(ExactError::InvalidInput(format!(
                "a {} environment has no stationary site law",
                other.name()
            )))
        }
    };
    Ok(support
        .iter()
        .zip(weights)
        .filter(|(_, w)| !w.is_zero())
        .map(|(g, w)| (alpha(g), w))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, ratio};

    #[test]
    fn classifier_examples() {
        let v = solomon_classifier(&[(ratio(2, 3), int(1))]).unwrap();
        assert_eq!(v.verdict, Trend::Right);
        assert!((v.expectation - 0.5f64.ln()).abs() < 1e-12);

        let v = solomon_classifier(&[(ratio(1, 5), ratio(1, 2)), (ratio(4, 5), ratio(1, 2))]).unwrap();
        assert_eq!((v.verdict, v.exact_zero, v.expectation), (Trend::Recurrent, true, 0.0));

        let v = solomon_classifier(&[(ratio(1, 4), int(1))]).unwrap();
        assert_eq!(v.verdict, Trend::Left);
        assert!((v.expectation - 3f64.ln()).abs() < 1e-12);

        assert!(matches!(
            solomon_classifier(&[(int(1), int(1))]),
            Err(ExactError::DegenerateAlpha(_))
        ));
        assert!(matches!(
            solomon_classifier(&[(ratio(1, 2), ratio(1, 2))]),
            Err(ExactError::InvalidInput(_))
        ));
    }

    #[test]
    fn alpha_support_of_iid_model() {
        let map = MarkovIntervalMap::uniform(3);
        let model = EnvironmentModel::iid(
            vec![TransitionFunction::plus_minus(3, 2), TransitionFunction::plus_minus(3, 1)],
            vec![ratio(3, 4), ratio(1, 4)],
            0,
        )
        .unwrap();
        assert_eq!(
            alpha_support(&map, &model).unwrap(),
            vec![(ratio(2, 3), ratio(3, 4)), (ratio(1, 3), ratio(1, 4))]
        );
    }
}
