#![allow(dead_code)]

use std::collections::BTreeMap;

use dwde_core::environment::EnvKind;
use dwde_core::map::MapSpec;
use dwde_core::rational::{ratio, RatStr};
use dwde_core::{EnvironmentModel, MarkovIntervalMap, TransitionFunction};

pub fn doubling() -> MarkovIntervalMap {
    MarkovIntervalMap::uniform(2)
}

pub fn triple() -> MarkovIntervalMap {
    MarkovIntervalMap::uniform(3)
}

fn spec(bps: &[(i64, i64)], slopes: &[(i64, i64)], intercepts: &[(i64, i64)]) -> MapSpec {
    let conv = |v: &[(i64, i64)]| v.iter().map(|&(p, q)| RatStr(ratio(p, q))).collect();
    MapSpec {
        breakpoints: conv(bps),
        slopes: conv(slopes),
        intercepts: conv(intercepts),
    }
}

/// Full-branch with unequal cells [0, 1/5), [1/5, 1/2), [1/2, 1].
pub fn uneven3() -> MarkovIntervalMap {
    MarkovIntervalMap::from_spec(&MapSpec::full_branch(&[ratio(0, 1), ratio(1, 5), ratio(1, 2), ratio(1, 1)])).unwrap()
}

/// Tent map: the second branch is decreasing.
pub fn tent() -> MarkovIntervalMap {
    MarkovIntervalMap::from_spec(&spec(&[(0, 1), (1, 2), (1, 1)], &[(2, 1), (-2, 1)], &[(0, 1), (2, 1)])).unwrap()
}

/// a_0 = [0,1/4) -> [0,1], a_1 = [1/4,1/2) -> [0,1/2), a_2 = [1/2,1] -> [0,1].
pub fn partial() -> MarkovIntervalMap {
    MarkovIntervalMap::from_spec(&spec(
        &[(0, 1), (1, 4), (1, 2), (1, 1)],
        &[(4, 1), (2, 1), (2, 1)],
        &[(0, 1), (-1, 2), (-1, 1)],
    ))
    .unwrap()
}

/// Four cells of width 1/4; a_3 = [3/4, 1] maps onto a_0 ∪ a_1 only.
pub fn partial4() -> MarkovIntervalMap {
    MarkovIntervalMap::from_spec(&spec(
        &[(0, 1), (1, 4), (1, 2), (3, 4), (1, 1)],
        &[(4, 1), (4, 1), (4, 1), (2, 1)],
        &[(0, 1), (-1, 1), (-2, 1), (-3, 2)],
    ))
    .unwrap()
}

pub fn tf(jumps: &[i64]) -> TransitionFunction {
    TransitionFunction::new(jumps.to_vec())
}

pub fn fixed(support: &[&[i64]], function: usize, overrides: &[(i64, usize)]) -> EnvironmentModel {
    let kind = EnvKind::Fixed {
        function,
        overrides: overrides.iter().copied().collect::<BTreeMap<_, _>>(),
    };
    EnvironmentModel::new(support.iter().map(|j| tf(j)).collect(), kind, 0).unwrap()
}

pub fn iid(support: &[&[i64]], weights: &[(i64, i64)]) -> EnvironmentModel {
    EnvironmentModel::iid(
        support.iter().map(|j| tf(j)).collect(),
        weights.iter().map(|&(p, q)| ratio(p, q)).collect(),
        0,
    )
    .unwrap()
}

/// `C(n, k)` as u128.
pub fn binomial(n: u64, k: u64) -> u128 {
    (0..k).fold(1u128, |acc, i| acc * u128::from(n - i) / u128::from(i + 1))
}
