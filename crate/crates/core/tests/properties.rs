mod common;

use std::collections::BTreeMap;

use common::*;
use dwde_core::environment::EnvKind;
use dwde_core::exact::{build_site_chain, first_passage_toward, path_counts, Boundary};
use dwde_core::map::CylinderWord;
use dwde_core::rational::{self, ratio, Rational};
use dwde_core::structure::build_skew_graph;
use dwde_core::walk::{simulate, SimulateOptions, Start};
use dwde_core::{EnvironmentModel, MarkovIntervalMap, Mode, WalkState};
use num_traits::{One, Zero};
use proptest::prelude::*;

fn any_map() -> impl Strategy<Value = MarkovIntervalMap> {
    prop_oneof![
        Just(doubling()),
        Just(triple()),
        Just(uneven3()),
        Just(tent()),
        Just(partial()),
        Just(partial4()),
    ]
}

/// Increasing breakpoints 0 < b_1 < ... < 1 with small denominators.
fn full_branch_map() -> impl Strategy<Value = MarkovIntervalMap> {
    prop::collection::btree_set(1i64..24, 1..4).prop_map(|cuts| {
        let mut bps = vec![Rational::zero()];
        bps.extend(cuts.into_iter().map(|c| ratio(c, 24)));
        bps.push(Rational::one());
        MarkovIntervalMap::from_spec(&dwde_core::map::MapSpec::full_branch(&bps)).unwrap()
    })
}

fn jumps(cells: usize, bound: i64) -> impl Strategy<Value = Vec<i64>> {
    prop::collection::vec(-bound..=bound, cells)
}

/// A periodic environment with random functions of jump size at most 2.
fn periodic_env(cells: usize) -> impl Strategy<Value = EnvironmentModel> {
    (prop::collection::vec(jumps(cells, 2), 1..4), prop::collection::vec(0usize..3, 1..5)).prop_map(
        |(support, pattern)| {
            let n = support.len();
            let pattern = pattern.into_iter().map(|p| p % n).collect();
            EnvironmentModel::new(
                support.into_iter().map(dwde_core::TransitionFunction::new).collect(),
                EnvKind::Periodic { pattern },
                0,
            )
            .unwrap()
        },
    )
}

fn map_and_env() -> impl Strategy<Value = (MarkovIntervalMap, EnvironmentModel)> {
    any_map().prop_flat_map(|map| {
        let k = map.len();
        (Just(map), periodic_env(k))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn cylinder_measures_sum_to_one(map in any_map(), n in 1usize..7) {
        let mut total = Rational::zero();
        map.for_each_admissible(&[], n, |w| total += map.cylinder_measure(&CylinderWord(w.to_vec())).unwrap());
        prop_assert_eq!(total, Rational::one());
    }

    #[test]
    fn random_full_branch_cylinders_sum_to_one(map in full_branch_map(), n in 1usize..6) {
        let words = map.enumerate_cylinders(n).unwrap();
        prop_assert_eq!(words.len() as u128, (map.len() as u128).pow(n as u32));
        let total: Rational = words.iter().map(|w| map.cylinder_measure(w).unwrap()).sum();
        prop_assert_eq!(total, Rational::one());
    }

    #[test]
    fn cylinder_interval_length_is_its_measure(map in any_map(), word in prop::collection::vec(0usize..4, 1..6)) {
        let word = CylinderWord(word.into_iter().map(|s| s % map.len()).collect());
        let m = map.cylinder_measure(&word).unwrap();
        match map.cylinder_interval(&word).unwrap() {
            Some((lo, hi)) => prop_assert_eq!(hi - lo, m),
            None => prop_assert!(m.is_zero()),
        }
    }

    /// Site-path probabilities from the chain equal sums of cylinder
    /// measures over the words producing that path.
    #[test]
    fn path_probability_matches_enumeration((map, model) in map_and_env(), len in 1usize..6, seed in 0u64..4) {
        let env = model.realize(seed);
        let joint = !map.is_full_branch();
        let chain = build_site_chain(&map, &env, 2 * len as i64 + 2, Boundary::Absorb, joint).unwrap();
        let mut by_path: BTreeMap<Vec<i64>, Rational> = BTreeMap::new();
        map.for_each_admissible(&[], len, |w| {
            let mut sites = vec![0i64];
            for &s in w {
                let here = *sites.last().unwrap();
                sites.push(here + env.env_at(here).jump(s));
            }
            *by_path.entry(sites).or_insert_with(Rational::zero) += map.cylinder_measure(&CylinderWord(w.to_vec())).unwrap();
        });
        // The chain's path probability covers len steps, i.e. rank-len words.
        for (path, mass) in &by_path {
            prop_assert_eq!(&chain.path_probability(path).unwrap(), mass);
        }
        let total: Rational = by_path.values().sum();
        prop_assert_eq!(total, Rational::one());
    }

    #[test]
    fn path_counts_match_brute_force(n in 0usize..6, k in 1usize..9) {
        let len = 2 * n + k;
        let mut count = 0u64;
        for mask in 0u32..(1 << len) {
            let mut pos = 0i64;
            let mut ok = true;
            for t in 0..len {
                pos += if mask >> t & 1 == 1 { 1 } else { -1 };
                let last = t + 1 == len;
                if last {
                    ok &= pos == -(k as i64);
                } else if pos >= 0 || pos <= -(k as i64) {
                    ok = false;
                    break;
                }
            }
            count += u64::from(ok);
        }
        let table = path_counts(n, k);
        prop_assert_eq!(table.get(n, k).clone(), num_bigint::BigUint::from(count));
    }

    #[test]
    fn return_curve_is_monotone((map, model) in map_and_env(), seed in 0u64..4) {
        let env = model.realize(seed);
        let chain = build_site_chain(&map, &env, 40, Boundary::Absorb, !map.is_full_branch()).unwrap();
        let curve = chain.return_curve::<Rational>(0, 16).unwrap();
        prop_assert!(curve.windows(2).all(|w| w[0] <= w[1]));
        prop_assert!(curve.iter().all(|p| *p >= Rational::zero() && *p <= Rational::one()));
    }

    /// Once the window exceeds the reach of the walk, the truncated return
    /// probability no longer depends on it.
    #[test]
    fn return_probability_is_window_invariant((map, model) in map_and_env(), extra in 0i64..10) {
        let env = model.realize(1);
        let joint = !map.is_full_branch();
        let horizon = 10u64;
        let a = build_site_chain(&map, &env, 21, Boundary::Absorb, joint).unwrap();
        let b = build_site_chain(&map, &env, 21 + extra, Boundary::Absorb, joint).unwrap();
        prop_assert_eq!(a.return_prob_by_time(0, horizon).unwrap(), b.return_prob_by_time(0, horizon).unwrap());
    }

    #[test]
    fn symmetric_gamblers_ruin_is_one_half(half in 1i64..=100) {
        let model = EnvironmentModel::fixed(dwde_core::TransitionFunction::plus_minus(2, 1));
        let env = model.realize(0);
        let chain = build_site_chain(&doubling(), &env, half + 1, Boundary::Absorb, false).unwrap();
        prop_assert_eq!(chain.hit_before(0, -half, half).unwrap(), ratio(1, 2));
    }

    /// Reflecting the environment swaps the two first-passage directions.
    #[test]
    fn first_passage_mirror(signs in prop::collection::vec(prop::bool::ANY, 3), k in 1i64..4, seed in 0u64..8) {
        let g: Vec<i64> = signs.iter().map(|&s| if s { 1 } else { -1 }).collect();
        let h: Vec<i64> = g.iter().rev().copied().collect();
        let model = iid(&[&g, &h], &[(1, 3), (2, 3)]);
        let map = triple();
        let env = model.realize(seed);
        let mirrored = model.mirrored().realize(seed);
        let left = first_passage_toward(&map, &env, -k, 6).unwrap();
        let right = first_passage_toward(&map, &mirrored, k, 6).unwrap();
        prop_assert_eq!(&left.measure, &right.measure);
        prop_assert_eq!(&left.bound, &right.bound);
        if let Some(bound) = &left.bound {
            prop_assert!(left.measure <= *bound);
        }
    }

    /// Starting at site k in ω is starting at 0 in the shifted environment,
    /// translated by k.
    #[test]
    fn shift_identity_exact(k in -500i64..500, p in 1i64..1000, seed in 0u64..1000) {
        let map = triple();
        let model = iid(&[&[1, 1, -1], &[1, -1, 1], &[-1, -2, 2]], &[(1, 3), (1, 3), (1, 3)]);
        let env = model.realize(seed);
        let x = ratio(p, 1009);
        let options = SimulateOptions::full_path();
        let direct = simulate(&map, &env, &Start::Point(WalkState::new(x.clone(), k)), 200, Mode::Exact, 0, &options).unwrap();
        let shifted = simulate(&map, &env.shift(k), &Start::Point(WalkState::new(x, 0)), 200, Mode::Exact, 0, &options).unwrap();
        let translated: Vec<i64> = shifted.path.iter().map(|s| s + k).collect();
        prop_assert_eq!(direct.path, translated);
    }

    #[test]
    fn speed_bound((map, model) in map_and_env(), seed in 0u64..100, steps in 1u64..2000) {
        let env = model.realize(seed);
        let bound = model.symmetry_and_bounds().jump_bound;
        let t = simulate(&map, &env, &Start::Site(0), steps, Mode::Symbolic, seed, &SimulateOptions::default()).unwrap();
        let s = &t.summary;
        prop_assert!(s.final_site.abs() as u64 <= steps * bound as u64);
        prop_assert!(s.min_site <= s.final_site && s.final_site <= s.max_site);
        prop_assert!((s.max_site - s.min_site) as u64 <= steps * bound as u64);
    }

    #[test]
    fn symbolic_walks_are_reproducible((map, model) in map_and_env(), seed in 0u64..1000) {
        let env = model.realize(seed);
        let run = || simulate(&map, &env, &Start::Site(3), 300, Mode::Symbolic, seed, &SimulateOptions::full_path()).unwrap();
        prop_assert_eq!(run().path, run().path);
    }

    #[test]
    fn skew_graph_is_deterministic((map, model) in map_and_env(), seed in 0u64..100, window in 1i64..12) {
        let a = build_skew_graph(&map, &model.realize(seed), window).unwrap();
        let b = build_skew_graph(&map, &model.realize(seed), window).unwrap();
        prop_assert_eq!(a.edge_list_text(), b.edge_list_text());
        prop_assert_eq!(a.node_count(), map.len() * (2 * window as usize + 1));
        let admissible: usize = (0..map.len()).map(|j| map.image_set(j).len()).sum();
        prop_assert_eq!(a.edges().len(), admissible * (2 * window as usize + 1));
    }

    #[test]
    fn rationals_round_trip(p in -10_000i64..10_000, q in 1i64..10_000) {
        let r = ratio(p, q);
        prop_assert_eq!(rational::parse(&rational::format(&r)).unwrap(), r);
    }
}
