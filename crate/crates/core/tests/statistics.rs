//! Seeded statistical checks. Every threshold is fixed before the run: chi-square
//! and Kolmogorov–Smirnov tests at level 1e-6, frequency tests at 3 standard
//! errors.

mod common;

use std::collections::BTreeMap;

use common::*;
use dwde_core::environment::EnvKind;
use dwde_core::exact::{build_site_chain, Boundary};
use dwde_core::map::CylinderWord;
use dwde_core::rational::{ratio, to_f64};
use dwde_core::seed;
use dwde_core::walk::{env_seed, run_ensemble, EnsembleSpec, SymbolLaw, SymbolSource};
use dwde_core::{EnvironmentModel, MarkovIntervalMap, Mode};
use statrs::distribution::{ChiSquared, ContinuousCDF};

const ALPHA: f64 = 1e-6;

fn chi_square_symbols(map: &MarkovIntervalMap, n: usize, draws: u64, master: u64) {
    let law = SymbolLaw::new(map);
    let key = seed::key_from(master);
    let mut counts: BTreeMap<Vec<usize>, u64> = BTreeMap::new();
    for d in 0..draws {
        let mut stream = law.stream(seed::stream_rng(&key, d));
        let word: Vec<usize> = (0..n).map(|_| stream.next_symbol()).collect();
        *counts.entry(word).or_default() += 1;
    }
    let words = map.enumerate_cylinders(n).unwrap();
    let mut stat = 0.0;
    for w in &words {
        let expected = to_f64(&map.cylinder_measure(w).unwrap()) * draws as f64;
        let observed = counts.remove(&w.0).unwrap_or(0) as f64;
        stat += (observed - expected).powi(2) / expected;
    }
    assert!(counts.is_empty(), "sampled inadmissible words: {:?}", counts.keys().collect::<Vec<_>>());
    let critical = ChiSquared::new((words.len() - 1) as f64).unwrap().inverse_cdf(1.0 - ALPHA);
    assert!(stat < critical, "chi-square {stat:.2} >= {critical:.2} over {} cells", words.len());
}

#[test]
fn symbol_law_uneven_full_branch() {
    chi_square_symbols(&uneven3(), 3, 1_000_000, 11);
}

#[test]
fn symbol_law_doubling_rank_six() {
    chi_square_symbols(&doubling(), 6, 1_000_000, 12);
}

#[test]
fn symbol_law_markov_base() {
    chi_square_symbols(&partial4(), 4, 1_000_000, 13);
    chi_square_symbols(&tent(), 5, 1_000_000, 14);
}

/// One-sample distance between the empirical law of `finals` and an exact
/// distribution on sites.
fn ks_distance(finals: &[i64], exact: &[(i64, f64)]) -> f64 {
    let n = finals.len() as f64;
    let mut sorted = finals.to_vec();
    sorted.sort_unstable();
    let mut d: f64 = 0.0;
    let mut cdf = 0.0;
    let mut idx = 0;
    for &(site, p) in exact {
        cdf += p;
        while idx < sorted.len() && sorted[idx] <= site {
            idx += 1;
        }
        d = d.max((idx as f64 / n - cdf).abs());
    }
    d
}

fn two_sample_distance(a: &[i64], b: &[i64]) -> f64 {
    let (mut a, mut b) = (a.to_vec(), b.to_vec());
    a.sort_unstable();
    b.sort_unstable();
    let (lo, hi) = (a[0].min(b[0]), a[a.len() - 1].max(b[b.len() - 1]));
    let cdf = |v: &[i64], x: i64| v.partition_point(|&s| s <= x) as f64 / v.len() as f64;
    (lo..=hi).map(|x| (cdf(&a, x) - cdf(&b, x)).abs()).fold(0.0, f64::max)
}

#[test]
fn exact_and_symbolic_modes_agree_in_law() {
    let n_walks = 1000u64;
    let steps = 100u64;
    // DKW bounds, valid for discrete laws.
    let one_sample = ((2.0 / ALPHA).ln() / (2.0 * n_walks as f64)).sqrt();
    let two_sample = (-(ALPHA / 2.0).ln() / 2.0).sqrt() * (2.0 / n_walks as f64).sqrt();
    let cases: [(&str, MarkovIntervalMap, EnvironmentModel); 3] = [
        ("symmetric doubling", doubling(), iid(&[&[1, -1], &[-1, 1]], &[(1, 2), (1, 2)])),
        ("triple r = 2", triple(), iid(&[&[1, 1, -1], &[1, -1, 1], &[-1, 1, 1]], &[(1, 3), (1, 3), (1, 3)])),
        ("uneven, jumps up to 2", uneven3(), iid(&[&[2, -1, -1], &[1, 0, -2]], &[(1, 2), (1, 2)])),
    ];
    for (i, (name, map, model)) in cases.into_iter().enumerate() {
        let master = 100 + i as u64;
        let finals = |mode| {
            let spec = EnsembleSpec::new(1, n_walks, steps, mode, master);
            let report = run_ensemble(&map, &model, &spec).unwrap();
            report.records.iter().map(|r| r.final_site).collect::<Vec<_>>()
        };
        let exact_mode = finals(Mode::Exact);
        let symbolic = finals(Mode::Symbolic);

        let env = model.realize(env_seed(master, 0));
        let reach = steps as i64 * model.symmetry_and_bounds().jump_bound + 1;
        let chain = build_site_chain(&map, &env, reach, Boundary::Absorb, false).unwrap();
        let law: Vec<(i64, f64)> = chain.site_distribution::<f64>(0, steps).unwrap();

        let d_exact = ks_distance(&exact_mode, &law);
        let d_symbolic = ks_distance(&symbolic, &law);
        let d_two = two_sample_distance(&exact_mode, &symbolic);
        assert!(d_exact < one_sample, "{name}: exact mode vs DP law, D = {d_exact:.4}");
        assert!(d_symbolic < one_sample, "{name}: symbolic mode vs DP law, D = {d_symbolic:.4}");
        assert!(d_two < two_sample, "{name}: exact vs symbolic, D = {d_two:.4}");
    }
}

#[test]
fn iid_environment_frequencies() {
    let model = iid(&[&[1, 1, 1, 1, -1], &[1, 1, -1, -1, -1]], &[(7, 10), (3, 10)]);
    let env = model.realize(1);
    let n = 100_000i64;
    let w = env.window(0, n - 1);
    let ones = (0..n).filter(|&i| w.index_at(i) == 0).count() as f64;
    let p = 0.7;
    let se = (p * (1.0 - p) / n as f64).sqrt();
    let freq = ones / n as f64;
    assert!((freq - p).abs() <= 3.0 * se, "frequency {freq} vs {p}");
}

#[test]
fn markov_environment_frequencies() {
    let support = vec![tf(&[1, -1]), tf(&[-1, 1])];
    let kind = EnvKind::Markov {
        matrix: vec![vec![ratio(9, 10), ratio(1, 10)], vec![ratio(2, 10), ratio(8, 10)]],
        stationary: vec![ratio(2, 3), ratio(1, 3)],
    };
    let model = EnvironmentModel::new(support, kind, 0).unwrap();
    let env = model.realize(1);
    let n = 100_000i64;
    let w = env.window(0, n - 1);
    let states: Vec<usize> = (0..n).map(|i| w.index_at(i)).collect();

    // Occupation of state 0: the asymptotic variance of the mean is
    // π0 π1 (1 + λ) / ((1 − λ) n) with λ = 1 − p01 − p10.
    let (pi0, lambda) = (2.0 / 3.0, 0.7);
    let se = (pi0 * (1.0 - pi0) * (1.0 + lambda) / (1.0 - lambda) / n as f64).sqrt();
    let freq = states.iter().filter(|&&s| s == 0).count() as f64 / n as f64;
    assert!((freq - pi0).abs() <= 3.0 * se, "occupation {freq} vs {pi0}");

    // Transition 0 -> 1, conditionally binomial given the visits to 0.
    let from0 = states.windows(2).filter(|w| w[0] == 0).count() as f64;
    let flips = states.windows(2).filter(|w| w[0] == 0 && w[1] == 1).count() as f64;
    let se = (0.1 * 0.9 / from0).sqrt();
    assert!((flips / from0 - 0.1).abs() <= 3.0 * se, "p01 estimate {}", flips / from0);

    // Sites left of the origin follow the same law.
    let left = env.window(-n, -1);
    let freq = (-n..0).filter(|&i| left.index_at(i) == 0).count() as f64 / n as f64;
    let se = (pi0 * (1.0 - pi0) * (1.0 + lambda) / (1.0 - lambda) / n as f64).sqrt();
    assert!((freq - pi0).abs() <= 3.0 * se, "left occupation {freq} vs {pi0}");
}

#[test]
fn cylinder_word_api_is_consistent() {
    let map = uneven3();
    let w = CylinderWord(vec![0, 2, 1]);
    assert_eq!(w.rank(), 3);
    assert_eq!(map.cylinder_measure(&w).unwrap(), ratio(1, 5) * ratio(1, 2) * ratio(3, 10));
}
