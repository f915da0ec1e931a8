//! The skew product `T_f(x, i) = (Tx, i + f_i(x))` and its trajectories.
//!
//! Two iteration modes are offered. *Exact* mode iterates `T` on an exact
//! rational base point. *Symbolic* mode never materializes `x`: it samples the
//! symbol sequence `(element of T^n x)_n` directly from its law under Lebesgue
//! measure (i.i.d. with probabilities `m(a_j)` for full-branch maps, a Markov
//! chain with `P(k | j) = m(a_k) / m(T a_j)` otherwise). Both drive the same
//! site recursion.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::environment::{EnvWindow, EnvironmentModel, EnvironmentRealization};
use crate::map::{MapError, MarkovIntervalMap};
use crate::rational;
use crate::seed::{self, Stream};

/// Default cap on `n_envs * n_walks * steps` for ensembles.
pub const DEFAULT_STEP_BUDGET: u128 = 50_000_000_000;

/// Above this many sites a walk looks up its environment lazily instead of
/// materializing a dense window.
const MAX_DENSE_WINDOW: i64 = 1 << 22;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum WalkError {
    #[error("horizon must be at least one step")]
    HorizonZero,
    #[error("ensemble of {requested} steps exceeds the budget of {budget}")]
    BudgetExceeded { requested: u128, budget: u128 },
    #[error("environment has {env_cells} cells but the map has {map_cells} partition elements")]
    CellMismatch { env_cells: usize, map_cells: usize },
    #[error(transparent)]
    Map(#[from] MapError),
}

/// A point `(x, i)` of `[0, 1] × ℤ` with exact `x`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WalkState {
    pub x: BigRational,
    pub site: i64,
}

impl WalkState {
    pub fn new(x: BigRational, site: i64) -> Self {
        WalkState { x, site }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Exact,
    Symbolic,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Exact => "exact",
            Mode::Symbolic => "symbolic",
        })
    }
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "exact" => Ok(Mode::Exact),
            "symbolic" => Ok(Mode::Symbolic),
            other => Err(format!("unknown mode {other:?} (expected exact or symbolic)")),
        }
    }
}

/// One application of the skew product.
pub fn step(
    map: &MarkovIntervalMap,
    env: &EnvironmentRealization,
    state: &WalkState,
) -> Result<WalkState, MapError> {
    let element = map.element_of(&state.x)?;
    Ok(WalkState {
        x: map.branches()[element].eval(&state.x),
        site: state.site + env.env_at(state.site).jump(element),
    })
}

/// Source of the symbol sequence `w_n` = element containing `T^n x`.
pub trait SymbolSource {
    fn next_symbol(&mut self) -> usize;
}

/// Iterates `T` exactly on a rational point.
#[derive(Debug, Clone)]
pub struct ExactOrbit<'a> {
    map: &'a MarkovIntervalMap,
    x: BigRational,
}

impl<'a> ExactOrbit<'a> {
    pub fn new(map: &'a MarkovIntervalMap, x: BigRational) -> Result<Self, MapError> {
        map.element_of(&x)?;
        Ok(ExactOrbit { map, x })
    }

    pub fn point(&self) -> &BigRational {
        &self.x
    }
}

impl SymbolSource for ExactOrbit<'_> {
    fn next_symbol(&mut self) -> usize {
        let element = self.map.element_of(&self.x).expect("orbit stays in [0, 1]");
        self.x = self.map.branches()[element].eval(&self.x);
        element
    }
}

#[derive(Debug, Clone)]
enum Law {
    /// Equal cells, full branch.
    Uniform(usize),
    Iid(WeightedIndex<u64>),
    Markov {
        initial: WeightedIndex<u64>,
        rows: Vec<(Vec<usize>, WeightedIndex<u64>)>,
    },
}

/// Exact-in-law sampler for the symbol process of a map under Lebesgue
/// measure. Probabilities are converted to integer weights over a common
/// denominator, so no floating-point rounding enters the law.
#[derive(Debug, Clone)]
pub struct SymbolLaw {
    law: Law,
}

impl SymbolLaw {
    pub fn new(map: &MarkovIntervalMap) -> Self {
        let weights =
            |probs: &[BigRational]| WeightedIndex::new(rational::common_denominator_weights(probs).expect("map weights fit in u64")).expect("positive weights");
        let law = if map.is_full_branch() {
            if map.measures().iter().all(|m| m == map.measure(0)) {
                Law::Uniform(map.len())
            } else {
                Law::Iid(weights(map.measures()))
            }
        } else {
            let rows = (0..map.len())
                .map(|j| {
                    let targets = map.image_set(j).to_vec();
                    let probs: Vec<BigRational> = targets.iter().map(|&k| map.symbol_transition(j, k)).collect();
                    (targets, weights(&probs))
                })
                .collect();
            Law::Markov {
                initial: weights(map.measures()),
                rows,
            }
        };
        SymbolLaw { law }
    }

    pub fn stream<R: Rng>(&self, rng: R) -> SampledSymbols<'_, R> {
        SampledSymbols {
            law: self,
            rng,
            previous: None,
        }
    }
}

/// Symbol stream of a Lebesgue-uniform `x`, sampled lazily.
#[derive(Debug)]
pub struct SampledSymbols<'a, R> {
    law: &'a SymbolLaw,
    rng: R,
    previous: Option<usize>,
}

impl<R: Rng> SymbolSource for SampledSymbols<'_, R> {
    #[inline]
    fn next_symbol(&mut self) -> usize {
        let symbol = match &self.law.law {
            Law::Uniform(k) => self.rng.random_range(0..*k),
            Law::Iid(w) => w.sample(&mut self.rng),
            Law::Markov { initial, rows } => match self.previous {
                None => initial.sample(&mut self.rng),
                Some(prev) => {
                    let (targets, w) = &rows[prev];
                    targets[w.sample(&mut self.rng)]
                }
            },
        };
        self.previous = Some(symbol);
        symbol
    }
}

/// Site lookup used by the walk loop.
pub trait JumpLookup {
    fn jump(&self, site: i64, element: usize) -> i64;
}

impl JumpLookup for EnvWindow {
    #[inline]
    fn jump(&self, site: i64, element: usize) -> i64 {
        EnvWindow::jump(self, site, element)
    }
}

impl JumpLookup for EnvironmentRealization {
    #[inline]
    fn jump(&self, site: i64, element: usize) -> i64 {
        self.env_at(site).jump(element)
    }
}

/// Orbit summary of a trajectory.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrajectorySummary {
    pub min_site: i64,
    pub max_site: i64,
    pub final_site: i64,
    /// First `n >= 1` with `site_n = site_0`.
    pub first_return_time: Option<u64>,
    /// Last `n <= N` with `site_n = site_0`.
    pub last_return_time: Option<u64>,
    /// First `n >= 1` at which each registered target site was visited.
    pub hit_times: Vec<Option<u64>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trajectory {
    pub start_site: i64,
    pub steps: u64,
    /// Sites `site_0, site_k, site_2k, ...` for thinning factor `k`, plus
    /// the final site when `N` is not a multiple of `k`.
    pub path: Vec<i64>,
    pub thin: Option<u64>,
    pub summary: TrajectorySummary,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SimulateOptions {
    /// Record every `k`-th site; `None` records no path.
    pub thin: Option<u64>,
    pub targets: Vec<i64>,
}

impl SimulateOptions {
    pub fn full_path() -> Self {
        SimulateOptions {
            thin: Some(1),
            targets: Vec::new(),
        }
    }
}

/// Runs `steps` iterations of the site recursion from `start_site`.
pub fn run_walk<S: SymbolSource, E: JumpLookup>(
    symbols: &mut S,
    env: &E,
    start_site: i64,
    steps: u64,
    options: &SimulateOptions,
) -> Trajectory {
    let mut site = start_site;
    let mut min_site = site;
    let mut max_site = site;
    let mut first_return = None;
    let mut last_return = None;
    let mut hit_times = vec![None; options.targets.len()];
    let mut path = Vec::new();
    if options.thin.is_some() {
        path.push(site);
    }
    for n in 1..=steps {
        let element = symbols.next_symbol();
        site += env.jump(site, element);
        min_site = min_site.min(site);
        max_site = max_site.max(site);
        if site == start_site {
            first_return.get_or_insert(n);
            last_return = Some(n);
        }
        for (t, target) in options.targets.iter().enumerate() {
            if hit_times[t].is_none() && site == *target {
                hit_times[t] = Some(n);
            }
        }
        if let Some(k) = options.thin {
            if n % k == 0 || n == steps {
                path.push(site);
            }
        }
    }
    Trajectory {
        start_site,
        steps,
        path,
        thin: options.thin,
        summary: TrajectorySummary {
            min_site,
            max_site,
            final_site: site,
            first_return_time: first_return,
            last_return_time: last_return,
            hit_times,
        },
    }
}

/// Where a simulated walk starts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Start {
    /// An exact base point; required for exact mode.
    Point(WalkState),
    /// A site with a Lebesgue-uniform base point.
    Site(i64),
}

impl Start {
    pub fn site(&self) -> i64 {
        match self {
            Start::Point(s) => s.site,
            Start::Site(i) => *i,
        }
    }
}

fn check_cells(map: &MarkovIntervalMap, env: &EnvironmentRealization) -> Result<(), WalkError> {
    let env_cells = env.model().cells();
    if env_cells != map.len() {
        return Err(WalkError::CellMismatch {
            env_cells,
            map_cells: map.len(),
        });
    }
    Ok(())
}

fn jump_bound(env: &EnvironmentRealization) -> i64 {
    env.model().symmetry_and_bounds().jump_bound.max(1)
}

fn with_lookup<T>(
    env: &EnvironmentRealization,
    start_site: i64,
    steps: u64,
    body: impl FnOnce(&dyn Fn(&mut dyn SymbolSource) -> Trajectory) -> T,
    options: &SimulateOptions,
) -> T {
    let reach = (steps as i64).saturating_mul(jump_bound(env));
    if reach <= MAX_DENSE_WINDOW {
        let window = env.window(start_site - reach, start_site + reach);
        body(&|src: &mut dyn SymbolSource| run_walk(&mut DynSource(src), &window, start_site, steps, options))
    } else {
        body(&|src: &mut dyn SymbolSource| run_walk(&mut DynSource(src), env, start_site, steps, options))
    }
}

struct DynSource<'a>(&'a mut dyn SymbolSource);

impl SymbolSource for DynSource<'_> {
    #[inline]
    fn next_symbol(&mut self) -> usize {
        self.0.next_symbol()
    }
}

/// Uniform random rational in `(0, 1)` with denominator `2^(bits + 1)`:
/// `(2k + 1) / 2^(bits + 1)` for uniform `k < 2^bits`.
pub fn uniform_rational<R: Rng>(rng: &mut R, bits: u64) -> BigRational {
    let mut bytes = vec![0u8; bits.div_ceil(8) as usize];
    rng.fill_bytes(&mut bytes);
    let excess = bytes.len() as u64 * 8 - bits;
    if let Some(top) = bytes.last_mut() {
        *top &= 0xffu8 >> excess;
    }
    let k = BigUint::from_bytes_le(&bytes);
    let numer = BigInt::from(k) * 2 + 1;
    BigRational::new(numer, BigInt::from(1) << (bits + 1) as usize)
}

/// Bits of a uniform start point needed for its first `steps` symbols to be
/// resolved far below sampling noise.
pub fn start_point_bits(map: &MarkovIntervalMap, steps: u64) -> u64 {
    let max_slope = map
        .branches()
        .iter()
        .map(|b| rational::to_f64(&rational::abs(&b.slope)))
        .fold(1.0f64, f64::max);
    (steps as f64 * max_slope.log2()).ceil() as u64 + 64
}

/// Simulates one trajectory of `steps` steps.
///
/// In exact mode the start must be a [`Start::Point`]; with [`Start::Site`]
/// a uniform rational point is drawn from `walk_seed`. In symbolic mode the
/// symbol stream is drawn from `walk_seed`; an exact start point, if given,
/// fixes only the site.
pub fn simulate(
    map: &MarkovIntervalMap,
    env: &EnvironmentRealization,
    start: &Start,
    steps: u64,
    mode: Mode,
    walk_seed: u64,
    options: &SimulateOptions,
) -> Result<Trajectory, WalkError> {
    if steps == 0 {
        return Err(WalkError::HorizonZero);
    }
    check_cells(map, env)?;
    let key = seed::key_from(walk_seed);
    let mut rng = seed::stream_rng(&key, 0);
    simulate_with_rng(map, env, start, steps, mode, &mut rng, options, None)
}

#[allow(clippy::too_many_arguments)]
fn simulate_with_rng(
    map: &MarkovIntervalMap,
    env: &EnvironmentRealization,
    start: &Start,
    steps: u64,
    mode: Mode,
    rng: &mut ChaCha8Rng,
    options: &SimulateOptions,
    law: Option<&SymbolLaw>,
) -> Result<Trajectory, WalkError> {
    let site = start.site();
    match mode {
        Mode::Exact => {
            let x = match start {
                Start::Point(state) => state.x.clone(),
                Start::Site(_) => uniform_rational(rng, start_point_bits(map, steps)),
            };
            let mut orbit = ExactOrbit::new(map, x)?;
            Ok(with_lookup(env, site, steps, |run| run(&mut orbit), options))
        }
        Mode::Symbolic => {
            let owned;
            let law = match law {
                Some(l) => l,
                None => {
                    owned = SymbolLaw::new(map);
                    &owned
                }
            };
            let mut symbols = law.stream(rng);
            Ok(with_lookup(env, site, steps, |run| run(&mut symbols), options))
        }
    }
}

/// Block-level first-passage query over `Λ_j = {jM, ..., (j+1)M - 1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TabooQuery {
    pub start_block: i64,
    pub target_block: i64,
    /// `None` disables the taboo.
    pub taboo_block: Option<i64>,
    pub horizon: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TabooEstimate {
    pub hits: u64,
    pub walks: u64,
    pub fraction: f64,
    pub standard_error: f64,
}

/// Block containing `site` for block width `width`.
pub fn block_of(site: i64, width: i64) -> i64 {
    site.div_euclid(width)
}

/// Fraction of walks, started uniformly in `Λ_start` with uniform `x`, that
/// enter `Λ_target` at some time `1..=horizon` without having entered
/// `Λ_taboo` at an earlier time `>= 1`. Entering a block that is both target
/// and taboo counts as a hit.
pub fn taboo_hit(
    map: &MarkovIntervalMap,
    env: &EnvironmentRealization,
    query: &TabooQuery,
    n_walks: u64,
    walk_seed: u64,
) -> Result<TabooEstimate, WalkError> {
    if query.horizon == 0 {
        return Err(WalkError::HorizonZero);
    }
    check_cells(map, env)?;
    let width = jump_bound(env);
    let law = SymbolLaw::new(map);
    let base = query.start_block * width;
    let reach = (query.horizon as i64).saturating_mul(width);
    let window = if reach + width <= MAX_DENSE_WINDOW {
        Some(env.window(base - reach, base + width + reach))
    } else {
        None
    };
    let key = seed::key_from(walk_seed);
    let hits: u64 = (0..n_walks)
        .into_par_iter()
        .map(|w| {
            let mut rng = seed::stream_rng(&key, w);
            let mut site = base + rng.random_range(0..width);
            let mut symbols = law.stream(&mut rng);
            for _ in 0..query.horizon {
                let element = symbols.next_symbol();
                site += match &window {
                    Some(win) => win.jump(site, element),
                    None => env.env_at(site).jump(element),
                };
                let block = block_of(site, width);
                if block == query.target_block {
                    return 1;
                }
                if Some(block) == query.taboo_block {
                    return 0;
                }
            }
            0
        })
        .sum();
    let fraction = if n_walks == 0 { 0.0 } else { hits as f64 / n_walks as f64 };
    Ok(TabooEstimate {
        hits,
        walks: n_walks,
        fraction,
        standard_error: (fraction * (1.0 - fraction) / n_walks.max(1) as f64).sqrt(),
    })
}

/// One row of the ensemble CSV.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WalkRecord {
    pub env_index: u64,
    pub walk_index: u64,
    pub final_site: i64,
    pub min_site: i64,
    pub max_site: i64,
    pub first_return_time: Option<u64>,
    pub last_return_time: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DirectionVotes {
    pub right: u64,
    pub left: u64,
    pub zero: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiteQuantiles {
    pub min: i64,
    pub q10: i64,
    pub q25: i64,
    pub median: i64,
    pub q75: i64,
    pub q90: i64,
    pub max: i64,
}

impl SiteQuantiles {
    /// Nearest-rank quantiles of `values`; `values` must be non-empty.
    pub fn of(values: &[i64]) -> Self {
        let mut v = values.to_vec();
        v.sort_unstable();
        let q = |p: f64| {
            let rank = ((p * v.len() as f64).ceil() as usize).clamp(1, v.len());
            v[rank - 1]
        };
        SiteQuantiles {
            min: v[0],
            q10: q(0.10),
            q25: q(0.25),
            median: q(0.5),
            q75: q(0.75),
            q90: q(0.90),
            max: v[v.len() - 1],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvSummary {
    pub env_index: u64,
    pub env_seed: u64,
    pub walks: u64,
    pub return_fraction: f64,
    pub mean_final_site: f64,
    pub final_site: SiteQuantiles,
    pub min_site: i64,
    pub max_site: i64,
    pub votes: DirectionVotes,
}

impl EnvSummary {
    fn from_records(env_index: u64, env_seed: u64, records: &[WalkRecord]) -> Self {
        let finals: Vec<i64> = records.iter().map(|r| r.final_site).collect();
        let walks = records.len() as u64;
        let returned = records.iter().filter(|r| r.first_return_time.is_some()).count();
        let votes = DirectionVotes {
            right: finals.iter().filter(|&&f| f > 0).count() as u64,
            left: finals.iter().filter(|&&f| f < 0).count() as u64,
            zero: finals.iter().filter(|&&f| f == 0).count() as u64,
        };
        EnvSummary {
            env_index,
            env_seed,
            walks,
            return_fraction: returned as f64 / walks as f64,
            mean_final_site: finals.iter().map(|&f| f as f64).sum::<f64>() / walks as f64,
            final_site: SiteQuantiles::of(&finals),
            min_site: records.iter().map(|r| r.min_site).min().unwrap_or(0),
            max_site: records.iter().map(|r| r.max_site).max().unwrap_or(0),
            votes,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleReport {
    pub steps: u64,
    pub mode: Mode,
    pub master_seed: u64,
    pub environments: Vec<EnvSummary>,
    /// Ordered by `(env_index, walk_index)`.
    pub records: Vec<WalkRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnsembleSpec {
    pub n_envs: u64,
    pub n_walks: u64,
    pub steps: u64,
    pub mode: Mode,
    pub master_seed: u64,
    pub start_site: i64,
    pub budget: u128,
}

impl EnsembleSpec {
    pub fn new(n_envs: u64, n_walks: u64, steps: u64, mode: Mode, master_seed: u64) -> Self {
        EnsembleSpec {
            n_envs,
            n_walks,
            steps,
            mode,
            master_seed,
            start_site: 0,
            budget: DEFAULT_STEP_BUDGET,
        }
    }
}

/// Seed of environment `env_index` under `master_seed`.
pub fn env_seed(master_seed: u64, env_index: u64) -> u64 {
    seed::derive(master_seed, Stream::EnvSeed, env_index)
}

/// Key of the per-walk streams for environment `env_index`.
pub fn walk_key(master_seed: u64, env_index: u64) -> [u8; 32] {
    seed::key_from(seed::derive(master_seed, Stream::WalkKey, env_index))
}

/// Runs `n_walks` walks in each of `n_envs` realizations of `model`.
///
/// Environment `e` uses [`env_seed`]`(master_seed, e)`; walk `w` in it uses
/// stream `w` under [`walk_key`]`(master_seed, e)`. Walks run in parallel
/// and are collected by index, so the report does not depend on scheduling.
pub fn run_ensemble(
    map: &MarkovIntervalMap,
    model: &EnvironmentModel,
    spec: &EnsembleSpec,
) -> Result<EnsembleReport, WalkError> {
    if spec.steps == 0 {
        return Err(WalkError::HorizonZero);
    }
    let requested = u128::from(spec.n_envs) * u128::from(spec.n_walks) * u128::from(spec.steps);
    if requested > spec.budget {
        return Err(WalkError::BudgetExceeded {
            requested,
            budget: spec.budget,
        });
    }
    if model.cells() != map.len() {
        return Err(WalkError::CellMismatch {
            env_cells: model.cells(),
            map_cells: map.len(),
        });
    }
    let law = SymbolLaw::new(map);
    let mut environments = Vec::with_capacity(spec.n_envs as usize);
    let mut records = Vec::with_capacity((spec.n_envs * spec.n_walks) as usize);
    for e in 0..spec.n_envs {
        let seed_e = env_seed(spec.master_seed, e);
        let env = model.realize(seed_e);
        let key = walk_key(spec.master_seed, e);
        let reach = (spec.steps as i64).saturating_mul(jump_bound(&env));
        let window = (reach <= MAX_DENSE_WINDOW).then(|| env.window(spec.start_site - reach, spec.start_site + reach));
        let env_records: Vec<WalkRecord> = (0..spec.n_walks)
            .into_par_iter()
            .map(|w| {
                let mut rng = seed::stream_rng(&key, w);
                let s = match &window {
                    Some(window) => ensemble_walk(map, window, &law, spec, &mut rng),
                    None => ensemble_walk(map, &env, &law, spec, &mut rng),
                };
                WalkRecord {
                    env_index: e,
                    walk_index: w,
                    final_site: s.final_site - spec.start_site,
                    min_site: s.min_site - spec.start_site,
                    max_site: s.max_site - spec.start_site,
                    first_return_time: s.first_return_time,
                    last_return_time: s.last_return_time,
                }
            })
            .collect();
        if !env_records.is_empty() {
            environments.push(EnvSummary::from_records(e, seed_e, &env_records));
        }
        records.extend(env_records);
    }
    Ok(EnsembleReport {
        steps: spec.steps,
        mode: spec.mode,
        master_seed: spec.master_seed,
        environments,
        records,
    })
}

fn ensemble_walk<E: JumpLookup>(
    map: &MarkovIntervalMap,
    env: &E,
    law: &SymbolLaw,
    spec: &EnsembleSpec,
    rng: &mut ChaCha8Rng,
) -> TrajectorySummary {
    let options = SimulateOptions::default();
    let trajectory = match spec.mode {
        Mode::Exact => {
            let x = uniform_rational(rng, start_point_bits(map, spec.steps));
            let mut orbit = ExactOrbit::new(map, x).expect("uniform start points lie in [0, 1]");
            run_walk(&mut orbit, env, spec.start_site, spec.steps, &options)
        }
        Mode::Symbolic => run_walk(&mut law.stream(rng), env, spec.start_site, spec.steps, &options),
    };
    trajectory.summary
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::TransitionFunction;
    use crate::rational::ratio;

    fn doubling_env(jumps: Vec<i64>) -> (MarkovIntervalMap, EnvironmentRealization) {
        (
            MarkovIntervalMap::uniform(2),
            EnvironmentModel::fixed(TransitionFunction::new(jumps)).realize(0),
        )
    }

    #[test]
    fn step_examples() {
        let (map, env) = doubling_env(vec![1, -1]);
        let s = step(&map, &env, &WalkState::new(ratio(1, 3), 0)).unwrap();
        assert_eq!(s, WalkState::new(ratio(2, 3), 1));
        let s = step(&map, &env, &WalkState::new(ratio(2, 3), 5)).unwrap();
        assert_eq!(s, WalkState::new(ratio(1, 3), 4));
    }

    #[test]
    fn four_steps_from_one_third() {
        // Hand iteration: 1/3 ∈ a_0 -> +1, 2/3 ∈ a_1 -> -1, period 2.
        let (map, env) = doubling_env(vec![1, -1]);
        let mut state = WalkState::new(ratio(1, 3), 0);
        let mut sites = vec![state.site];
        for _ in 0..4 {
            state = step(&map, &env, &state).unwrap();
            sites.push(state.site);
        }
        assert_eq!(sites, vec![0, 1, 0, 1, 0]);
    }

    #[test]
    fn period_four_orbit() {
        // 1/5 -> 2/5 -> 4/5 -> 3/5 -> 1/5: symbols 0, 0, 1, 1.
        let (map, env) = doubling_env(vec![1, -1]);
        let t = simulate(
            &map,
            &env,
            &Start::Point(WalkState::new(ratio(1, 5), 0)),
            8,
            Mode::Exact,
            0,
            &SimulateOptions::full_path(),
        )
        .unwrap();
        assert_eq!(t.path, vec![0, 1, 2, 1, 0, 1, 2, 1, 0]);
        assert_eq!(t.summary.first_return_time, Some(4));
        assert_eq!(t.summary.last_return_time, Some(8));
        assert_eq!((t.summary.min_site, t.summary.max_site), (0, 2));
    }

    #[test]
    fn pure_drift() {
        let (map, env) = doubling_env(vec![1, 1]);
        for mode in [Mode::Exact, Mode::Symbolic] {
            let t = simulate(&map, &env, &Start::Site(3), 50, mode, 9, &SimulateOptions::default()).unwrap();
            assert_eq!(t.summary.final_site, 53);
            assert_eq!(t.summary.first_return_time, None);
        }
    }

    #[test]
    fn horizon_zero_rejected() {
        let (map, env) = doubling_env(vec![1, -1]);
        let err = simulate(&map, &env, &Start::Site(0), 0, Mode::Symbolic, 0, &SimulateOptions::default());
        assert_eq!(err.unwrap_err(), WalkError::HorizonZero);
    }

    #[test]
    fn cell_mismatch_rejected() {
        let map = MarkovIntervalMap::uniform(3);
        let env = EnvironmentModel::fixed(TransitionFunction::new(vec![1, -1])).realize(0);
        let err = simulate(&map, &env, &Start::Site(0), 5, Mode::Symbolic, 0, &SimulateOptions::default());
        assert!(matches!(err, Err(WalkError::CellMismatch { .. })));
    }

    #[test]
    fn thinned_path_keeps_final_site() {
        let (map, env) = doubling_env(vec![1, -1]);
        let options = SimulateOptions {
            thin: Some(3),
            targets: vec![2, -40],
        };
        let t = simulate(&map, &env, &Start::Point(WalkState::new(ratio(1, 5), 0)), 8, Mode::Exact, 0, &options).unwrap();
        assert_eq!(t.path, vec![0, 1, 2, 0]);
        assert_eq!(t.summary.hit_times, vec![Some(2), None]);
    }

    #[test]
    fn taboo_examples() {
        // Homogeneous p = 2/3: the first step decides Λ_1 versus Λ_-1.
        let map = MarkovIntervalMap::uniform(3);
        let env = EnvironmentModel::fixed(TransitionFunction::new(vec![1, 1, -1])).realize(0);
        let q = TabooQuery {
            start_block: 0,
            target_block: 1,
            taboo_block: Some(-1),
            horizon: 1000,
        };
        let est = taboo_hit(&map, &env, &q, 20_000, 4).unwrap();
        assert!((est.fraction - 2.0 / 3.0).abs() < 4.0 * est.standard_error);

        let far = TabooQuery {
            start_block: 0,
            target_block: 60,
            taboo_block: None,
            horizon: 50,
        };
        assert_eq!(taboo_hit(&map, &env, &far, 500, 4).unwrap().hits, 0);
    }

    #[test]
    fn ensemble_budget_and_determinism() {
        let map = MarkovIntervalMap::uniform(2);
        let model = EnvironmentModel::fixed(TransitionFunction::new(vec![1, 1]));
        let mut spec = EnsembleSpec::new(1, 20, 100, Mode::Symbolic, 3);
        let report = run_ensemble(&map, &model, &spec).unwrap();
        assert!(report.records.iter().all(|r| r.final_site == 100));
        spec.budget = 100;
        assert!(matches!(run_ensemble(&map, &model, &spec), Err(WalkError::BudgetExceeded { .. })));

        let model = EnvironmentModel::iid_uniform(
            vec![TransitionFunction::new(vec![1, -1]), TransitionFunction::new(vec![-1, 1])],
            0,
        )
        .unwrap();
        let spec = EnsembleSpec::new(3, 50, 200, Mode::Symbolic, 11);
        let a = run_ensemble(&map, &model, &spec).unwrap();
        let b = run_ensemble(&map, &model, &spec).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.records.len(), 150);
        assert!(a
            .records
            .iter()
            .enumerate()
            .all(|(n, r)| r.env_index == n as u64 / 50 && r.walk_index == n as u64 % 50));
    }

    #[test]
    fn quantiles_nearest_rank() {
        let q = SiteQuantiles::of(&[5, 1, 3, 2, 4, 6, 8, 7, 10, 9]);
        assert_eq!((q.min, q.q10, q.q25, q.median, q.q75, q.q90, q.max), (1, 1, 3, 5, 8, 9, 10));
    }

    #[test]
    fn uniform_rational_is_in_open_interval() {
        let mut rng = seed::stream_rng(&seed::key_from(1), 0);
        for _ in 0..100 {
            let x = uniform_rational(&mut rng, 80);
            assert!(x > ratio(0, 1) && x < ratio(1, 1));
        }
    }
}
