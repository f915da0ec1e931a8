use std::collections::BTreeMap;
use std::ops::AddAssign;

use num_rational::BigRational;
use num_traits::{Num, One, Zero};

use super::paths::path_counts;
use super::ExactError;
use crate::environment::{EnvironmentRealization, TransitionFunction};
use crate::map::MarkovIntervalMap;
use crate::rational;

/// Numeric type the DP engine runs in: exact rationals or `f64`.
pub trait Weight: Clone + Num + for<'a> AddAssign<&'a Self> + Send + Sync {
    fn from_exact(value: &BigRational) -> Self;
}

impl Weight for BigRational {
    fn from_exact(value: &BigRational) -> Self {
        value.clone()
    }
}

impl Weight for f64 {
    fn from_exact(value: &BigRational) -> Self {
        rational::to_f64(value)
    }
}

/// What happens to mass that leaves the window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Boundary {
    /// Mass leaving the window is absorbed, and queries whose answer could
    /// depend on that mass are refused with `WindowTooSmall`.
    #[default]
    Absorb,
    /// Absorbing, without the window checks: answers are those of the
    /// truncated chain.
    Unchecked,
}

/// One outgoing transition of a chain state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Move {
    pub phase: usize,
    pub jump: i64,
    pub prob: BigRational,
}

/// Exact finite-window reduction of the walk to a Markov chain on
/// `phase × [lo, hi]`.
///
/// For full-branch maps there is a single phase and each site carries the
/// jump law `p_i(v) = Σ_j m(a_j) [f_i(a_j) = v]`. For general Markov maps the
/// phase is the current partition element, with `P(k | j) = m(a_k) / m(T a_j)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SiteChainDP {
    lo: i64,
    hi: i64,
    phases: usize,
    initial: Vec<BigRational>,
    moves: Vec<Vec<Move>>,
    jump_bound: i64,
    boundary: Boundary,
}

/// Builds the site chain on `[-window, window]`.
///
/// `joint` requests the `(symbol, site)` chain; it is mandatory for maps that
/// are not full-branch.
pub fn build_site_chain(
    map: &MarkovIntervalMap,
    env: &EnvironmentRealization,
    window: i64,
    boundary: Boundary,
    joint: bool,
) -> Result<SiteChainDP, ExactError> {
    build_site_chain_on(map, env, -window, window, boundary, joint)
}

pub(crate) fn build_site_chain_on(
    map: &MarkovIntervalMap,
    env: &EnvironmentRealization,
    lo: i64,
    hi: i64,
    boundary: Boundary,
    joint: bool,
) -> Result<SiteChainDP, ExactError> {
    if hi - lo < 2 {
        return Err(ExactError::InvalidInput("window must be at least 1".into()));
    }
    if env.model().cells() != map.len() {
        return Err(ExactError::InvalidInput(format!(
            "environment has {} cells, map has {}",
            env.model().cells(),
            map.len()
        )));
    }
    if !map.is_full_branch() && !joint {
        return Err(ExactError::UnsupportedBase);
    }
    let support = env.model().support();
    let jump_bound = support.iter().map(TransitionFunction::max_abs).max().unwrap_or(0).max(1);
    let window = env.window(lo, hi);
    let (phases, initial, per_support): (usize, Vec<BigRational>, Vec<Vec<Vec<Move>>>) = if joint {
        let k = map.len();
        let per_support = support
            .iter()
            .map(|g| {
                (0..k)
                    .map(|j| {
                        map.image_set(j)
                            .iter()
                            .map(|&t| Move {
                                phase: t,
                                jump: g.jump(j),
                                prob: map.symbol_transition(j, t),
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        (k, map.measures().to_vec(), per_support)
    } else {
        let per_support = support
            .iter()
            .map(|g| {
                let mut law: BTreeMap<i64, BigRational> = BTreeMap::new();
                for (j, m) in map.measures().iter().enumerate() {
                    *law.entry(g.jump(j)).or_insert_with(BigRational::zero) += m;
                }
                vec![law
                    .into_iter()
                    .map(|(jump, prob)| Move { phase: 0, jump, prob })
                    .collect()]
            })
            .collect();
        (1, vec![BigRational::one()], per_support)
    };
    let mut moves = Vec::with_capacity(((hi - lo + 1) as usize) * phases);
    for site in lo..=hi {
        moves.extend(per_support[window.index_at(site)].iter().cloned());
    }
    Ok(SiteChainDP {
        lo,
        hi,
        phases,
        initial,
        moves,
        jump_bound,
        boundary,
    })
}

/// Large-horizon statistics of the chain, in floating point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainStats {
    /// P(return to the start site at some time in `1..=N`).
    pub return_by_horizon: f64,
    /// P(site_N - site_0 > margin).
    pub right_tail: f64,
    /// P(site_N - site_0 < -margin).
    pub left_tail: f64,
    /// P(visit the start site at some time in `late_from+1..=N`).
    pub late_return: f64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FirstPassage {
    /// Exact probability of the truncated first-passage event.
    pub measure: BigRational,
    /// `(#β−r)^k M^k Σ_n c_{n,k} (r(#β−r)M²)^n` (roles of `r` and `#β−r`
    /// swapped for targets to the right), when every function in the support
    /// has the same number `r` of `+1` cells. The multiplicative constant is
    /// taken to be 1.
    pub bound: Option<BigRational>,
}

impl SiteChainDP {
    /// Nearest-neighbour chain on `[lo, hi]` with rightward probability
    /// `p_right(i)` at each site.
    pub fn birth_death(lo: i64, hi: i64, p_right: impl Fn(i64) -> BigRational) -> Self {
        let mut moves = Vec::new();
        for site in lo..=hi {
            let p = p_right(site);
            let q = BigRational::one() - &p;
            let mut m = Vec::new();
            if !q.is_zero() {
                m.push(Move { phase: 0, jump: -1, prob: q });
            }
            if !p.is_zero() {
                m.push(Move { phase: 0, jump: 1, prob: p });
            }
            moves.push(m);
        }
        SiteChainDP {
            lo,
            hi,
            phases: 1,
            initial: vec![BigRational::one()],
            moves,
            jump_bound: 1,
            boundary: Boundary::Absorb,
        }
    }

    pub fn window(&self) -> (i64, i64) {
        (self.lo, self.hi)
    }

    pub fn phases(&self) -> usize {
        self.phases
    }

    pub fn jump_bound(&self) -> i64 {
        self.jump_bound
    }

    pub fn with_boundary(mut self, boundary: Boundary) -> Self {
        self.boundary = boundary;
        self
    }

    fn state(&self, site: i64, phase: usize) -> usize {
        (site - self.lo) as usize * self.phases + phase
    }

    pub fn moves(&self, site: i64, phase: usize) -> &[Move] {
        &self.moves[self.state(site, phase)]
    }

    /// Jump law at `site` (single-phase chains only).
    pub fn jump_distribution(&self, site: i64) -> Option<BTreeMap<i64, BigRational>> {
        if self.phases != 1 || site < self.lo || site > self.hi {
            return None;
        }
        Some(self.moves(site, 0).iter().map(|m| (m.jump, m.prob.clone())).collect())
    }

    fn in_window(&self, site: i64) -> bool {
        site >= self.lo && site <= self.hi
    }

    fn require_in_window(&self, site: i64) -> Result<(), ExactError> {
        if self.in_window(site) {
            Ok(())
        } else {
            Err(self.too_small(format!("site {site} is outside the window")))
        }
    }

    fn too_small(&self, reason: String) -> ExactError {
        ExactError::WindowTooSmall {
            lo: self.lo,
            hi: self.hi,
            reason,
        }
    }

    fn typed<T: Weight>(&self) -> Engine<T> {
        let mut offsets = Vec::with_capacity(self.moves.len() + 1);
        let mut flat = Vec::new();
        offsets.push(0u32);
        for state_moves in &self.moves {
            for m in state_moves {
                flat.push((m.phase as u32, m.jump as i32, T::from_exact(&m.prob)));
            }
            offsets.push(flat.len() as u32);
        }
        Engine {
            lo: self.lo,
            n_sites: (self.hi - self.lo + 1) as usize,
            phases: self.phases,
            jump_bound: self.jump_bound as usize,
            initial: self.initial.iter().map(T::from_exact).collect(),
            offsets,
            moves: flat,
        }
    }

    /// Cumulative return probabilities `P(return to start by t)`, `t = 1..=N`.
    pub fn return_curve<T: Weight>(&self, start: i64, horizon: u64) -> Result<Vec<T>, ExactError> {
        self.require_in_window(start)?;
        if self.boundary == Boundary::Absorb {
            let d = (self.hi + 1 - start).min(start - (self.lo - 1));
            let steps_out = (d + self.jump_bound - 1) / self.jump_bound;
            if (2 * steps_out) as u64 <= horizon {
                return Err(self.too_small(format!(
                    "a walk from {start} can leave and come back within {horizon} steps"
                )));
            }
        }
        Ok(self.typed::<T>().return_curve(start, horizon))
    }

    pub fn return_prob_by_time(&self, start: i64, horizon: u64) -> Result<BigRational, ExactError> {
        self.return_prob::<BigRational>(start, horizon)
    }

    pub fn return_prob<T: Weight>(&self, start: i64, horizon: u64) -> Result<T, ExactError> {
        Ok(self
            .return_curve::<T>(start, horizon)?
            .pop()
            .unwrap_or_else(T::zero))
    }

    /// Probability of reaching `target_b` or beyond before `target_a` or
    /// beyond, from `start`.
    pub fn hit_before(&self, start: i64, target_a: i64, target_b: i64) -> Result<BigRational, ExactError> {
        self.hit_before_in::<BigRational>(start, target_a, target_b)
    }

    pub fn hit_before_in<T: Weight>(&self, start: i64, target_a: i64, target_b: i64) -> Result<T, ExactError> {
        if !(target_a < start && start < target_b) {
            return Err(ExactError::InvalidInput(format!(
                "need target_a < start < target_b, got {target_a} < {start} < {target_b}"
            )));
        }
        if target_a + 1 < self.lo || target_b - 1 > self.hi {
            return Err(self.too_small(format!("stripe ({target_a}, {target_b}) is not inside the window")));
        }
        let p = self.phases;
        let n_sites = (target_b - target_a - 1) as usize;
        let n = n_sites * p;
        let bw = p * (self.jump_bound as usize + 1);
        let width = 2 * bw + 1;
        let mut band = vec![vec![T::zero(); width]; n];
        let mut rhs = vec![T::zero(); n];
        for s in 0..n_sites {
            let site = target_a + 1 + s as i64;
            for ph in 0..p {
                let row = s * p + ph;
                band[row][bw] += &T::one();
                for m in self.moves(site, ph) {
                    let to = site + m.jump;
                    let prob = T::from_exact(&m.prob);
                    if to >= target_b {
                        rhs[row] += &prob;
                    } else if to > target_a {
                        let col = (to - target_a - 1) as usize * p + m.phase;
                        let slot = &mut band[row][col + bw - row];
                        *slot = slot.clone() - prob;
                    }
                }
            }
        }
        for piv in 0..n {
            let pivot = band[piv][bw].clone();
            if pivot.is_zero() {
                return Err(ExactError::SingularSystem);
            }
            let last = (piv + bw).min(n - 1);
            for r in piv + 1..=last {
                let f = band[r][piv + bw - r].clone();
                if f.is_zero() {
                    continue;
                }
                let factor = f / pivot.clone();
                for c in piv..=last {
                    let upper = band[piv][c + bw - piv].clone();
                    if upper.is_zero() {
                        continue;
                    }
                    let slot = &mut band[r][c + bw - r];
                    *slot = slot.clone() - factor.clone() * upper;
                }
                let adj = factor * rhs[piv].clone();
                rhs[r] = rhs[r].clone() - adj;
            }
        }
        let mut x = vec![T::zero(); n];
        for r in (0..n).rev() {
            let mut acc = rhs[r].clone();
            for c in r + 1..=(r + bw).min(n - 1) {
                let a = &band[r][c + bw - r];
                if !a.is_zero() {
                    acc = acc - a.clone() * x[c].clone();
                }
            }
            x[r] = acc / band[r][bw].clone();
        }
        let s = (start - target_a - 1) as usize;
        let mut result = T::zero();
        for ph in 0..p {
            result += &(T::from_exact(&self.initial[ph]) * x[s * p + ph].clone());
        }
        Ok(result)
    }

    /// Probability that a walk started from `starts` (site weights summing
    /// to one) lands on a `target` site at some time `1..=horizon`, while
    /// every earlier position at times `>= 1` satisfies `allowed`.
    pub fn hit_within<T: Weight>(
        &self,
        starts: &[(i64, T)],
        target: impl Fn(i64) -> bool,
        allowed: impl Fn(i64) -> bool,
        horizon: u64,
    ) -> Result<T, ExactError> {
        for (s, _) in starts {
            self.require_in_window(*s)?;
            if self.boundary == Boundary::Absorb {
                let reach = (horizon as i64).saturating_mul(self.jump_bound);
                if s - reach < self.lo || s + reach > self.hi {
                    return Err(self.too_small(format!("sites within {reach} of {s} must be inside")));
                }
            }
        }
        Ok(self.typed::<T>().hit_within(starts, &target, &allowed, horizon))
    }

    /// Exact probability of the site path `sites[0], sites[1], ...` from
    /// `sites[0]`.
    pub fn path_probability(&self, sites: &[i64]) -> Result<BigRational, ExactError> {
        let Some(&first) = sites.first() else {
            return Err(ExactError::InvalidInput("empty path".into()));
        };
        self.require_in_window(first)?;
        let mut phase_mass = self.initial.clone();
        for w in sites.windows(2) {
            self.require_in_window(w[0])?;
            let jump = w[1] - w[0];
            let mut next = vec![BigRational::zero(); self.phases];
            for (ph, mass) in phase_mass.iter().enumerate() {
                if mass.is_zero() {
                    continue;
                }
                for m in self.moves(w[0], ph) {
                    if m.jump == jump {
                        next[m.phase] += mass * &m.prob;
                    }
                }
            }
            phase_mass = next;
        }
        Ok(phase_mass.into_iter().sum())
    }

    /// Distribution of `site_N` from `start`, as `(site, probability)` over
    /// the window.
    pub fn site_distribution<T: Weight>(&self, start: i64, horizon: u64) -> Result<Vec<(i64, T)>, ExactError> {
        self.require_reach(start, horizon)?;
        let engine = self.typed::<T>();
        let dist = engine.evolve(start, horizon);
        Ok(engine.site_marginal(&dist))
    }

    fn require_reach(&self, start: i64, horizon: u64) -> Result<(), ExactError> {
        self.require_in_window(start)?;
        let reach = (horizon as i64).saturating_mul(self.jump_bound);
        if self.boundary == Boundary::Absorb && (start - reach < self.lo || start + reach > self.hi) {
            return Err(self.too_small(format!("sites within {reach} of {start} must be inside")));
        }
        Ok(())
    }

    /// Mass at `(site, phase)` at times `0..=horizon`, for the chain started
    /// with mass `initial[phase]` there and nothing else. Nothing is absorbed
    /// at the start state.
    pub(crate) fn occupation_terms(&self, site: i64, phase: usize, horizon: u64) -> Result<Vec<BigRational>, ExactError> {
        self.require_in_window(site)?;
        let engine = self.typed::<BigRational>();
        let mut dist = engine.point_mass(site);
        let s = (site - self.lo) as usize;
        for ph in 0..self.phases {
            if ph != phase {
                dist.mass[s * self.phases + ph] = BigRational::zero();
            }
        }
        let idx = s * self.phases + phase;
        let mut scratch = vec![BigRational::zero(); dist.mass.len()];
        let mut terms = vec![dist.mass[idx].clone()];
        for _ in 0..horizon {
            engine.step(&mut dist, &mut scratch);
            terms.push(dist.mass[idx].clone());
        }
        Ok(terms)
    }

    /// Floating-point statistics used to certify finite-horizon verdicts.
    pub fn stats(&self, start: i64, horizon: u64, margin: i64, late_from: u64) -> Result<ChainStats, ExactError> {
        self.require_reach(start, horizon)?;
        if let Some(bd) = BirthDeath::from_chain(self) {
            return Ok(bd.stats(start, horizon, margin, late_from));
        }
        let engine = self.typed::<f64>();
        let return_by_horizon = engine.return_curve(start, horizon).pop().unwrap_or(0.0);
        let at_late = engine.evolve(start, late_from.min(horizon));
        let final_dist = engine.evolve_from(at_late.clone(), horizon - late_from.min(horizon));
        let (mut right_tail, mut left_tail) = (0.0, 0.0);
        for (site, p) in engine.site_marginal(&final_dist) {
            if site - start > margin {
                right_tail += p;
            } else if site - start < -margin {
                left_tail += p;
            }
        }
        let late_return = engine.absorb_from(at_late, start, horizon.saturating_sub(late_from));
        Ok(ChainStats {
            return_by_horizon,
            right_tail,
            left_tail,
            late_return,
        })
    }
}

/// Flattened chain for the inner loops.
struct Engine<T> {
    lo: i64,
    n_sites: usize,
    phases: usize,
    jump_bound: usize,
    initial: Vec<T>,
    offsets: Vec<u32>,
    moves: Vec<(u32, i32, T)>,
}

/// A distribution over states together with the band of sites that may
/// carry mass.
#[derive(Clone)]
struct Dist<T> {
    mass: Vec<T>,
    lo: usize,
    hi: usize,
}

impl<T: Weight> Engine<T> {
    fn point_mass(&self, site: i64) -> Dist<T> {
        let s = (site - self.lo) as usize;
        let mut mass = vec![T::zero(); self.n_sites * self.phases];
        for (ph, w) in self.initial.iter().enumerate() {
            mass[s * self.phases + ph] = w.clone();
        }
        Dist { mass, lo: s, hi: s }
    }

    /// One step; mass leaving the window is dropped.
    fn step(&self, cur: &mut Dist<T>, next: &mut Vec<T>) {
        let p = self.phases;
        for s in cur.lo..=cur.hi {
            for ph in 0..p {
                let idx = s * p + ph;
                let m = std::mem::replace(&mut cur.mass[idx], T::zero());
                if m.is_zero() {
                    continue;
                }
                let (a, b) = (self.offsets[idx] as usize, self.offsets[idx + 1] as usize);
                for (to_phase, jump, prob) in &self.moves[a..b] {
                    let ts = s as i64 + *jump as i64;
                    if ts < 0 || ts >= self.n_sites as i64 {
                        continue;
                    }
                    next[ts as usize * p + *to_phase as usize] += &(m.clone() * prob.clone());
                }
            }
        }
        std::mem::swap(&mut cur.mass, next);
        cur.lo = cur.lo.saturating_sub(self.jump_bound);
        cur.hi = (cur.hi + self.jump_bound).min(self.n_sites - 1);
    }

    fn site_mass(&self, dist: &Dist<T>, s: usize) -> T {
        let mut total = T::zero();
        for ph in 0..self.phases {
            total += &dist.mass[s * self.phases + ph];
        }
        total
    }

    fn clear_site(&self, dist: &mut Dist<T>, s: usize) {
        for ph in 0..self.phases {
            dist.mass[s * self.phases + ph] = T::zero();
        }
    }

    fn return_curve(&self, start: i64, horizon: u64) -> Vec<T> {
        let s0 = (start - self.lo) as usize;
        let mut dist = self.point_mass(start);
        let mut scratch = vec![T::zero(); dist.mass.len()];
        let mut returned = T::zero();
        let mut curve = Vec::with_capacity(horizon as usize);
        for t in 1..=horizon {
            self.step(&mut dist, &mut scratch);
            returned += &self.site_mass(&dist, s0);
            self.clear_site(&mut dist, s0);
            // Mass farther than the remaining steps allow can never return.
            let left = ((horizon - t) as usize).saturating_mul(self.jump_bound);
            let keep_lo = s0.saturating_sub(left);
            let keep_hi = (s0 + left).min(self.n_sites - 1);
            for s in dist.lo..keep_lo.min(dist.hi + 1) {
                self.clear_site(&mut dist, s);
            }
            for s in (keep_hi + 1).max(dist.lo)..=dist.hi {
                self.clear_site(&mut dist, s);
            }
            dist.lo = dist.lo.max(keep_lo);
            dist.hi = dist.hi.min(keep_hi);
            curve.push(returned.clone());
        }
        curve
    }

    fn evolve(&self, start: i64, steps: u64) -> Dist<T> {
        self.evolve_from(self.point_mass(start), steps)
    }

    fn evolve_from(&self, mut dist: Dist<T>, steps: u64) -> Dist<T> {
        let mut scratch = vec![T::zero(); dist.mass.len()];
        for _ in 0..steps {
            self.step(&mut dist, &mut scratch);
        }
        dist
    }

    /// Mass absorbed at `site` within `steps` further steps.
    fn absorb_from(&self, mut dist: Dist<T>, site: i64, steps: u64) -> T {
        let s0 = (site - self.lo) as usize;
        let mut scratch = vec![T::zero(); dist.mass.len()];
        let mut absorbed = T::zero();
        for _ in 0..steps {
            self.step(&mut dist, &mut scratch);
            absorbed += &self.site_mass(&dist, s0);
            self.clear_site(&mut dist, s0);
        }
        absorbed
    }

    fn hit_within(
        &self,
        starts: &[(i64, T)],
        target: &dyn Fn(i64) -> bool,
        allowed: &dyn Fn(i64) -> bool,
        horizon: u64,
    ) -> T {
        let mut dist = Dist {
            mass: vec![T::zero(); self.n_sites * self.phases],
            lo: self.n_sites - 1,
            hi: 0,
        };
        for (site, w) in starts {
            let s = (site - self.lo) as usize;
            for (ph, init) in self.initial.iter().enumerate() {
                dist.mass[s * self.phases + ph] += &(w.clone() * init.clone());
            }
            dist.lo = dist.lo.min(s);
            dist.hi = dist.hi.max(s);
        }
        let mut scratch = vec![T::zero(); dist.mass.len()];
        let mut hits = T::zero();
        for _ in 0..horizon {
            self.step(&mut dist, &mut scratch);
            for s in dist.lo..=dist.hi {
                let site = self.lo + s as i64;
                if target(site) {
                    hits += &self.site_mass(&dist, s);
                    self.clear_site(&mut dist, s);
                } else if !allowed(site) {
                    self.clear_site(&mut dist, s);
                }
            }
        }
        hits
    }

    fn site_marginal(&self, dist: &Dist<T>) -> Vec<(i64, T)> {
        (dist.lo..=dist.hi)
            .map(|s| (self.lo + s as i64, self.site_mass(dist, s)))
            .filter(|(_, m)| !m.is_zero())
            .collect()
    }
}

const TRIM: f64 = 1e-40;

fn negligible(free: &[f64], fresh: &[f64], late: Option<&[f64]>, s: usize) -> bool {
    free[s] < TRIM && fresh[s] < TRIM && late.is_none_or(|l| l[s] < TRIM)
}

fn clear(free: &mut [f64], fresh: &mut [f64], late: Option<&mut [f64]>, s: usize) {
    free[s] = 0.0;
    fresh[s] = 0.0;
    if let Some(l) = late {
        l[s] = 0.0;
    }
}

/// Specialised `±1` single-phase chain in `f64`.
struct BirthDeath {
    lo: i64,
    right: Vec<f64>,
    left: Vec<f64>,
}

impl BirthDeath {
    fn from_chain(chain: &SiteChainDP) -> Option<Self> {
        if chain.phases != 1 {
            return None;
        }
        let n = (chain.hi - chain.lo + 1) as usize;
        let mut right = vec![0.0; n];
        let mut left = vec![0.0; n];
        for (s, moves) in chain.moves.iter().enumerate() {
            for m in moves {
                match m.jump {
                    1 => right[s] = rational::to_f64(&m.prob),
                    -1 => left[s] = rational::to_f64(&m.prob),
                    _ => return None,
                }
            }
        }
        Some(BirthDeath { lo: chain.lo, right, left })
    }

    #[inline]
    fn step(&self, cur: &[f64], next: &mut [f64], lo: usize, hi: usize) {
        let n = cur.len();
        for x in next[lo.saturating_sub(1)..=(hi + 1).min(n - 1)].iter_mut() {
            *x = 0.0;
        }
        for s in lo..=hi {
            let m = cur[s];
            if m == 0.0 {
                continue;
            }
            if s + 1 < n {
                next[s + 1] += m * self.right[s];
            }
            if s > 0 {
                next[s - 1] += m * self.left[s];
            }
        }
    }

    fn stats(&self, start: i64, horizon: u64, margin: i64, late_from: u64) -> ChainStats {
        let n = self.right.len();
        let s0 = (start - self.lo) as usize;
        let late_from = late_from.min(horizon);

        // Free evolution, with the first-return and late-visit chains carried
        // alongside.
        let mut free = vec![0.0; n];
        let mut free_next = vec![0.0; n];
        let mut fresh = vec![0.0; n];
        let mut fresh_next = vec![0.0; n];
        free[s0] = 1.0;
        fresh[s0] = 1.0;
        let mut returned = 0.0;
        let mut late = 0.0;
        let (mut lo, mut hi) = (s0, s0);
        let mut late_dist: Option<Vec<f64>> = None;
        let mut late_next = vec![0.0; n];
        for t in 1..=horizon {
            self.step(&free, &mut free_next, lo, hi);
            self.step(&fresh, &mut fresh_next, lo, hi);
            if let Some(ld) = late_dist.as_mut() {
                self.step(ld, &mut late_next, lo, hi);
                std::mem::swap(ld, &mut late_next);
                late += ld[s0];
                ld[s0] = 0.0;
            }
            std::mem::swap(&mut free, &mut free_next);
            std::mem::swap(&mut fresh, &mut fresh_next);
            returned += fresh[s0];
            fresh[s0] = 0.0;
            lo = lo.saturating_sub(1);
            hi = (hi + 1).min(n - 1);
            // Drop edge mass below 1e-40; the total discarded stays far below
            // any reported precision and the band stays near the bulk.
            while lo < s0 && negligible(&free, &fresh, late_dist.as_deref(), lo) {
                clear(&mut free, &mut fresh, late_dist.as_deref_mut(), lo);
                lo += 1;
            }
            while hi > s0 && negligible(&free, &fresh, late_dist.as_deref(), hi) {
                clear(&mut free, &mut fresh, late_dist.as_deref_mut(), hi);
                hi -= 1;
            }
            if t == late_from {
                late_dist = Some(free.clone());
            }
        }
        if late_from == 0 {
            // Late window covers the whole horizon: the first-return chain.
            late = returned;
        }
        let (mut right_tail, mut left_tail) = (0.0, 0.0);
        for (s, &p) in free.iter().enumerate().take(hi + 1).skip(lo) {
            let d = s as i64 - s0 as i64;
            if d > margin {
                right_tail += p;
            } else if d < -margin {
                left_tail += p;
            }
        }
        ChainStats {
            return_by_horizon: returned,
            right_tail,
            left_tail,
            late_return: late,
        }
    }
}

/// Truncated first-passage probability toward `target`: the probability
/// that the walk from site 0 first reaches `target` at some time
/// `<= 2 n_max + |target|`, staying strictly between 0 and `target` before.
pub fn first_passage_toward(
    map: &MarkovIntervalMap,
    env: &EnvironmentRealization,
    target: i64,
    n_max: u64,
) -> Result<FirstPassage, ExactError> {
    if target == 0 {
        return Err(ExactError::InvalidInput("target must be nonzero".into()));
    }
    if !map.is_full_branch() {
        return Err(ExactError::UnsupportedBase);
    }
    let support = env.model().support();
    if !support.iter().all(TransitionFunction::is_unit) {
        return Err(ExactError::UnsupportedJumps);
    }
    let k = target.unsigned_abs();
    let (lo, hi) = (target.min(0) - 1, target.max(0) + 1);
    let chain = build_site_chain_on(map, env, lo, hi, Boundary::Unchecked, false)?;
    let horizon = 2 * n_max + k;
    let measure = chain.hit_within::<BigRational>(
        &[(0, BigRational::one())],
        |site| site == target,
        |site| site.signum() == target.signum() && site.abs() < target.abs(),
        horizon,
    )?;

    let cells = map.len();
    let r = support[0].count(1);
    let bound = support.iter().all(|g| g.count(1) == r).then(|| {
        let sup_g = map.gibbs_bounds().sup_g;
        let toward = if target < 0 { cells - r } else { r };
        let step = BigRational::from_integer(((r * (cells - r)) as i64).into()) * &sup_g * &sup_g;
        let table = path_counts(n_max as usize, k as usize);
        let mut sum = BigRational::zero();
        let mut power = BigRational::one();
        for n in 0..=n_max as usize {
            sum += BigRational::from_integer(table.get(n, k as usize).clone().into()) * &power;
            power *= &step;
        }
        let lead = BigRational::from_integer((toward as i64).into()) * &sup_g;
        num_traits::pow(lead, k as usize) * sum
    });
    Ok(FirstPassage { measure, bound })
}

/// `m(₀A_{0,−k})` truncated at `2 n_max + k` steps.
pub fn first_passage_measure(
    map: &MarkovIntervalMap,
    env: &EnvironmentRealization,
    k: u64,
    n_max: u64,
) -> Result<FirstPassage, ExactError> {
    if k == 0 {
        return Err(ExactError::InvalidInput("k must be at least 1".into()));
    }
    first_passage_toward(map, env, -(k as i64), n_max)
}
