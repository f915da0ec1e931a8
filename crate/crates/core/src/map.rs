//! Piecewise-linear expanding Markov maps of `[0, 1]`.
//!
//! A map is given by a partition `0 = b_0 < b_1 < ... < b_K = 1` into
//! elements `a_j = [b_j, b_{j+1})` (the last element also contains `1`) and
//! one affine branch `x -> s_j x + t_j` per element. The affine image of every
//! element must be a union of partition elements, and every branch must be
//! expanding (`|s_j| > 1`). All data is exact.
//!
//! Partition indices are zero-based throughout the crate.

use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::rational::{self, RatStr};

/// Default ceiling on the number of words `enumerate_cylinders` will produce.
pub const DEFAULT_ENUMERATION_CAP: u128 = 10_000_000;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MapError {
    #[error("partition is invalid: {0}")]
    BadPartition(String),
    #[error("branch {element} is not expanding (|slope| = {slope} <= 1)")]
    NonExpanding { element: usize, slope: String },
    #[error("image of element {element} is [{lo}, {hi}], which is not a union of partition elements")]
    NonMarkovImage {
        element: usize,
        lo: String,
        hi: String,
    },
    #[error("point {0} lies outside [0, 1]")]
    OutOfDomain(String),
    #[error("{count} cylinders of rank {rank} exceed the enumeration cap {cap}")]
    EnumerationTooLarge { rank: usize, count: u128, cap: u128 },
    #[error("cylinder word is empty")]
    EmptyWord,
    #[error("symbol {0} is not a partition index")]
    BadSymbol(usize),
}

/// Serializable description of a map: breakpoints and per-element affine
/// coefficients as `"p/q"` strings.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapSpec {
    pub breakpoints: Vec<RatStr>,
    pub slopes: Vec<RatStr>,
    pub intercepts: Vec<RatStr>,
}

impl MapSpec {
    /// `x -> k x mod 1` on `k` equal cells.
    pub fn uniform(k: usize) -> Self {
        let k_i = k as i64;
        MapSpec {
            breakpoints: (0..=k_i).map(|j| RatStr(rational::ratio(j, k_i))).collect(),
            slopes: (0..k).map(|_| RatStr(rational::int(k_i))).collect(),
            intercepts: (0..k_i).map(|j| RatStr(rational::int(-j))).collect(),
        }
    }

    /// Full-branch map on the given breakpoints: every element is mapped
    /// increasingly and affinely onto `[0, 1]`.
    pub fn full_branch(breakpoints: &[BigRational]) -> Self {
        let mut slopes = Vec::new();
        let mut intercepts = Vec::new();
        for w in breakpoints.windows(2) {
            let len = &w[1] - &w[0];
            let slope = len.recip();
            intercepts.push(RatStr(-(&w[0] * &slope)));
            slopes.push(RatStr(slope));
        }
        MapSpec {
            breakpoints: breakpoints.iter().cloned().map(RatStr).collect(),
            slopes,
            intercepts,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Branch {
    pub slope: BigRational,
    pub intercept: BigRational,
}

impl Branch {
    pub fn eval(&self, x: &BigRational) -> BigRational {
        &self.slope * x + &self.intercept
    }

    pub fn preimage(&self, y: &BigRational) -> BigRational {
        (y - &self.intercept) / &self.slope
    }
}

/// A validated piecewise-linear Markov interval map. Immutable once built.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MarkovIntervalMap {
    breakpoints: Vec<BigRational>,
    branches: Vec<Branch>,
    image_sets: Vec<Vec<usize>>,
    measures: Vec<BigRational>,
    image_measures: Vec<BigRational>,
    full_branch: bool,
}

/// A finite symbol word `(w_0, ..., w_{n-1})`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CylinderWord(pub Vec<usize>);

impl CylinderWord {
    pub fn rank(&self) -> usize {
        self.0.len()
    }

    pub fn symbols(&self) -> &[usize] {
        &self.0
    }
}

impl From<Vec<usize>> for CylinderWord {
    fn from(symbols: Vec<usize>) -> Self {
        CylinderWord(symbols)
    }
}

/// Gibbs and distortion data for a piecewise-linear map.
#[derive(Debug, Clone, PartialEq)]
pub struct GibbsBounds {
    /// `min_j ln |s_j|`.
    pub inf_h: f64,
    /// `max_j 1/|s_j|`, exact.
    pub sup_g: BigRational,
    /// Smallest absolute slope, exact (`e^{inf_h}`).
    pub min_slope: BigRational,
    /// Always 1: branches are affine, so densities are constant on cylinders.
    pub distortion: f64,
    /// `min_j m(T a_j)`.
    pub big_image_inf: BigRational,
}

impl MarkovIntervalMap {
    pub fn from_spec(spec: &MapSpec) -> Result<Self, MapError> {
        let breakpoints: Vec<BigRational> = spec.breakpoints.iter().map(|r| r.0.clone()).collect();
        let branches: Vec<Branch> = spec
            .slopes
            .iter()
            .zip(&spec.intercepts)
            .map(|(s, t)| Branch {
                slope: s.0.clone(),
                intercept: t.0.clone(),
            })
            .collect();
        if spec.slopes.len() != spec.intercepts.len() {
            return Err(MapError::BadPartition(format!(
                "{} slopes but {} intercepts",
                spec.slopes.len(),
                spec.intercepts.len()
            )));
        }
        Self::new(breakpoints, branches)
    }

    pub fn new(breakpoints: Vec<BigRational>, branches: Vec<Branch>) -> Result<Self, MapError> {
        if breakpoints.len() < 3 {
            return Err(MapError::BadPartition(
                "need at least two partition elements".into(),
            ));
        }
        if !breakpoints[0].is_zero() || !breakpoints[breakpoints.len() - 1].is_one() {
            return Err(MapError::BadPartition(
                "breakpoints must start at 0 and end at 1".into(),
            ));
        }
        if breakpoints.windows(2).any(|w| w[0] >= w[1]) {
            return Err(MapError::BadPartition(
                "breakpoints must be strictly increasing".into(),
            ));
        }
        let k = breakpoints.len() - 1;
        if branches.len() != k {
            return Err(MapError::BadPartition(format!(
                "{k} partition elements but {} branches",
                branches.len()
            )));
        }

        let mut image_sets = Vec::with_capacity(k);
        let mut image_measures = Vec::with_capacity(k);
        for (j, branch) in branches.iter().enumerate() {
            if branch.slope.abs() <= BigRational::one() {
                return Err(MapError::NonExpanding {
                    element: j,
                    slope: rational::format(&branch.slope.abs()),
                });
            }
            let y0 = branch.eval(&breakpoints[j]);
            let y1 = branch.eval(&breakpoints[j + 1]);
            let (lo, hi) = if y0 <= y1 { (y0, y1) } else { (y1, y0) };
            let non_markov = || MapError::NonMarkovImage {
                element: j,
                lo: rational::format(&lo),
                hi: rational::format(&hi),
            };
            let first = breakpoints.iter().position(|b| *b == lo).ok_or_else(non_markov)?;
            let last = breakpoints.iter().position(|b| *b == hi).ok_or_else(non_markov)?;
            image_measures.push(&hi - &lo);
            image_sets.push((first..last).collect());
        }

        let measures = breakpoints.windows(2).map(|w| &w[1] - &w[0]).collect();
        let full_branch = image_sets.iter().all(|s: &Vec<usize>| s.len() == k);
        Ok(MarkovIntervalMap {
            breakpoints,
            branches,
            image_sets,
            measures,
            image_measures,
            full_branch,
        })
    }

    pub fn uniform(k: usize) -> Self {
        Self::from_spec(&MapSpec::uniform(k)).expect("k x mod 1 is a valid Markov map for k >= 2")
    }

    /// Canonical spec; `from_spec(to_spec())` reproduces the map exactly.
    pub fn to_spec(&self) -> MapSpec {
        MapSpec {
            breakpoints: self.breakpoints.iter().cloned().map(RatStr).collect(),
            slopes: self.branches.iter().map(|b| RatStr(b.slope.clone())).collect(),
            intercepts: self.branches.iter().map(|b| RatStr(b.intercept.clone())).collect(),
        }
    }

    /// Number of partition elements, `#β`.
    pub fn len(&self) -> usize {
        self.branches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.branches.is_empty()
    }

    pub fn breakpoints(&self) -> &[BigRational] {
        &self.breakpoints
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    pub fn image_set(&self, j: usize) -> &[usize] {
        &self.image_sets[j]
    }

    pub fn image_sets(&self) -> &[Vec<usize>] {
        &self.image_sets
    }

    pub fn measures(&self) -> &[BigRational] {
        &self.measures
    }

    pub fn measure(&self, j: usize) -> &BigRational {
        &self.measures[j]
    }

    /// `m(T a_j)`.
    pub fn image_measure(&self, j: usize) -> &BigRational {
        &self.image_measures[j]
    }

    pub fn is_full_branch(&self) -> bool {
        self.full_branch
    }

    pub fn allows(&self, from: usize, to: usize) -> bool {
        self.image_sets[from].binary_search(&to).is_ok()
    }

    /// Index of the element containing `x`; `x = 1` belongs to the last one.
    pub fn element_of(&self, x: &BigRational) -> Result<usize, MapError> {
        if x.is_negative() || *x > BigRational::one() {
            return Err(MapError::OutOfDomain(rational::format(x)));
        }
        let k = self.len();
        // First breakpoint strictly greater than x, minus one.
        let idx = self.breakpoints.partition_point(|b| b <= x);
        Ok(idx.saturating_sub(1).min(k - 1))
    }

    pub fn apply(&self, x: &BigRational) -> Result<BigRational, MapError> {
        let j = self.element_of(x)?;
        Ok(self.branches[j].eval(x))
    }

    fn check_word(&self, word: &CylinderWord) -> Result<(), MapError> {
        if word.0.is_empty() {
            return Err(MapError::EmptyWord);
        }
        match word.0.iter().find(|&&s| s >= self.len()) {
            Some(&s) => Err(MapError::BadSymbol(s)),
            None => Ok(()),
        }
    }

    pub fn is_admissible(&self, word: &CylinderWord) -> bool {
        word.0.windows(2).all(|w| self.allows(w[0], w[1]))
    }

    /// Lebesgue measure of the cylinder `[w_0, ..., w_{n-1}]`:
    /// `m(a_{w_{n-1}}) * Π_{t < n-1} |s_{w_t}|^{-1}` when admissible, else 0.
    pub fn cylinder_measure(&self, word: &CylinderWord) -> Result<BigRational, MapError> {
        self.check_word(word)?;
        if !self.is_admissible(word) {
            return Ok(BigRational::zero());
        }
        let symbols = &word.0;
        let last = symbols[symbols.len() - 1];
        // Multiply numerators and denominators separately and reduce once.
        let mut numer = self.measures[last].numer().clone();
        let mut denom = self.measures[last].denom().clone();
        for &s in &symbols[..symbols.len() - 1] {
            let slope = &self.branches[s].slope;
            numer *= slope.denom();
            denom *= slope.numer().abs();
        }
        Ok(BigRational::new(numer, denom))
    }

    /// The cylinder as an interval `[lo, hi]`, obtained by pulling the last
    /// element back through the branches one step at a time. `None` when the
    /// word is inadmissible.
    pub fn cylinder_interval(
        &self,
        word: &CylinderWord,
    ) -> Result<Option<(BigRational, BigRational)>, MapError> {
        self.check_word(word)?;
        let symbols = &word.0;
        let last = symbols[symbols.len() - 1];
        let mut lo = self.breakpoints[last].clone();
        let mut hi = self.breakpoints[last + 1].clone();
        for &s in symbols[..symbols.len() - 1].iter().rev() {
            let branch = &self.branches[s];
            let p0 = branch.preimage(&lo);
            let p1 = branch.preimage(&hi);
            let (p_lo, p_hi) = if p0 <= p1 { (p0, p1) } else { (p1, p0) };
            lo = p_lo.max(self.breakpoints[s].clone());
            hi = p_hi.min(self.breakpoints[s + 1].clone());
            if lo >= hi {
                return Ok(None);
            }
        }
        Ok(Some((lo, hi)))
    }

    /// Number of admissible words of rank `n`.
    pub fn count_admissible(&self, n: usize) -> u128 {
        if n == 0 {
            return 0;
        }
        let k = self.len();
        let mut counts = vec![1u128; k];
        for _ in 1..n {
            let mut next = vec![0u128; k];
            for (j, &c) in counts.iter().enumerate() {
                for &t in &self.image_sets[j] {
                    next[t] = next[t].saturating_add(c);
                }
            }
            counts = next;
        }
        counts.iter().fold(0u128, |a, &c| a.saturating_add(c))
    }

    /// Visits every admissible word of rank `n` beginning with `prefix`, in
    /// lexicographic order. The visitor sees the full symbol slice.
    pub fn for_each_admissible<F: FnMut(&[usize])>(&self, prefix: &[usize], n: usize, mut visit: F) {
        if prefix.len() > n || !prefix.windows(2).all(|w| self.allows(w[0], w[1])) {
            return;
        }
        let mut word = prefix.to_vec();
        if word.is_empty() {
            for j in 0..self.len() {
                word.push(j);
                self.extend_words(&mut word, n, &mut visit);
                word.pop();
            }
        } else {
            self.extend_words(&mut word, n, &mut visit);
        }
    }

    fn extend_words<F: FnMut(&[usize])>(&self, word: &mut Vec<usize>, n: usize, visit: &mut F) {
        if word.len() == n {
            visit(word);
            return;
        }
        let last = word[word.len() - 1];
        for &next in &self.image_sets[last] {
            word.push(next);
            self.extend_words(word, n, visit);
            word.pop();
        }
    }

    pub fn enumerate_cylinders(&self, n: usize) -> Result<Vec<CylinderWord>, MapError> {
        self.enumerate_cylinders_capped(n, DEFAULT_ENUMERATION_CAP)
    }

    pub fn enumerate_cylinders_capped(&self, n: usize, cap: u128) -> Result<Vec<CylinderWord>, MapError> {
        if n == 0 {
            return Ok(Vec::new());
        }
        let count = self.count_admissible(n);
        if count > cap {
            return Err(MapError::EnumerationTooLarge { rank: n, count, cap });
        }
        let mut words = Vec::with_capacity(count as usize);
        self.for_each_admissible(&[], n, |w| words.push(CylinderWord(w.to_vec())));
        Ok(words)
    }

    pub fn gibbs_bounds(&self) -> GibbsBounds {
        let min_slope = self
            .branches
            .iter()
            .map(|b| b.slope.abs())
            .min()
            .expect("a map has at least two branches");
        let big_image_inf = self
            .image_measures
            .iter()
            .min()
            .cloned()
            .expect("a map has at least two branches");
        GibbsBounds {
            inf_h: rational::to_f64(&min_slope).ln(),
            sup_g: min_slope.recip(),
            min_slope,
            distortion: 1.0,
            big_image_inf,
        }
    }

    /// Law of the symbol process `x -> (element of T^t x)` when `x` is
    /// Lebesgue-distributed: initial probabilities `m(a_j)` and transition
    /// probabilities `P(k | j) = m(a_k) / m(T a_j)` for `k` in the image set.
    pub fn symbol_transition(&self, from: usize, to: usize) -> BigRational {
        if self.allows(from, to) {
            &self.measures[to] / &self.image_measures[from]
        } else {
            BigRational::zero()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, ratio};

    fn doubling() -> MarkovIntervalMap {
        MarkovIntervalMap::uniform(2)
    }

    fn triple() -> MarkovIntervalMap {
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

    /// a_0 = [0,1/4) -> [0,1], a_1 = [1/4,1/2) -> [0,1/2), a_2 = [1/2,1] -> [0,1].
    fn partial_map() -> MarkovIntervalMap {
        MarkovIntervalMap::from_spec(&spec(
            &[(0, 1), (1, 4), (1, 2), (1, 1)],
            &[(4, 1), (2, 1), (2, 1)],
            &[(0, 1), (-1, 2), (-1, 1)],
        ))
        .unwrap()
    }

    /// a_0 = [0,2/3) -> [0,1], a_1 = [2/3,1] -> a_0.
    fn forced_map() -> MarkovIntervalMap {
        MarkovIntervalMap::from_spec(&spec(&[(0, 1), (2, 3), (1, 1)], &[(3, 2), (2, 1)], &[(0, 1), (-4, 3)]))
            .unwrap()
    }

    #[test]
    fn doubling_map_is_full_branch() {
        let map = doubling();
        assert!(map.is_full_branch());
        assert_eq!(map.measures(), &[ratio(1, 2), ratio(1, 2)]);
    }

    #[test]
    fn triple_map_measures() {
        let map = triple();
        assert!(map.is_full_branch());
        assert_eq!(map.measures(), &[ratio(1, 3), ratio(1, 3), ratio(1, 3)]);
    }

    #[test]
    fn contracting_branch_rejected() {
        let err = MarkovIntervalMap::from_spec(&spec(
            &[(0, 1), (1, 2), (1, 1)],
            &[(1, 2), (2, 1)],
            &[(0, 1), (-1, 1)],
        ))
        .unwrap_err();
        assert!(matches!(err, MapError::NonExpanding { element: 0, .. }));
    }

    #[test]
    fn bad_partitions_rejected() {
        let err = MarkovIntervalMap::from_spec(&spec(
            &[(0, 1), (2, 3), (1, 2), (1, 1)],
            &[(3, 1), (3, 1), (3, 1)],
            &[(0, 1), (0, 1), (0, 1)],
        ))
        .unwrap_err();
        assert!(matches!(err, MapError::BadPartition(_)));
        let err = MarkovIntervalMap::from_spec(&spec(&[(0, 1), (1, 2), (3, 4)], &[(2, 1), (2, 1)], &[(0, 1), (-1, 1)]))
            .unwrap_err();
        assert!(matches!(err, MapError::BadPartition(_)));
    }

    #[test]
    fn non_markov_image_rejected() {
        // 3x on [0, 1/2) has image [0, 3/2).
        let err = MarkovIntervalMap::from_spec(&spec(
            &[(0, 1), (1, 2), (1, 1)],
            &[(3, 1), (2, 1)],
            &[(0, 1), (-1, 1)],
        ))
        .unwrap_err();
        assert!(matches!(err, MapError::NonMarkovImage { element: 0, .. }));
        // 3x - 1/3 on [1/2, 1] does not land on breakpoints.
        let err = MarkovIntervalMap::from_spec(&spec(
            &[(0, 1), (1, 2), (1, 1)],
            &[(2, 1), (3, 2)],
            &[(0, 1), (-1, 3)],
        ))
        .unwrap_err();
        assert!(matches!(err, MapError::NonMarkovImage { element: 1, .. }));
    }

    #[test]
    fn apply_examples() {
        assert_eq!(doubling().apply(&ratio(1, 3)).unwrap(), ratio(2, 3));
        assert_eq!(triple().apply(&ratio(5, 9)).unwrap(), ratio(2, 3));
        assert!(matches!(doubling().apply(&ratio(3, 2)), Err(MapError::OutOfDomain(_))));
        assert!(matches!(doubling().apply(&ratio(-1, 2)), Err(MapError::OutOfDomain(_))));
    }

    #[test]
    fn boundary_convention() {
        let map = triple();
        assert_eq!(map.element_of(&int(0)).unwrap(), 0);
        assert_eq!(map.element_of(&ratio(1, 3)).unwrap(), 1);
        assert_eq!(map.element_of(&ratio(2, 3)).unwrap(), 2);
        assert_eq!(map.element_of(&int(1)).unwrap(), 2);
        assert_eq!(map.apply(&int(1)).unwrap(), int(1));
    }

    #[test]
    fn cylinder_measure_examples() {
        let word = CylinderWord(vec![0, 1, 0]);
        assert_eq!(doubling().cylinder_measure(&word).unwrap(), ratio(1, 8));
        for n in 1..=6 {
            let word = CylinderWord((0..n).map(|t| (t * 7 + 1) % 3).collect());
            assert_eq!(
                triple().cylinder_measure(&word).unwrap(),
                BigRational::new(1.into(), num_bigint::BigInt::from(3).pow(n as u32))
            );
        }
        let map = partial_map();
        assert!(!map.is_full_branch());
        assert_eq!(map.image_set(1), &[0, 1]);
        assert_eq!(map.cylinder_measure(&CylinderWord(vec![1, 2])).unwrap(), BigRational::zero());
        assert_eq!(map.cylinder_interval(&CylinderWord(vec![1, 2])).unwrap(), None);
        assert!(matches!(
            map.cylinder_measure(&CylinderWord(vec![])),
            Err(MapError::EmptyWord)
        ));
    }

    #[test]
    fn enumeration_examples() {
        assert_eq!(doubling().enumerate_cylinders(3).unwrap().len(), 8);
        assert_eq!(triple().enumerate_cylinders(2).unwrap().len(), 9);
        let words = triple().enumerate_cylinders(2).unwrap();
        assert!(words.windows(2).all(|w| w[0] < w[1]));

        // An expanding element cannot map onto itself alone; the forced
        // structure here is image_sets[1] = {0}.
        let map = forced_map();
        assert_eq!(map.image_set(1), &[0]);
        let from_one: Vec<_> = map
            .enumerate_cylinders(2)
            .unwrap()
            .into_iter()
            .filter(|w| w.0[0] == 1)
            .collect();
        assert_eq!(from_one, vec![CylinderWord(vec![1, 0])]);
        assert_eq!(map.count_admissible(2), 3);
    }

    #[test]
    fn enumeration_cap_enforced() {
        let err = triple().enumerate_cylinders_capped(10, 1000).unwrap_err();
        assert!(matches!(err, MapError::EnumerationTooLarge { count: 59049, .. }));
    }

    #[test]
    fn gibbs_examples() {
        let g = triple().gibbs_bounds();
        assert!((g.inf_h - 3f64.ln()).abs() < 1e-12);
        assert!(g.inf_h > 0.5 * 8f64.ln());
        assert_eq!(g.sup_g, ratio(1, 3));
        assert_eq!(g.big_image_inf, int(1));

        let g = doubling().gibbs_bounds();
        assert!((g.inf_h - 2f64.ln()).abs() < 1e-12);
        assert_eq!(g.big_image_inf, int(1));

        let uneven = MarkovIntervalMap::from_spec(&MapSpec::full_branch(&[
            int(0),
            ratio(1, 2),
            ratio(3, 4),
            int(1),
        ]))
        .unwrap();
        let g = uneven.gibbs_bounds();
        assert!((g.inf_h - 2f64.ln()).abs() < 1e-12);
        assert_eq!(g.sup_g, ratio(1, 2));
        assert_eq!(g.distortion, 1.0);

        assert_eq!(partial_map().gibbs_bounds().big_image_inf, ratio(1, 2));
        assert_eq!(forced_map().gibbs_bounds().big_image_inf, ratio(2, 3));
    }

    #[test]
    fn spec_round_trip() {
        let map = partial_map();
        let text = toml::to_string(&map.to_spec()).unwrap();
        let back: MapSpec = toml::from_str(&text).unwrap();
        assert_eq!(MarkovIntervalMap::from_spec(&back).unwrap(), map);
    }
}
