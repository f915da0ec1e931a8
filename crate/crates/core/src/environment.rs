//! Two-sided deterministic environments `(f_i)_{i ∈ ℤ}`.
//!
//! An environment assigns to every site a transition function drawn from a
//! finite support. Random environments are realized by a counter-based
//! generator keyed on `(env_seed, site)`, so any site can be queried in O(1)
//! without generating its neighbours (Markov environments are the exception;
//! they are generated outward from the origin and memoized).

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex, RwLock};

use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use serde::{Deserialize, Serialize};

use crate::rational::{self, RatStr};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EnvError {
    #[error("invalid environment model: {0}")]
    InvalidModel(String),
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, EnvError> {
    Err(EnvError::InvalidModel(msg.into()))
}

/// Jump value on each partition element.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TransitionFunction {
    jumps: Vec<i64>,
}

impl TransitionFunction {
    pub fn new(jumps: Vec<i64>) -> Self {
        TransitionFunction { jumps }
    }

    /// Constant function with value `jump` on `k` elements.
    pub fn constant(k: usize, jump: i64) -> Self {
        TransitionFunction { jumps: vec![jump; k] }
    }

    /// `+1` on the first `r` elements and `-1` on the remaining `k - r`.
    pub fn plus_minus(k: usize, r: usize) -> Self {
        TransitionFunction {
            jumps: (0..k).map(|j| if j < r { 1 } else { -1 }).collect(),
        }
    }

    pub fn jumps(&self) -> &[i64] {
        &self.jumps
    }

    #[inline]
    pub fn jump(&self, element: usize) -> i64 {
        self.jumps[element]
    }

    pub fn len(&self) -> usize {
        self.jumps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.jumps.is_empty()
    }

    pub fn negated(&self) -> Self {
        TransitionFunction {
            jumps: self.jumps.iter().map(|v| -v).collect(),
        }
    }

    pub fn max_abs(&self) -> i64 {
        self.jumps.iter().map(|v| v.abs()).max().unwrap_or(0)
    }

    /// Number of elements on which the function takes `value`.
    pub fn count(&self, value: i64) -> usize {
        self.jumps.iter().filter(|&&v| v == value).count()
    }

    /// True when every value is `±1`.
    pub fn is_unit(&self) -> bool {
        self.jumps.iter().all(|v| v.abs() == 1)
    }
}

/// How sites are assigned support indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EnvKind {
    /// The same function everywhere except at listed sites.
    Fixed {
        function: usize,
        overrides: BTreeMap<i64, usize>,
    },
    /// `pattern[i mod len]` with floor-mod for negative sites.
    Periodic { pattern: Vec<usize> },
    /// One function on `i < 0`, one at `i = 0`, one on `i > 0`.
    Sided {
        left: usize,
        origin: usize,
        right: usize,
    },
    /// Independent draws with the given probabilities.
    Iid { weights: Vec<BigRational> },
    /// Stationary Markov chain on support indices.
    Markov {
        matrix: Vec<Vec<BigRational>>,
        stationary: Vec<BigRational>,
    },
}

impl EnvKind {
    pub fn name(&self) -> &'static str {
        match self {
            EnvKind::Fixed { .. } => "fixed",
            EnvKind::Periodic { .. } => "periodic",
            EnvKind::Sided { .. } => "sided",
            EnvKind::Iid { .. } => "iid",
            EnvKind::Markov { .. } => "markov",
        }
    }

    pub fn is_random(&self) -> bool {
        matches!(self, EnvKind::Iid { .. } | EnvKind::Markov { .. })
    }
}

/// A validated environment model: a finite support `G` and a rule for
/// assigning an element of `G` to each site.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnvironmentModel {
    support: Vec<TransitionFunction>,
    kind: EnvKind,
    seed: u64,
}

/// The environment block of a config document.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentSpec {
    pub kind: String,
    pub support: Vec<TransitionFunction>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub function: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub overrides: Vec<(i64, usize)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pattern: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub left: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub right: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<RatStr>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<Vec<RatStr>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stationary: Option<Vec<RatStr>>,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SymmetryAndBounds {
    pub is_symmetric: bool,
    pub jump_bound: i64,
    pub uniformly_bounded: bool,
}

fn check_probability_vector(probs: &[BigRational], what: &str) -> Result<(), EnvError> {
    if probs.iter().any(|p| p.is_negative()) {
        return invalid(format!("{what} has a negative entry"));
    }
    let total: BigRational = probs.iter().sum();
    if !total.is_one() {
        return invalid(format!("{what} sums to {}, not 1", rational::format(&total)));
    }
    Ok(())
}

fn is_irreducible(matrix: &[Vec<BigRational>]) -> bool {
    let n = matrix.len();
    let reach = |forward: bool| {
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(u) = stack.pop() {
            for v in 0..n {
                let p = if forward { &matrix[u][v] } else { &matrix[v][u] };
                if !seen[v] && !p.is_zero() {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        seen.into_iter().all(|s| s)
    };
    reach(true) && reach(false)
}

impl EnvironmentModel {
    pub fn new(support: Vec<TransitionFunction>, kind: EnvKind, seed: u64) -> Result<Self, EnvError> {
        if support.is_empty() {
            return invalid("support is empty");
        }
        let k = support[0].len();
        if k == 0 || support.iter().any(|g| g.len() != k) {
            return invalid("transition functions must all have the same positive length");
        }
        if support.iter().any(|g| g.max_abs() > i64::from(i32::MAX)) {
            return invalid("jumps must fit in 32 bits");
        }
        let n = support.len();
        let in_range = |idx: usize| idx < n;
        match &kind {
            EnvKind::Fixed { function, overrides } => {
                if !in_range(*function) || !overrides.values().all(|&v| in_range(v)) {
                    return invalid("fixed environment refers to a missing support index");
                }
            }
            EnvKind::Periodic { pattern } => {
                if pattern.is_empty() || !pattern.iter().all(|&v| in_range(v)) {
                    return invalid("periodic pattern is empty or refers to a missing support index");
                }
            }
            EnvKind::Sided { left, origin, right } => {
                if ![left, origin, right].iter().all(|&&v| in_range(v)) {
                    return invalid("sided environment refers to a missing support index");
                }
            }
            EnvKind::Iid { weights } => {
                if weights.len() != n {
                    return invalid("need one weight per support element");
                }
                check_probability_vector(weights, "iid weights")?;
                if rational::common_denominator_weights(weights).is_none() {
                    return invalid("weight denominators are too large");
                }
            }
            EnvKind::Markov { matrix, stationary } => {
                if matrix.len() != n || matrix.iter().any(|row| row.len() != n) || stationary.len() != n {
                    return invalid("markov matrix and stationary vector must match the support size");
                }
                for (j, row) in matrix.iter().enumerate() {
                    check_probability_vector(row, &format!("markov row {j}"))?;
                }
                check_probability_vector(stationary, "stationary vector")?;
                if !is_irreducible(matrix) {
                    return invalid("markov chain is not irreducible");
                }
                for k in 0..n {
                    let flow: BigRational = (0..n).map(|j| &stationary[j] * &matrix[j][k]).sum();
                    if flow != stationary[k] {
                        return invalid("stationary vector is not invariant under the matrix");
                    }
                }
            }
        }
        Ok(EnvironmentModel { support, kind, seed })
    }

    pub fn fixed(function: TransitionFunction) -> Self {
        Self::new(
            vec![function],
            EnvKind::Fixed {
                function: 0,
                overrides: BTreeMap::new(),
            },
            0,
        )
        .expect("a single function is a valid fixed environment")
    }

    pub fn iid(support: Vec<TransitionFunction>, weights: Vec<BigRational>, seed: u64) -> Result<Self, EnvError> {
        Self::new(support, EnvKind::Iid { weights }, seed)
    }

    /// i.i.d. uniform over the support.
    pub fn iid_uniform(support: Vec<TransitionFunction>, seed: u64) -> Result<Self, EnvError> {
        let n = support.len() as i64;
        let weights = (0..n).map(|_| rational::ratio(1, n.max(1))).collect();
        Self::iid(support, weights, seed)
    }

    pub fn from_spec(spec: &EnvironmentSpec) -> Result<Self, EnvError> {
        let need = |field: &str| EnvError::InvalidModel(format!("{} environment needs `{field}`", spec.kind));
        let rats = |v: &Vec<RatStr>| v.iter().map(|r| r.0.clone()).collect::<Vec<_>>();
        let kind = match spec.kind.as_str() {
            "fixed" => EnvKind::Fixed {
                function: spec.function.unwrap_or(0),
                overrides: spec.overrides.iter().copied().collect(),
            },
            "periodic" => EnvKind::Periodic {
                pattern: spec.pattern.clone().ok_or_else(|| need("pattern"))?,
            },
            "sided" => EnvKind::Sided {
                left: spec.left.ok_or_else(|| need("left"))?,
                origin: spec.origin.ok_or_else(|| need("origin"))?,
                right: spec.right.ok_or_else(|| need("right"))?,
            },
            "iid" => EnvKind::Iid {
                weights: rats(spec.weights.as_ref().ok_or_else(|| need("weights"))?),
            },
            "markov" => EnvKind::Markov {
                matrix: spec
                    .matrix
                    .as_ref()
                    .ok_or_else(|| need("matrix"))?
                    .iter()
                    .map(rats)
                    .collect(),
                stationary: rats(spec.stationary.as_ref().ok_or_else(|| need("stationary"))?),
            },
            other => return invalid(format!("unknown environment kind {other:?}")),
        };
        Self::new(spec.support.clone(), kind, spec.seed)
    }

    pub fn to_spec(&self) -> EnvironmentSpec {
        let strs = |v: &[BigRational]| v.iter().cloned().map(RatStr).collect::<Vec<_>>();
        let mut spec = EnvironmentSpec {
            kind: self.kind.name().to_owned(),
            support: self.support.clone(),
            seed: self.seed,
            ..EnvironmentSpec::default()
        };
        match &self.kind {
            EnvKind::Fixed { function, overrides } => {
                spec.function = Some(*function);
                spec.overrides = overrides.iter().map(|(&k, &v)| (k, v)).collect();
            }
            EnvKind::Periodic { pattern } => spec.pattern = Some(pattern.clone()),
            EnvKind::Sided { left, origin, right } => {
                spec.left = Some(*left);
                spec.origin = Some(*origin);
                spec.right = Some(*right);
            }
            EnvKind::Iid { weights } => spec.weights = Some(strs(weights)),
            EnvKind::Markov { matrix, stationary } => {
                spec.matrix = Some(matrix.iter().map(|row| strs(row)).collect());
                spec.stationary = Some(strs(stationary));
            }
        }
        spec
    }

    pub fn support(&self) -> &[TransitionFunction] {
        &self.support
    }

    pub fn kind(&self) -> &EnvKind {
        &self.kind
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// Number of partition elements each function is defined on.
    pub fn cells(&self) -> usize {
        self.support[0].len()
    }

    /// Marginal probability of each support element at a single site, when
    /// the model has a site-independent law (iid and stationary markov).
    pub fn site_law(&self) -> Option<Vec<BigRational>> {
        match &self.kind {
            EnvKind::Iid { weights } => Some(weights.clone()),
            EnvKind::Markov { stationary, .. } => Some(stationary.clone()),
            EnvKind::Fixed { function, overrides } if overrides.is_empty() => {
                let mut law = vec![BigRational::zero(); self.support.len()];
                law[*function] = BigRational::one();
                Some(law)
            }
            _ => None,
        }
    }

    /// Same model with every jump negated.
    pub fn mirrored(&self) -> Self {
        EnvironmentModel {
            support: self.support.iter().map(TransitionFunction::negated).collect(),
            kind: self.kind.clone(),
            seed: self.seed,
        }
    }

    pub fn symmetry_and_bounds(&self) -> SymmetryAndBounds {
        let jump_bound = self.support.iter().map(TransitionFunction::max_abs).max().unwrap_or(0);
        let is_symmetric = match &self.kind {
            EnvKind::Iid { weights } => {
                let mut mass: BTreeMap<&TransitionFunction, BigRational> = BTreeMap::new();
                for (g, w) in self.support.iter().zip(weights) {
                    *mass.entry(g).or_insert_with(BigRational::zero) += w;
                }
                mass.iter().all(|(g, w)| {
                    let neg = g.negated();
                    mass.get(&neg).is_some_and(|wn| wn == w)
                })
            }
            _ => false,
        };
        SymmetryAndBounds {
            is_symmetric,
            jump_bound,
            uniformly_bounded: true,
        }
    }

    pub fn realize(&self, env_seed: u64) -> EnvironmentRealization {
        EnvironmentRealization::new(Arc::new(self.clone()), env_seed)
    }
}

const CHUNK: i64 = 1024;

/// Exact integer-weight sampler over support indices.
#[derive(Debug, Clone)]
struct IndexSampler(WeightedIndex<u64>);

impl IndexSampler {
    fn new(probs: &[BigRational]) -> Self {
        let weights = rational::common_denominator_weights(probs).expect("validated weights fit in u64");
        IndexSampler(WeightedIndex::new(weights).expect("validated weights are non-degenerate"))
    }

    fn sample(&self, key: &[u8; 32], site: i64) -> u32 {
        let mut rng = seed::stream_rng(key, site as u64);
        self.0.sample(&mut rng) as u32
    }
}

#[derive(Debug)]
struct MarkovTape {
    /// Sites 0, 1, 2, ...
    forward: Vec<u32>,
    /// Sites -1, -2, ...
    backward: Vec<u32>,
}

#[derive(Debug)]
enum Generator {
    Deterministic,
    Iid {
        sampler: IndexSampler,
        chunks: RwLock<HashMap<i64, Arc<[u32]>>>,
    },
    Markov {
        initial: IndexSampler,
        forward: Vec<IndexSampler>,
        backward: Vec<IndexSampler>,
        tape: Mutex<MarkovTape>,
    },
}

#[derive(Debug)]
struct Realized {
    model: Arc<EnvironmentModel>,
    env_seed: u64,
    key: [u8; 32],
    generator: Generator,
}

/// A realized environment `ω`, indexable at every site of ℤ.
///
/// Cloning is cheap and clones share the memo. [`shift`](Self::shift)
/// returns a view of the same realization translated by `k` sites.
#[derive(Debug, Clone)]
pub struct EnvironmentRealization {
    inner: Arc<Realized>,
    offset: i64,
}

impl EnvironmentRealization {
    fn new(model: Arc<EnvironmentModel>, env_seed: u64) -> Self {
        let generator = match model.kind() {
            EnvKind::Iid { weights } => Generator::Iid {
                sampler: IndexSampler::new(weights),
                chunks: RwLock::new(HashMap::new()),
            },
            EnvKind::Markov { matrix, stationary } => {
                let n = stationary.len();
                let reversed: Vec<Vec<BigRational>> = (0..n)
                    .map(|j| {
                        (0..n)
                            .map(|k| &stationary[k] * &matrix[k][j] / &stationary[j])
                            .collect()
                    })
                    .collect();
                Generator::Markov {
                    initial: IndexSampler::new(stationary),
                    forward: matrix.iter().map(|row| IndexSampler::new(row)).collect(),
                    backward: reversed.iter().map(|row| IndexSampler::new(row)).collect(),
                    tape: Mutex::new(MarkovTape {
                        forward: Vec::new(),
                        backward: Vec::new(),
                    }),
                }
            }
            _ => Generator::Deterministic,
        };
        EnvironmentRealization {
            inner: Arc::new(Realized {
                key: seed::key_from(env_seed),
                model,
                env_seed,
                generator,
            }),
            offset: 0,
        }
    }

    pub fn model(&self) -> &EnvironmentModel {
        &self.inner.model
    }

    pub fn env_seed(&self) -> u64 {
        self.inner.env_seed
    }

    pub fn offset(&self) -> i64 {
        self.offset
    }

    /// Realization of `η^k(ω)`: site `i` of the result is site `i + k` here.
    pub fn shift(&self, k: i64) -> Self {
        EnvironmentRealization {
            inner: Arc::clone(&self.inner),
            offset: self.offset + k,
        }
    }

    /// Support index assigned to site `i`.
    pub fn index_at(&self, i: i64) -> usize {
        self.inner.index_at(i + self.offset) as usize
    }

    pub fn env_at(&self, i: i64) -> &TransitionFunction {
        &self.inner.model.support[self.index_at(i)]
    }

    /// Dense copy of the support indices on `lo..=hi`.
    pub fn window(&self, lo: i64, hi: i64) -> EnvWindow {
        assert!(lo <= hi, "empty window");
        let indices = self.inner.range(lo + self.offset, hi + self.offset);
        let support = self.inner.model.support.clone();
        let cells = self.inner.model.cells();
        let jumps = indices
            .iter()
            .flat_map(|&idx| support[idx as usize].jumps().iter().map(|&j| j as i32))
            .collect();
        EnvWindow {
            lo,
            cells,
            indices,
            jumps,
            support,
        }
    }
}

impl Realized {
    fn index_at(&self, site: i64) -> u32 {
        match (&self.model.kind, &self.generator) {
            (EnvKind::Fixed { function, overrides }, _) => *overrides.get(&site).unwrap_or(function) as u32,
            (EnvKind::Periodic { pattern }, _) => pattern[site.rem_euclid(pattern.len() as i64) as usize] as u32,
            (EnvKind::Sided { left, origin, right }, _) => match site.signum() {
                -1 => *left as u32,
                0 => *origin as u32,
                _ => *right as u32,
            },
            (_, Generator::Iid { .. }) => {
                let chunk = self.iid_chunk(site.div_euclid(CHUNK));
                chunk[site.rem_euclid(CHUNK) as usize]
            }
            (_, Generator::Markov { .. }) => self.markov_range(site, site)[0],
            _ => unreachable!("generator matches model kind"),
        }
    }

    fn range(&self, lo: i64, hi: i64) -> Vec<u32> {
        match &self.generator {
            Generator::Markov { .. } => self.markov_range(lo, hi),
            Generator::Iid { .. } => {
                let mut out = Vec::with_capacity((hi - lo + 1) as usize);
                let mut site = lo;
                while site <= hi {
                    let c = site.div_euclid(CHUNK);
                    let chunk = self.iid_chunk(c);
                    let end = hi.min((c + 1) * CHUNK - 1);
                    let from = site.rem_euclid(CHUNK) as usize;
                    let to = end.rem_euclid(CHUNK) as usize;
                    out.extend_from_slice(&chunk[from..=to]);
                    site = end + 1;
                }
                out
            }
            Generator::Deterministic => (lo..=hi).map(|i| self.index_at(i)).collect(),
        }
    }

    fn iid_chunk(&self, chunk: i64) -> Arc<[u32]> {
        let Generator::Iid { sampler, chunks } = &self.generator else {
            unreachable!()
        };
        if let Some(c) = chunks.read().expect("chunk cache poisoned").get(&chunk) {
            return Arc::clone(c);
        }
        let start = chunk * CHUNK;
        let values: Arc<[u32]> = (start..start + CHUNK).map(|i| sampler.sample(&self.key, i)).collect();
        // Concurrent writers compute identical chunks; first insert wins.
        let mut guard = chunks.write().expect("chunk cache poisoned");
        Arc::clone(guard.entry(chunk).or_insert(values))
    }

    fn markov_range(&self, lo: i64, hi: i64) -> Vec<u32> {
        let Generator::Markov {
            initial,
            forward,
            backward,
            tape,
        } = &self.generator
        else {
            unreachable!()
        };
        let mut tape = tape.lock().expect("markov tape poisoned");
        if tape.forward.is_empty() {
            tape.forward.push(initial.sample(&self.key, 0));
        }
        while hi >= tape.forward.len() as i64 {
            let site = tape.forward.len() as i64;
            let prev = *tape.forward.last().expect("origin generated") as usize;
            tape.forward.push(forward[prev].sample(&self.key, site));
        }
        while lo < -(tape.backward.len() as i64) {
            let site = -(tape.backward.len() as i64) - 1;
            let prev = if tape.backward.is_empty() {
                tape.forward[0]
            } else {
                *tape.backward.last().expect("non-empty")
            } as usize;
            tape.backward.push(backward[prev].sample(&self.key, site));
        }
        (lo..=hi)
            .map(|i| {
                if i >= 0 {
                    tape.forward[i as usize]
                } else {
                    tape.backward[(-i - 1) as usize]
                }
            })
            .collect()
    }
}

/// A dense, read-only slice of an environment for hot loops.
#[derive(Debug, Clone)]
pub struct EnvWindow {
    lo: i64,
    cells: usize,
    indices: Vec<u32>,
    /// `jumps[(site - lo) * cells + element]`.
    jumps: Vec<i32>,
    support: Vec<TransitionFunction>,
}

impl EnvWindow {
    pub fn lo(&self) -> i64 {
        self.lo
    }

    pub fn hi(&self) -> i64 {
        self.lo + self.indices.len() as i64 - 1
    }

    pub fn contains(&self, site: i64) -> bool {
        site >= self.lo && site <= self.hi()
    }

    #[inline]
    pub fn index_at(&self, site: i64) -> usize {
        self.indices[(site - self.lo) as usize] as usize
    }

    #[inline]
    pub fn jump(&self, site: i64, element: usize) -> i64 {
        i64::from(self.jumps[(site - self.lo) as usize * self.cells + element])
    }

    pub fn env_at(&self, site: i64) -> &TransitionFunction {
        &self.support[self.index_at(site)]
    }
}
