use num_rational::BigRational;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use super::chain::{build_site_chain_on, Boundary};
use super::ExactError;
use crate::environment::{EnvironmentRealization, TransitionFunction};
use crate::map::{MapError, MarkovIntervalMap};
use crate::rational::{self, RatStr};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesDiagnostic {
    pub cell: usize,
    pub theta: RatStr,
    /// `t_j = ν(a×{0} ∩ T_f^{-j}(a×{0}))` for `j = 0..=J`.
    pub terms: Vec<RatStr>,
    /// `S_J = Σ_{j≤J} t_j`.
    pub partial_sums: Vec<RatStr>,
    /// `(j, t_j / t_j')` where `j'` is the previous index with a nonzero
    /// term. With `±1` jumps the odd terms vanish, so these are the ratios
    /// of successive nonzero increments of `S_J`.
    pub increment_ratios: Vec<(usize, f64)>,
    /// `4 r (#β−r) M²` when every function in the support has the same
    /// number `r` of `+1` cells and the map is full-branch.
    pub geometric_bound: Option<RatStr>,
}

impl SeriesDiagnostic {
    pub fn partial_sum(&self, j: usize) -> &BigRational {
        &self.partial_sums[j].0
    }

    /// Largest increment ratio over `j` in `lo..=hi`.
    pub fn max_ratio_in(&self, lo: usize, hi: usize) -> Option<f64> {
        self.increment_ratios
            .iter()
            .filter(|(j, _)| (lo..=hi).contains(j))
            .map(|&(_, r)| r)
            .reduce(f64::max)
    }
}

/// Exact partial sums of `Σ_j ν(a×{0} ∩ T_f^{-j}(a×{0}))` up to `j_max`,
/// for the weighted measure `ν(A×{i}) = θ^{|i|} m(A) / Σ_i θ^{|i|}`.
pub fn series_diagnostic(
    map: &MarkovIntervalMap,
    env: &EnvironmentRealization,
    cell: usize,
    theta: &BigRational,
    j_max: usize,
) -> Result<SeriesDiagnostic, ExactError> {
    if !(theta > &BigRational::zero() && theta < &BigRational::one()) {
        return Err(ExactError::InvalidInput(format!(
            "theta = {} must lie strictly between 0 and 1",
            rational::format(theta)
        )));
    }
    if cell >= map.len() {
        return Err(ExactError::Map(MapError::BadSymbol(cell)));
    }
    let support = env.model().support();
    if !support.iter().all(TransitionFunction::is_unit) {
        return Err(ExactError::UnsupportedJumps);
    }
    // Walks farther than j_max/2 from the origin cannot come back in time.
    let reach = (j_max / 2 + 1) as i64;
    let chain = build_site_chain_on(map, env, -reach, reach, Boundary::Unchecked, true)?;
    let raw = chain.occupation_terms(0, cell, j_max as u64)?;

    let normaliser = (BigRational::one() + theta) / (BigRational::one() - theta);
    let terms: Vec<BigRational> = raw.into_iter().map(|t| t / &normaliser).collect();
    let mut partial_sums = Vec::with_capacity(terms.len());
    let mut acc = BigRational::zero();
    for t in &terms {
        acc += t;
        partial_sums.push(RatStr(acc.clone()));
    }
    let mut increment_ratios = Vec::new();
    let mut previous: Option<&BigRational> = None;
    for (j, t) in terms.iter().enumerate() {
        if t.is_zero() {
            continue;
        }
        if let Some(p) = previous {
            increment_ratios.push((j, rational::to_f64(&(t / p))));
        }
        previous = Some(t);
    }

    let cells = map.len();
    let r = support.first().map_or(0, |g| g.count(1));
    let geometric_bound = (map.is_full_branch() && support.iter().all(|g| g.count(1) == r)).then(|| {
        let m = map.gibbs_bounds().sup_g;
        RatStr(BigRational::from_integer((4 * r * (cells - r)).into()) * &m * &m)
    });

    Ok(SeriesDiagnostic {
        cell,
        theta: RatStr(theta.clone()),
        terms: terms.into_iter().map(RatStr).collect(),
        partial_sums,
        increment_ratios,
        geometric_bound,
    })
}
