use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::config::{ScenarioConfig, Thresholds};
use super::ExperimentError;
use crate::environment::{EnvironmentModel, TransitionFunction};
use crate::exact::{build_site_chain, Boundary, ChainStats};
use crate::map::MarkovIntervalMap;
use crate::rational;
use crate::walk::{env_seed, run_ensemble, EnsembleSpec, Mode, WalkRecord};

/// Finite-horizon label of one environment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    #[serde(rename = "recurrent-like")]
    RecurrentLike,
    #[serde(rename = "transient+")]
    TransientPlus,
    #[serde(rename = "transient-")]
    TransientMinus,
    #[serde(rename = "split")]
    Split,
    #[serde(rename = "inconclusive")]
    Inconclusive,
}

impl Label {
    pub const ALL: [Label; 5] = [
        Label::RecurrentLike,
        Label::TransientPlus,
        Label::TransientMinus,
        Label::Split,
        Label::Inconclusive,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Label::RecurrentLike => "recurrent-like",
            Label::TransientPlus => "transient+",
            Label::TransientMinus => "transient-",
            Label::Split => "split",
            Label::Inconclusive => "inconclusive",
        }
    }
}

impl std::fmt::Display for Label {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The four quantities the labelling rule looks at, either as Monte Carlo
/// fractions or as exact-chain probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evidence {
    /// Returned to the start at some time in `1..=N`.
    pub return_fraction: f64,
    /// `site_N > margin`.
    pub right_fraction: f64,
    /// `site_N < -margin`.
    pub left_fraction: f64,
    /// Visited the start at some time after `N/2`.
    pub late_return_fraction: f64,
}

impl From<ChainStats> for Evidence {
    fn from(s: ChainStats) -> Self {
        Evidence {
            return_fraction: s.return_by_horizon,
            right_fraction: s.right_tail,
            left_fraction: s.left_tail,
            late_return_fraction: s.late_return,
        }
    }
}

/// The labelling rule, applied in this order: `transient+`, `transient−`,
/// `split`, `recurrent-like`, `inconclusive`.
pub fn label(e: &Evidence, t: &Thresholds) -> Label {
    if e.right_fraction >= t.transient_fraction && e.late_return_fraction <= t.late_return_max {
        Label::TransientPlus
    } else if e.left_fraction >= t.transient_fraction && e.late_return_fraction <= t.late_return_max {
        Label::TransientMinus
    } else if e.right_fraction > t.split_fraction && e.left_fraction > t.split_fraction {
        Label::Split
    } else if e.return_fraction >= t.return_goal {
        Label::RecurrentLike
    } else {
        Label::Inconclusive
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DpCheck {
    pub evidence: Evidence,
    pub label: Label,
    pub agrees: bool,
    /// `(MC − DP) / SE` for the return fraction, with
    /// `SE = sqrt(max(p(1−p), 1/n) / n)`.
    pub return_z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvVerdict {
    pub env_index: u64,
    pub env_seed: u64,
    pub label: Label,
    pub evidence: Evidence,
    pub dp: Option<DpCheck>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelCount {
    pub label: Label,
    pub count: u64,
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub counts: Vec<LabelCount>,
    /// Every environment with a DP check has matching labels.
    pub consistent: bool,
    pub inconsistent_envs: Vec<u64>,
}

impl Aggregate {
    pub fn count(&self, label: Label) -> u64 {
        self.counts.iter().find(|c| c.label == label).map_or(0, |c| c.count)
    }

    pub fn fraction(&self, label: Label) -> f64 {
        self.counts.iter().find(|c| c.label == label).map_or(0.0, |c| c.fraction)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub horizon: u64,
    pub n_walks: u64,
    pub margin_sites: i64,
    pub mode: Mode,
    pub master_seed: u64,
    pub environments: Vec<EnvVerdict>,
    pub aggregate: Aggregate,
}

/// Whether the exact chain applies: full-branch base and `±1` jumps.
pub fn dp_applicable(map: &MarkovIntervalMap, model: &EnvironmentModel) -> bool {
    map.is_full_branch() && model.support().iter().all(TransitionFunction::is_unit)
}

/// Exact-chain statistics for environment `env_index`, memoised on the
/// per-site rightward probabilities so that environments equal in law share
/// one computation.
pub(crate) struct DpOracle<'a> {
    map: &'a MarkovIntervalMap,
    model: &'a EnvironmentModel,
    alpha_bits: Vec<u64>,
    memo: HashMap<Vec<u64>, ChainStats>,
}

impl<'a> DpOracle<'a> {
    pub(crate) fn new(map: &'a MarkovIntervalMap, model: &'a EnvironmentModel) -> Self {
        let alpha_bits = model
            .support()
            .iter()
            .map(|g| {
                let a: num_rational::BigRational = map
                    .measures()
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| g.jump(j) == 1)
                    .map(|(_, m)| m.clone())
                    .sum();
                rational::to_f64(&a).to_bits()
            })
            .collect();
        DpOracle {
            map,
            model,
            alpha_bits,
            memo: HashMap::new(),
        }
    }

    pub(crate) fn stats(
        &mut self,
        env_seed: u64,
        horizon: u64,
        margin: i64,
    ) -> Result<ChainStats, ExperimentError> {
        let env = self.model.realize(env_seed);
        let w = horizon as i64 + 1;
        let view = env.window(-w, w);
        let key: Vec<u64> = (-w..=w).map(|i| self.alpha_bits[view.index_at(i)]).collect();
        if let Some(s) = self.memo.get(&key) {
            return Ok(*s);
        }
        let chain = build_site_chain(self.map, &env, w, Boundary::Absorb, false)?;
        let s = chain.stats(0, horizon, margin, horizon / 2)?;
        self.memo.insert(key, s);
        Ok(s)
    }
}

fn monte_carlo_evidence(records: &[WalkRecord], horizon: u64, margin: i64) -> Evidence {
    let n = records.len().max(1) as f64;
    let frac = |pred: &dyn Fn(&WalkRecord) -> bool| records.iter().filter(|r| pred(r)).count() as f64 / n;
    Evidence {
        return_fraction: frac(&|r| r.first_return_time.is_some()),
        right_fraction: frac(&|r| r.final_site > margin),
        left_fraction: frac(&|r| r.final_site < -margin),
        late_return_fraction: frac(&|r| r.last_return_time.is_some_and(|t| t > horizon / 2)),
    }
}

pub struct ClassifyRun {
    pub classification: Classification,
    pub records: Vec<WalkRecord>,
}

/// Labels every environment from Monte Carlo walks and, where the exact
/// chain applies, certifies each label against the chain's probabilities
/// (computed before any walk is simulated).
pub fn classify(config: &ScenarioConfig) -> Result<ClassifyRun, ExperimentError> {
    let (map, model) = config.build()?;
    let b = &config.budgets;
    let margin = config.margin_sites();
    let master = config.seeds.master;

    let dp: Option<Vec<ChainStats>> = if config.checks.dp_cross_check && dp_applicable(&map, &model) {
        let mut oracle = DpOracle::new(&map, &model);
        Some(
            (0..b.n_envs)
                .map(|e| oracle.stats(env_seed(master, e), b.horizon, margin))
                .collect::<Result<_, _>>()?,
        )
    } else {
        None
    };

    let spec = EnsembleSpec::new(b.n_envs, b.n_walks, b.horizon, b.mode, master);
    let ensemble = run_ensemble(&map, &model, &spec)?;
    let t = &config.thresholds;
    let mut environments = Vec::with_capacity(b.n_envs as usize);
    for (e, chunk) in ensemble.records.chunks(b.n_walks as usize).enumerate() {
        let evidence = monte_carlo_evidence(chunk, b.horizon, margin);
        let mc_label = label(&evidence, t);
        let dp_check = dp.as_ref().map(|stats| {
            let exact = Evidence::from(stats[e]);
            let p = exact.return_fraction;
            let n = chunk.len() as f64;
            let se = ((p * (1.0 - p)).max(1.0 / n) / n).sqrt();
            let dp_label = label(&exact, t);
            DpCheck {
                evidence: exact,
                label: dp_label,
                agrees: dp_label == mc_label,
                return_z: (evidence.return_fraction - p) / se,
            }
        });
        environments.push(EnvVerdict {
            env_index: e as u64,
            env_seed: env_seed(master, e as u64),
            label: mc_label,
            evidence,
            dp: dp_check,
        });
    }

    let total = environments.len().max(1) as f64;
    let counts = Label::ALL
        .iter()
        .map(|&l| {
            let count = environments.iter().filter(|v| v.label == l).count() as u64;
            LabelCount {
                label: l,
                count,
                fraction: count as f64 / total,
            }
        })
        .collect();
    let inconsistent_envs: Vec<u64> = environments
        .iter()
        .filter(|v| v.dp.as_ref().is_some_and(|d| !d.agrees))
        .map(|v| v.env_index)
        .collect();
    Ok(ClassifyRun {
        classification: Classification {
            horizon: b.horizon,
            n_walks: b.n_walks,
            margin_sites: margin,
            mode: b.mode,
            master_seed: master,
            environments,
            aggregate: Aggregate {
                counts,
                consistent: inconsistent_envs.is_empty(),
                inconsistent_envs,
            },
        },
        records: ensemble.records,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dissenter {
    pub env_index: u64,
    pub env_seed: u64,
    pub label: Label,
}

/// Agreement of the labels across environments.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScanReport {
    /// All labels other than `inconclusive` coincide.
    pub agree: bool,
    /// Most frequent label other than `inconclusive` (ties go to the
    /// earlier label in [`Label::ALL`]).
    pub consensus: Option<Label>,
    pub inconclusive: u64,
    pub dissenters: Vec<Dissenter>,
}

pub fn zero_one_scan(classification: &Classification) -> ScanReport {
    let decided = Label::ALL.iter().copied().filter(|&l| l != Label::Inconclusive);
    let consensus = decided
        .map(|l| (l, classification.aggregate.count(l)))
        .filter(|&(_, c)| c > 0)
        .fold(None::<(Label, u64)>, |best, (l, c)| match best {
            Some((_, bc)) if bc >= c => best,
            _ => Some((l, c)),
        })
        .map(|(l, _)| l);
    let dissenters: Vec<Dissenter> = classification
        .environments
        .iter()
        .filter(|v| v.label != Label::Inconclusive && Some(v.label) != consensus)
        .map(|v| Dissenter {
            env_index: v.env_index,
            env_seed: v.env_seed,
            label: v.label,
        })
        .collect();
    ScanReport {
        agree: dissenters.is_empty(),
        consensus,
        inconclusive: classification.aggregate.count(Label::Inconclusive),
        dissenters,
    }
}
