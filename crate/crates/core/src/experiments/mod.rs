//! Scenario configs, shipped presets, the finite-horizon classifier and
//! report writers.

mod classify;
mod config;
mod presets;
mod report;

pub use classify::{
    classify, dp_applicable, label, zero_one_scan, Aggregate, Classification, ClassifyRun, DpCheck,
    Dissenter, EnvVerdict, Evidence, Label, LabelCount, ScanReport,
};
pub use config::{Budgets, Checks, ConfigError, ExperimentKind, OutputPaths, ScenarioConfig, Seeds, Thresholds};
pub use presets::{preset, preset_names, preset_source};
pub use report::{markdown_summary, read_json, to_json, write_csv, write_reports, ReportFiles};

use serde::{Deserialize, Serialize};

use crate::environment::TransitionFunction;
use crate::exact::{
    alpha_support, build_site_chain, solomon_classifier, transience_certificate, Boundary, ExactError,
    SolomonVerdict, TransienceCertificate,
};
use crate::rational::{self, RatStr};
use crate::structure::{check_linkage, LinkageCheck};
use crate::walk::{WalkError, WalkRecord};

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Walk(#[from] WalkError),
    #[error(transparent)]
    Exact(#[from] ExactError),
    #[error("cannot write {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HitBefore {
    pub half_width: i64,
    /// `P(hit +h before −h)` from site 0.
    pub exact: RatStr,
    pub approx: f64,
    /// Fraction of walks with `site_N > margin`, for comparison.
    pub monte_carlo_right: f64,
}

/// Everything a scenario run produces besides the per-walk records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub name: String,
    pub kind: ExperimentKind,
    pub n_envs: u64,
    pub symmetric_environment: bool,
    pub linkage: LinkageCheck,
    pub certificate: Option<TransienceCertificate>,
    pub solomon: Option<SolomonVerdict>,
    pub hit_before: Option<HitBefore>,
    pub classification: Classification,
    pub scan: Option<ScanReport>,
}

impl ScenarioReport {
    /// False when a DP cross-check disagreed, or a zero-one scan found
    /// dissenters.
    pub fn passed(&self) -> bool {
        self.classification.aggregate.consistent && self.scan.as_ref().is_none_or(|s| s.agree)
    }
}

pub struct ScenarioOutcome {
    pub report: ScenarioReport,
    pub records: Vec<WalkRecord>,
}

/// `r` shared by every support function, if jumps are `±1` and the number
/// of `+1` cells is the same for all of them.
fn common_r(support: &[TransitionFunction]) -> Option<usize> {
    let r = support.first()?.count(1);
    support.iter().all(|g| g.is_unit() && g.count(1) == r).then_some(r)
}

pub fn run_scenario(config: &ScenarioConfig) -> Result<ScenarioOutcome, ExperimentError> {
    config.validate()?;
    let (map, model) = config.build()?;
    let support = model.support();

    let certificate = match common_r(support) {
        Some(r) if map.is_full_branch() => Some(transience_certificate(&map, r, support)?),
        _ => None,
    };
    let solomon = match alpha_support(&map, &model) {
        Ok(law) => Some(solomon_classifier(&law)?),
        Err(_) => None,
    };
    let linkage = check_linkage(&map, support);

    let run = classify(config)?;
    let hit_before = if config.kind == ExperimentKind::SplitDemo {
        let h = config.checks.hit_half_width;
        let env = model.realize(crate::walk::env_seed(config.seeds.master, 0));
        let joint = !map.is_full_branch();
        let chain = build_site_chain(&map, &env, h, Boundary::Absorb, joint)?;
        let exact = chain.hit_before(0, -h, h)?;
        Some(HitBefore {
            half_width: h,
            approx: rational::to_f64(&exact),
            exact: RatStr(exact),
            monte_carlo_right: run.classification.environments[0].evidence.right_fraction,
        })
    } else {
        None
    };
    let scan = (config.kind == ExperimentKind::ZeroOneScan).then(|| zero_one_scan(&run.classification));

    Ok(ScenarioOutcome {
        report: ScenarioReport {
            name: config.name.clone(),
            kind: config.kind,
            n_envs: config.budgets.n_envs,
            symmetric_environment: model.symmetry_and_bounds().is_symmetric,
            linkage,
            certificate,
            solomon,
            hit_before,
            classification: run.classification,
            scan,
        },
        records: run.records,
    })
}
