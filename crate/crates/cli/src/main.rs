//! `dwde`: command-line front end for the DWDE toolkit.
//!
//! Exit codes: 0 success, 1 internal failure, 2 config error, 3 a verdict
//! consistency check failed (DP/Monte Carlo disagreement or zero-one dissent).

mod input;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use dwde_core::environment::EnvironmentRealization;
use dwde_core::exact::{
    alpha_support, build_site_chain, first_passage_toward, path_counts, return_cylinder_count, series_diagnostic,
    solomon_classifier, transience_certificate, Boundary, ExactError,
};
use dwde_core::experiments::{
    markdown_summary, read_json, run_scenario, to_json, write_csv, write_reports, ExperimentError, ExperimentKind,
    ScenarioOutcome,
};
use dwde_core::rational::{self, ExactValue, RatStr};
use dwde_core::structure::{build_skew_graph, check_linkage, communication_classes};
use dwde_core::walk::{run_ensemble, simulate, EnsembleSpec, SimulateOptions, Start};
use dwde_core::{EnvironmentModel, MarkovIntervalMap, Mode, WalkState};
use serde_json::json;

use input::{Overrides, Source};

pub enum Failure {
    Internal(anyhow::Error),
    Config(anyhow::Error),
    Verdict(String),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Internal(e)
    }
}

impl From<ExactError> for Failure {
    fn from(e: ExactError) -> Self {
        match e {
            ExactError::InvalidInput(_) | ExactError::HypothesisViolated(_) | ExactError::DegenerateAlpha(_) => {
                Failure::Config(e.into())
            }
            other => Failure::Internal(other.into()),
        }
    }
}

impl From<ExperimentError> for Failure {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Config(_) => Failure::Config(e.into()),
            other => Failure::Internal(other.into()),
        }
    }
}

type Result<T> = std::result::Result<T, Failure>;

#[derive(Debug, Parser)]
#[command(name = "dwde", version, about = "Deterministic walks in deterministic environments on Z")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a config (or map and environment) and print what it describes.
    Validate {
        #[command(flatten)]
        source: Source,
    },
    /// List the shipped presets, or print one as TOML.
    Presets {
        name: Option<String>,
    },
    /// Simulate one trajectory and print it as JSON.
    Simulate(SimulateArgs),
    /// Run an ensemble and write the per-walk CSV.
    Ensemble(EnsembleArgs),
    /// Exact oracles.
    #[command(subcommand)]
    Exact(ExactCommand),
    /// Finite-window reachability structure.
    #[command(subcommand)]
    Structure(StructureCommand),
    /// Run a scenario and write records.csv, report.json and summary.md.
    Classify(ScenarioArgs),
    /// Run a scenario as a zero-one scan across environments.
    Scan(ScenarioArgs),
    /// Re-render a saved report.json.
    Report {
        #[arg(long)]
        from: PathBuf,
        #[arg(long, value_enum, default_value_t = ReportFormat::Markdown)]
        format: ReportFormat,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ReportFormat {
    Markdown,
    Json,
}

/// Selects the single environment realization used by one-env commands.
#[derive(Debug, Clone, Args)]
struct EnvChoice {
    /// Realization seed; defaults to the environment block's seed.
    #[arg(long)]
    env_seed: Option<u64>,
}

impl EnvChoice {
    fn realize(&self, model: &EnvironmentModel) -> EnvironmentRealization {
        model.realize(self.env_seed.unwrap_or(model.seed()))
    }
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    source: Source,
    #[command(flatten)]
    env: EnvChoice,
    #[arg(long, default_value_t = 1000)]
    steps: u64,
    #[arg(long, default_value = "symbolic")]
    mode: Mode,
    /// Walk seed (symbol stream, or the uniform start point in exact mode).
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Exact start point "p/q" in [0, 1].
    #[arg(long)]
    x: Option<String>,
    #[arg(long, default_value_t = 0, allow_hyphen_values = true)]
    start_site: i64,
    /// Record every k-th site.
    #[arg(long, default_value_t = 1)]
    thin: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EnsembleArgs {
    #[command(flatten)]
    source: Source,
    #[command(flatten)]
    overrides: Overrides,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ScenarioArgs {
    #[command(flatten)]
    source: Source,
    #[command(flatten)]
    overrides: Overrides,
    /// Output directory; defaults to the config's, else out/<name>.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ExactCommon {
    #[command(flatten)]
    source: Source,
    #[command(flatten)]
    env: EnvChoice,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum ExactCommand {
    /// P(return to the start site within N steps).
    Return {
        #[command(flatten)]
        common: ExactCommon,
        #[arg(long, default_value_t = 100)]
        steps: u64,
        /// Half-width W of the window [-W, W]; defaults to N * M + 1.
        #[arg(long)]
        window: Option<i64>,
        #[arg(long, default_value_t = 0, allow_hyphen_values = true)]
        start: i64,
        /// Compute in f64 instead of exact rationals.
        #[arg(long)]
        float: bool,
    },
    /// P(hit `hi` before `lo`) from `start`.
    Hit {
        #[command(flatten)]
        common: ExactCommon,
        #[arg(long, default_value_t = 0, allow_hyphen_values = true)]
        start: i64,
        #[arg(long, allow_hyphen_values = true)]
        lo: i64,
        #[arg(long, allow_hyphen_values = true)]
        hi: i64,
    },
    /// First-passage path counts c[n][k], optionally with the truncated
    /// first-passage measure toward `target` and its bound.
    Paths {
        #[arg(long, default_value_t = 8)]
        n_max: usize,
        #[arg(long, default_value_t = 8)]
        k_max: usize,
        #[command(flatten)]
        common: ExactCommon,
        #[arg(long, allow_hyphen_values = true)]
        target: Option<i64>,
    },
    /// Transience certificate and return-cylinder count.
    Certificate {
        #[command(flatten)]
        common: ExactCommon,
        /// Number of +1 cells; defaults to that of the first support function.
        #[arg(long)]
        r: Option<usize>,
        /// Also count rank-(2n+1) return cylinders.
        #[arg(long)]
        count_n: Option<usize>,
    },
    /// Partial sums of the return series with weight theta.
    Series {
        #[command(flatten)]
        common: ExactCommon,
        #[arg(long, default_value_t = 0)]
        cell: usize,
        #[arg(long, default_value = "1/2")]
        theta: String,
        #[arg(long, default_value_t = 64)]
        terms: usize,
    },
    /// Solomon's classifier on the reduced birth-death chain.
    Solomon {
        #[command(flatten)]
        common: ExactCommon,
    },
}

#[derive(Debug, Subcommand)]
enum StructureCommand {
    /// Edge list of the window graph, one "j,i -> k,i'" per line.
    Graph {
        #[command(flatten)]
        common: ExactCommon,
        #[arg(long, default_value_t = 10)]
        window: i64,
    },
    /// Communication classes of the window graph (JSON).
    Classes {
        #[command(flatten)]
        common: ExactCommon,
        #[arg(long, default_value_t = 10)]
        window: i64,
    },
    /// Linkage conditions on the environment support (JSON).
    Linkage {
        #[command(flatten)]
        common: ExactCommon,
    },
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
            }
            std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))?;
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes()).context("cannot write to stdout")?;
        }
    }
    Ok(())
}

fn emit_json(out: Option<&Path>, value: &serde_json::Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).context("cannot serialize JSON")?;
    text.push('\n');
    emit(out, &text)
}

fn exact_json(value: &rational::Rational) -> serde_json::Value {
    serde_json::to_value(ExactValue::from(value)).expect("exact values serialize")
}

fn config_err(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Config(e.into())
}

fn validate(source: &Source) -> Result<()> {
    if source.config.is_some() || source.preset.is_some() {
        let config = source.scenario()?;
        let (map, model) = config.build().map_err(config_err)?;
        println!("ok: scenario {} ({})", config.name, config.kind);
        describe(&map, &model);
        let b = &config.budgets;
        println!(
            "budgets: {} envs x {} walks x {} steps, mode {}",
            b.n_envs, b.n_walks, b.horizon, b.mode
        );
    } else {
        let (map, model) = source.build()?;
        println!("ok");
        describe(&map, &model);
    }
    Ok(())
}

fn describe(map: &MarkovIntervalMap, model: &EnvironmentModel) {
    let slopes: Vec<String> = map.branches().iter().map(|b| rational::format(&b.slope)).collect();
    println!(
        "map: {} cells, slopes [{}], full-branch {}",
        map.len(),
        slopes.join(", "),
        map.is_full_branch()
    );
    let sb = model.symmetry_and_bounds();
    println!(
        "environment: {}, {} functions, jump bound {}, symmetric {}",
        model.kind().name(),
        model.support().len(),
        sb.jump_bound,
        sb.is_symmetric
    );
}

fn presets(name: Option<&str>) -> Result<()> {
    match name {
        None => {
            for n in dwde_core::experiments::preset_names() {
                println!("{n}");
            }
        }
        Some(n) => {
            let text = dwde_core::experiments::preset_source(n)
                .ok_or_else(|| config_err(anyhow!("unknown preset {n:?}")))?;
            print!("{text}");
        }
    }
    Ok(())
}

fn simulate_cmd(args: &SimulateArgs) -> Result<()> {
    let (map, model) = args.source.build()?;
    let env = args.env.realize(&model);
    if args.thin == 0 {
        return Err(config_err(anyhow!("--thin must be at least 1")));
    }
    let start = match &args.x {
        Some(text) => Start::Point(WalkState::new(rational::parse(text).map_err(config_err)?, args.start_site)),
        None => Start::Site(args.start_site),
    };
    let options = SimulateOptions {
        thin: Some(args.thin),
        targets: Vec::new(),
    };
    let t = simulate(&map, &env, &start, args.steps, args.mode, args.seed, &options).map_err(config_err)?;
    let s = &t.summary;
    emit_json(
        args.out.as_deref(),
        &json!({
            "start_site": t.start_site,
            "steps": t.steps,
            "mode": args.mode,
            "seed": args.seed,
            "env_seed": env.env_seed(),
            "thin": args.thin,
            "final_site": s.final_site,
            "min_site": s.min_site,
            "max_site": s.max_site,
            "first_return_time": s.first_return_time,
            "last_return_time": s.last_return_time,
            "path": t.path,
        }),
    )
}

/// Scenario from a config or preset, or a default one-environment scenario
/// built from `--map` and `--env`.
fn scenario_or_default(source: &Source, overrides: &Overrides) -> Result<dwde_core::experiments::ScenarioConfig> {
    let mut config = if source.config.is_some() || source.preset.is_some() {
        source.scenario()?
    } else {
        let (map, model) = source.build()?;
        let text = format!(
            "name = \"adhoc\"\nkind = \"classify\"\n[budgets]\nn_envs = 1\nn_walks = 100\nhorizon = 1000\n[seeds]\nmaster = 0\n[map]\n{}\n[environment]\n{}",
            toml::to_string(&map.to_spec()).context("cannot serialize map")?,
            toml::to_string(&model.to_spec()).context("cannot serialize environment")?,
        );
        dwde_core::experiments::ScenarioConfig::from_toml_str(&text).map_err(config_err)?
    };
    overrides.apply(&mut config)?;
    Ok(config)
}

fn ensemble_cmd(args: &EnsembleArgs) -> Result<()> {
    let config = scenario_or_default(&args.source, &args.overrides)?;
    let (map, model) = config.build().map_err(config_err)?;
    let b = &config.budgets;
    let spec = EnsembleSpec::new(b.n_envs, b.n_walks, b.horizon, b.mode, config.seeds.master);
    let report = run_ensemble(&map, &model, &spec).map_err(config_err)?;
    let mut buf = Vec::new();
    write_csv(&report.records, &mut buf).context("cannot write CSV")?;
    emit(args.out.as_deref(), &String::from_utf8(buf).context("CSV is UTF-8")?)
}

fn scenario_cmd(args: &ScenarioArgs, scan: bool) -> Result<()> {
    let mut config = scenario_or_default(&args.source, &args.overrides)?;
    if scan {
        config.kind = ExperimentKind::ZeroOneScan;
    }
    let dir = args.out.clone().unwrap_or_else(|| config.output_dir());
    let outcome: ScenarioOutcome = run_scenario(&config)?;
    let files = write_reports(&outcome, &dir)?;
    let report = &outcome.report;
    let agg = &report.classification.aggregate;
    for count in &agg.counts {
        if count.count > 0 {
            println!("{}: {}/{}", count.label, count.count, report.n_envs);
        }
    }
    if let Some(s) = &report.scan {
        println!(
            "zero-one scan: {} (consensus {})",
            if s.agree { "agree" } else { "DISSENT" },
            s.consensus.map_or("none".to_owned(), |l| l.to_string())
        );
        for d in &s.dissenters {
            println!("  dissenter env {} seed {}: {}", d.env_index, d.env_seed, d.label);
        }
    }
    println!("wrote {}", files.json.display());
    if report.passed() {
        Ok(())
    } else if !agg.consistent {
        Err(Failure::Verdict(format!(
            "Monte Carlo and DP labels disagree on environments {:?}",
            agg.inconsistent_envs
        )))
    } else {
        Err(Failure::Verdict("zero-one scan found dissenting environments".into()))
    }
}

fn report_cmd(from: &Path, format: ReportFormat, out: Option<&Path>) -> Result<()> {
    let text = std::fs::read_to_string(from).with_context(|| format!("cannot read {}", from.display()))?;
    let report = read_json(&text)
        .with_context(|| format!("cannot parse {}", from.display()))
        .map_err(Failure::Config)?;
    let rendered = match format {
        ReportFormat::Markdown => markdown_summary(&report),
        ReportFormat::Json => to_json(&report),
    };
    emit(out, &rendered)
}

fn exact_cmd(command: &ExactCommand) -> Result<()> {
    match command {
        ExactCommand::Return {
            common,
            steps,
            window,
            start,
            float,
        } => {
            let (map, model) = common.source.build()?;
            let env = common.env.realize(&model);
            let m = model.symmetry_and_bounds().jump_bound.max(1);
            let w = window.unwrap_or_else(|| (*steps as i64).saturating_mul(m) + start.abs() + 1);
            let chain = build_site_chain(&map, &env, w, Boundary::Absorb, !map.is_full_branch())?;
            let prob = if *float {
                json!({ "approx": chain.return_prob::<f64>(*start, *steps)? })
            } else {
                exact_json(&chain.return_prob_by_time(*start, *steps)?)
            };
            emit_json(
                common.out.as_deref(),
                &json!({
                    "query": "return",
                    "env_seed": env.env_seed(),
                    "start": start,
                    "horizon": steps,
                    "window": w,
                    "probability": prob,
                }),
            )
        }
        ExactCommand::Hit { common, start, lo, hi } => {
            let (map, model) = common.source.build()?;
            let env = common.env.realize(&model);
            let w = lo.abs().max(hi.abs()) + model.symmetry_and_bounds().jump_bound.max(1);
            let chain = build_site_chain(&map, &env, w, Boundary::Absorb, !map.is_full_branch())?;
            let p = chain.hit_before(*start, *lo, *hi)?;
            emit_json(
                common.out.as_deref(),
                &json!({
                    "query": "hit_before",
                    "env_seed": env.env_seed(),
                    "start": start,
                    "lo": lo,
                    "hi": hi,
                    "probability": exact_json(&p),
                }),
            )
        }
        ExactCommand::Paths {
            n_max,
            k_max,
            common,
            target,
        } => {
            let table = path_counts(*n_max, *k_max);
            let rows: Vec<Vec<String>> = table
                .rows()
                .iter()
                .map(|row| row.iter().map(ToString::to_string).collect())
                .collect();
            let mut value = json!({
                "query": "path_counts",
                "n_max": n_max,
                "k_max": k_max,
                "k": (1..=*k_max).collect::<Vec<_>>(),
                "counts": rows,
            });
            if let Some(t) = target {
                let (map, model) = common.source.build()?;
                let env = common.env.realize(&model);
                let fp = first_passage_toward(&map, &env, *t, *n_max as u64)?;
                value["first_passage"] = json!({
                    "target": t,
                    "env_seed": env.env_seed(),
                    "measure": exact_json(&fp.measure),
                    "bound": fp.bound.as_ref().map(exact_json),
                });
            }
            emit_json(common.out.as_deref(), &value)
        }
        ExactCommand::Certificate { common, r, count_n } => {
            let (map, model) = common.source.build()?;
            let support = model.support();
            let r = r.unwrap_or_else(|| support[0].count(1));
            let cert = transience_certificate(&map, r, support)?;
            let mut value = json!({ "query": "certificate", "certificate": cert });
            if let Some(n) = count_n {
                value["return_cylinders"] = serde_json::to_value(return_cylinder_count(&map, r, *n)?)
                    .context("cannot serialize count")?;
            }
            emit_json(common.out.as_deref(), &value)
        }
        ExactCommand::Series {
            common,
            cell,
            theta,
            terms,
        } => {
            let (map, model) = common.source.build()?;
            let env = common.env.realize(&model);
            let theta = rational::parse(theta).map_err(config_err)?;
            let diag = series_diagnostic(&map, &env, *cell, &theta, *terms)?;
            let value = json!({
                "query": "series",
                "env_seed": env.env_seed(),
                "diagnostic": diag,
                "partial_sums_approx": diag.partial_sums.iter().map(|s| rational::to_f64(&s.0)).collect::<Vec<_>>(),
            });
            emit_json(common.out.as_deref(), &value)
        }
        ExactCommand::Solomon { common } => {
            let (map, model) = common.source.build()?;
            let law = alpha_support(&map, &model)?;
            let verdict = solomon_classifier(&law)?;
            let law_json: Vec<_> = law
                .iter()
                .map(|(a, w)| json!({ "alpha": RatStr(a.clone()), "weight": RatStr(w.clone()) }))
                .collect();
            emit_json(
                common.out.as_deref(),
                &json!({ "query": "solomon", "alpha_law": law_json, "verdict": verdict }),
            )
        }
    }
}

fn structure_cmd(command: &StructureCommand) -> Result<()> {
    match command {
        StructureCommand::Graph { common, window } => {
            let (map, model) = common.source.build()?;
            let env = common.env.realize(&model);
            let graph = build_skew_graph(&map, &env, *window).map_err(config_err)?;
            emit(common.out.as_deref(), &graph.edge_list_text())
        }
        StructureCommand::Classes { common, window } => {
            let (map, model) = common.source.build()?;
            let env = common.env.realize(&model);
            let graph = build_skew_graph(&map, &env, *window).map_err(config_err)?;
            let classes = communication_classes(&graph);
            emit_json(
                common.out.as_deref(),
                &json!({
                    "window": window,
                    "env_seed": env.env_seed(),
                    "nodes": graph.node_count(),
                    "classes": classes,
                }),
            )
        }
        StructureCommand::Linkage { common } => {
            let (map, model) = common.source.build()?;
            let check = check_linkage(&map, model.support());
            emit_json(common.out.as_deref(), &serde_json::to_value(check).context("cannot serialize")?)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Validate { source } => validate(&source),
        Command::Presets { name } => presets(name.as_deref()),
        Command::Simulate(args) => simulate_cmd(&args),
        Command::Ensemble(args) => ensemble_cmd(&args),
        Command::Exact(c) => exact_cmd(&c),
        Command::Structure(c) => structure_cmd(&c),
        Command::Classify(args) => scenario_cmd(&args, false),
        Command::Scan(args) => scenario_cmd(&args, true),
        Command::Report { from, format, out } => report_cmd(&from, format, out.as_deref()),
    }
}

fn init_threads() -> anyhow::Result<()> {
    let Ok(text) = std::env::var("DWDE_THREADS") else {
        return Ok(());
    };
    let n: usize = text
        .trim()
        .parse()
        .with_context(|| format!("DWDE_THREADS={text:?} is not a thread count"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .context("cannot configure the thread pool")
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = init_threads() {
        eprintln!("error: {e:#}");
        return ExitCode::from(2);
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Internal(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Config(e)) => {
            eprintln!("config error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Verdict(msg)) => {
            eprintln!("verdict check failed: {msg}");
            ExitCode::from(3)
        }
    }
}
