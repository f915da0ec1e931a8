use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::classify::Label;
use super::{ExperimentError, ScenarioOutcome, ScenarioReport};
use crate::walk::WalkRecord;

#[derive(Serialize)]
struct CsvRow {
    env_index: u64,
    walk_index: u64,
    final_site: i64,
    min_site: i64,
    max_site: i64,
    first_return_time: Option<u64>,
}

const CSV_HEADER: [&str; 6] = [
    "env_index",
    "walk_index",
    "final_site",
    "min_site",
    "max_site",
    "first_return_time",
];

/// One row per walk; an empty `first_return_time` means no return.
pub fn write_csv<W: Write>(records: &[WalkRecord], out: W) -> csv::Result<()> {
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    writer.write_record(CSV_HEADER)?;
    for r in records {
        writer.serialize(CsvRow {
            env_index: r.env_index,
            walk_index: r.walk_index,
            final_site: r.final_site,
            min_site: r.min_site,
            max_site: r.max_site,
            first_return_time: r.first_return_time,
        })?;
    }
    writer.flush()?;
    Ok(())
}

pub fn to_json(report: &ScenarioReport) -> String {
    let mut text = serde_json::to_string_pretty(report).expect("reports serialize");
    text.push('\n');
    text
}

pub fn read_json(text: &str) -> serde_json::Result<ScenarioReport> {
    serde_json::from_str(text)
}

fn f4(x: f64) -> String {
    format!("{x:.4}")
}

/// Human-readable summary: certificate, Solomon sign, linkage, exact
/// hitting probability, and per-label counts with the DP values next to the
/// Monte Carlo estimates.
pub fn markdown_summary(report: &ScenarioReport) -> String {
    let c = &report.classification;
    let mut md = String::new();
    let _ = writeln!(md, "# {}\n", report.name);
    let _ = writeln!(md, "- kind: {}", report.kind);
    let _ = writeln!(
        md,
        "- budgets: {} environments × {} walks × {} steps ({} mode), seed {}",
        report.n_envs,
        c.n_walks,
        c.horizon,
        c.mode,
        c.master_seed
    );
    let _ = writeln!(md, "- escape margin: {} sites", c.margin_sites);
    let _ = writeln!(md, "- symmetric environment law: {}", report.symmetric_environment);
    let _ = writeln!(
        md,
        "- linkage: {} ({})",
        if report.linkage.holds { "holds" } else { "not established" },
        report.linkage.witness
    );
    match &report.certificate {
        Some(cert) => {
            let _ = writeln!(
                md,
                "- certificate: {}, direction {}",
                if cert.holds { "holds" } else { "fails" },
                cert.direction
            );
            let _ = writeln!(
                md,
                "  - inf_h = {:.6}, threshold = {:.6} (r = {}, #β = {})",
                cert.inf_h, cert.threshold, cert.r, cert.cells
            );
        }
        None => {
            let _ = writeln!(md, "- certificate: not applicable");
        }
    }
    match &report.solomon {
        Some(s) => {
            let _ = writeln!(md, "- solomon: E ln((1-α)/α) = {:.6}, verdict {}", s.expectation, s.verdict);
        }
        None => {
            let _ = writeln!(md, "- solomon: not applicable");
        }
    }
    if let Some(h) = &report.hit_before {
        let _ = writeln!(
            md,
            "- hit_before(±{}): exact {} ≈ {}, Monte Carlo right fraction {}",
            h.half_width,
            h.exact,
            f4(h.approx),
            f4(h.monte_carlo_right)
        );
    }

    let _ = writeln!(md, "\n## Labels\n");
    let _ = writeln!(md, "| label | environments | fraction |");
    let _ = writeln!(md, "|---|---|---|");
    for lc in &c.aggregate.counts {
        let _ = writeln!(md, "| {} | {} | {} |", lc.label, lc.count, f4(lc.fraction));
    }
    let _ = writeln!(
        md,
        "\nDP cross-check: {}",
        if c.environments.iter().all(|v| v.dp.is_none()) {
            "not applicable".to_owned()
        } else if c.aggregate.consistent {
            "all labels agree".to_owned()
        } else {
            format!("DISAGREES on environments {:?}", c.aggregate.inconsistent_envs)
        }
    );
    if let Some(scan) = &report.scan {
        let _ = writeln!(
            md,
            "Zero-one scan: {} (consensus {}, {} inconclusive, {} dissenting)",
            if scan.agree { "agree" } else { "DISSENT" },
            scan.consensus.map_or("none", Label::as_str),
            scan.inconclusive,
            scan.dissenters.len()
        );
    }

    let _ = writeln!(md, "\n## Environments\n");
    let _ = writeln!(
        md,
        "| env | seed | label | return MC | return DP | right MC | right DP | left MC | left DP | late MC | late DP | DP label |"
    );
    let _ = writeln!(md, "|---|---|---|---|---|---|---|---|---|---|---|---|");
    for v in &c.environments {
        let e = &v.evidence;
        let (rd, rr, rl, rlate, dl) = match &v.dp {
            Some(d) => (
                f4(d.evidence.return_fraction),
                f4(d.evidence.right_fraction),
                f4(d.evidence.left_fraction),
                f4(d.evidence.late_return_fraction),
                d.label.to_string(),
            ),
            None => ("-".into(), "-".into(), "-".into(), "-".into(), "-".into()),
        };
        let _ = writeln!(
            md,
            "| {} | {} | {} | {} | {} | {} | {} | {} | {} | {} | {} | {} |",
            v.env_index,
            v.env_seed,
            v.label,
            f4(e.return_fraction),
            rd,
            f4(e.right_fraction),
            rr,
            f4(e.left_fraction),
            rl,
            f4(e.late_return_fraction),
            rlate,
            dl
        );
    }
    md
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportFiles {
    pub csv: PathBuf,
    pub json: PathBuf,
    pub markdown: PathBuf,
}

/// Writes `records.csv`, `report.json` and `summary.md` into `dir`.
pub fn write_reports(outcome: &ScenarioOutcome, dir: &Path) -> Result<ReportFiles, ExperimentError> {
    let io = |path: &Path| {
        let path = path.to_owned();
        move |source: std::io::Error| ExperimentError::Io { path, source }
    };
    std::fs::create_dir_all(dir).map_err(io(dir))?;
    let files = ReportFiles {
        csv: dir.join("records.csv"),
        json: dir.join("report.json"),
        markdown: dir.join("summary.md"),
    };
    let mut csv_bytes = Vec::new();
    write_csv(&outcome.records, &mut csv_bytes).map_err(|e| ExperimentError::Io {
        path: files.csv.clone(),
        source: std::io::Error::other(e),
    })?;
    std::fs::write(&files.csv, csv_bytes).map_err(io(&files.csv))?;
    std::fs::write(&files.json, to_json(&outcome.report)).map_err(io(&files.json))?;
    std::fs::write(&files.markdown, markdown_summary(&outcome.report)).map_err(io(&files.markdown))?;
    Ok(files)
}
