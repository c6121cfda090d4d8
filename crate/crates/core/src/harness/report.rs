//! Turns a run directory into a text summary and plot-ready CSV files.
//! Rendering the plots is left to external tools.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::config::{ScenarioConfig, ScenarioKind};
use super::scenarios::{
    write_file, ACCURACY_FILE, DECISIONS_FILE, EVAL_FILE, PHASES_CSV_HEADER, PHASES_FILE, RATIO_CSV_HEADER, RATIO_FILE,
    RUN_STATS_FILE, SCENARIO_FILE, SUMMARY_CSV_HEADER, SUMMARY_FILE,
};
use crate::cachesim::RunStats;
use crate::controller::parse_decision_log;
use crate::error::{Error, Result};
use crate::estimator::ACCURACY_CSV_HEADER;
use crate::predictor::EVAL_CSV_HEADER;

pub const PLOT_HIT_RATE_FILE: &str = "plot_hit_rate.csv";
pub const PLOT_LATENCY_FILE: &str = "plot_latency.csv";
pub const PLOT_RATIO_FILE: &str = "plot_ratio.csv";

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub text: String,
    pub files: Vec<PathBuf>,
}

fn read(dir: &Path, name: &str) -> Result<String> {
    let path = dir.join(name);
    std::fs::read_to_string(&path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::format(format!("{}: missing from the run directory", path.display())),
        _ => Error::io(&path, e),
    })
}

fn named(name: &str) -> impl Fn(Error) -> Error + '_ {
    move |e| match e {
        Error::Format(m) => Error::format(format!("{name}: {m}")),
        other => other,
    }
}

/// Rows of a CSV with a fixed header and column count.
fn table(dir: &Path, name: &str, header: &str) -> Result<Vec<Vec<String>>> {
    let text = read(dir, name)?;
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(header) {
        return Err(Error::format(format!("{name}: header does not match `{header}`")));
    }
    let cols = header.split(',').count();
    lines
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| {
            let f: Vec<String> = l.split(',').map(|s| s.trim().to_string()).collect();
            if f.len() == cols {
                Ok(f)
            } else {
                Err(Error::format(format!(
                    "{name}: row {} has {} fields, expected {cols}",
                    i + 1,
                    f.len()
                )))
            }
        })
        .collect()
}

fn num(name: &str, field: &str) -> Result<f64> {
    field
        .parse()
        .map_err(|_| Error::format(format!("{name}: `{field}` is not a number")))
}

fn run_stats(dir: &Path) -> Result<RunStats> {
    RunStats::from_csv(&read(dir, RUN_STATS_FILE)?).map_err(named(RUN_STATS_FILE))
}

fn hit_rate_plot(stats: &RunStats) -> String {
    let mut s = String::from("query_index,window_hit_rate_pct,cache_gb,phase_id\n");
    for w in &stats.windows {
        let _ = writeln!(
            s,
            "{},{:.4},{:.2},{}",
            w.query_index, w.window_hit_rate_pct, w.cache_gb, w.phase_id
        );
    }
    s
}

fn latency_plot(stats: &RunStats) -> String {
    let mut s = String::from("query_index,window_mean_latency_ms\n");
    for w in &stats.windows {
        let _ = writeln!(s, "{},{:.4}", w.query_index, w.window_mean_latency_ms);
    }
    s
}

/// Builds the report for `dir` and writes its plot files there.
pub fn report(dir: &Path) -> Result<Report> {
    let cfg = ScenarioConfig::from_json(&read(dir, SCENARIO_FILE)?).map_err(named(SCENARIO_FILE))?;
    let mut text = String::new();
    let mut files = Vec::new();
    let _ = writeln!(text, "scenario: {} (seed {})", cfg.scenario, cfg.seed);
    let latency_note = format!(
        "latency: two-point model, {} ms per hit and {} ms per miss (no backend variability)",
        cfg.latency.hit_ms, cfg.latency.miss_ms
    );
    match cfg.scenario {
        ScenarioKind::SingleResize => {
            let rows = table(dir, SUMMARY_FILE, SUMMARY_CSV_HEADER)?;
            let [r] = rows.as_slice() else {
                return Err(Error::format(format!(
                    "{SUMMARY_FILE}: expected one row, found {}",
                    rows.len()
                )));
            };
            for f in [0, 1, 2, 4, 5, 6] {
                num(SUMMARY_FILE, &r[f])?;
            }
            let stats = run_stats(dir)?;
            parse_decision_log(&read(dir, DECISIONS_FILE)?).map_err(named(DECISIONS_FILE))?;
            let _ = writeln!(
                text,
                "{:>10} {:>12} {:>14} {:>14} {:>10} {:>13} {:>15}",
                "initial_gb", "initial_hit", "initial_lat_ms", "estimated", "new_gb", "measured_hit", "measured_lat_ms"
            );
            let _ = writeln!(
                text,
                "{:>10} {:>12} {:>14} {:>14} {:>10} {:>13} {:>15}",
                r[0], r[1], r[2], r[3], r[4], r[5], r[6]
            );
            let _ = writeln!(text, "{latency_note}");
            files.push(write_file(dir, PLOT_HIT_RATE_FILE, hit_rate_plot(&stats))?);
            files.push(write_file(dir, PLOT_LATENCY_FILE, latency_plot(&stats))?);
        }
        ScenarioKind::MultiPhase => {
            let phases = table(dir, PHASES_FILE, PHASES_CSV_HEADER)?;
            let stats = run_stats(dir)?;
            let decisions = parse_decision_log(&read(dir, DECISIONS_FILE)?).map_err(named(DECISIONS_FILE))?;
            let _ = writeln!(
                text,
                "{:>5} {:>18} {:>18} {:>12} {:>10} {:>8} {:>8}",
                "phase", "distribution", "estimated", "end_alloc_gb", "mean_hit", "resizes", "windows"
            );
            for p in &phases {
                let id: usize = p[0]
                    .parse()
                    .map_err(|_| Error::format(format!("{PHASES_FILE}: bad phase id `{}`", p[0])))?;
                let windows = stats.windows.iter().filter(|w| w.phase_id == id).count();
                let _ = writeln!(
                    text,
                    "{:>5} {:>18} {:>18} {:>12} {:>10} {:>8} {:>8}",
                    p[0], p[1], p[4], p[5], p[6], p[7], windows
                );
            }
            let resizes: Vec<&str> = decisions
                .iter()
                .filter(|d| d.kind.is_resize())
                .map(|d| d.kind.name())
                .collect();
            let _ = writeln!(
                text,
                "resizes: {}",
                if resizes.is_empty() {
                    "none".to_string()
                } else {
                    resizes.join(", ")
                }
            );
            let _ = writeln!(text, "{latency_note}");
            files.push(write_file(dir, PLOT_HIT_RATE_FILE, hit_rate_plot(&stats))?);
            files.push(write_file(dir, PLOT_LATENCY_FILE, latency_plot(&stats))?);
        }
        ScenarioKind::TwoTenantRatio => {
            let rows = table(dir, RATIO_FILE, RATIO_CSV_HEADER)?;
            let mut plot = String::from("ratio,tenant_id,predicted_hit_pct,measured_hit_pct,abs_gap\n");
            let _ = writeln!(
                text,
                "{:>6} {:>12} {:>9} {:>10} {:>10}",
                "ratio", "tenant", "alloc_gb", "predicted", "measured"
            );
            for r in &rows {
                let gap = (num(RATIO_FILE, &r[3])? - num(RATIO_FILE, &r[4])?).abs();
                let _ = writeln!(text, "{:>6} {:>12} {:>9} {:>10} {:>10}", r[0], r[1], r[2], r[3], r[4]);
                let _ = writeln!(plot, "{},{},{},{},{gap:.4}", r[0], r[1], r[3], r[4]);
            }
            files.push(write_file(dir, PLOT_RATIO_FILE, plot)?);
        }
        ScenarioKind::AccuracyStudy => {
            let rows = table(dir, ACCURACY_FILE, ACCURACY_CSV_HEADER)?;
            let _ = writeln!(
                text,
                "{:>8} {:>8} {:>8} {:>9} {:>9}",
                "samples", "family", "exact", "eps<=0.1", "eps<=0.2"
            );
            for r in &rows {
                let _ = writeln!(text, "{:>8} {:>8} {:>8} {:>9} {:>9}", r[0], r[1], r[2], r[3], r[4]);
            }
        }
        ScenarioKind::TrainEval => {
            let rows = table(dir, EVAL_FILE, EVAL_CSV_HEADER)?;
            let _ = writeln!(text, "{:>12} {:>8} {:>10}", "family", "model", "test_mse");
            for r in &rows {
                num(EVAL_FILE, &r[2])?;
                let _ = writeln!(text, "{:>12} {:>8} {:>10}", r[0], r[1], r[2]);
            }
        }
    }
    Ok(Report { text, files })
}
