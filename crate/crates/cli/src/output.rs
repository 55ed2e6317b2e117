//! CSV series, gnuplot scripts and the JSON summary.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use crate::catalog::{ExperimentKind, SeriesInfo, CSV_SCHEMA_VERSION};
use crate::config::{Echo, ExperimentConfig};
use crate::experiments::Outcome;
use crate::CliError;

#[derive(Serialize)]
struct Seeds<'a> {
    root: u64,
    streams: &'a BTreeMap<String, u64>,
}

/// Contents of `summary.json`. Everything except `runtime_seconds` is a
/// function of the configuration.
#[derive(Serialize)]
struct Summary<'a> {
    experiment: ExperimentKind,
    config_echo: &'a Echo,
    estimates: &'a BTreeMap<String, Value>,
    verdicts: &'a BTreeMap<String, bool>,
    passed: bool,
    seeds: Seeds<'a>,
    outputs: Vec<SeriesInfo>,
    csv_schema_version: u32,
    version: &'static str,
    runtime_seconds: f64,
}

fn io(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Output(format!("{}: {e}", path.display()))
}

/// Create the output directory up front so that an unwritable location
/// fails before any computation.
pub fn prepare(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| io(dir, e))
}

fn gnuplot(file: &str, columns: &[&str]) -> String {
    let log = matches!(file, "survival.csv" | "oscillation.csv" | "trajectory.csv");
    let mut s = format!(
        "set datafile separator ','\nset key autotitle columnhead\nset xlabel '{}'\n",
        columns[0]
    );
    if log {
        s.push_str("set logscale y\n");
    }
    let plots: Vec<String> = (2..=columns.len().min(3))
        .map(|c| format!("'{file}' using 1:{c} with linespoints"))
        .collect();
    s.push_str(&format!("plot {}\n", plots.join(", ")));
    s
}

pub fn write(
    dir: &Path,
    cfg: &ExperimentConfig,
    outcome: &Outcome,
    runtime_seconds: f64,
    plots: bool,
) -> Result<(), CliError> {
    let layouts = cfg.experiment.series();
    let mut outputs = Vec::new();
    for series in &outcome.series {
        let info = layouts
            .iter()
            .find(|l| l.file == series.file)
            .expect("every series is listed in the catalog")
            .clone();
        let path = dir.join(series.file);
        let mut w = csv::Writer::from_path(&path).map_err(|e| io(&path, e))?;
        w.write_record(info.columns).map_err(|e| io(&path, e))?;
        for row in &series.rows {
            w.write_record(row).map_err(|e| io(&path, e))?;
        }
        w.flush().map_err(|e| io(&path, e))?;
        if plots {
            let gp = dir.join(format!("{}.gp", series.file.trim_end_matches(".csv")));
            fs::write(&gp, gnuplot(series.file, info.columns)).map_err(|e| io(&gp, e))?;
        }
        outputs.push(info);
    }

    let summary = Summary {
        experiment: cfg.experiment,
        config_echo: &cfg.echo,
        estimates: &outcome.estimates,
        verdicts: &outcome.verdicts,
        passed: outcome.verdicts.values().all(|&ok| ok),
        seeds: Seeds {
            root: cfg.seed,
            streams: &outcome.streams,
        },
        outputs,
        csv_schema_version: CSV_SCHEMA_VERSION,
        version: env!("CARGO_PKG_VERSION"),
        runtime_seconds,
    };
    let path = dir.join("summary.json");
    let text = serde_json::to_string_pretty(&summary).map_err(|e| io(&path, e))?;
    fs::write(&path, text + "\n").map_err(|e| io(&path, e))
}
