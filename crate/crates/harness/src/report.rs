//! JSON and CSV output for experiment and sweep reports.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::experiment::{ExperimentReport, LinkLoadRow, SweepReport};
use crate::instance::Mode;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    /// One JSON document with the full report.
    Json,
    /// Flat CSV tables only.
    Table,
    Both,
}

impl ReportFormat {
    fn json(self) -> bool {
        matches!(self, ReportFormat::Json | ReportFormat::Both)
    }

    fn table(self) -> bool {
        matches!(self, ReportFormat::Table | ReportFormat::Both)
    }
}

#[derive(Serialize)]
struct DecisionCsvRow<'a> {
    request_id: &'a str,
    accepted: bool,
    cost: Option<f64>,
    z: f64,
}

#[derive(Serialize)]
struct MinCostCsvRow<'a> {
    request_id: &'a str,
    cost: f64,
    granularity: f64,
}

pub fn to_csv<T: Serialize>(rows: impl IntoIterator<Item = T>) -> Result<String, ReportError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| ReportError::Csv(e.into_error().into()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Link-load rows for a single run; the column of the other mode is empty.
pub fn link_rows(report: &ExperimentReport) -> Vec<LinkLoadRow> {
    let offline = report.offline.as_ref().map(|s| &s.utilization);
    let online = report.online.as_ref().map(|s| &s.utilization);
    report
        .links
        .iter()
        .enumerate()
        .map(|(e, id)| LinkLoadRow {
            link_id: id.clone(),
            offline_utilization: offline.map(|u| u[e]),
            online_utilization: online.map(|u| u[e]),
        })
        .collect()
}

/// Tables for one run, keyed by file name.
pub fn report_tables(report: &ExperimentReport) -> Result<Vec<(String, String)>, ReportError> {
    let mut tables = Vec::new();
    match report.mode {
        Mode::Offline => {
            tables.push(("link_loads.csv".to_string(), to_csv(link_rows(report))?));
        }
        Mode::Online => {
            tables.push(("link_loads.csv".to_string(), to_csv(link_rows(report))?));
            let decisions = report.online.iter().flat_map(|s| &s.decisions);
            tables.push((
                "decisions.csv".to_string(),
                to_csv(decisions.map(|d| DecisionCsvRow {
                    request_id: &d.request_id,
                    accepted: d.accepted,
                    cost: d.cost,
                    z: d.z,
                }))?,
            ));
        }
        Mode::Mincost => {
            let rows = report.mincost.iter().flatten();
            tables.push((
                "mincost.csv".to_string(),
                to_csv(rows.map(|r| MinCostCsvRow {
                    request_id: &r.request_id,
                    cost: r.cost,
                    granularity: r.granularity,
                }))?,
            ));
        }
    }
    Ok(tables)
}

pub fn sweep_tables(sweep: &SweepReport) -> Result<Vec<(String, String)>, ReportError> {
    Ok(vec![
        (
            "offline_sweep.csv".to_string(),
            to_csv(&sweep.offline_rows)?,
        ),
        ("online_sweep.csv".to_string(), to_csv(&sweep.online_rows)?),
        ("link_loads.csv".to_string(), to_csv(&sweep.link_rows)?),
    ])
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, ReportError> {
    let io = |path: &Path| {
        let path = path.display().to_string();
        move |source| ReportError::Io { path, source }
    };
    fs::create_dir_all(dir).map_err(io(dir))?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(io(&path))?;
    Ok(path)
}

fn emit(
    dir: &Path,
    format: ReportFormat,
    json: impl FnOnce() -> Result<String, ReportError>,
    tables: impl FnOnce() -> Result<Vec<(String, String)>, ReportError>,
    json_name: &str,
) -> Result<Vec<PathBuf>, ReportError> {
    let mut written = Vec::new();
    if format.json() {
        written.push(write(dir, json_name, &json()?)?);
    }
    if format.table() {
        for (name, contents) in tables()? {
            written.push(write(dir, &name, &contents)?);
        }
    }
    Ok(written)
}

/// Writes `report.json` and/or the run's tables into `dir`.
pub fn emit_report(
    report: &ExperimentReport,
    format: ReportFormat,
    dir: &Path,
) -> Result<Vec<PathBuf>, ReportError> {
    emit(
        dir,
        format,
        || Ok(serde_json::to_string_pretty(report)?),
        || report_tables(report),
        "report.json",
    )
}

/// Writes `sweep.json` and/or the three sweep tables into `dir`.
pub fn emit_sweep(
    sweep: &SweepReport,
    format: ReportFormat,
    dir: &Path,
) -> Result<Vec<PathBuf>, ReportError> {
    emit(
        dir,
        format,
        || Ok(serde_json::to_string_pretty(sweep)?),
        || sweep_tables(sweep),
        "sweep.json",
    )
}
