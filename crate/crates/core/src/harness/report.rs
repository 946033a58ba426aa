//! Result serialization.
//!
//! `results.csv` is byte-deterministic for a given config and seed: a
//! white-box model is marked with a trailing `*`, rates are fixed to two
//! decimals, and the `wall_ms` column is written as 0. Measured wall times and
//! timestamps vary run to run, so they live only in `results.json`.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use crate::error::Result;
use crate::harness::{ExperimentConfig, RunReport};

/// One flattened (method, N, model) row.
#[derive(Clone, Debug, serde::Serialize)]
pub struct ResultRow {
    pub method: String,
    pub number_scale: usize,
    pub model: String,
    pub white_box: bool,
    pub success_rate_pct: f64,
    pub evals: u64,
    pub wall_ms: u64,
}

/// Writes `results.csv` and `results.json` into `dir`; returns both paths.
pub fn write_outputs(
    report: &RunReport,
    cfg: &ExperimentConfig,
    dir: &Path,
) -> Result<(PathBuf, PathBuf)> {
    fs::create_dir_all(dir)?;
    let csv_path = dir.join("results.csv");
    fs::write(&csv_path, render_csv(report))?;
    let json_path = dir.join("results.json");
    fs::write(&json_path, render_json(report, cfg)?)?;
    Ok((csv_path, json_path))
}

/// Deterministic CSV serialization of the result table.
pub fn render_csv(report: &RunReport) -> String {
    let mut out = String::from("method,N,model,success_rate_pct,evals,wall_ms\n");
    for row in report.rows() {
        let model = if row.white_box {
            format!("{}*", row.model)
        } else {
            row.model.clone()
        };
        out.push_str(&format!(
            "{},{},{},{:.2},{},0\n",
            row.method, row.number_scale, model, row.success_rate_pct, row.evals
        ));
    }
    out
}

fn render_json(report: &RunReport, cfg: &ExperimentConfig) -> Result<String> {
    let cells: Vec<serde_json::Value> = report
        .cells
        .iter()
        .map(|cell| {
            serde_json::json!({
                "method": cell.method,
                "requested_scale": cell.requested_scale,
                "number_scale": cell.number_scale,
                "unified_warning": cell.unified_warning,
                "evals": cell.evals,
                "wall_ms": cell.wall_ms,
                "max_delta_linf": cell.max_delta_linf,
                "clean_misclassified": cell.clean_misclassified,
                "success": cell.success,
            })
        })
        .collect();
    let timestamp = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let value = serde_json::json!({
        "kind": report.kind,
        "cells": cells,
        "config": cfg,
        "environment": {
            "package_version": env!("CARGO_PKG_VERSION"),
            "threads": rayon::current_num_threads(),
            "unix_timestamp": timestamp,
        },
    });
    Ok(serde_json::to_string_pretty(&value).expect("json serialization"))
}
