//! Parameter sweeps: the cross product of value lists over scenario fields.
//!
//! An axis names a dotted field path of the scenario (for example
//! `attack.malicious` or `defense.tad`) and a non-empty list of values in
//! TOML syntax. Cells are enumerated with the first axis varying slowest and
//! numbered from zero; the cell number feeds the seed derivation, so results
//! do not depend on how many cells run at once.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::ScenarioConfig;
use crate::engine::{run_scenario_here, with_parallelism, MetricsRecord, ReputationRecord};
use crate::error::{ConfigError, SimError};
use crate::output::{ensure_dir, write_json, write_metrics_csv, write_reputation_csv, Summary};

#[derive(Debug, Clone, PartialEq)]
pub struct SweepAxis {
    pub field: String,
    pub values: Vec<toml::Value>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepSpec {
    pub axes: Vec<SweepAxis>,
}

fn sweep_err(msg: impl Into<String>) -> ConfigError {
    ConfigError::Sweep(msg.into())
}

fn parse_value(text: &str) -> Result<toml::Value, ConfigError> {
    let doc: toml::Table =
        toml::from_str(&format!("v = {text}")).map_err(|e| sweep_err(format!("bad value `{text}`: {e}")))?;
    Ok(doc["v"].clone())
}

/// Splits on commas that are not nested inside brackets, braces or quotes.
fn split_top_level(text: &str) -> Vec<&str> {
    let (mut depth, mut quoted, mut start) = (0i32, false, 0);
    let mut parts = Vec::new();
    for (i, c) in text.char_indices() {
        match c {
            '"' => quoted = !quoted,
            '[' | '{' if !quoted => depth += 1,
            ']' | '}' if !quoted => depth -= 1,
            ',' if !quoted && depth == 0 => {
                parts.push(&text[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    parts.push(&text[start..]);
    parts
}

impl SweepAxis {
    /// Parses `field=v1,v2,...`.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let (field, values) = text
            .split_once('=')
            .ok_or_else(|| sweep_err(format!("expected `field=v1,v2,...`, got `{text}`")))?;
        let field = field.trim();
        if field.is_empty() {
            return Err(sweep_err("empty field name"));
        }
        let values = values.trim();
        if values.is_empty() {
            return Err(sweep_err(format!("empty value list for `{field}`")));
        }
        let values = split_top_level(values)
            .into_iter()
            .map(|v| parse_value(v.trim()))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { field: field.to_string(), values })
    }
}

impl SweepSpec {
    /// One axis per `field=v1,v2,...` argument.
    pub fn parse_args<S: AsRef<str>>(args: &[S]) -> Result<Self, ConfigError> {
        let axes = args.iter().map(|a| SweepAxis::parse(a.as_ref())).collect::<Result<Vec<_>, _>>()?;
        let spec = Self { axes };
        spec.check()?;
        Ok(spec)
    }

    /// A TOML document whose keys are field paths and whose values are
    /// arrays, e.g. `"attack.malicious" = [10, 20]`.
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let doc: toml::Table = toml::from_str(text).map_err(|e| sweep_err(e.to_string()))?;
        let mut axes = Vec::new();
        for (field, value) in doc {
            let values = match value {
                toml::Value::Array(v) => v,
                _ => return Err(sweep_err(format!("`{field}` must map to an array of values"))),
            };
            axes.push(SweepAxis { field, values });
        }
        let spec = Self { axes };
        spec.check()?;
        Ok(spec)
    }

    fn check(&self) -> Result<(), ConfigError> {
        if self.axes.is_empty() {
            return Err(sweep_err("no sweep axes given"));
        }
        for (i, axis) in self.axes.iter().enumerate() {
            if axis.values.is_empty() {
                return Err(sweep_err(format!("empty value list for `{}`", axis.field)));
            }
            if self.axes[..i].iter().any(|a| a.field == axis.field) {
                return Err(sweep_err(format!("`{}` is swept twice", axis.field)));
            }
        }
        Ok(())
    }

    pub fn cell_count(&self) -> usize {
        self.axes.iter().map(|a| a.values.len()).product()
    }

    /// Every cell's configuration, validated.
    pub fn expand(&self, base: &ScenarioConfig) -> Result<Vec<SweepCell>, ConfigError> {
        self.check()?;
        let base_value = toml::Value::try_from(base).map_err(|e| sweep_err(e.to_string()))?;
        (0..self.cell_count())
            .map(|index| {
                let mut rest = index;
                let mut picks = vec![0; self.axes.len()];
                for (k, axis) in self.axes.iter().enumerate().rev() {
                    picks[k] = rest % axis.values.len();
                    rest /= axis.values.len();
                }
                let mut value = base_value.clone();
                let mut assignments = Vec::with_capacity(self.axes.len());
                for (axis, &pick) in self.axes.iter().zip(&picks) {
                    let v = axis.values[pick].clone();
                    set_path(&mut value, &axis.field, v.clone())?;
                    assignments.push((axis.field.clone(), display_value(&v)));
                }
                let mut config: ScenarioConfig = value.try_into().map_err(|e: toml::de::Error| {
                    sweep_err(format!("cell {index}: {}", e.message()))
                })?;
                config.name = format!("{}-cell{index:03}", base.name);
                config.validate()?;
                Ok(SweepCell { index, assignments, config })
            })
            .collect()
    }
}

fn display_value(v: &toml::Value) -> String {
    match v {
        toml::Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// Replaces an existing field; unknown paths are rejected.
fn set_path(root: &mut toml::Value, path: &str, value: toml::Value) -> Result<(), ConfigError> {
    let unknown = || sweep_err(format!("unknown field `{path}`"));
    let mut node = root;
    let mut parts = path.split('.').peekable();
    while let Some(part) = parts.next() {
        let table = node.as_table_mut().ok_or_else(unknown)?;
        let child = table.get_mut(part).ok_or_else(unknown)?;
        if parts.peek().is_none() {
            *child = value;
            return Ok(());
        }
        node = child;
    }
    Err(unknown())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub index: usize,
    /// `(field, value)` pairs in axis order.
    pub assignments: Vec<(String, String)>,
    pub config: ScenarioConfig,
}

#[derive(Debug, Clone)]
pub struct CellResult {
    pub cell: SweepCell,
    pub records: Vec<MetricsRecord>,
    pub reputation_trace: Vec<ReputationRecord>,
    pub summary: Summary,
}

/// Runs every cell on up to `parallelism` threads.
pub fn run_sweep(
    base: &ScenarioConfig,
    spec: &SweepSpec,
    parallelism: usize,
    trace: bool,
) -> Result<Vec<CellResult>, SimError> {
    let cells = spec.expand(base)?;
    with_parallelism(parallelism, || {
        cells
            .into_par_iter()
            .map(|cell| {
                let out = run_scenario_here(&cell.config, cell.index as u64, trace)?;
                let summary = Summary::from_records(&cell.config.name, cell.config.repetitions, &out.records);
                Ok(CellResult { cell, records: out.records, reputation_trace: out.reputation_trace, summary })
            })
            .collect()
    })
}

/// Long-form aggregate: one row per cell with its axis values and errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub cell: usize,
    pub assignments: Vec<(String, String)>,
    pub mean_err_m: f64,
    pub std_err_m: f64,
    pub coasting_records: usize,
}

pub fn aggregate(results: &[CellResult]) -> Vec<AggregateRow> {
    results
        .iter()
        .map(|r| AggregateRow {
            cell: r.cell.index,
            assignments: r.cell.assignments.clone(),
            mean_err_m: r.summary.mean_err_m,
            std_err_m: r.summary.std_err_m,
            coasting_records: r.summary.coasting_records,
        })
        .collect()
}

fn write_csv(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<(), SimError> {
    let io = |source| SimError::Io { path: path.display().to_string(), source };
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.flush().map_err(io)
}

/// Writes one metrics CSV (and optional reputation trace) per cell under
/// `out/cells/`, then `aggregate.csv` (one row per cell) and `table.csv`:
/// mean errors pivoted with the last axis as columns and the remaining axes
/// as row labels. With axes such as `scenario-variant × attack.malicious`
/// this is the attack-scheme × malicious-share layout.
pub fn write_sweep(out: &Path, spec: &SweepSpec, results: &[CellResult]) -> Result<Vec<PathBuf>, SimError> {
    let cells_dir = out.join("cells");
    ensure_dir(&cells_dir)?;
    let mut written = Vec::new();
    for r in results {
        let path = cells_dir.join(format!("cell-{:03}.csv", r.cell.index));
        write_metrics_csv(&path, &r.records)?;
        written.push(path);
        if !r.reputation_trace.is_empty() {
            let path = cells_dir.join(format!("cell-{:03}-reputation.csv", r.cell.index));
            write_reputation_csv(&path, &r.reputation_trace)?;
            written.push(path);
        }
        let path = cells_dir.join(format!("cell-{:03}-summary.json", r.cell.index));
        write_json(&path, &r.summary)?;
        written.push(path);
    }

    let rows = aggregate(results);
    let mut header: Vec<String> = vec!["cell".into()];
    header.extend(spec.axes.iter().map(|a| a.field.clone()));
    header.extend(["mean_err_m", "std_err_m", "coasting_records"].map(String::from));
    let body: Vec<Vec<String>> = rows
        .iter()
        .map(|row| {
            let mut line = vec![row.cell.to_string()];
            line.extend(row.assignments.iter().map(|(_, v)| v.clone()));
            line.extend([row.mean_err_m.to_string(), row.std_err_m.to_string(), row.coasting_records.to_string()]);
            line
        })
        .collect();
    let path = out.join("aggregate.csv");
    write_csv(&path, &header, &body)?;
    written.push(path);

    let last = spec.axes.last().expect("checked non-empty");
    let columns = last.values.len();
    let label = |row: &AggregateRow| {
        let lead = &row.assignments[..row.assignments.len() - 1];
        if lead.is_empty() {
            "all".to_string()
        } else {
            lead.iter().map(|(f, v)| format!("{f}={v}")).collect::<Vec<_>>().join(" ")
        }
    };
    let mut header = vec!["cells".to_string()];
    header.extend(last.values.iter().map(|v| format!("{}={}", last.field, display_value(v))));
    let pivot: Vec<Vec<String>> = rows
        .chunks(columns)
        .map(|chunk| {
            let mut line = vec![label(&chunk[0])];
            line.extend(chunk.iter().map(|r| r.mean_err_m.to_string()));
            line
        })
        .collect();
    let path = out.join("table.csv");
    write_csv(&path, &header, &pivot)?;
    written.push(path);
    Ok(written)
}
