use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::numfmt;

pub const CSV_HEADER: &str = "task,strategy,modalities,accuracy,similarity,trials";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub video: String,
    pub trial: u32,
    pub exact_match: bool,
    pub similarity: f64,
    pub failed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    /// Whether the generated program parsed and validated.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub program_valid: Option<bool>,
    /// Simulator verdict for the generated program.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub success: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub task: String,
    pub strategy: String,
    pub modalities: String,
    pub accuracy: f64,
    pub similarity: f64,
    pub trials: usize,
    /// Model queries issued for this row, program requests included.
    pub queries: usize,
    pub per_trial: Vec<TrialRecord>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub failures: Vec<String>,
}

impl MetricsRow {
    /// Row whose means are the flat arithmetic mean over `per_trial`.
    pub fn from_trials(
        task: String,
        strategy: String,
        modalities: String,
        per_trial: Vec<TrialRecord>,
        queries: usize,
        failures: Vec<String>,
    ) -> Self {
        let n = per_trial.len();
        let denom = n.max(1) as f64;
        let accuracy = per_trial.iter().filter(|t| t.exact_match).count() as f64 / denom;
        let similarity = per_trial.iter().map(|t| t.similarity).sum::<f64>() / denom;
        Self {
            task,
            strategy,
            modalities,
            accuracy,
            similarity,
            trials: n,
            queries,
            per_trial,
            failures,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsTable {
    pub seed: u64,
    pub rows: Vec<MetricsRow>,
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

impl MetricsTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                csv_field(&r.task),
                csv_field(&r.strategy),
                csv_field(&r.modalities),
                numfmt::fixed(r.accuracy, 4),
                numfmt::fixed(r.similarity, 4),
                r.trials
            );
        }
        out
    }

    /// Canonical JSON: pretty-printed, field order fixed by the types.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("metrics serialize");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, EvalError> {
        serde_json::from_str(text).map_err(|e| EvalError::Report(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, EvalError> {
        let text = std::fs::read_to_string(path).map_err(|e| EvalError::io(path, e))?;
        Self::from_json(&text)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Json,
}

impl ReportFormat {
    pub fn file_name(self) -> &'static str {
        match self {
            ReportFormat::Csv => "metrics.csv",
            ReportFormat::Json => "metrics.json",
        }
    }

    pub fn render(self, table: &MetricsTable) -> String {
        match self {
            ReportFormat::Csv => table.to_csv(),
            ReportFormat::Json => table.to_json(),
        }
    }
}

impl std::str::FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            _ => Err(format!("unknown report format '{s}'")),
        }
    }
}

/// Writes the table in `format` under `dir`, returning the file path.
pub fn emit_report(table: &MetricsTable, format: ReportFormat, dir: &Path) -> Result<PathBuf, EvalError> {
    std::fs::create_dir_all(dir).map_err(|e| EvalError::io(dir, e))?;
    let path = dir.join(format.file_name());
    std::fs::write(&path, format.render(table)).map_err(|e| EvalError::io(&path, e))?;
    Ok(path)
}
