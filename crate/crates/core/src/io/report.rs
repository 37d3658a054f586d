//! Machine-readable run reports and the JSON run-configuration file.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::QualityReport;

pub const REPORT_SCHEMA: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Gc,
    Lc,
    Mc,
    Demon,
}

impl Model {
    pub fn name(self) -> &'static str {
        match self {
            Model::Gc => "gc",
            Model::Lc => "lc",
            Model::Mc => "mc",
            Model::Demon => "demon",
        }
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Model {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gc" => Ok(Model::Gc),
            "lc" => Ok(Model::Lc),
            "mc" => Ok(Model::Mc),
            "demon" => Ok(Model::Demon),
            other => Err(Error::InvalidParameter {
                name: "model",
                reason: format!("unknown model `{other}`"),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Json,
    Csv,
}

/// One line of a results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub model: Model,
    pub gamma: f64,
    /// Penalty parameter; only meaningful for the GC model.
    pub r: Option<f64>,
    pub time_s: f64,
    pub epsilon: f64,
    pub min_jac: f64,
    pub iterations: usize,
}

/// Full JSON report: the row, the complete quality record and every solver
/// setting that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema: u32,
    #[serde(flatten)]
    pub row: ReportRow,
    pub quality: QualityReport,
    pub settings: serde_json::Map<String, serde_json::Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fixture: Option<String>,
    pub width: usize,
    pub height: usize,
    pub identical_inputs: bool,
}

impl Report {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report is always serializable");
        s.push('\n');
        s
    }
}

const CSV_HEADER: &str = "model,gamma,r,time_s,epsilon,min_jac,iterations";

pub fn to_csv(rows: &[ReportRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for row in rows {
        let r = row.r.map(|v| v.to_string()).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            row.model, row.gamma, r, row.time_s, row.epsilon, row.min_jac, row.iterations
        ));
    }
    out
}

/// Optional settings read from `--config FILE`; command-line flags win.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfigFile {
    pub template_path: Option<PathBuf>,
    pub reference_path: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    pub model: Option<Model>,
    pub gamma: Option<f64>,
    pub r: Option<f64>,
    pub omega: Option<f64>,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub inner_sweeps: Option<usize>,
    pub denom_guard: Option<f64>,
    pub dt: Option<f64>,
    pub noise_ratio: Option<f64>,
    pub smooth_sigma: Option<f64>,
    pub diffeomorphic: Option<bool>,
    pub squaring_steps: Option<usize>,
    pub grid_spacing: Option<usize>,
}

impl RunConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::InvalidParameter {
            name: "config",
            reason: format!("{}: {e}", path.display()),
        })
    }
}
