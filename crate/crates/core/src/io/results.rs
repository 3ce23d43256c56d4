//! Result bundles: `results.json` plus one CSV per trace.

use std::path::{Path, PathBuf};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::trace_csv::write_trace_csv;
use crate::error::{Error, Result};
use crate::ident::{IdentResult, StartRecord};
use crate::lti::Trace;

pub const RESULTS_FILE: &str = "results.json";

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ResultBundle {
    #[serde(default)]
    pub units: Vec<UnitResult>,
    #[serde(default)]
    pub areas: Vec<AreaResult>,
    #[serde(default)]
    pub grid: Option<FitSummary>,
    #[serde(default)]
    pub metrics: Vec<ChannelMetric>,
    /// Names of the trace CSVs written next to the result file.
    #[serde(default)]
    pub trace_files: Vec<String>,
    #[serde(skip)]
    pub traces: IndexMap<String, Trace>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitResult {
    pub unit: String,
    pub kind: String,
    pub params: IndexMap<String, f64>,
    pub fit: FitSummary,
}

/// One row per area, in the shape `(area, H, D)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AreaResult {
    pub area: String,
    pub h: f64,
    pub d: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub sse: f64,
    pub r2: f64,
    pub best_start: usize,
    pub starts: Vec<StartRecord>,
}

impl From<&IdentResult> for FitSummary {
    fn from(r: &IdentResult) -> Self {
        Self {
            sse: r.sse,
            r2: r.r2,
            best_start: r.best_start,
            starts: r.starts.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelMetric {
    pub channel: String,
    /// Trace holding the model signal.
    pub model: String,
    /// Trace holding the measured signal.
    pub measured: String,
    /// `None` when the measured channel is constant.
    pub r2: Option<f64>,
    pub rms: f64,
}

impl ResultBundle {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self).map_err(|e| Error::Parse(e.to_string()))?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Every metric must name traces held by the bundle.
    pub fn validate(&self) -> Result<()> {
        for m in &self.metrics {
            for name in [&m.model, &m.measured] {
                let t = self.traces.get(name).ok_or_else(|| {
                    Error::validation(
                        format!("metrics.{}", m.channel),
                        format!("no trace `{name}`"),
                    )
                })?;
                t.get(&m.channel)?;
            }
        }
        Ok(())
    }
}

/// Writes `results.json` and `<name>.csv` for each trace into `dir`;
/// returns the paths written.
pub fn write_results(bundle: &ResultBundle, dir: &Path) -> Result<Vec<PathBuf>> {
    bundle.validate()?;
    std::fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    let mut b = bundle.clone();
    b.trace_files = b.traces.keys().map(|k| format!("{k}.csv")).collect();
    let mut written = Vec::new();
    for (name, tr) in &b.traces {
        let p = dir.join(format!("{name}.csv"));
        write_trace_csv(tr, &p)?;
        written.push(p);
    }
    let p = dir.join(RESULTS_FILE);
    std::fs::write(&p, b.to_json()?).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?;
    written.push(p);
    Ok(written)
}
