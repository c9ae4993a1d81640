use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Which side of the tolerance passes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bound {
    #[default]
    Below,
    /// The check expects a large value, e.g. a link that must not be global.
    Above,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub tolerance: f64,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "is_below")]
    pub bound: Bound,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
    /// `(t, value)` behind `measured`; written as `<name>.csv`.
    #[serde(skip)]
    pub series: Vec<(f64, f64)>,
}

fn is_below(b: &Bound) -> bool {
    *b == Bound::Below
}

impl Check {
    pub fn below(name: impl Into<String>, measured: f64, tolerance: f64) -> Check {
        Check {
            name: name.into(),
            measured,
            tolerance,
            pass: measured < tolerance,
            bound: Bound::Below,
            detail: None,
            series: Vec::new(),
        }
    }

    pub fn above(name: impl Into<String>, measured: f64, tolerance: f64) -> Check {
        Check { pass: measured > tolerance, bound: Bound::Above, ..Check::below(name, measured, tolerance) }
    }

    /// A check that could not be evaluated.
    pub fn error(name: impl Into<String>, tolerance: f64, why: impl Into<String>) -> Check {
        Check { pass: false, detail: Some(why.into()), ..Check::below(name, f64::NAN, tolerance) }
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Check {
        self.detail = Some(detail.into());
        self
    }

    pub fn with_series(mut self, series: Vec<(f64, f64)>) -> Check {
        self.series = series;
        self
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub newton_iterations: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub invariant_path: Option<String>,
    /// `(k, kind)` for each analysed link `k → k+1`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub gauge_kinds: Vec<(i32, String)>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub values: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub scenario: String,
    pub checks: Vec<Check>,
    pub timings_ms: BTreeMap<String, f64>,
    #[serde(default)]
    pub diagnostics: Diagnostics,
}

impl RunReport {
    pub fn new(scenario: &str) -> Self {
        RunReport { scenario: scenario.to_string(), ..Default::default() }
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn table(&self) -> String {
        let mut out = format!("scenario {}\n", self.scenario);
        for c in &self.checks {
            let op = match c.bound {
                Bound::Below => "<",
                Bound::Above => ">",
            };
            let _ = write!(
                out,
                "  {:<4} {:<24} {:>12.4e} {op} {:<10.1e}",
                if c.pass { "ok" } else { "FAIL" },
                c.name,
                c.measured,
                c.tolerance
            );
            if let Some(d) = &c.detail {
                let _ = write!(out, "  {d}");
            }
            out.push('\n');
        }
        let total: f64 = self.timings_ms.iter().filter(|(k, _)| !k.contains(':')).map(|(_, v)| v).sum();
        let _ = writeln!(out, "  {} checks, {:.0} ms", self.checks.len(), total);
        out
    }

    pub fn write_json(&self, path: &Path) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(self).expect("reports serialize");
        std::fs::write(path, text).map_err(|e| CliError::Io { path: path.display().to_string(), source: e })
    }

    /// `<dir>/<check>.csv` for every check that carries a series.
    pub fn write_series(&self, dir: &Path) -> Result<(), CliError> {
        for c in self.checks.iter().filter(|c| !c.series.is_empty()) {
            let path = dir.join(format!("{}.csv", c.name));
            let io = |e: csv::Error| CliError::Io { path: path.display().to_string(), source: e.into() };
            let mut w = csv::Writer::from_path(&path).map_err(io)?;
            w.write_record(["t", "value"]).map_err(io)?;
            for (t, v) in &c.series {
                w.write_record([format!("{t:.17e}"), format!("{v:.17e}")]).map_err(io)?;
            }
            w.flush().map_err(|e| CliError::Io { path: path.display().to_string(), source: e })?;
        }
        Ok(())
    }
}
