//! Scenario reports, verdicts and CSV tables.

use std::fmt;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::Result;

/// Where the compared value came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Measured,
    Configured,
}

/// A pass/fail judgement against a stated tolerance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub tolerance: String,
    pub provenance: Provenance,
}

impl Verdict {
    fn new(name: &str, passed: bool, value: f64, tolerance: String) -> Self {
        Self { name: name.into(), passed, value, tolerance, provenance: Provenance::Measured }
    }

    pub fn at_most(name: &str, value: f64, bound: f64) -> Self {
        Self::new(name, value <= bound, value, format!("<= {bound:e}"))
    }

    pub fn at_least(name: &str, value: f64, bound: f64) -> Self {
        Self::new(name, value >= bound, value, format!(">= {bound}"))
    }

    /// `|value - target| <= tol`.
    pub fn near(name: &str, value: f64, target: f64, tol: f64) -> Self {
        Self::new(name, (value - target).abs() <= tol, value, format!("{target} +/- {tol}"))
    }

    /// `|value - target| <= rel |target|`.
    pub fn near_rel(name: &str, value: f64, target: f64, rel: f64) -> Self {
        let tol = rel * target.abs();
        Self::new(name, (value - target).abs() <= tol, value, format!("{target} +/- {}%", rel * 100.0))
    }

    /// Boolean property; `value` is 1 or 0.
    pub fn holds(name: &str, ok: bool, tolerance: &str) -> Self {
        Self::new(name, ok, if ok { 1.0 } else { 0.0 }, tolerance.into())
    }

    pub fn failed(name: &str, reason: &str) -> Self {
        Self::new(name, false, f64::NAN, format!("error: {reason}"))
    }

    pub fn configured(mut self) -> Self {
        self.provenance = Provenance::Configured;
        self
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}: {:.6e} (want {})",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.value,
            self.tolerance
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Bool(bool),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(v) => korteweg_core::diagnostics::fmt17(*v),
            Cell::Int(v) => v.to_string(),
            Cell::Bool(v) => v.to_string(),
            Cell::Text(v) => v.clone(),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}
impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}
impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}
impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.into())
    }
}
impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self { name: name.into(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.columns)?;
        for r in &self.rows {
            w.write_record(r.iter().map(Cell::render))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        let f = std::fs::File::create(dir.join(format!("{}.csv", self.name)))?;
        self.write_csv(std::io::BufWriter::new(f))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fit {
    pub name: String,
    pub value: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridMeta {
    pub dims: Vec<usize>,
    pub lengths: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub scenario: String,
    /// SHA-256 of the canonical configuration JSON.
    pub input_digest: String,
    pub grid: Option<GridMeta>,
    pub tables: Vec<Table>,
    pub fits: Vec<Fit>,
    pub verdicts: Vec<Verdict>,
    pub error: Option<String>,
    pub wall_clock_seconds: f64,
}

impl ScenarioReport {
    pub fn new(scenario: &str, input_digest: String) -> Self {
        Self {
            scenario: scenario.into(),
            input_digest,
            grid: None,
            tables: Vec::new(),
            fits: Vec::new(),
            verdicts: Vec::new(),
            error: None,
            wall_clock_seconds: 0.0,
        }
    }

    pub fn passed(&self) -> bool {
        self.error.is_none() && !self.verdicts.is_empty() && self.verdicts.iter().all(|v| v.passed)
    }

    pub fn fit(&mut self, name: &str, value: f64, stderr: f64) {
        self.fits.push(Fit { name: name.into(), value, stderr });
    }

    /// Writes `report.json` and one CSV per table into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        for t in &self.tables {
            t.save(dir)?;
        }
        let f = std::fs::File::create(dir.join("report.json"))?;
        serde_json::to_writer_pretty(std::io::BufWriter::new(f), self)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_keeps_seventeen_digits_and_quotes() {
        let mut t = Table::new("t", &["x", "label"]);
        t.push(vec![0.1.into(), "a,b".into()]);
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "x,label\n1.0000000000000001e-1,\"a,b\"\n");
        let back: f64 = text.lines().nth(1).unwrap().split(',').next().unwrap().parse().unwrap();
        assert_eq!(back, 0.1);
    }

    #[test]
    fn verdict_helpers() {
        assert!(Verdict::at_most("a", 1.0, 1.0).passed);
        assert!(!Verdict::at_least("b", 0.9, 1.0).passed);
        assert!(Verdict::near("c", -0.49, -0.5, 0.075).passed);
        assert!(!Verdict::near_rel("d", 1.1, 1.0, 0.05).passed);
        assert!(Verdict::failed("e", "boom").tolerance.contains("boom"));
    }

    #[test]
    fn empty_report_does_not_pass() {
        assert!(!ScenarioReport::new("x", String::new()).passed());
    }
}
