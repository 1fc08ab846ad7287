use std::path::Path;

use lorentz_synth::comparison::InequalityReport;
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{io_err, CliResult};

/// Two-column data for external plotting.
#[derive(Debug, Clone, Serialize)]
pub struct Plot {
    pub name: String,
    pub x: String,
    pub y: String,
    #[serde(skip)]
    pub points: Vec<(f64, f64)>,
}

impl Plot {
    pub fn new(name: impl Into<String>, x: &str, y: &str, points: Vec<(f64, f64)>) -> Self {
        Plot { name: name.into(), x: x.into(), y: y.into(), points }
    }

    fn csv(&self) -> String {
        let mut out = format!("{},{}\n", self.x, self.y);
        for (a, b) in &self.points {
            out.push_str(&format!("{a:e},{b:e}\n"));
        }
        out
    }
}

#[derive(Debug, Default)]
pub struct Outcome {
    pub reports: Vec<InequalityReport>,
    pub plots: Vec<Plot>,
    pub extra: Value,
    /// Binary side files (name, bytes).
    pub files: Vec<(String, Vec<u8>)>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.reports.iter().all(|r| r.passed)
    }
}

#[derive(Serialize)]
pub struct RunRecord<'a> {
    pub command: &'a str,
    pub config_hash: &'a str,
    pub seed: u64,
    pub library_version: &'a str,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub parameters: &'a Value,
    pub passed: bool,
    pub reports: &'a [InequalityReport],
    pub extra: &'a Value,
}

fn write(path: &Path, bytes: &[u8]) -> CliResult<()> {
    std::fs::write(path, bytes).map_err(io_err(path))
}

/// report.json, margins.csv, one CSV per plot and plots.json.
pub fn write_outputs(dir: &Path, record: &RunRecord, outcome: &Outcome) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let text = serde_json::to_string_pretty(record).expect("record serializes");
    write(&dir.join("report.json"), text.as_bytes())?;
    let mut csv = String::from("report,label,lhs,rhs,margin\n");
    for r in &outcome.reports {
        for line in r.to_csv().lines().skip(1) {
            csv.push_str(&format!("{},{line}\n", r.name));
        }
    }
    write(&dir.join("margins.csv"), csv.as_bytes())?;
    let mut manifest = Vec::new();
    for p in &outcome.plots {
        let file = format!("{}.csv", p.name);
        write(&dir.join(&file), p.csv().as_bytes())?;
        manifest.push(json!({"file": file, "x": p.x, "y": p.y, "rows": p.points.len()}));
    }
    write(&dir.join("plots.json"), serde_json::to_string_pretty(&manifest).expect("json").as_bytes())?;
    for (name, bytes) in &outcome.files {
        write(&dir.join(name), bytes)?;
    }
    Ok(())
}
