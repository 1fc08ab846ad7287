//! End-to-end checks of the timelike comparison inequalities on model
//! spacetimes. Every check returns an [`InequalityReport`] whose margins are
//! nonnegative when the inequality holds.

mod calculus;
mod entropy;
mod needles;
mod volume;

pub use calculus::{brenier_mccann_check, dalembert_check, eikonal_check, tau_tilde, Bump, DalembertVariant, Stencil};
pub use entropy::{check_tcd_semiconvexity, check_tmcp, check_tmcp_future, TmcpConfig};
pub use needles::{aubry_spacetime_check, needle_decomposition, AubryModel, Needle, NeedleDecomposition, NeedleWindow};
pub use volume::{bishop_gromov, bonnet_myers, brunn_minkowski, BrunnSource};

use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportStatus {
    Passed,
    Failed,
    /// The theorem's hypothesis is not met; nothing was asserted.
    HypothesisViolated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub label: String,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InequalityReport {
    pub name: String,
    pub rows: Vec<ReportRow>,
    pub tolerance: f64,
    pub passed: bool,
    pub status: ReportStatus,
    pub provenance: Value,
    /// Extra named diagnostics that are recorded but not asserted.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub diagnostics: Vec<(String, f64)>,
}

impl InequalityReport {
    pub fn new(name: &str, rows: Vec<ReportRow>, tolerance: f64, provenance: Value) -> Self {
        let passed = rows.iter().all(|r| r.margin >= -tolerance);
        InequalityReport {
            name: name.into(),
            rows,
            tolerance,
            passed,
            status: if passed { ReportStatus::Passed } else { ReportStatus::Failed },
            provenance,
            diagnostics: Vec::new(),
        }
    }

    pub fn hypothesis_violated(name: &str, reason: &str, provenance: Value) -> Self {
        InequalityReport {
            name: name.into(),
            rows: Vec::new(),
            tolerance: 0.0,
            passed: false,
            status: ReportStatus::HypothesisViolated,
            provenance,
            diagnostics: vec![(reason.into(), f64::NAN)],
        }
    }

    pub fn with_diagnostic(mut self, key: &str, value: f64) -> Self {
        self.diagnostics.push((key.into(), value));
        self
    }

    pub fn min_margin(&self) -> f64 {
        self.rows.iter().map(|r| r.margin).fold(f64::INFINITY, f64::min)
    }

    /// One CSV row per margin: label,lhs,rhs,margin.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("label,lhs,rhs,margin\n");
        for r in &self.rows {
            out.push_str(&format!("{},{:e},{:e},{:e}\n", r.label.replace(',', ";"), r.lhs, r.rhs, r.margin));
        }
        out
    }
}

pub(crate) fn row(label: impl Into<String>, lhs: f64, rhs: f64, margin: f64) -> ReportRow {
    ReportRow { label: label.into(), lhs, rhs, margin }
}
