//! Configuration-driven desk-scale experiments. Every runner returns a
//! report carrying named pass/fail checks and knows how to write its
//! CSV tables and a plain-text summary into an output directory.

mod beta;
mod circle;
mod config;
mod monotonicity;
mod perimeter;
mod scaling;
mod suite;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::Result;

pub use beta::{
    arc_packing, line_packing, perturbed_line_packing, random_disjoint_balls, random_measure, run_beta_suite,
    square_packing, BetaSuiteReport,
};
pub use circle::{circle_solve, run_corona, run_tubular_volume, CircleSolve, CoronaReport, CoronaRow, TubeRow, TubularReport};
pub use config::{ExperimentConfig, ExperimentKind};
pub use monotonicity::{run_monotonicity_audit, MonotonicityReport, MonotonicityRow};
pub use perimeter::{half_plane_mask, run_perimeter, PerimeterReport};
pub use scaling::{fit_power_law, log_model_rss, run_scaling_potential, Regime, ScalingFit, ScalingReport, ScalingRow};
pub use suite::{run_experiment, run_suite, SuiteEntry, SuiteReport};

/// One named certificate of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Check { name: name.into(), passed, detail: detail.into() }
    }
}

/// Common face of the experiment reports.
pub trait Report {
    fn title(&self) -> &'static str;
    fn checks(&self) -> Vec<Check>;
    /// Data tables as (file name, CSV body).
    fn tables(&self) -> Vec<(String, String)>;
    /// Free-form lines placed above the check list in report.txt.
    fn summary(&self) -> Vec<String> {
        Vec::new()
    }

    fn passed(&self) -> bool {
        self.checks().iter().all(|c| c.passed)
    }

    fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{}", self.title());
        for line in self.summary() {
            let _ = writeln!(out, "  {line}");
        }
        for c in self.checks() {
            let _ = writeln!(out, "[{}] {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
        }
        let _ = writeln!(out, "overall: {}", if self.passed() { "PASS" } else { "FAIL" });
        out
    }

    /// Writes every table plus report.txt into `dir` (created if needed).
    fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        for (name, body) in self.tables() {
            let p = dir.join(name);
            fs::write(&p, body)?;
            written.push(p);
        }
        let p = dir.join("report.txt");
        fs::write(&p, self.render())?;
        written.push(p);
        Ok(written)
    }
}

/// Fixed-width scientific formatting shared by every CSV.
pub(crate) fn sci(v: f64) -> String {
    format!("{v:.12e}")
}
