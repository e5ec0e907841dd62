use std::path::{Path, PathBuf};

use serde::Serialize;

use super::{
    run_beta_suite, run_corona, run_monotonicity_audit, run_perimeter, run_scaling_potential, run_tubular_volume, Check,
    ExperimentConfig, ExperimentKind, Report,
};
use crate::error::{Error, Result};

/// Runs one experiment kind (the suite included) behind the common trait.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Box<dyn Report>> {
    Ok(match cfg.kind {
        ExperimentKind::ScalingPotential => Box::new(run_scaling_potential(cfg)?),
        ExperimentKind::TubularVolume => Box::new(run_tubular_volume(cfg)?),
        ExperimentKind::MonotonicityAudit => Box::new(run_monotonicity_audit(cfg)?),
        ExperimentKind::BetaReifenbergSuite => Box::new(run_beta_suite(cfg)?),
        ExperimentKind::CoronaRun => Box::new(run_corona(cfg)?),
        ExperimentKind::Perimeter2s => Box::new(run_perimeter(cfg)?),
        ExperimentKind::Suite => Box::new(run_suite(cfg)?),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteEntry {
    pub name: &'static str,
    pub passed: bool,
    /// set when the sub-suite aborted instead of reporting
    pub error: Option<String>,
    pub checks: Vec<Check>,
}

pub struct SuiteReport {
    pub seed: u64,
    pub entries: Vec<SuiteEntry>,
    pub reports: Vec<(&'static str, Box<dyn Report>)>,
}

impl SuiteReport {
    pub fn summary_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Summary<'a> {
            seed: u64,
            passed: bool,
            suites: &'a [SuiteEntry],
        }
        let s = Summary { seed: self.seed, passed: self.entries.iter().all(|e| e.passed), suites: &self.entries };
        serde_json::to_string_pretty(&s).map(|j| j + "\n").map_err(|e| Error::Internal(e.to_string()))
    }
}

impl Report for SuiteReport {
    fn title(&self) -> &'static str {
        "suite"
    }

    fn summary(&self) -> Vec<String> {
        vec![format!("seed = {}", self.seed)]
    }

    fn checks(&self) -> Vec<Check> {
        self.entries
            .iter()
            .map(|e| {
                let detail = match &e.error {
                    Some(err) => format!("aborted: {err}"),
                    None => {
                        let failed: Vec<&str> = e.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
                        if failed.is_empty() {
                            format!("{} checks passed", e.checks.len())
                        } else {
                            format!("failing: {}", failed.join("; "))
                        }
                    }
                };
                Check::new(e.name, e.passed, detail)
            })
            .collect()
    }

    fn tables(&self) -> Vec<(String, String)> {
        self.summary_json().map(|j| vec![("summary.json".to_string(), j)]).unwrap_or_default()
    }

    fn render(&self) -> String {
        let mut out = String::new();
        for (_, r) in &self.reports {
            out.push_str(&r.render());
            out.push('\n');
        }
        let head = format!("{}\n", self.title());
        let mut tail = String::new();
        for c in self.checks() {
            tail.push_str(&format!("[{}] {}: {}\n", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail));
        }
        tail.push_str(&format!("overall: {}\n", if self.passed() { "PASS" } else { "FAIL" }));
        out + &head + &tail
    }

    /// Sub-suite outputs go to one directory each; the summary sits on top.
    fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        for (name, r) in &self.reports {
            written.extend(r.write(&dir.join(name))?);
        }
        for (name, body) in self.tables() {
            let p = dir.join(name);
            std::fs::write(&p, body)?;
            written.push(p);
        }
        let p = dir.join("report.txt");
        std::fs::write(&p, self.render())?;
        written.push(p);
        Ok(written)
    }
}

/// Monotonicity audit, β/Reifenberg suite and perimeter checks, each with
/// its own defaults and the shared keys of `cfg`. A failing or aborted
/// sub-suite is recorded and the others still run.
pub fn run_suite(cfg: &ExperimentConfig) -> Result<SuiteReport> {
    let kinds = [ExperimentKind::MonotonicityAudit, ExperimentKind::BetaReifenbergSuite, ExperimentKind::Perimeter2s];
    let mut entries = Vec::new();
    let mut reports: Vec<(&'static str, Box<dyn Report>)> = Vec::new();
    for kind in kinds {
        let sub = cfg.derive(kind);
        let name = kind.as_str();
        match run_experiment(&sub) {
            Ok(rep) => {
                entries.push(SuiteEntry { name, passed: rep.passed(), error: None, checks: rep.checks() });
                reports.push((name, rep));
            }
            Err(e) => entries.push(SuiteEntry { name, passed: false, error: Some(e.to_string()), checks: Vec::new() }),
        }
    }
    Ok(SuiteReport { seed: cfg.seed, entries, reports })
}
