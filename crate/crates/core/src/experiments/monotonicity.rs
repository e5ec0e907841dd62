use std::fmt::Write as _;
use std::sync::Arc;

use serde::Serialize;

use super::{sci, Check, ExperimentConfig, Report};
use crate::energy::{tol_mono, DensityCurve, EnergyContext, EnergyTables, LambdaAudit};
use crate::error::{Error, Result};
use crate::extension::{default_z_levels, extend};
use crate::grid::{Field, Grid, HalfSpaceSign};
use crate::math::{make_params, Potential};
use crate::solver::{solve_allen_cahn_traced, SolverConfig};

/// Radius pair of the identity check.
pub const PAIR: (f64, f64) = (0.2, 0.4);
const LADDER_RATIO: f64 = 1.3;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonotonicityRow {
    pub epsilon: f64,
    pub resolution: f64,
    pub h: f64,
    pub iterations: usize,
    /// identity residual on the fixed pair
    pub pair_residual: f64,
    /// worst identity residual over consecutive ladder radii
    pub ladder_residual: f64,
    /// largest relative drop of Θ along the ladder (≤ 0 when monotone)
    pub worst_dip: f64,
    pub tol_mono: f64,
    pub lambda: LambdaAudit,
}

impl MonotonicityRow {
    pub fn monotone(&self) -> bool {
        self.worst_dip <= self.tol_mono
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonotonicityReport {
    pub rows: Vec<MonotonicityRow>,
    pub curves: Vec<DensityCurve>,
}

impl Report for MonotonicityReport {
    fn title(&self) -> &'static str {
        "monotonicity-audit"
    }

    fn summary(&self) -> Vec<String> {
        self.rows
            .iter()
            .map(|r| {
                format!(
                    "eps = {}, h = eps/{}: pair residual {:.4}, ladder residual {:.4}, worst dip {:.2e}, max theta {:.4} <= {:.4}",
                    r.epsilon, r.resolution, r.pair_residual, r.ladder_residual, r.worst_dip, r.lambda.max_theta, r.lambda.bound
                )
            })
            .collect()
    }

    fn checks(&self) -> Vec<Check> {
        let mut v = Vec::new();
        for r in &self.rows {
            let tag = format!("eps {}, h = eps/{}", r.epsilon, r.resolution);
            v.push(Check::new(
                format!("theta nondecreasing ({tag})"),
                r.monotone(),
                format!("worst relative dip {:.3e} <= tol {:.3e}", r.worst_dip, r.tol_mono),
            ));
            if r.resolution >= 4.0 {
                v.push(Check::new(
                    format!("identity residual <= 0.1 ({tag})"),
                    r.pair_residual <= 0.1,
                    format!("{:.4}", r.pair_residual),
                ));
            }
            v.push(Check::new(
                format!("uniform density bound ({tag})"),
                r.lambda.holds,
                format!("{:.4} <= {:.4}", r.lambda.max_theta, r.lambda.bound),
            ));
        }
        let mut eps: Vec<f64> = self.rows.iter().map(|r| r.epsilon).collect();
        eps.dedup();
        for e in eps {
            let mut at: Vec<&MonotonicityRow> = self.rows.iter().filter(|r| r.epsilon == e).collect();
            at.sort_by(|a, b| a.resolution.total_cmp(&b.resolution));
            for w in at.windows(2) {
                let drop = 1.0 - w[1].pair_residual / w[0].pair_residual;
                v.push(Check::new(
                    format!("residual drops >= 30% (eps {e}, eps/{} -> eps/{})", w[0].resolution, w[1].resolution),
                    drop >= 0.3,
                    format!("{:.4} -> {:.4} ({:.1}%)", w[0].pair_residual, w[1].pair_residual, 100.0 * drop),
                ));
            }
        }
        v
    }

    fn tables(&self) -> Vec<(String, String)> {
        let mut csv = String::from(
            "epsilon,resolution,h,iterations,pair_residual,ladder_residual,worst_dip,tol_mono,max_theta,lambda_bound\n",
        );
        for r in &self.rows {
            let _ = writeln!(
                csv,
                "{},{},{},{},{},{},{},{},{},{}",
                sci(r.epsilon),
                sci(r.resolution),
                sci(r.h),
                r.iterations,
                sci(r.pair_residual),
                sci(r.ladder_residual),
                sci(r.worst_dip),
                sci(r.tol_mono),
                sci(r.lambda.max_theta),
                sci(r.lambda.bound)
            );
        }
        let mut out = vec![("monotonicity.csv".to_string(), csv)];
        for (r, c) in self.rows.iter().zip(&self.curves) {
            let mut body = Vec::new();
            if c.write_csv(&mut body).is_ok() {
                out.push((format!("density_eps{}_res{}.csv", r.epsilon, r.resolution), String::from_utf8_lossy(&body).into_owned()));
            }
        }
        out
    }
}

fn audit_centers(n: usize) -> Vec<Vec<f64>> {
    if n == 1 {
        [-0.8, -0.4, 0.0, 0.4, 0.8].iter().map(|&x| vec![x]).collect()
    } else {
        vec![vec![0.0, 0.0], vec![0.5, 0.0], vec![-0.5, 0.0], vec![0.0, 0.5], vec![0.0, -0.5]]
    }
}

/// Layer solves at every (ε, resolution); Θ along a geometric ladder at the
/// origin, the identity residual on a fixed radius pair and the uniform
/// density bound over a batch of centres.
pub fn run_monotonicity_audit(cfg: &ExperimentConfig) -> Result<MonotonicityReport> {
    cfg.validate()?;
    let params = make_params(cfg.n, cfg.s)?;
    let mut rows = Vec::new();
    let mut curves = Vec::new();
    let centers = audit_centers(cfg.n);
    for &eps in &cfg.epsilons {
        for &res in &cfg.resolutions {
            let abort = |e: Error| Error::Aborted { epsilon: eps, reason: e.to_string() };
            let h = eps / res;
            let grid = Arc::new(Grid::with_spacing(cfg.n, cfg.half_width, h, Arc::new(HalfSpaceSign { axis: 0 })).map_err(abort)?);
            let solver = SolverConfig::new(params, Potential::prototype(), eps, grid.clone()).map_err(abort)?;
            let init = Field::new(grid.clone(), grid.default_init()).map_err(abort)?;
            let trace = solve_allen_cahn_traced(&solver, &init, 0).map_err(abort)?;
            let radii: Vec<f64> = (0..)
                .map(|k| eps.max(2.5 * grid.h) * LADDER_RATIO.powi(k))
                .take_while(|&r| r <= PAIR.1)
                .collect();
            let rmax = radii.last().copied().unwrap_or(PAIR.1);
            let z_req = (0.8 + rmax).max(PAIR.1);
            let ext = extend(&trace.field, &solver, &default_z_levels(grid.h, z_req))?;
            let tables = EnergyTables::new(&ext, EnergyContext::from(&solver))?;
            let origin = vec![0.0; cfg.n];
            let curve = tables.density_curve(&origin, &radii)?;
            let worst_dip = curve
                .theta
                .windows(2)
                .map(|w| if w[0] > 0.0 { (w[0] - w[1]) / w[0] } else { 0.0 })
                .fold(f64::NEG_INFINITY, f64::max);
            let ladder_residual = curve.intervals.iter().skip(1).map(|i| i.residual).fold(0.0, f64::max);
            let pair = tables.monotonicity_residual(&origin, PAIR.0, PAIR.1)?;
            let lambda = tables.lambda_audit(&centers, &radii)?;
            rows.push(MonotonicityRow {
                epsilon: eps,
                resolution: res,
                h: grid.h,
                iterations: trace.iterations,
                pair_residual: pair.residual,
                ladder_residual,
                worst_dip,
                tol_mono: tol_mono(grid.h, eps),
                lambda,
            });
            curves.push(curve);
        }
    }
    Ok(MonotonicityReport { rows, curves })
}
