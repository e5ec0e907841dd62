use std::fmt::Write as _;
use std::sync::Arc;

use serde::Serialize;

use super::{sci, Check, ExperimentConfig, Report};
use crate::energy::{EnergyContext, EnergyTables};
use crate::error::{Error, Result};
use crate::extension::{default_z_levels, extend_with_margin};
use crate::geometry::dyadic;
use crate::grid::{Constant, Field, Grid};
use crate::math::{ball_volume, make_params, Potential};
use crate::strat::{calibrate, cover_at_radius, density_ceiling, tubular_volume, BallCover, Calibration, FieldDensity, TransitionSet};
use crate::solver::{solve_allen_cahn_traced, SolverConfig};

/// Planar solve with u = 1 outside the box and u = −1 pinned on a disc,
/// so the transition set is a closed curve around the disc.
pub struct CircleSolve {
    pub epsilon: f64,
    pub solver: SolverConfig,
    pub field: Field,
    pub iterations: usize,
}

pub fn circle_solve(cfg: &ExperimentConfig, epsilon: f64) -> Result<CircleSolve> {
    let abort = |e: Error| Error::Aborted { epsilon, reason: e.to_string() };
    let params = make_params(2, cfg.s).map_err(abort)?;
    let grid = Grid::with_spacing(2, cfg.half_width, epsilon / cfg.resolution, Arc::new(Constant(1.0)))
        .map_err(abort)?
        .pin_ball(&[0.0, 0.0], cfg.hole_radius, -1.0);
    let grid = Arc::new(grid);
    let solver = SolverConfig::new(params, Potential::prototype(), epsilon, grid.clone()).map_err(abort)?;
    let init = Field::new(grid.clone(), grid.default_init()).map_err(abort)?;
    let trace = solve_allen_cahn_traced(&solver, &init, 0).map_err(abort)?;
    Ok(CircleSolve { epsilon, solver, field: trace.field, iterations: trace.iterations })
}

/// Dyadic radii 2^{−j} strictly inside (𝐤ε, 1).
fn dyadic_ladder(lower: f64) -> Vec<f64> {
    (1..).map(dyadic).take_while(|&r| r > lower).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TubeRow {
    pub epsilon: f64,
    pub tau: f64,
    pub points: usize,
    pub r: f64,
    pub volume: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TubularReport {
    pub rows: Vec<TubeRow>,
    /// (ε, τ, empirical c = max volume/r, max/min − 1)
    pub constants: Vec<(f64, f64, f64, f64)>,
}

impl Report for TubularReport {
    fn title(&self) -> &'static str {
        "tubular-volume"
    }

    fn summary(&self) -> Vec<String> {
        self.constants
            .iter()
            .map(|(e, t, c, v)| format!("eps = {e}, tau = {t}: c = {c:.4}, variation = {:.1}%", 100.0 * v))
            .collect()
    }

    fn checks(&self) -> Vec<Check> {
        let mut v = Vec::new();
        for &(e, t, _, var) in &self.constants {
            v.push(Check::new(
                format!("volume/r stable (eps {e}, tau {t})"),
                var < 0.5,
                format!("variation {:.1}% < 50%", 100.0 * var),
            ));
        }
        let cap = ball_volume(2) * 4.0;
        let worst = self.rows.iter().map(|r| r.volume).fold(0.0, f64::max);
        v.push(Check::new("volume below |B_2|", worst <= cap, format!("{worst:.4} <= {cap:.4}")));
        let mut eps: Vec<f64> = self.constants.iter().map(|c| c.0).collect();
        eps.dedup();
        for e in eps {
            let mut by_tau: Vec<(f64, f64)> = self.constants.iter().filter(|c| c.0 == e).map(|c| (c.1, c.2)).collect();
            if by_tau.len() < 2 {
                continue;
            }
            by_tau.sort_by(|a, b| a.0.total_cmp(&b.0));
            let ok = by_tau.windows(2).all(|w| w[0].1 >= w[1].1);
            let detail: Vec<String> = by_tau.iter().map(|(t, c)| format!("c({t}) = {c:.4}")).collect();
            v.push(Check::new(format!("c decreases in tau (eps {e})"), ok, detail.join(", ")));
        }
        v
    }

    fn tables(&self) -> Vec<(String, String)> {
        let mut csv = String::from("epsilon,tau,points,r,volume,volume_over_r\n");
        for r in &self.rows {
            let _ = writeln!(csv, "{},{},{},{},{},{}", sci(r.epsilon), sci(r.tau), r.points, sci(r.r), sci(r.volume), sci(r.ratio));
        }
        vec![("tubular_volume.csv".into(), csv)]
    }
}

/// Tube volume of the transition set in B₁ along the dyadic ladder, for
/// every τ of the sweep.
pub fn run_tubular_volume(cfg: &ExperimentConfig) -> Result<TubularReport> {
    cfg.validate()?;
    let mut rows = Vec::new();
    let mut constants = Vec::new();
    for &eps in &cfg.epsilons {
        let ladder = dyadic_ladder(cfg.strat.min_scale(eps));
        if ladder.is_empty() {
            return Err(Error::Scale { radius: 0.5, minimum: cfg.strat.min_scale(eps) });
        }
        let sol = circle_solve(cfg, eps)?;
        for &tau in &cfg.taus {
            let ts = TransitionSet::from_field(&sol.field, tau);
            let ratios: Vec<f64> = ladder
                .iter()
                .map(|&r| {
                    let volume = tubular_volume(&ts.points, r);
                    rows.push(TubeRow { epsilon: eps, tau, points: ts.len(), r, volume, ratio: volume / r });
                    volume / r
                })
                .collect();
            let hi = ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
            let variation = if lo > 0.0 { hi / lo - 1.0 } else if hi == 0.0 { 0.0 } else { f64::INFINITY };
            constants.push((eps, tau, hi, variation));
        }
    }
    Ok(TubularReport { rows, constants })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoronaRow {
    pub epsilon: f64,
    pub r: f64,
    pub count: usize,
    pub before_subcover: usize,
    /// count·r^{n−1}
    pub scaled: f64,
    pub packing_sum: f64,
    pub covered_fraction: f64,
    pub passed: bool,
    pub failing: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoronaReport {
    pub rows: Vec<CoronaRow>,
    pub covers: Vec<BallCover>,
    /// (ε, density ceiling M, transition points, calibration)
    pub calibrations: Vec<(f64, f64, usize, Option<Calibration>)>,
}

impl Report for CoronaReport {
    fn title(&self) -> &'static str {
        "corona-run"
    }

    fn summary(&self) -> Vec<String> {
        let mut v = Vec::new();
        for (e, m, pts, cal) in &self.calibrations {
            match cal {
                Some(c) => v.push(format!(
                    "eps = {e}: M = {m:.6}, |V| = {pts}, calibrated eta = {}, eta' = {} after {} attempts",
                    c.config.eta, c.config.eta_prime, c.attempts
                )),
                None => v.push(format!("eps = {e}: M = {m:.6}, empty transition set")),
            }
        }
        for r in &self.rows {
            v.push(format!(
                "eps = {}, r = {}: {} balls ({} before subcover), count*r^(n-1) = {:.4}",
                r.epsilon, r.r, r.count, r.before_subcover, r.scaled
            ));
        }
        v
    }

    fn checks(&self) -> Vec<Check> {
        let mut v = Vec::new();
        for r in &self.rows {
            let detail = if r.failing.is_empty() {
                format!("covered fraction {}", r.covered_fraction)
            } else {
                format!("failing: {}", r.failing.join(", "))
            };
            v.push(Check::new(format!("certificates (eps {}, r {})", r.epsilon, r.r), r.passed, detail));
        }
        let mut eps: Vec<f64> = self.rows.iter().map(|r| r.epsilon).collect();
        eps.dedup();
        for e in eps {
            let scaled: Vec<f64> = self.rows.iter().filter(|r| r.epsilon == e && r.count > 0).map(|r| r.scaled).collect();
            if scaled.len() < 2 {
                continue;
            }
            let hi = scaled.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lo = scaled.iter().cloned().fold(f64::INFINITY, f64::min);
            v.push(Check::new(format!("count*r^(n-1) within factor 2 (eps {e})"), hi <= 2.0 * lo, format!("{lo:.4} .. {hi:.4}")));
        }
        v
    }

    fn tables(&self) -> Vec<(String, String)> {
        let mut csv = String::from("epsilon,r,count,before_subcover,count_scaled,packing_sum,covered_fraction,passed\n");
        for r in &self.rows {
            let _ = writeln!(
                csv,
                "{},{},{},{},{},{},{},{}",
                sci(r.epsilon),
                sci(r.r),
                r.count,
                r.before_subcover,
                sci(r.scaled),
                sci(r.packing_sum),
                sci(r.covered_fraction),
                r.passed
            );
        }
        let mut out = vec![("corona.csv".to_string(), csv)];
        for (row, cover) in self.rows.iter().zip(&self.covers) {
            let mut body = Vec::new();
            if cover.write_csv(&mut body).is_ok() {
                out.push((format!("cover_eps{}_r{}.csv", row.epsilon, row.r), String::from_utf8_lossy(&body).into_owned()));
            }
            if let Ok(json) = cover.certificates_json() {
                out.push((format!("certificates_eps{}_r{}.json", row.epsilon, row.r), json + "\n"));
            }
        }
        out
    }
}

fn failing_certificates(rc: &crate::strat::RefinedCover) -> Vec<String> {
    let c = &rc.cover.certificates;
    let mut f = Vec::new();
    if c.covered_fraction != 1.0 {
        f.push(format!("covering ({})", c.covered_fraction));
    }
    if c.energy_drop_failures > 0 {
        f.push(format!("energy drop ({} balls)", c.energy_drop_failures));
    }
    if !c.trees_passed {
        f.push("tree certificates".into());
    }
    for g in &rc.generations {
        if !g.covered || !g.energy_drop_ok || g.radius_control == Some(false) {
            f.push(format!("generation {}", g.generation));
        }
    }
    if f.is_empty() && !rc.passed() {
        f.push("refinement".into());
    }
    f
}

/// Calibrates (η, η′) at the smallest radius, then covers the transition
/// set in B₁ at every radius of the ladder.
pub fn run_corona(cfg: &ExperimentConfig) -> Result<CoronaReport> {
    cfg.validate()?;
    let mut radii = cfg.radii.clone();
    radii.sort_by(|a, b| b.total_cmp(a));
    radii.dedup();
    let mut rows = Vec::new();
    let mut covers = Vec::new();
    let mut calibrations = Vec::new();
    for &eps in &cfg.epsilons {
        for &r in &radii {
            cfg.strat.check_scale(r, eps)?;
        }
        let sol = circle_solve(cfg, eps)?;
        let h = sol.solver.grid.h;
        let reach = 4.0f64;
        let ext = extend_with_margin(&sol.field, &sol.solver, &default_z_levels(h, 2.0), (reach - cfg.half_width).max(0.0))?;
        let tables = EnergyTables::new(&ext, EnergyContext::from(&sol.solver))?;
        let src = FieldDensity::new(&tables);
        let m = density_ceiling(&src)?;
        let ts = TransitionSet::from_field(&sol.field, cfg.strat.tau);
        let mut sc = cfg.strat.clone();
        sc.m = m;
        let cal = match radii.last() {
            Some(&r_min) if !ts.is_empty() => {
                let c = calibrate(&ts, &src, &sc, r_min)?;
                sc = c.config.clone();
                Some(c)
            }
            _ => None,
        };
        calibrations.push((eps, m, ts.len(), cal));
        for &r in &radii {
            let rc = cover_at_radius(&ts, &src, &sc, r)?;
            let count = rc.cover.len();
            rows.push(CoronaRow {
                epsilon: eps,
                r,
                count,
                before_subcover: rc.before_subcover,
                scaled: count as f64 * r,
                packing_sum: rc.cover.packing_sum(),
                covered_fraction: rc.cover.certificates.covered_fraction,
                passed: rc.passed(),
                failing: failing_certificates(&rc),
            });
            covers.push(rc.cover);
        }
    }
    Ok(CoronaReport { rows, covers, calibrations })
}
