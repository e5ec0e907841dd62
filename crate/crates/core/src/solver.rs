//! Gradient-flow solver for (−Δ)^s u + ε^{−2s} W′(u) = 0 in the box with
//! u = g outside.

use std::sync::{Arc, OnceLock};

use crate::error::{Error, Result};
use crate::fraclap::{FracOperator, DEFAULT_APPLY_TOL};
use crate::grid::{Field, Grid};
use crate::math::{FractionalParams, Potential};

/// Everything the solver and the downstream energy code need.
pub struct SolverConfig {
    pub params: FractionalParams,
    pub pot: Potential,
    pub epsilon: f64,
    pub grid: Arc<Grid>,
    pub dt: f64,
    pub tol: f64,
    pub max_iter: usize,
    /// Stabilization multiple of ε^{−2s} in the implicit denominator.
    pub stabilization: f64,
    /// Threshold for the own-cell error indicator of the direct apply.
    pub apply_tol: f64,
    op: OnceLock<Arc<FracOperator>>,
}

impl Clone for SolverConfig {
    fn clone(&self) -> Self {
        let op = OnceLock::new();
        if let Some(o) = self.op.get() {
            let _ = op.set(o.clone());
        }
        SolverConfig {
            params: self.params,
            pot: self.pot.clone(),
            epsilon: self.epsilon,
            grid: self.grid.clone(),
            dt: self.dt,
            tol: self.tol,
            max_iter: self.max_iter,
            stabilization: self.stabilization,
            apply_tol: self.apply_tol,
            op,
        }
    }
}

impl std::fmt::Debug for SolverConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SolverConfig")
            .field("params", &self.params)
            .field("epsilon", &self.epsilon)
            .field("grid", &self.grid)
            .field("dt", &self.dt)
            .field("tol", &self.tol)
            .field("max_iter", &self.max_iter)
            .finish()
    }
}

impl SolverConfig {
    pub fn new(params: FractionalParams, pot: Potential, epsilon: f64, grid: Arc<Grid>) -> Result<Self> {
        let cfg = SolverConfig {
            params,
            pot,
            epsilon,
            grid,
            dt: 1e6,
            tol: 1e-8,
            max_iter: 100_000,
            stabilization: 2.0,
            apply_tol: DEFAULT_APPLY_TOL,
            op: OnceLock::new(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) {
            return Err(Error::Parameter("dt must be positive".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::Parameter("tol must be positive".into()));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(Error::Parameter(format!("epsilon {} not in (0,1)", self.epsilon)));
        }
        if self.grid.h > self.epsilon / 2.0 + 1e-12 {
            return Err(Error::Parameter(format!(
                "spacing {} does not resolve the layer (need h <= epsilon/2 = {})",
                self.grid.h,
                self.epsilon / 2.0
            )));
        }
        if self.params.n != self.grid.n {
            return Err(Error::Parameter("params and grid dimension differ".into()));
        }
        Ok(())
    }

    pub fn with_tol(mut self, tol: f64) -> Result<Self> {
        self.tol = tol;
        self.validate()?;
        Ok(self)
    }

    pub fn with_dt(mut self, dt: f64) -> Result<Self> {
        self.dt = dt;
        self.validate()?;
        Ok(self)
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn with_potential(mut self, pot: Potential) -> Self {
        self.pot = pot;
        self
    }

    /// ε^{−2s}.
    pub fn eps_scale(&self) -> f64 {
        self.epsilon.powf(-2.0 * self.params.s)
    }

    /// Λ = max(1, sup|g|).
    pub fn lambda(&self) -> f64 {
        self.grid.lambda()
    }

    /// Discrete operator, built once per configuration.
    pub fn operator(&self) -> Result<Arc<FracOperator>> {
        if let Some(op) = self.op.get() {
            return Ok(op.clone());
        }
        let op = Arc::new(FracOperator::new(&self.params, self.grid.clone())?);
        let _ = self.op.set(op.clone());
        Ok(self.op.get().cloned().unwrap_or(op))
    }
}

/// Result of a traced solve.
#[derive(Debug, Clone)]
pub struct SolveTrace {
    pub field: Field,
    pub iterations: usize,
    pub residual: f64,
    /// Iterates recorded every `snapshot_every` iterations (first is init).
    pub snapshots: Vec<Field>,
    pub final_dt: f64,
}

/// max over free nodes of |(−Δ)^s u + ε^{−2s} W′(u)|, with the residual vector.
pub fn residual(cfg: &SolverConfig, op: &FracOperator, u: &[f64]) -> (f64, Vec<f64>) {
    let lu = op.apply(u);
    let k = cfg.eps_scale();
    let mut worst = 0.0f64;
    let r: Vec<f64> = lu
        .iter()
        .zip(u)
        .enumerate()
        .map(|(i, (l, &v))| {
            if cfg.grid.is_pinned(i) {
                0.0
            } else {
                let r = l + k * cfg.pot.dw(v);
                worst = worst.max(r.abs());
                r
            }
        })
        .collect();
    (worst, r)
}

/// Solves the equation and returns the converged field.
pub fn solve_allen_cahn(cfg: &SolverConfig, init: &Field) -> Result<Field> {
    solve_allen_cahn_traced(cfg, init, 0).map(|t| t.field)
}

/// Semi-implicit gradient flow
/// u ← u − dt·R(u)/(1 + dt·(D + κε^{−2s})), clamped to [−Λ, Λ],
/// with D the operator diagonal. dt is halved whenever the residual grows
/// and allowed to recover towards its initial value after a run of
/// decreases.
pub fn solve_allen_cahn_traced(cfg: &SolverConfig, init: &Field, snapshot_every: usize) -> Result<SolveTrace> {
    cfg.validate()?;
    if init.grid.len() != cfg.grid.len() {
        return Err(Error::Parameter("initial field lives on a different grid".into()));
    }
    let lam = cfg.lambda();
    if init.lambda0 > lam + 1e-12 {
        return Err(Error::Parameter(format!(
            "initial data exceeds max(1, sup|g|) = {lam}"
        )));
    }
    let op = cfg.operator()?;
    let grid = &cfg.grid;
    let mut u = init.values.clone();
    for (i, v) in u.iter_mut().enumerate() {
        if let Some(p) = grid.pinned_value(i) {
            *v = p;
        }
    }
    let diag: Vec<f64> = (0..u.len()).map(|i| op.diagonal(i)).collect();
    let stab = cfg.stabilization * cfg.eps_scale();
    let (mut res, mut r) = residual(cfg, &op, &u);
    let mut dt = cfg.dt;
    let mut snapshots = Vec::new();
    if snapshot_every > 0 {
        snapshots.push(Field::new(grid.clone(), u.clone())?);
    }
    let mut streak = 0usize;
    let mut it = 0usize;
    while res > cfg.tol {
        if it >= cfg.max_iter {
            return Err(Error::NonConvergence { iterations: it, residual: res, tol: cfg.tol });
        }
        for i in 0..u.len() {
            if grid.is_pinned(i) {
                continue;
            }
            let step = dt * r[i] / (1.0 + dt * (diag[i] + stab));
            u[i] = (u[i] - step).clamp(-lam, lam);
        }
        it += 1;
        let (new_res, new_r) = residual(cfg, &op, &u);
        if !new_res.is_finite() {
            return Err(Error::NonConvergence { iterations: it, residual: new_res, tol: cfg.tol });
        }
        if new_res > res {
            dt *= 0.5;
            streak = 0;
        } else {
            streak += 1;
            if streak >= 20 && dt < cfg.dt {
                dt = (dt * 2.0).min(cfg.dt);
                streak = 0;
            }
        }
        res = new_res;
        r = new_r;
        if snapshot_every > 0 && it.is_multiple_of(snapshot_every) {
            snapshots.push(Field::new(grid.clone(), u.clone())?);
        }
    }
    Ok(SolveTrace { field: Field::new(grid.clone(), u)?, iterations: it, residual: res, snapshots, final_dt: dt })
}
