//! Weighted energies on half-balls, the monotone density Θ and the
//! monotonicity identity audit.
//!
//! Cells are lattice cells in x times the slabs between consecutive
//! z-levels (the first slab starts at z = 0). A cell belongs to a
//! half-ball when its centre does. The weight z^a is integrated exactly
//! over each slab, and the first slab uses the profile u + c·z^{2s},
//! whose weighted z-energy 2s·c²·z₀^{2s} is exact for that profile.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::extension::ExtensionField;
use crate::math::Potential;
use crate::solver::SolverConfig;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HalfBall<'a> {
    pub center: &'a [f64],
    pub radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyBreakdown {
    pub dirichlet: f64,
    pub potential: f64,
    pub total: f64,
    pub radius: f64,
    pub center: Vec<f64>,
}

/// Constants the energy needs from a solver configuration.
#[derive(Debug, Clone)]
pub struct EnergyContext {
    pub n: usize,
    pub s: f64,
    pub d_s: f64,
    pub epsilon: f64,
    pub pot: Potential,
}

impl From<&SolverConfig> for EnergyContext {
    fn from(cfg: &SolverConfig) -> Self {
        EnergyContext { n: cfg.params.n, s: cfg.params.s, d_s: cfg.params.d_s, epsilon: cfg.epsilon, pot: cfg.pot.clone() }
    }
}

/// Per-cell energies of an extension field, with prefix sums for fast
/// half-ball queries centred at lattice nodes.
pub struct EnergyTables<'a> {
    pub u: &'a ExtensionField,
    ctx: EnergyContext,
    /// slab centres and the slab bounds
    zc: Vec<f64>,
    zlo: Vec<f64>,
    zhi: Vec<f64>,
    /// Dirichlet energy per (slab, node), already scaled by d_s/2·h^n
    dir: Vec<Vec<f64>>,
    /// ε^{−2s}·h^n·W(ũ) per node
    pot: Vec<f64>,
    /// raw (unweighted) W(ũ)·h^n per node, for the identity's inner integral
    wraw: Vec<f64>,
    /// per slab: z-gradient and x-gradient components per node
    gz: Vec<Vec<f64>>,
    gx: Vec<Vec<[f64; 2]>>,
    pre_dir: Vec<Vec<f64>>,
    pre_pot: Vec<f64>,
    pre_w: Vec<f64>,
}

fn prefix_rows(lat: &crate::extension::Lattice, v: &[f64]) -> Vec<f64> {
    let (rows, cols) = if lat.n == 2 { (lat.counts[0], lat.counts[1]) } else { (1, lat.counts[0]) };
    let mut out = vec![0.0; rows * (cols + 1)];
    for r in 0..rows {
        let mut acc = 0.0;
        for c in 0..cols {
            acc += v[r * cols + c];
            out[r * (cols + 1) + c + 1] = acc;
        }
    }
    out
}

impl<'a> EnergyTables<'a> {
    pub fn new(u: &'a ExtensionField, ctx: EnergyContext) -> Result<Self> {
        let lat = &u.lattice;
        if lat.n != ctx.n {
            return Err(Error::Parameter("extension and config dimensions differ".into()));
        }
        let (n, h, a, s) = (lat.n, lat.h, u.a, u.s);
        let cell = h.powi(n as i32);
        let nl = u.levels.len();
        let mut zlo = Vec::with_capacity(nl);
        let mut zhi = Vec::with_capacity(nl);
        let mut zc = Vec::with_capacity(nl);
        for k in 0..nl {
            let lo = if k == 0 { 0.0 } else { u.levels[k - 1] };
            let hi = u.levels[k];
            zlo.push(lo);
            zhi.push(hi);
            zc.push(0.5 * (lo + hi));
        }
        let grad_x = |vals: &[f64], i: usize| -> [f64; 2] {
            let mi = lat.multi(i);
            let mut g = [0.0; 2];
            for d in 0..n {
                let c = lat.counts[d];
                let mut up = mi;
                let mut dn = mi;
                let mut span = 2.0 * h;
                if mi[d] + 1 < c {
                    up[d] += 1;
                } else {
                    span = h;
                }
                if mi[d] > 0 {
                    dn[d] -= 1;
                } else {
                    span = if span == h { 0.0 } else { h };
                }
                g[d] = if span > 0.0 { (vals[lat.flat(up)] - vals[lat.flat(dn)]) / span } else { 0.0 };
            }
            g
        };
        let half_ds = 0.5 * ctx.d_s;
        let mut dir = Vec::with_capacity(nl);
        let mut gz = Vec::with_capacity(nl);
        let mut gx = Vec::with_capacity(nl);
        for k in 0..nl {
            let below: &[f64] = if k == 0 { &u.base } else { &u.values[k - 1] };
            let above: &[f64] = &u.values[k];
            let wk = (zhi[k].powf(1.0 + a) - zlo[k].powf(1.0 + a)) / (1.0 + a);
            let mut dk = Vec::with_capacity(lat.len());
            let mut gzk = Vec::with_capacity(lat.len());
            let mut gxk = Vec::with_capacity(lat.len());
            for i in 0..lat.len() {
                let g0 = grad_x(below, i);
                let g1 = grad_x(above, i);
                let gxi = [0.5 * (g0[0] + g1[0]), 0.5 * (g0[1] + g1[1])];
                let gx2 = gxi[0] * gxi[0] + gxi[1] * gxi[1];
                let (zpart, gzi) = if k == 0 {
                    // U ≈ u + c z^{2s} on the first slab
                    let c = (above[i] - below[i]) / zhi[0].powf(2.0 * s);
                    (2.0 * s * c * c * zhi[0].powf(2.0 * s), c)
                } else {
                    let d = (above[i] - below[i]) / (zhi[k] - zlo[k]);
                    (wk * d * d, d)
                };
                dk.push(half_ds * cell * (wk * gx2 + zpart));
                gzk.push(gzi);
                gxk.push(gxi);
            }
            dir.push(dk);
            gz.push(gzk);
            gx.push(gxk);
        }
        let k2s = ctx.epsilon.powf(-2.0 * ctx.s);
        let wraw: Vec<f64> = u.base.iter().map(|&v| cell * ctx.pot.w(v)).collect();
        let pot: Vec<f64> = wraw.iter().map(|w| k2s * w).collect();
        let pre_dir = dir.iter().map(|d| prefix_rows(lat, d)).collect();
        let pre_pot = prefix_rows(lat, &pot);
        let pre_w = prefix_rows(lat, &wraw);
        Ok(EnergyTables { u, ctx, zc, zlo, zhi, dir, pot, wraw, gz, gx, pre_dir, pre_pot, pre_w })
    }

    pub fn context(&self) -> &EnergyContext {
        &self.ctx
    }

    fn check(&self, x0: &[f64], r: f64) -> Result<()> {
        let lat = &self.u.lattice;
        if !(r > 0.0) {
            return Err(Error::Domain(format!("radius {r} must be positive")));
        }
        for d in 0..lat.n {
            let (lo, hi) = lat.extent(d);
            if x0[d] - r < lo - 1e-9 || x0[d] + r > hi + 1e-9 {
                return Err(Error::Domain(format!(
                    "half-ball of radius {r} at {x0:?} leaves the sampled region [{lo}, {hi}]"
                )));
            }
        }
        let ztop = *self.u.levels.last().expect("levels");
        if r > ztop + 1e-12 {
            return Err(Error::Domain(format!("radius {r} above the highest z-level {ztop}")));
        }
        Ok(())
    }

    /// Energy by direct cell enumeration (any centre).
    pub fn energy_brute(&self, x0: &[f64], r: f64) -> Result<EnergyBreakdown> {
        self.check(x0, r)?;
        let lat = &self.u.lattice;
        // same tie slack as the prefix sums, so cells on the sphere count
        let r2 = r * r + 1e-9 * lat.h * lat.h;
        let mut dirichlet = 0.0;
        let mut potential = 0.0;
        for i in 0..lat.len() {
            let x = lat.coord(i);
            let dx2: f64 = x.iter().zip(x0).map(|(a, b)| (a - b) * (a - b)).sum();
            if dx2 > r2 {
                continue;
            }
            potential += self.pot[i];
            for k in 0..self.zc.len() {
                if dx2 + self.zc[k] * self.zc[k] > r2 {
                    break;
                }
                dirichlet += self.dir[k][i];
            }
        }
        Ok(EnergyBreakdown { dirichlet, potential, total: dirichlet + potential, radius: r, center: x0.to_vec() })
    }

    fn disk_sum(&self, pre: &[f64], mi: [usize; 2], rho2: f64) -> f64 {
        let lat = &self.u.lattice;
        let h2 = lat.h * lat.h;
        let lim = rho2 / h2;
        if lim < 0.0 {
            return 0.0;
        }
        if lat.n == 1 {
            let b = (lim + 1e-9).sqrt().floor() as i64;
            let lo = (mi[0] as i64 - b).max(0) as usize;
            let hi = ((mi[0] as i64 + b) as usize).min(lat.counts[0] - 1);
            return pre[hi + 1] - pre[lo];
        }
        let cols = lat.counts[1];
        let amax = (lim + 1e-9).sqrt().floor() as i64;
        let mut acc = 0.0;
        for a in -amax..=amax {
            let row = mi[0] as i64 + a;
            if row < 0 || row as usize >= lat.counts[0] {
                continue;
            }
            let rem = lim - (a * a) as f64;
            let b = (rem + 1e-9).sqrt().floor() as i64;
            let lo = (mi[1] as i64 - b).max(0) as usize;
            let hi = ((mi[1] as i64 + b) as usize).min(cols - 1);
            let base = row as usize * (cols + 1);
            acc += pre[base + hi + 1] - pre[base + lo];
        }
        acc
    }

    /// Energy on the half-ball centred at lattice node `mi`.
    pub fn energy_at_node(&self, mi: [usize; 2], r: f64) -> Result<EnergyBreakdown> {
        let lat = &self.u.lattice;
        let x0 = lat.coord(lat.flat(mi));
        self.check(&x0, r)?;
        let r2 = r * r;
        let mut dirichlet = 0.0;
        for k in 0..self.zc.len() {
            let rho2 = r2 - self.zc[k] * self.zc[k];
            if rho2 < 0.0 {
                break;
            }
            dirichlet += self.disk_sum(&self.pre_dir[k], mi, rho2);
        }
        let potential = self.disk_sum(&self.pre_pot, mi, r2);
        Ok(EnergyBreakdown { dirichlet, potential, total: dirichlet + potential, radius: r, center: x0 })
    }

    /// Θ(r, x0) = r^{2s−n}·(energy on the half-ball); node centres use the
    /// prefix sums, other centres the direct enumeration.
    pub fn theta(&self, r: f64, x0: &[f64]) -> Result<f64> {
        let h = self.u.lattice.h;
        if r <= 2.0 * h {
            return Err(Error::Domain(format!("radius {r} not resolvable (need r > 2h = {})", 2.0 * h)));
        }
        let e = match self.node_of(x0) {
            Some(mi) => self.energy_at_node(mi, r)?,
            None => self.energy_brute(x0, r)?,
        };
        Ok(r.powf(2.0 * self.ctx.s - self.ctx.n as f64) * e.total)
    }

    /// Lattice node coinciding with x0, if any.
    pub fn node_of(&self, x0: &[f64]) -> Option<[usize; 2]> {
        let lat = &self.u.lattice;
        let mi = lat.nearest(x0)?;
        let c = lat.coord(lat.flat(mi));
        if c.iter().zip(x0).all(|(a, b)| (a - b).abs() <= 1e-9 * lat.h) {
            Some(mi)
        } else {
            None
        }
    }

    /// ∫_{B_t(x0)} W(u) by cell centres.
    pub fn potential_integral(&self, x0: &[f64], t: f64) -> f64 {
        match self.node_of(x0) {
            Some(mi) => self.disk_sum(&self.pre_w, mi, t * t),
            None => {
                let lat = &self.u.lattice;
                (0..lat.len())
                    .filter(|&i| crate::math::dist2(&lat.coord(i), x0) <= t * t)
                    .map(|i| self.wraw[i])
                    .sum()
            }
        }
    }

    /// d_s ∫_{annulus} z^a ((X−X₀)·∇U)²/|X−X₀|^{n+2−2s}.
    pub fn radial_term(&self, x0: &[f64], rho: f64, r: f64) -> f64 {
        let lat = &self.u.lattice;
        let (n, a, s) = (self.ctx.n as f64, self.u.a, self.ctx.s);
        let cell = lat.h.powi(lat.n as i32);
        let (rho2, r2) = (rho * rho, r * r);
        let mut acc = 0.0;
        for i in 0..lat.len() {
            let x = lat.coord(i);
            let dxv: Vec<f64> = x.iter().zip(x0).map(|(p, q)| p - q).collect();
            let dx2: f64 = dxv.iter().map(|v| v * v).sum();
            if dx2 > r2 {
                continue;
            }
            for k in 0..self.zc.len() {
                let zc = self.zc[k];
                let d2 = dx2 + zc * zc;
                if d2 > r2 {
                    break;
                }
                if d2 <= rho2 {
                    continue;
                }
                let g = self.gx[k][i];
                let xa: f64 = dxv.iter().zip(g.iter()).map(|(p, q)| p * q).sum();
                let denom = d2.powf((n + 2.0 - 2.0 * s) / 2.0);
                let integral = if k == 0 {
                    // ∫_0^{z0} z^a (A + B z^{2s})² with B = 2s·c
                    let z0 = self.zhi[0];
                    let b = 2.0 * s * self.gz[0][i];
                    let e1 = 1.0 + a;
                    xa * xa * z0.powf(e1) / e1
                        + 2.0 * xa * b * z0.powf(e1 + 2.0 * s) / (e1 + 2.0 * s)
                        + b * b * z0.powf(e1 + 4.0 * s) / (e1 + 4.0 * s)
                } else {
                    let wk = (self.zhi[k].powf(1.0 + a) - self.zlo[k].powf(1.0 + a)) / (1.0 + a);
                    let v = xa + zc * self.gz[k][i];
                    wk * v * v
                };
                acc += cell * integral / denom;
            }
        }
        self.ctx.d_s * acc
    }
}

/// Energy on a half-ball.
pub fn energy_eps(u: &ExtensionField, hb: HalfBall<'_>, cfg: &SolverConfig) -> Result<EnergyBreakdown> {
    EnergyTables::new(u, cfg.into())?.energy_brute(hb.center, hb.radius)
}

/// Θ(r, x0).
pub fn theta(u: &ExtensionField, r: f64, x0: &[f64], cfg: &SolverConfig) -> Result<f64> {
    EnergyTables::new(u, cfg.into())?.theta(r, x0)
}

/// Number of sub-radii used by the trapezoid rule of the potential term.
pub const TRAPEZOID_POINTS: usize = 65;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MonotonicityResidual {
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
}

impl EnergyTables<'_> {
    /// Monotonicity identity Θ(r) − Θ(ρ) = radial term + potential term.
    pub fn monotonicity_residual(&self, x0: &[f64], rho: f64, r: f64) -> Result<MonotonicityResidual> {
        let h = self.u.lattice.h;
        if !(2.0 * h < rho && rho < r) {
            return Err(Error::Domain(format!("need 2h < rho < r, got rho={rho}, r={r}, h={h}")));
        }
        let lhs = self.theta(r, x0)? - self.theta(rho, x0)?;
        let radial = self.radial_term(x0, rho, r);
        let (n, s) = (self.ctx.n as f64, self.ctx.s);
        let m = TRAPEZOID_POINTS;
        let dt = (r - rho) / (m - 1) as f64;
        let mut pot = 0.0;
        for j in 0..m {
            let t = rho + j as f64 * dt;
            let f = t.powf(-n + 2.0 * s - 1.0) * self.potential_integral(x0, t);
            pot += if j == 0 || j == m - 1 { 0.5 * f } else { f };
        }
        pot *= dt * 2.0 * s * self.ctx.epsilon.powf(-2.0 * s);
        let rhs = radial + pot;
        let residual = (lhs - rhs).abs() / (lhs.abs() + rhs.abs() + 1e-12);
        Ok(MonotonicityResidual { lhs, rhs, residual })
    }
}

/// Identity residual for a single pair of radii.
pub fn monotonicity_residual(u: &ExtensionField, x0: &[f64], rho: f64, r: f64, cfg: &SolverConfig) -> Result<MonotonicityResidual> {
    EnergyTables::new(u, cfg.into())?.monotonicity_residual(x0, rho, r)
}

/// Θ along a radius ladder at one centre, with the identity terms per
/// consecutive pair.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityCurve {
    pub center: Vec<f64>,
    pub radii: Vec<f64>,
    pub theta: Vec<f64>,
    /// entry j describes the interval (r_{j−1}, r_j); entry 0 is zero.
    pub intervals: Vec<MonotonicityResidual>,
}

impl DensityCurve {
    /// Largest drop Θ(r_{j−1}) − Θ(r_j) along the ladder (≤ 0 when monotone).
    pub fn worst_dip(&self) -> f64 {
        self.theta.windows(2).map(|w| w[0] - w[1]).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "radius,theta,lhs,rhs,residual")?;
        for (j, r) in self.radii.iter().enumerate() {
            let it = self.intervals[j];
            writeln!(w, "{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}", r, self.theta[j], it.lhs, it.rhs, it.residual)?;
        }
        Ok(())
    }
}

impl EnergyTables<'_> {
    pub fn density_curve(&self, x0: &[f64], radii: &[f64]) -> Result<DensityCurve> {
        if radii.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Domain("radii must be strictly ascending".into()));
        }
        let mut theta = Vec::with_capacity(radii.len());
        let mut intervals = Vec::with_capacity(radii.len());
        for (j, &r) in radii.iter().enumerate() {
            theta.push(self.theta(r, x0)?);
            intervals.push(if j == 0 {
                MonotonicityResidual { lhs: 0.0, rhs: 0.0, residual: 0.0 }
            } else {
                self.monotonicity_residual(x0, radii[j - 1], r)?
            });
        }
        Ok(DensityCurve { center: x0.to_vec(), radii: radii.to_vec(), theta, intervals })
    }
}

pub fn density_curve(u: &ExtensionField, x0: &[f64], radii: &[f64], cfg: &SolverConfig) -> Result<DensityCurve> {
    EnergyTables::new(u, cfg.into())?.density_curve(x0, radii)
}

/// Outcome of the uniform-bound audit over several centres.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LambdaAudit {
    pub max_theta: f64,
    pub big_radius: f64,
    pub big_energy: f64,
    pub bound: f64,
    pub holds: bool,
}

impl EnergyTables<'_> {
    /// max Θ(r, y) over the batch against r_max^{2s−n}·E(B_R(0)), where
    /// B_R(0) contains every B_{r_max}(y).
    pub fn lambda_audit(&self, centers: &[Vec<f64>], radii: &[f64]) -> Result<LambdaAudit> {
        let rmax = radii.iter().cloned().fold(0.0, f64::max);
        let mut max_theta = 0.0f64;
        let mut reach = 0.0f64;
        for c in centers {
            reach = reach.max(c.iter().map(|v| v * v).sum::<f64>().sqrt());
            for &r in radii {
                max_theta = max_theta.max(self.theta(r, c)?);
            }
        }
        let big_radius = reach + rmax;
        let zero = vec![0.0; self.ctx.n];
        let big_energy = self.energy_brute(&zero, big_radius)?.total;
        let bound = rmax.powf(2.0 * self.ctx.s - self.ctx.n as f64) * big_energy;
        Ok(LambdaAudit { max_theta, big_radius, big_energy, bound, holds: max_theta <= bound * (1.0 + 1e-12) })
    }

    /// Total of the potential part over the node set (diagnostic).
    pub fn total_potential(&self) -> f64 {
        self.pot.iter().sum()
    }
}

/// tol_mono = 5·h/ε.
pub fn tol_mono(h: f64, epsilon: f64) -> f64 {
    5.0 * h / epsilon
}
