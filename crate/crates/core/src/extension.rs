//! Convolution extension U(x, z) = (P_z * ũ)(x) to the upper half-space,
//! where ũ is u in the box and g outside, and the Gaussian calibration of
//! the Dirichlet-to-Neumann constant d_s.

use std::f64::consts::PI;

use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::fft::LatticeConv;
use crate::grid::Field;
use crate::math::{sphere_area, FractionalParams};
use crate::quad::{gl_composite, gl_on};
use crate::solver::SolverConfig;

/// Default geometric z-levels: z₀ = h/4, ratio 1.3, at least 25 levels
/// and as many more as needed to reach `z_required`.
pub fn default_z_levels(h: f64, z_required: f64) -> Vec<f64> {
    let mut z = vec![h / 4.0];
    while z.len() < 25 || *z.last().expect("nonempty") < z_required {
        let next = z.last().expect("nonempty") * 1.3;
        z.push(next);
    }
    z
}

/// (−Δ)^s of exp(−|x|²/(2w²)) at the origin, from the Fourier side.
pub fn gaussian_frac_laplacian_at_zero(n: usize, s: f64, width: f64) -> f64 {
    let nf = n as f64;
    let w2 = width * width;
    let radial = 0.5 * (2.0 / w2).powf((2.0 * s + nf) / 2.0) * gamma((2.0 * s + nf) / 2.0);
    (2.0 * PI).powf(-nf) * (2.0 * PI * w2).powf(nf / 2.0) * sphere_area(n) * radial
}

/// z^a ∂_z U(0, z) for the Gaussian of the given width; the kernel
/// derivative is moved under the integral and paired with u(y) − u(0).
pub fn gaussian_weighted_normal_derivative(p: &FractionalParams, width: f64, z: f64) -> f64 {
    let (n, s) = (p.n as f64, p.s);
    let beta = (n + 2.0 * s) / 2.0;
    let alpha = z * z / (2.0 * width * width);
    let f = move |t: f64| -> f64 {
        let q = 1.0 + t * t;
        let k = 2.0 * s * q.powf(-beta) - (n + 2.0 * s) * q.powf(-beta - 1.0);
        k * t.powf(n - 1.0) * (-alpha * t * t).exp_m1()
    };
    let big_t = 1.0 / alpha.sqrt();
    let tol = 1e-15;
    let mut total = quadrature::integrate(f, 0.0, 1.0, tol).integral;
    if big_t > 1.0 {
        let lt = big_t.ln();
        total += quadrature::integrate(|v: f64| f(v.exp()) * v.exp(), 0.0, lt, tol).integral;
    }
    let t0 = big_t.max(1.0);
    let inv = 1.0 / (2.0 * s);
    total += quadrature::integrate(
        |v: f64| {
            if v <= 0.0 {
                return 0.0;
            }
            let t = t0 * v.powf(-inv);
            f(t) * t0 * inv * v.powf(-inv - 1.0)
        },
        0.0,
        1.0,
        tol,
    )
    .integral;
    p.sigma_ns * sphere_area(p.n) * z.powf(-2.0 * s) * total
}

/// d_s from the Gaussian of unit width on levels 1e−3·1.3^k.
pub fn calibrate_ds(params: &FractionalParams) -> Result<f64> {
    let levels: Vec<f64> = (0..6).map(|k| 1e-3 * 1.3f64.powi(k)).collect();
    calibrate_ds_with(params, 1.0, &levels)
}

/// d_s = (−Δ)^s u(0) / (−lim z^a ∂_z U(0, z)); the limit is a Richardson
/// fit of {1, z^{2−2s}, z²} through the three smallest levels (two
/// levels: the first two basis functions).
pub fn calibrate_ds_with(params: &FractionalParams, width: f64, z_levels: &[f64]) -> Result<f64> {
    let mut z: Vec<f64> = z_levels.to_vec();
    z.sort_by(|a, b| a.partial_cmp(b).expect("finite levels"));
    z.dedup();
    if z.len() < 2 || z[0] <= 0.0 {
        return Err(Error::Calibration(format!(
            "extrapolation needs at least two distinct positive z-levels, got {}",
            z.len()
        )));
    }
    let k = z.len().min(3);
    let s = params.s;
    let basis = |zz: f64| -> Vec<f64> {
        let all = [1.0, zz.powf(2.0 - 2.0 * s), zz * zz];
        all[..k].to_vec()
    };
    let mut a = nalgebra::DMatrix::<f64>::zeros(k, k);
    let mut b = nalgebra::DVector::<f64>::zeros(k);
    for (row, &zz) in z[..k].iter().enumerate() {
        for (col, v) in basis(zz).into_iter().enumerate() {
            a[(row, col)] = v;
        }
        b[row] = gaussian_weighted_normal_derivative(params, width, zz);
    }
    let coef = a
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::Calibration("singular extrapolation system".into()))?;
    let limit = coef[0];
    let lap = gaussian_frac_laplacian_at_zero(params.n, s, width);
    let ds = lap / (-limit);
    if !ds.is_finite() || ds <= 0.0 {
        return Err(Error::Calibration(format!("extrapolated limit {limit} gives d_s = {ds}")));
    }
    Ok(ds)
}

/// Tensor lattice with the solver spacing, aligned with the grid nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Lattice {
    pub n: usize,
    pub h: f64,
    pub counts: [usize; 2],
    pub origin: [f64; 2],
}

impl Lattice {
    pub fn len(&self) -> usize {
        self.counts[0] * if self.n == 2 { self.counts[1] } else { 1 }
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
    pub fn multi(&self, idx: usize) -> [usize; 2] {
        if self.n == 1 {
            [idx, 0]
        } else {
            [idx / self.counts[1], idx % self.counts[1]]
        }
    }
    pub fn flat(&self, mi: [usize; 2]) -> usize {
        if self.n == 1 {
            mi[0]
        } else {
            mi[0] * self.counts[1] + mi[1]
        }
    }
    pub fn axis_coord(&self, d: usize, i: usize) -> f64 {
        self.origin[d] + i as f64 * self.h
    }
    pub fn coord(&self, idx: usize) -> Vec<f64> {
        let mi = self.multi(idx);
        (0..self.n).map(|d| self.axis_coord(d, mi[d])).collect()
    }
    /// Per-axis bounds of the region covered by lattice cells.
    pub fn extent(&self, d: usize) -> (f64, f64) {
        (
            self.origin[d] - 0.5 * self.h,
            self.origin[d] + (self.counts[d] as f64 - 0.5) * self.h,
        )
    }
    /// Nearest node to x, if x lies within the covered region.
    pub fn nearest(&self, x: &[f64]) -> Option<[usize; 2]> {
        let mut mi = [0usize; 2];
        for d in 0..self.n {
            let f = ((x[d] - self.origin[d]) / self.h).round();
            if f < 0.0 || f >= self.counts[d] as f64 {
                return None;
            }
            mi[d] = f as usize;
        }
        Some(mi)
    }
}

/// Sampled extension: `values[k][i]` is U at lattice node i and level
/// `levels[k]`; `base[i]` is ũ at z = 0.
#[derive(Debug, Clone)]
pub struct ExtensionField {
    pub lattice: Lattice,
    pub levels: Vec<f64>,
    pub base: Vec<f64>,
    pub values: Vec<Vec<f64>>,
    pub a: f64,
    pub s: f64,
}

impl ExtensionField {
    /// Samples an analytic U; `f(x, 0)` supplies the base trace.
    pub fn from_fn(lattice: Lattice, levels: Vec<f64>, s: f64, f: impl Fn(&[f64], f64) -> f64) -> Result<Self> {
        check_levels(&levels)?;
        let base = (0..lattice.len()).map(|i| f(&lattice.coord(i), 0.0)).collect();
        let values = levels
            .iter()
            .map(|&z| (0..lattice.len()).map(|i| f(&lattice.coord(i), z)).collect())
            .collect();
        Ok(ExtensionField { lattice, levels, base, values, a: 1.0 - 2.0 * s, s })
    }

    pub fn level_index(&self, z: f64) -> Option<usize> {
        self.levels.iter().position(|&l| (l - z).abs() <= 1e-12 * z.max(1.0))
    }

    /// Σ |U(x_{i+1}, z) − U(x_i, z)| over lattice edges at level k.
    pub fn total_variation(&self, k: usize) -> f64 {
        let v = &self.values[k];
        let lat = &self.lattice;
        let mut tv = 0.0;
        for i in 0..lat.len() {
            let mi = lat.multi(i);
            for d in 0..lat.n {
                if mi[d] + 1 < lat.counts[d] {
                    let mut mj = mi;
                    mj[d] += 1;
                    tv += (v[lat.flat(mj)] - v[i]).abs();
                }
            }
        }
        tv
    }

    pub fn sup_abs(&self) -> f64 {
        self.values
            .iter()
            .flat_map(|l| l.iter())
            .chain(self.base.iter())
            .fold(0.0f64, |a, v| a.max(v.abs()))
    }
}

fn check_levels(levels: &[f64]) -> Result<()> {
    if levels.is_empty() || levels[0] <= 0.0 || levels.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Parameter("z-levels must be positive and strictly ascending".into()));
    }
    Ok(())
}

/// ∫ over the lattice cell at offset d of P_z, computed in the scaled
/// variable t = y/z with panels adapted to the relative cell width.
pub fn poisson_cell_weight(p: &FractionalParams, h: f64, z: f64, d: [i64; 2]) -> f64 {
    let s = p.s;
    if p.n == 1 {
        let lo = (d[0].unsigned_abs() as f64 - 0.5) * h / z;
        let hi = lo + h / z;
        let near = lo.abs().min(hi.abs()).max(1.0);
        let panels = ((hi - lo) / near * 2.0).ceil().clamp(1.0, 64.0) as usize;
        let e = -(1.0 + 2.0 * s) / 2.0;
        let sum: f64 = if lo < 0.0 {
            // own cell: symmetric, integrate [0, hi] twice
            gl_composite(8, panels, 0.0, hi).iter().map(|&(t, w)| w * (1.0 + t * t).powf(e)).sum::<f64>() * 2.0
        } else {
            gl_composite(6, panels, lo, hi).iter().map(|&(t, w)| w * (1.0 + t * t).powf(e)).sum()
        };
        return p.sigma_ns * sum;
    }
    let e = -1.0 - s;
    let w = h / z;
    let mut ranges = [(0.0, 0.0); 2];
    let mut panels = [1usize; 2];
    for ax in 0..2 {
        let lo = (d[ax].unsigned_abs() as f64 - 0.5) * w;
        ranges[ax] = (lo, lo + w);
    }
    let dist_low = ranges
        .iter()
        .map(|&(lo, _)| lo.max(0.0))
        .fold(0.0f64, |a, b| a + b * b)
        .sqrt()
        .max(1.0);
    for ax in 0..2 {
        panels[ax] = (w / dist_low * 1.5).ceil().clamp(1.0, 16.0) as usize;
    }
    let deg = if dist_low < 4.0 { 6 } else { 3 };
    let qx = gl_composite(deg, panels[0], ranges[0].0, ranges[0].1);
    let qy = gl_composite(deg, panels[1], ranges[1].0, ranges[1].1);
    let mut acc = 0.0;
    for &(x, wx) in &qx {
        for &(y, wy) in &qy {
            acc += wx * wy * (1.0 + x * x + y * y).powf(e);
        }
    }
    p.sigma_ns * acc
}

/// Mass of P_z over {x + ρe : ρ > exit} weighted by g, for every ray
/// leaving the lattice region. 1D uses θ' = atan(z/ρ) with w = θ'^{2s};
/// 2D uses w = (1 + (ρ/z)²)^{−s}. Both substitutions leave a smooth
/// integrand; rays are truncated at R_cut and the tail takes g(R_cut).
fn exterior_extension(p: &FractionalParams, g: &dyn crate::grid::ExteriorData, x: &[f64], z: f64, bounds: [(f64, f64); 2], rcut: f64) -> f64 {
    let s = p.s;
    let inv2s = 1.0 / (2.0 * s);
    if p.n == 1 {
        let mut tot = 0.0;
        for (dir, exit) in [(1.0, bounds[0].1 - x[0]), (-1.0, x[0] - bounds[0].0)] {
            let th_max = (z / exit).atan();
            let th_cut = (z / rcut).atan();
            let wmax = th_max.powf(2.0 * s);
            let wcut = th_cut.powf(2.0 * s);
            let dens = |w: f64| -> f64 {
                let th = w.powf(inv2s);
                let ratio = if th < 1e-8 { 1.0 } else { th.sin() / th };
                p.sigma_ns * inv2s * ratio.powf(2.0 * s - 1.0)
            };
            let at = |w: f64| -> f64 {
                let th = w.powf(inv2s);
                g.value(&[x[0] + dir * z / th.tan()])
            };
            if wmax > wcut {
                for (w, q) in gl_composite(8, 2, wcut, wmax) {
                    tot += q * dens(w) * at(w);
                }
                let tail: f64 = gl_on(8, 0.0, wcut).iter().map(|&(w, q)| q * dens(w)).sum();
                tot += tail * g.value(&[x[0] + dir * rcut]);
            } else {
                let m: f64 = gl_on(8, 0.0, wmax).iter().map(|&(w, q)| q * dens(w)).sum();
                tot += m * g.value(&[x[0] + dir * exit]);
            }
        }
        return tot;
    }
    let (lx0, lx1) = bounds[0];
    let (ly0, ly1) = bounds[1];
    let corners = [[lx1, ly0], [lx1, ly1], [lx0, ly1], [lx0, ly0]];
    let mut angles: Vec<f64> = corners.iter().map(|c| (c[1] - x[1]).atan2(c[0] - x[0])).collect();
    for k in 1..4 {
        while angles[k] <= angles[k - 1] {
            angles[k] += 2.0 * PI;
        }
    }
    let wcut = (1.0 + (rcut / z).powi(2)).powf(-s);
    let mut tot = 0.0;
    for side in 0..4 {
        let (a, b) = if side < 3 { (angles[side], angles[side + 1]) } else { (angles[3], angles[0] + 2.0 * PI) };
        for (th, wt) in gl_composite(8, 6, a, b) {
            let e = [th.cos(), th.sin()];
            let exit = match side {
                0 => (lx1 - x[0]) / e[0],
                1 => (ly1 - x[1]) / e[1],
                2 => (lx0 - x[0]) / e[0],
                _ => (ly0 - x[1]) / e[1],
            }
            .max(1e-300);
            let wexit = (1.0 + (exit / z).powi(2)).powf(-s);
            let at = |rho: f64| g.value(&[x[0] + rho * e[0], x[1] + rho * e[1]]);
            let mut ray = 0.0;
            if wexit > wcut {
                for (w, q) in gl_on(12, wcut, wexit) {
                    let rho = z * (w.powf(-1.0 / s) - 1.0).max(0.0).sqrt();
                    ray += q * at(rho);
                }
                ray += wcut * at(rcut);
            } else {
                ray += wexit * at(exit);
            }
            tot += wt * p.sigma_ns * inv2s * ray;
        }
    }
    tot
}

/// Extension sampled on the box nodes only.
pub fn extend(u: &Field, cfg: &SolverConfig, z_levels: &[f64]) -> Result<ExtensionField> {
    extend_with_margin(u, cfg, z_levels, 0.0)
}

/// Extension sampled on the box nodes plus `margin` (rounded up to whole
/// cells) on every side, where ũ = g.
pub fn extend_with_margin(u: &Field, cfg: &SolverConfig, z_levels: &[f64], margin: f64) -> Result<ExtensionField> {
    check_levels(z_levels)?;
    let grid = &u.grid;
    let p = &cfg.params;
    let n = grid.n;
    let h = grid.h;
    let mc = (margin / h - 1e-9).ceil().max(0.0) as usize;
    let t_axis = grid.m + 2 * mc;
    let counts = if n == 2 { [t_axis, t_axis] } else { [t_axis, 1] };
    let o = -grid.half_width + 0.5 * h - mc as f64 * h;
    let lattice = Lattice { n, h, counts, origin: [o, if n == 2 { o } else { 0.0 }] };
    let box_dims = if n == 2 { [grid.m, grid.m] } else { [grid.m, 1] };
    let shift = if n == 2 { [mc as i64, mc as i64] } else { [mc as i64, 0] };
    let g = grid.exterior().clone();
    // ũ on the lattice
    let base: Vec<f64> = (0..lattice.len())
        .map(|i| {
            let mi = lattice.multi(i);
            let inside = (0..n).all(|d| mi[d] >= mc && mi[d] < mc + grid.m);
            if inside {
                let bi = [mi[0] - mc, if n == 2 { mi[1] - mc } else { 0 }];
                u.values[grid.flat(bi)]
            } else {
                g.value(&lattice.coord(i))
            }
        })
        .collect();
    let constant = g.constant();
    let mut values = Vec::with_capacity(z_levels.len());
    for &z in z_levels {
        let kernel = |d: [i64; 2]| poisson_cell_weight(p, h, z, d);
        let cache = if constant.is_some() {
            SymmetricTable::build(n, &kernel, box_dims, counts, shift)
        } else {
            SymmetricTable::build(n, &kernel, counts, counts, [0, 0])
        };
        let level = if let Some(c) = constant {
            let src: Vec<f64> = u.values.iter().map(|v| v - c).collect();
            let conv = LatticeConv::new(n, box_dims, counts, shift, |d| cache.get(d));
            conv.apply(&src).into_iter().map(|v| v + c).collect::<Vec<f64>>()
        } else {
            let conv = LatticeConv::new(n, counts, counts, [0, 0], |d| cache.get(d));
            let mut out = conv.apply(&base);
            let bounds = [lattice.extent(0), if n == 2 { lattice.extent(1) } else { (0.0, 0.0) }];
            let rcut = crate::fraclap::R_CUT_FACTOR * grid.half_width;
            for (i, v) in out.iter_mut().enumerate() {
                let x = lattice.coord(i);
                *v += exterior_extension(p, g.as_ref(), &x, z, bounds, rcut);
            }
            out
        };
        values.push(level);
    }
    Ok(ExtensionField { lattice, levels: z_levels.to_vec(), base, values, a: p.a, s: p.s })
}

/// Kernel values on nonnegative offsets, reused through |d| symmetry.
struct SymmetricTable {
    n: usize,
    span: [i64; 2],
    data: Vec<f64>,
}

impl SymmetricTable {
    fn build(n: usize, kernel: &dyn Fn([i64; 2]) -> f64, src: [usize; 2], tgt: [usize; 2], shift: [i64; 2]) -> Self {
        let mut span = [1i64; 2];
        for d in 0..n {
            let lo = shift[d] + src[d] as i64 - 1;
            let hi = tgt[d] as i64 - 1 - shift[d];
            span[d] = lo.max(hi) + 1;
        }
        let mut data = vec![0.0; (span[0] * span[1]) as usize];
        let mut memo = std::collections::HashMap::new();
        for a in 0..span[0] {
            for b in 0..span[1] {
                // the 2D kernel is symmetric under swapping axes
                let key = if n == 2 { [a.min(b), a.max(b)] } else { [a, b] };
                let v = *memo.entry(key).or_insert_with(|| kernel(key));
                data[(a * span[1] + b) as usize] = v;
            }
        }
        SymmetricTable { n, span, data }
    }

    fn get(&self, d: [i64; 2]) -> f64 {
        let a = d[0].abs();
        let b = if self.n == 2 { d[1].abs() } else { 0 };
        if a >= self.span[0] || b >= self.span[1] {
            return 0.0;
        }
        self.data[(a * self.span[1] + b) as usize]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::make_params_with_ds;

    #[test]
    fn cell_weights_sum_to_one() {
        for n in [1usize, 2] {
            let p = make_params_with_ds(n, 0.3, 1.0).unwrap();
            let h = 0.1;
            let z = h / 4.0;
            let span: i64 = if n == 1 { 4000 } else { 300 };
            let mut tot = 0.0;
            if n == 1 {
                for d in -span..=span {
                    tot += poisson_cell_weight(&p, h, z, [d, 0]);
                }
            } else {
                for a in -span..=span {
                    for b in -span..=span {
                        tot += poisson_cell_weight(&p, h, z, [a, b]);
                    }
                }
            }
            // remaining mass beyond the window is O((span·h/z)^{−2s})
            assert!(tot < 1.0 && tot > 0.9, "n={n}: {tot}");
        }
    }
}
