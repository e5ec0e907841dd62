//! Quantitative stratification: transition sets, good/bad balls, the two
//! tree constructions, the alternating corona cover, its refinement to a
//! single radius and tube volumes.

mod cover;
mod synthetic;
mod trees;

pub use cover::*;
pub use synthetic::*;
pub use trees::*;

use std::cell::RefCell;
use std::collections::HashMap;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::energy::EnergyTables;
use crate::error::{Error, Result};
use crate::grid::Field;
use crate::math::{dist, dist2, AffinePlane};

/// Parameters of the good/bad dichotomy and the tree scales. `m` is the
/// density ceiling sup_{B₂} Θ(2, ·) and must be set before use.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StratConfig {
    pub tau: f64,
    pub rho: f64,
    pub eta: f64,
    pub eta_prime: f64,
    pub gamma: f64,
    pub k_thresh: f64,
    pub m: f64,
}

impl Default for StratConfig {
    fn default() -> Self {
        StratConfig { tau: 0.5, rho: 0.05, eta: 0.02, eta_prime: 0.05, gamma: 0.1, k_thresh: 4.0, m: f64::NAN }
    }
}

impl StratConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::Config(what.to_string()));
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return bad("tau must lie in (0, 1)");
        }
        if !(self.rho > 0.0 && self.rho < 0.1) {
            return bad("rho must lie in (0, 1/10)");
        }
        if !(self.eta > 0.0 && self.eta < 0.25) {
            return bad("eta must lie in (0, 1/4)");
        }
        if !(self.eta < self.rho / 2.0) {
            return bad("eta must stay below rho/2");
        }
        if !(self.eta_prime > 0.0) {
            return bad("eta_prime must be positive");
        }
        if !(self.gamma > 0.0 && self.gamma < 0.25) {
            return bad("gamma must lie in (0, 1/4)");
        }
        if !(self.k_thresh >= 1.0) {
            return bad("k_thresh must be at least 1");
        }
        if !self.m.is_finite() {
            return bad("density ceiling M has not been computed");
        }
        Ok(())
    }

    /// Smallest admissible radius 𝐤ε.
    pub fn min_scale(&self, epsilon: f64) -> f64 {
        self.k_thresh * epsilon
    }

    /// Refuses radii below 𝐤ε.
    pub fn check_scale(&self, r: f64, epsilon: f64) -> Result<()> {
        let minimum = self.min_scale(epsilon);
        if r < minimum * (1.0 - 1e-12) {
            return Err(Error::Scale { radius: r, minimum });
        }
        Ok(())
    }
}

/// What the constructions need to know about Θ^ε.
pub trait DensitySource {
    fn dim(&self) -> usize;
    fn epsilon(&self) -> f64;
    fn theta(&self, r: f64, y: &[f64]) -> Result<f64>;
    /// Smallest radius at which `theta` is resolvable.
    fn resolution(&self) -> f64;
    /// Sample points of the closed ball B_r(x) used for sup-type quantifiers.
    fn sample_points(&self, x: &[f64], r: f64) -> Vec<Vec<f64>>;
    /// Relative slack of discrete density comparisons.
    fn slack(&self) -> f64 {
        0.0
    }

    /// Θ at max(r, resolution).
    fn theta_floored(&self, r: f64, y: &[f64]) -> Result<f64> {
        self.theta(r.max(self.resolution()), y)
    }
}

/// Θ^ε of a solved field through its energy tables, memoized per node.
pub struct FieldDensity<'a> {
    pub tables: &'a EnergyTables<'a>,
    cache: RefCell<HashMap<(u64, Vec<u64>), f64>>,
}

impl<'a> FieldDensity<'a> {
    pub fn new(tables: &'a EnergyTables<'a>) -> Self {
        FieldDensity { tables, cache: RefCell::new(HashMap::new()) }
    }

    pub fn h(&self) -> f64 {
        self.tables.u.lattice.h
    }
}

impl DensitySource for FieldDensity<'_> {
    fn dim(&self) -> usize {
        self.tables.context().n
    }

    fn epsilon(&self) -> f64 {
        self.tables.context().epsilon
    }

    fn theta(&self, r: f64, y: &[f64]) -> Result<f64> {
        let key = (r.to_bits(), y.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        if let Some(&v) = self.cache.borrow().get(&key) {
            return Ok(v);
        }
        let v = self.tables.theta(r, y)?;
        self.cache.borrow_mut().insert(key, v);
        Ok(v)
    }

    fn resolution(&self) -> f64 {
        2.0 * self.h() * (1.0 + 1e-6)
    }

    fn sample_points(&self, x: &[f64], r: f64) -> Vec<Vec<f64>> {
        let lat = &self.tables.u.lattice;
        let n = lat.n;
        let mut lo = [0usize; 2];
        let mut hi = [0usize; 2];
        for d in 0..n {
            let a = ((x[d] - r - lat.origin[d]) / lat.h).ceil().max(0.0) as usize;
            let b = ((x[d] + r - lat.origin[d]) / lat.h).floor();
            if b < 0.0 {
                return Vec::new();
            }
            lo[d] = a;
            hi[d] = (b as usize).min(lat.counts[d] - 1);
        }
        let mut out = Vec::new();
        let (h1lo, h1hi) = if n == 2 { (lo[1], hi[1]) } else { (0, 0) };
        for i0 in lo[0]..=hi[0] {
            for i1 in h1lo..=h1hi {
                let p = lat.coord(lat.flat([i0, i1]));
                if dist2(&p, x) <= r * r {
                    out.push(p);
                }
            }
        }
        out
    }

    fn slack(&self) -> f64 {
        crate::energy::tol_mono(self.h(), self.epsilon())
    }
}

/// sup over the sample points of B₂(0) of Θ(2, ·).
pub fn density_ceiling(src: &dyn DensitySource) -> Result<f64> {
    let zero = vec![0.0; src.dim()];
    let mut m = 0.0f64;
    for y in src.sample_points(&zero, 2.0) {
        m = m.max(src.theta(2.0, &y)?);
    }
    Ok(m)
}

/// Sampled transition set {x ∈ B_R(c) : |u(x)| ≤ 1 − τ} in node order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransitionSet {
    pub tau: f64,
    pub points: Vec<Vec<f64>>,
    pub values: Vec<f64>,
}

impl TransitionSet {
    /// Window B₁(0).
    pub fn from_field(u: &Field, tau: f64) -> Self {
        Self::from_field_in(u, tau, &vec![0.0; u.grid.n], 1.0)
    }

    pub fn from_field_in(u: &Field, tau: f64, center: &[f64], radius: f64) -> Self {
        let (mut points, mut values) = (Vec::new(), Vec::new());
        for (i, &v) in u.values.iter().enumerate() {
            let x = u.grid.coord(i);
            if v.abs() <= 1.0 - tau && dist2(&x, center) <= radius * radius {
                points.push(x);
                values.push(v);
            }
        }
        TransitionSet { tau, points, values }
    }

    /// From explicit points, for synthetic experiments.
    pub fn from_points(points: Vec<Vec<f64>>) -> Self {
        let values = vec![0.0; points.len()];
        TransitionSet { tau: 0.5, points, values }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Every member satisfies the threshold on the recorded values.
    pub fn verify(&self) -> bool {
        self.values.iter().all(|v| v.abs() <= 1.0 - self.tau)
    }

    pub fn in_ball(&self, x: &[f64], r: f64) -> Vec<usize> {
        (0..self.len()).filter(|&i| dist2(&self.points[i], x) <= r * r).collect()
    }
}

/// Greedy maximal net in input order.
pub fn maximal_net(points: &[Vec<f64>], spacing: f64) -> Vec<usize> {
    let mut kept: Vec<usize> = Vec::new();
    for (i, p) in points.iter().enumerate() {
        if kept.iter().all(|&k| dist(&points[k], p) >= spacing) {
            kept.push(i);
        }
    }
    kept
}

/// [`maximal_net`] over a subset given by indices, returning indices.
pub(crate) fn net_of(points: &[Vec<f64>], subset: &[usize], spacing: f64) -> Vec<usize> {
    let mut kept: Vec<usize> = Vec::new();
    for &i in subset {
        if kept.iter().all(|&k| dist(&points[k], &points[i]) >= spacing) {
            kept.push(i);
        }
    }
    kept
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum BallKind {
    Good,
    Bad,
    Stop,
}

impl BallKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            BallKind::Good => "good",
            BallKind::Bad => "bad",
            BallKind::Stop => "stop",
        }
    }
}

/// Radius at which balls of radius t are classified.
pub fn classification_radius(src: &dyn DensitySource, cfg: &StratConfig, t: f64) -> f64 {
    (cfg.gamma * cfg.rho * t).max(src.resolution())
}

/// Good iff Θ(γρt, y) ≥ ceiling − η′ at every sampled transition point of
/// B_t(x). The centre test |u(x)| ≤ 1 − τ is the caller's business.
pub fn classify_ball(
    x: &[f64],
    t: f64,
    ts: &TransitionSet,
    src: &dyn DensitySource,
    cfg: &StratConfig,
    ceiling: f64,
) -> Result<BallKind> {
    cfg.check_scale(t, src.epsilon())?;
    let rc = classification_radius(src, cfg, t);
    for i in ts.in_ball(x, t) {
        if src.theta(rc, &ts.points[i])? < ceiling - cfg.eta_prime {
            return Ok(BallKind::Bad);
        }
    }
    Ok(BallKind::Good)
}

/// Best (n−2)-plane through high-density points.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BadPlane {
    /// `None` in dimension 1, where the plane is empty.
    pub plane: Option<AffinePlane>,
    pub points: usize,
    pub max_distance: f64,
    pub contained: bool,
}

impl BadPlane {
    /// Membership in the closed tube of radius w around the plane.
    pub fn in_tube(&self, y: &[f64], w: f64) -> bool {
        match &self.plane {
            Some(p) => p.distance(y) <= w,
            None => false,
        }
    }
}

/// Fits the (n−2)-plane through the centre of mass along the top n−2 moment
/// eigenvectors, and checks the points lie within ρt of it.
pub fn fit_bad_plane(points: &[Vec<f64>], x: &[f64], t: f64, rho: f64) -> BadPlane {
    let n = x.len();
    if n < 2 {
        return BadPlane { plane: None, points: points.len(), max_distance: f64::INFINITY, contained: points.is_empty() };
    }
    let k = n - 2;
    if points.is_empty() {
        let dirs = (0..k).map(|d| (0..n).map(|e| if d == e { 1.0 } else { 0.0 }).collect()).collect();
        let plane = AffinePlane { base: x.to_vec(), dirs };
        return BadPlane { plane: Some(plane), points: 0, max_distance: 0.0, contained: true };
    }
    let m = points.len() as f64;
    let mut cm = vec![0.0; n];
    for p in points {
        for d in 0..n {
            cm[d] += p[d] / m;
        }
    }
    let dirs = if k == 0 {
        Vec::new()
    } else {
        let mut q = DMatrix::<f64>::zeros(n, n);
        for p in points {
            for a in 0..n {
                for b in 0..n {
                    q[(a, b)] += (p[a] - cm[a]) * (p[b] - cm[b]) / m;
                }
            }
        }
        let eig = SymmetricEigen::new(q);
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).expect("finite"));
        order[..k].iter().map(|&j| eig.eigenvectors.column(j).iter().cloned().collect()).collect()
    };
    let plane = AffinePlane { base: cm, dirs };
    let max_distance = points.iter().map(|p| plane.distance(p)).fold(0.0, f64::max);
    BadPlane { plane: Some(plane), points: points.len(), max_distance, contained: max_distance <= rho * t }
}

/// {y ∈ B_{2t}(x) : Θ(2ηt, y) ≥ ceiling − η/2} over the sample points.
pub fn high_density_points(
    x: &[f64],
    t: f64,
    src: &dyn DensitySource,
    cfg: &StratConfig,
    ceiling: f64,
) -> Result<Vec<Vec<f64>>> {
    let r = 2.0 * cfg.eta * t;
    let mut out = Vec::new();
    for y in src.sample_points(x, 2.0 * t) {
        if src.theta_floored(r, &y)? >= ceiling - cfg.eta / 2.0 {
            out.push(y);
        }
    }
    Ok(out)
}
