//! Weighted point clouds, β-numbers from the second-moment eigenvalues,
//! packing measures and the nonlocal perimeter.

mod packing;
mod perimeter;

pub use packing::*;
pub use perimeter::*;

use std::io::{BufRead, Write};

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::math::{dist2, AffinePlane};

/// Atoms with nonnegative weights and optional per-atom radii.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscreteMeasure {
    pub n: usize,
    pub atoms: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub radii: Option<Vec<f64>>,
}

impl DiscreteMeasure {
    pub fn new(atoms: Vec<Vec<f64>>, weights: Vec<f64>, radii: Option<Vec<f64>>) -> Result<Self> {
        if atoms.len() != weights.len() {
            return Err(Error::Validation("atoms and weights differ in length".into()));
        }
        let n = atoms.first().map(|a| a.len()).unwrap_or(0);
        if atoms.iter().any(|a| a.len() != n || a.iter().any(|v| !v.is_finite())) {
            return Err(Error::Validation("atoms must share one dimension and be finite".into()));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::Validation("weights must be finite and nonnegative".into()));
        }
        if let Some(r) = &radii {
            if r.len() != atoms.len() || r.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(Error::Validation("radii must match atoms and be nonnegative".into()));
            }
        }
        Ok(DiscreteMeasure { n, atoms, weights, radii })
    }

    /// Empty measure in R^n.
    pub fn empty(n: usize) -> Self {
        DiscreteMeasure { n, atoms: Vec::new(), weights: Vec::new(), radii: None }
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Indices of charged atoms in the closed ball, in input order.
    pub fn ball(&self, x: &[f64], r: f64) -> Vec<usize> {
        let r2 = r * r;
        (0..self.len())
            .filter(|&i| self.weights[i] > 0.0 && dist2(&self.atoms[i], x) <= r2)
            .collect()
    }

    pub fn mass_in(&self, x: &[f64], r: f64) -> f64 {
        self.ball(x, r).iter().map(|&i| self.weights[i]).sum()
    }

    /// Whether x is a charged atom.
    pub fn in_support(&self, x: &[f64]) -> bool {
        (0..self.len()).any(|i| self.weights[i] > 0.0 && self.atoms[i] == x)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let mut head: Vec<String> = (1..=self.n).map(|d| format!("x{d}")).collect();
        head.push("weight".into());
        if self.radii.is_some() {
            head.push("radius".into());
        }
        writeln!(w, "{}", head.join(","))?;
        for i in 0..self.len() {
            let mut row: Vec<String> = self.atoms[i].iter().map(|c| format!("{c:e}")).collect();
            row.push(format!("{:e}", self.weights[i]));
            if let Some(r) = &self.radii {
                row.push(format!("{:e}", r[i]));
            }
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }

    /// Reads the CSV written by [`DiscreteMeasure::write_csv`].
    pub fn read_csv<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let head = lines.next().ok_or_else(|| Error::Validation("empty measure file".into()))??;
        let cols: Vec<&str> = head.split(',').map(|c| c.trim()).collect();
        let has_r = cols.last() == Some(&"radius");
        let n = cols.len() - 1 - usize::from(has_r);
        let (mut atoms, mut weights, mut radii) = (Vec::new(), Vec::new(), Vec::new());
        for (ln, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let vals: std::result::Result<Vec<f64>, _> = line.split(',').map(|v| v.trim().parse::<f64>()).collect();
            let vals = vals.map_err(|e| Error::Validation(format!("line {}: {e}", ln + 2)))?;
            if vals.len() != cols.len() {
                return Err(Error::Validation(format!("line {}: expected {} columns", ln + 2, cols.len())));
            }
            atoms.push(vals[..n].to_vec());
            weights.push(vals[n]);
            if has_r {
                radii.push(vals[n + 1]);
            }
        }
        DiscreteMeasure::new(atoms, weights, has_r.then_some(radii))
    }
}

/// Mass, centre of mass and the normalized second-moment form over a ball.
#[derive(Debug, Clone, PartialEq)]
pub struct SecondMoment {
    pub mass: f64,
    pub center: Vec<f64>,
    pub q: DMatrix<f64>,
    /// descending
    pub eigenvalues: Vec<f64>,
    /// orthonormal, matching `eigenvalues`
    pub eigenvectors: Vec<Vec<f64>>,
}

/// Second moments of μ restricted to the closed ball B_r(x); `None` when
/// the ball carries no mass.
pub fn second_moment(mu: &DiscreteMeasure, x: &[f64], r: f64) -> Option<SecondMoment> {
    let idx = mu.ball(x, r);
    let n = mu.n;
    let mass: f64 = idx.iter().map(|&i| mu.weights[i]).sum();
    if idx.is_empty() || mass <= 0.0 {
        return None;
    }
    let first = &mu.atoms[idx[0]];
    let single = idx.iter().all(|&i| &mu.atoms[i] == first);
    let identity_basis = |n: usize| -> Vec<Vec<f64>> {
        (0..n).map(|d| (0..n).map(|e| if d == e { 1.0 } else { 0.0 }).collect()).collect()
    };
    if single {
        // exact degenerate case: no rounding in the centre of mass
        return Some(SecondMoment {
            mass,
            center: first.clone(),
            q: DMatrix::zeros(n, n),
            eigenvalues: vec![0.0; n],
            eigenvectors: identity_basis(n),
        });
    }
    let mut center = vec![0.0; n];
    for &i in &idx {
        for d in 0..n {
            center[d] += mu.weights[i] * mu.atoms[i][d];
        }
    }
    center.iter_mut().for_each(|c| *c /= mass);
    let mut q = DMatrix::<f64>::zeros(n, n);
    for &i in &idx {
        let w = mu.weights[i];
        for a in 0..n {
            let da = mu.atoms[i][a] - center[a];
            for b in 0..n {
                q[(a, b)] += w * da * (mu.atoms[i][b] - center[b]);
            }
        }
    }
    q /= mass;
    let eig = SymmetricEigen::new(q.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).expect("finite"));
    let eigenvalues = order.iter().map(|&j| eig.eigenvalues[j].max(0.0)).collect();
    let eigenvectors = order
        .iter()
        .map(|&j| eig.eigenvectors.column(j).iter().cloned().collect())
        .collect();
    Some(SecondMoment { mass, center, q, eigenvalues, eigenvectors })
}

/// β-number with its minimizing plane.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BetaResult {
    pub value: f64,
    pub beta_sq: f64,
    pub plane: AffinePlane,
    pub eigenvalues: Vec<f64>,
    pub mass: f64,
    /// The ball was empty and β = 0 by convention.
    pub degenerate: bool,
}

/// β_{μ,2}^k(x, r)² = r^{−k−2}·μ(B_r(x))·(sum of the n−k smallest
/// eigenvalues); the plane passes through the centre of mass along the
/// top k eigenvectors.
pub fn beta2(mu: &DiscreteMeasure, x: &[f64], r: f64, k: usize) -> Result<BetaResult> {
    let n = x.len();
    if mu.n != 0 && mu.n != n {
        return Err(Error::Parameter("query point dimension differs from the measure".into()));
    }
    if !(k >= 1 && k < n) {
        return Err(Error::Parameter(format!("k = {k} must satisfy 1 <= k <= n-1 = {}", n.saturating_sub(1))));
    }
    if !(r > 0.0) {
        return Err(Error::Parameter("radius must be positive".into()));
    }
    match second_moment(mu, x, r) {
        None => {
            let dirs = (0..k).map(|d| (0..n).map(|e| if d == e { 1.0 } else { 0.0 }).collect()).collect();
            Ok(BetaResult {
                value: 0.0,
                beta_sq: 0.0,
                plane: AffinePlane { base: x.to_vec(), dirs },
                eigenvalues: vec![0.0; n],
                mass: 0.0,
                degenerate: true,
            })
        }
        Some(m) => {
            let tail: f64 = m.eigenvalues[k..].iter().sum();
            let beta_sq = (r.powi(-(k as i32) - 2) * m.mass * tail).max(0.0);
            let plane = AffinePlane { base: m.center.clone(), dirs: m.eigenvectors[..k].to_vec() };
            Ok(BetaResult { value: beta_sq.sqrt(), beta_sq, plane, eigenvalues: m.eigenvalues, mass: m.mass, degenerate: false })
        }
    }
}

/// r^{−k−2}∫_{B_r(x)} d(y, L)² dμ for an arbitrary k-plane L.
pub fn beta_objective(mu: &DiscreteMeasure, x: &[f64], r: f64, plane: &AffinePlane) -> f64 {
    let k = plane.dim() as i32;
    let s: f64 = mu
        .ball(x, r)
        .iter()
        .map(|&i| {
            let d = plane.distance(&mu.atoms[i]);
            mu.weights[i] * d * d
        })
        .sum();
    r.powi(-k - 2) * s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn three_atoms() -> DiscreteMeasure {
        DiscreteMeasure::new(vec![vec![1.0, 0.0], vec![-1.0, 0.0], vec![0.0, 1.0]], vec![1.0; 3], None).unwrap()
    }

    #[test]
    fn three_atom_moments() {
        let m = second_moment(&three_atoms(), &[0.0, 0.0], 2.0).unwrap();
        assert!((m.center[0]).abs() < 1e-15 && (m.center[1] - 1.0 / 3.0).abs() < 1e-15);
        assert!((m.eigenvalues[0] - 2.0 / 3.0).abs() < 1e-14);
        assert!((m.eigenvalues[1] - 2.0 / 9.0).abs() < 1e-14);
        let b = beta2(&three_atoms(), &[0.0, 0.0], 2.0, 1).unwrap();
        assert!((b.beta_sq - 1.0 / 12.0).abs() < 1e-10);
    }

    #[test]
    fn single_atom_is_exactly_flat() {
        let mu = DiscreteMeasure::new(vec![vec![0.3, 0.7]], vec![0.1], None).unwrap();
        let m = second_moment(&mu, &[0.0, 0.0], 1.0).unwrap();
        assert_eq!(m.center, vec![0.3, 0.7]);
        assert_eq!(m.eigenvalues, vec![0.0, 0.0]);
        assert_eq!(beta2(&mu, &[0.0, 0.0], 1.0, 1).unwrap().beta_sq, 0.0);
    }

    #[test]
    fn empty_ball_convention() {
        let b = beta2(&three_atoms(), &[10.0, 10.0], 1.0, 1).unwrap();
        assert!(b.degenerate && b.value == 0.0);
        assert!(second_moment(&three_atoms(), &[10.0, 10.0], 1.0).is_none());
    }

    #[test]
    fn csv_roundtrip() {
        let mu = DiscreteMeasure::new(vec![vec![0.25, -1.0], vec![3.0, 0.5]], vec![0.5, 2.0], Some(vec![0.1, 0.2])).unwrap();
        let mut buf = Vec::new();
        mu.write_csv(&mut buf).unwrap();
        let back = DiscreteMeasure::read_csv(std::io::Cursor::new(buf)).unwrap();
        assert_eq!(back, mu);
    }
}
