//! Uniform cell-centred grids, exterior data and sampled fields.

use std::fmt;
use std::io::Write;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Exterior Dirichlet data g, defined on all of R^n (only queried outside
/// the box or on pinned nodes).
pub trait ExteriorData: Send + Sync + fmt::Debug {
    fn value(&self, x: &[f64]) -> f64;
    /// sup |g| over the ambient space.
    fn sup_abs(&self) -> f64;
    /// Some(c) when g ≡ c everywhere.
    fn constant(&self) -> Option<f64> {
        None
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Constant(pub f64);

impl ExteriorData for Constant {
    fn value(&self, _x: &[f64]) -> f64 {
        self.0
    }
    fn sup_abs(&self) -> f64 {
        self.0.abs()
    }
    fn constant(&self) -> Option<f64> {
        Some(self.0)
    }
}

/// g(x) = sign(x_axis), with g = 0 on the hyperplane itself.
#[derive(Debug, Clone, Copy)]
pub struct HalfSpaceSign {
    pub axis: usize,
}

impl ExteriorData for HalfSpaceSign {
    fn value(&self, x: &[f64]) -> f64 {
        let t = x[self.axis];
        if t > 0.0 {
            1.0
        } else if t < 0.0 {
            -1.0
        } else {
            0.0
        }
    }
    fn sup_abs(&self) -> f64 {
        1.0
    }
}

/// `inside` for |x − center| < radius, `outside` otherwise.
#[derive(Debug, Clone)]
pub struct RadialStep {
    pub center: Vec<f64>,
    pub radius: f64,
    pub inside: f64,
    pub outside: f64,
}

impl ExteriorData for RadialStep {
    fn value(&self, x: &[f64]) -> f64 {
        if crate::math::dist(x, &self.center) < self.radius {
            self.inside
        } else {
            self.outside
        }
    }
    fn sup_abs(&self) -> f64 {
        self.inside.abs().max(self.outside.abs())
    }
}

type ExteriorFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// Arbitrary bounded closure.
pub struct FnExterior {
    f: Arc<ExteriorFn>,
    sup: f64,
}

impl FnExterior {
    pub fn new(f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static, sup: f64) -> Self {
        FnExterior { f: Arc::new(f), sup }
    }
}

impl fmt::Debug for FnExterior {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FnExterior(sup={})", self.sup)
    }
}

impl ExteriorData for FnExterior {
    fn value(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }
    fn sup_abs(&self) -> f64 {
        self.sup
    }
}

/// Cell-centred lattice on [−L, L]^n with m cells per axis. Node `i` has
/// coordinate −L + (i + 1/2)h per axis; flat indices are row-major with the
/// first coordinate slowest.
///
/// Nodes may be pinned: their value is prescribed and the solver leaves
/// them alone. This is how interior obstacles such as a
/// held phase region are expressed.
#[derive(Clone)]
pub struct Grid {
    pub n: usize,
    pub half_width: f64,
    pub m: usize,
    pub h: f64,
    exterior: Arc<dyn ExteriorData>,
    pinned: Vec<bool>,
    pinned_value: Vec<f64>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("n", &self.n)
            .field("half_width", &self.half_width)
            .field("m", &self.m)
            .field("h", &self.h)
            .field("exterior", &self.exterior)
            .field("pinned", &self.pinned.iter().filter(|&&p| p).count())
            .finish()
    }
}

impl Grid {
    pub fn new(n: usize, half_width: f64, m: usize, exterior: Arc<dyn ExteriorData>) -> Result<Self> {
        if !(n == 1 || n == 2) {
            return Err(Error::Parameter(format!("grid dimension {n} not in {{1,2}}")));
        }
        if m < 3 {
            return Err(Error::Parameter(format!("{m} nodes per axis, need at least 3")));
        }
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(Error::Parameter("box half-width must be positive".into()));
        }
        if !exterior.sup_abs().is_finite() {
            return Err(Error::Parameter("exterior data unbounded".into()));
        }
        let nodes = m.pow(n as u32);
        Ok(Grid {
            n,
            half_width,
            m,
            h: 2.0 * half_width / m as f64,
            exterior,
            pinned: vec![false; nodes],
            pinned_value: vec![0.0; nodes],
        })
    }

    /// Smallest cell count with spacing at most `h`.
    pub fn with_spacing(n: usize, half_width: f64, h: f64, exterior: Arc<dyn ExteriorData>) -> Result<Self> {
        if !(h > 0.0) {
            return Err(Error::Parameter("spacing must be positive".into()));
        }
        let m = (2.0 * half_width / h - 1e-9).ceil() as usize;
        Grid::new(n, half_width, m, exterior)
    }

    /// Pins every node in the closed ball B_radius(center) to `value`.
    pub fn pin_ball(mut self, center: &[f64], radius: f64, value: f64) -> Self {
        for i in 0..self.len() {
            if crate::math::dist(&self.coord(i), center) <= radius {
                self.pinned[i] = true;
                self.pinned_value[i] = value;
            }
        }
        self
    }

    /// Prescribed value of a pinned node.
    pub fn pinned_value(&self, i: usize) -> Option<f64> {
        self.pinned[i].then(|| self.pinned_value[i])
    }

    pub fn len(&self) -> usize {
        self.pinned.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pinned.is_empty()
    }

    pub fn exterior(&self) -> &Arc<dyn ExteriorData> {
        &self.exterior
    }

    pub fn is_pinned(&self, i: usize) -> bool {
        self.pinned[i]
    }

    pub fn any_pinned(&self) -> bool {
        self.pinned.iter().any(|&p| p)
    }

    pub fn axis_coord(&self, i: usize) -> f64 {
        -self.half_width + (i as f64 + 0.5) * self.h
    }

    /// Per-axis indices of a flat index.
    pub fn multi(&self, idx: usize) -> [usize; 2] {
        if self.n == 1 {
            [idx, 0]
        } else {
            [idx / self.m, idx % self.m]
        }
    }

    pub fn flat(&self, mi: [usize; 2]) -> usize {
        if self.n == 1 {
            mi[0]
        } else {
            mi[0] * self.m + mi[1]
        }
    }

    pub fn coord(&self, idx: usize) -> Vec<f64> {
        let mi = self.multi(idx);
        (0..self.n).map(|d| self.axis_coord(mi[d])).collect()
    }

    /// Whether x lies in the closed box.
    pub fn in_box(&self, x: &[f64]) -> bool {
        x.iter().all(|&c| c.abs() <= self.half_width)
    }

    /// Λ = max(1, sup|g|, pinned values).
    pub fn lambda(&self) -> f64 {
        let pin = (0..self.len())
            .filter_map(|i| self.pinned_value(i))
            .fold(0.0f64, |a, v| a.max(v.abs()));
        1f64.max(self.exterior.sup_abs()).max(pin)
    }

    /// Default initial guess: each free node copies g at the closest point
    /// of the exterior or of the pinned set, clamped to [−1, 1].
    pub fn default_init(&self) -> Vec<f64> {
        let pinned: Vec<(Vec<f64>, f64)> = (0..self.len())
            .filter(|&i| self.pinned[i])
            .map(|i| (self.coord(i), self.pinned_value[i]))
            .collect();
        (0..self.len())
            .map(|i| {
                let x = self.coord(i);
                if self.pinned[i] {
                    return self.pinned_value[i];
                }
                let (mut best_d, mut best_axis) = (f64::INFINITY, 0);
                for (d, &c) in x.iter().enumerate() {
                    let gap = self.half_width - c.abs();
                    if gap < best_d {
                        best_d = gap;
                        best_axis = d;
                    }
                }
                let mut y = x.clone();
                let c = y[best_axis];
                y[best_axis] = c.signum() * (self.half_width + 0.5 * self.h);
                let mut v = self.exterior.value(&y);
                for (p, pv) in &pinned {
                    let dd = crate::math::dist(&x, p);
                    if dd < best_d {
                        best_d = dd;
                        v = *pv;
                    }
                }
                v.clamp(-1.0, 1.0)
            })
            .collect()
    }
}

/// Node values on a grid.
#[derive(Debug, Clone)]
pub struct Field {
    pub grid: Arc<Grid>,
    pub values: Vec<f64>,
    pub lambda0: f64,
}

impl Field {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Parameter(format!(
                "field has {} values for {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Parameter("field contains non-finite values".into()));
        }
        let lambda0 = values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        Ok(Field { grid, values, lambda0 })
    }

    pub fn from_fn(grid: Arc<Grid>, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let values = (0..grid.len()).map(|i| f(&grid.coord(i))).collect();
        Field::new(grid, values)
    }

    /// u inside the box, g outside.
    pub fn ambient(&self, x: &[f64]) -> Option<f64> {
        if self.grid.in_box(x) {
            None
        } else {
            Some(self.grid.exterior.value(x))
        }
    }

    /// CSV snapshot: coordinates then value, lexicographic node order.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let names = ["x1", "x2"];
        writeln!(w, "{},u", names[..self.grid.n].join(","))?;
        for (i, v) in self.values.iter().enumerate() {
            let x = self.grid.coord(i);
            let cs: Vec<String> = x.iter().map(|c| format!("{c:.12e}")).collect();
            writeln!(w, "{},{:.15e}", cs.join(","), v)?;
        }
        Ok(())
    }
}
