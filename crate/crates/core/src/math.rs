//! Constants of the fractional problem, the double-well potential and
//! affine planes.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::Serialize;
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};

/// Surface area of the unit sphere in R^n (|S^0| = 2 counts the two points).
pub fn sphere_area(n: usize) -> f64 {
    2.0 * PI.powf(n as f64 / 2.0) / gamma(n as f64 / 2.0)
}

/// Volume of the unit ball in R^n.
pub fn ball_volume(n: usize) -> f64 {
    PI.powf(n as f64 / 2.0) / gamma(n as f64 / 2.0 + 1.0)
}

/// Normalization of (−Δ)^s: s·2^{2s}·π^{−n/2}·Γ((n+2s)/2)/Γ(1−s).
pub fn gamma_ns(n: usize, s: f64) -> f64 {
    let nf = n as f64;
    s * 2f64.powf(2.0 * s) * PI.powf(-nf / 2.0) * gamma((nf + 2.0 * s) / 2.0) / gamma(1.0 - s)
}

/// Mass of the unnormalized extension kernel z^{2s}/(|x|²+z²)^{(n+2s)/2}
/// over the hyperplane, computed by quadrature (it does not depend on z).
pub fn extension_kernel_mass(n: usize, s: f64) -> f64 {
    // Polar coordinates and ρ = tan θ turn the radial integral into
    // ∫_0^{π/2} sin^{n−1}θ cos^{2s−1}θ dθ. The half near π/2 is reflected
    // and the substitution w = φ^{2s} removes its endpoint singularity.
    let m = (n - 1) as i32;
    let e = 2.0 * s - 1.0;
    let lo = quadrature::integrate(|t: f64| t.sin().powi(m) * t.cos().powf(e), 0.0, PI / 4.0, 1e-14);
    let inv = 1.0 / (2.0 * s);
    let hi = quadrature::integrate(
        |w: f64| {
            let phi = w.powf(inv);
            let ratio = if phi < 1e-8 { 1.0 } else { phi.sin() / phi };
            phi.cos().powi(m) * ratio.powf(e) * inv
        },
        0.0,
        (PI / 4.0).powf(2.0 * s),
        1e-14,
    );
    sphere_area(n) * (lo.integral + hi.integral)
}

/// Constants attached to a dimension n and order s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FractionalParams {
    pub n: usize,
    pub s: f64,
    pub a: f64,
    pub gamma_ns: f64,
    pub sigma_ns: f64,
    pub d_s: f64,
}

/// Builds the constants; d_s comes from the Gaussian calibration of
/// [`crate::extension::calibrate_ds`].
pub fn make_params(n: usize, s: f64) -> Result<FractionalParams> {
    let mut p = make_params_with_ds(n, s, f64::NAN)?;
    p.d_s = crate::extension::calibrate_ds(&p)?;
    Ok(p)
}

/// Builds the constants with an explicitly supplied d_s.
pub fn make_params_with_ds(n: usize, s: f64, d_s: f64) -> Result<FractionalParams> {
    if !(n == 1 || n == 2) {
        return Err(Error::Parameter(format!("dimension n={n} not in {{1,2}}")));
    }
    if !(s > 0.0 && s < 0.5) {
        return Err(Error::Parameter(format!("order s={s} not in (0,1/2)")));
    }
    Ok(FractionalParams {
        n,
        s,
        a: 1.0 - 2.0 * s,
        gamma_ns: gamma_ns(n, s),
        sigma_ns: 1.0 / extension_kernel_mass(n, s),
        d_s,
    })
}

impl FractionalParams {
    /// Normalized Poisson kernel σ z^{2s}/(ρ²+z²)^{(n+2s)/2} at distance ρ.
    pub fn poisson(&self, rho2: f64, z: f64) -> f64 {
        let e = (self.n as f64 + 2.0 * self.s) / 2.0;
        self.sigma_ns * z.powf(2.0 * self.s) / (rho2 + z * z).powf(e)
    }
}

type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Double-well potential with its first two derivatives and the
/// structural constants used by the audits.
#[derive(Clone)]
pub struct Potential {
    w: ScalarFn,
    dw: ScalarFn,
    ddw: ScalarFn,
    pub p: f64,
    pub c_w: f64,
    pub delta_w: f64,
    pub name: String,
}

impl fmt::Debug for Potential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Potential")
            .field("name", &self.name)
            .field("p", &self.p)
            .field("c_w", &self.c_w)
            .field("delta_w", &self.delta_w)
            .finish()
    }
}

impl Potential {
    /// W(t) = (1−t²)²/4 with p = 4 and c_W = 2.
    ///
    /// delta_W = 0.18: the band condition W″ ≥ 1 needs |t| ≥ √(2/3), so
    /// any delta_W above 1 − √(2/3) ≈ 0.1835 would violate it.
    pub fn prototype() -> Self {
        Potential {
            w: Arc::new(|t| {
                let q = 1.0 - t * t;
                0.25 * q * q
            }),
            dw: Arc::new(|t| t * t * t - t),
            ddw: Arc::new(|t| 3.0 * t * t - 1.0),
            p: 4.0,
            c_w: 2.0,
            delta_w: 0.18,
            name: "prototype".into(),
        }
    }

    /// User-supplied (W, W′, W″) triple.
    pub fn custom(
        name: &str,
        w: impl Fn(f64) -> f64 + Send + Sync + 'static,
        dw: impl Fn(f64) -> f64 + Send + Sync + 'static,
        ddw: impl Fn(f64) -> f64 + Send + Sync + 'static,
        p: f64,
        c_w: f64,
        delta_w: f64,
    ) -> Result<Self> {
        if !(p > 1.0 && c_w > 0.0 && delta_w > 0.0 && delta_w <= 0.5) {
            return Err(Error::Parameter("potential constants out of range".into()));
        }
        Ok(Potential {
            w: Arc::new(w),
            dw: Arc::new(dw),
            ddw: Arc::new(ddw),
            p,
            c_w,
            delta_w,
            name: name.into(),
        })
    }

    /// W ≡ 0, used to isolate the Dirichlet part in tests.
    pub fn zero() -> Self {
        Potential {
            w: Arc::new(|_| 0.0),
            dw: Arc::new(|_| 0.0),
            ddw: Arc::new(|_| 0.0),
            p: 2.0,
            c_w: 1.0,
            delta_w: 0.5,
            name: "zero".into(),
        }
    }

    pub fn w(&self, t: f64) -> f64 {
        (self.w)(t)
    }
    pub fn dw(&self, t: f64) -> f64 {
        (self.dw)(t)
    }
    pub fn ddw(&self, t: f64) -> f64 {
        (self.ddw)(t)
    }

    /// (W, W′, W″) at t.
    pub fn eval(&self, t: f64) -> (f64, f64, f64) {
        (self.w(t), self.dw(t), self.ddw(t))
    }

    /// Checks the growth condition (1/c)(|t|^{p−1}−1) ≤ |W′| ≤ c(|t|^{p−1}+1)
    /// at the given sample points.
    pub fn audit_growth(&self, samples: &[f64]) -> bool {
        samples.iter().all(|&t| {
            let g = t.abs().powf(self.p - 1.0);
            let d = self.dw(t).abs();
            let tol = 1e-12 * (1.0 + g);
            (g - 1.0) / self.c_w <= d + tol && d <= self.c_w * (g + 1.0) + tol
        })
    }

    /// Checks W″(t) ≥ min(W″(±1))/2 on the band |1−|t|| ≤ delta_W, sampled
    /// at `samples` points per side.
    pub fn audit_band(&self, samples: usize) -> bool {
        let floor = 0.5 * self.ddw(1.0).min(self.ddw(-1.0));
        (0..=samples).all(|i| {
            let d = -self.delta_w + 2.0 * self.delta_w * i as f64 / samples as f64;
            let t = 1.0 + d;
            self.ddw(t) >= floor - 1e-12 && self.ddw(-t) >= floor - 1e-12
        })
    }
}

/// Affine k-plane: base point plus orthonormal directions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AffinePlane {
    pub base: Vec<f64>,
    pub dirs: Vec<Vec<f64>>,
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    dist2(a, b).sqrt()
}

impl AffinePlane {
    /// Validates orthonormality of `dirs` to 1e−12.
    pub fn new(base: Vec<f64>, dirs: Vec<Vec<f64>>) -> Result<Self> {
        let n = base.len();
        if dirs.len() >= n.max(1) && n > 0 {
            return Err(Error::Parameter(format!("{} directions in R^{n}", dirs.len())));
        }
        for (i, d) in dirs.iter().enumerate() {
            if d.len() != n {
                return Err(Error::Parameter("direction dimension mismatch".into()));
            }
            for (j, e) in dirs.iter().enumerate().take(i + 1) {
                let target = if i == j { 1.0 } else { 0.0 };
                if (dot(d, e) - target).abs() > 1e-12 {
                    return Err(Error::Parameter("directions not orthonormal".into()));
                }
            }
        }
        Ok(AffinePlane { base, dirs })
    }

    /// Gram-Schmidt on an arbitrary independent spanning set.
    pub fn from_spanning(base: Vec<f64>, span: &[Vec<f64>]) -> Result<Self> {
        let mut dirs: Vec<Vec<f64>> = Vec::new();
        for v in span {
            let mut w = v.clone();
            // two passes keep the result orthonormal to 1e−12
            for _ in 0..2 {
                for d in &dirs {
                    let c = dot(&w, d);
                    w.iter_mut().zip(d).for_each(|(x, y)| *x -= c * y);
                }
            }
            let norm = dot(&w, &w).sqrt();
            if norm < 1e-14 {
                return Err(Error::Parameter("dependent spanning set".into()));
            }
            w.iter_mut().for_each(|x| *x /= norm);
            dirs.push(w);
        }
        AffinePlane::new(base, dirs)
    }

    pub fn dim(&self) -> usize {
        self.dirs.len()
    }

    /// Euclidean distance from y to the plane.
    pub fn distance(&self, y: &[f64]) -> f64 {
        let mut v: Vec<f64> = y.iter().zip(&self.base).map(|(a, b)| a - b).collect();
        for d in &self.dirs {
            let c = dot(&v, d);
            v.iter_mut().zip(d).for_each(|(x, e)| *x -= c * e);
        }
        dot(&v, &v).sqrt()
    }
}

/// Distance from y to the plane.
pub fn plane_distance(pl: &AffinePlane, y: &[f64]) -> f64 {
    pl.distance(y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn potential_closed_forms() {
        let p = Potential::prototype();
        assert_eq!(p.eval(1.0), (0.0, 0.0, 2.0));
        assert_eq!(p.eval(0.0), (0.25, 0.0, -1.0));
        assert_eq!(p.eval(-1.0), (0.0, 0.0, 2.0));
        assert!(p.audit_band(200));
    }

    #[test]
    fn spec_delta_quarter_fails_band() {
        let mut p = Potential::prototype();
        p.delta_w = 0.25;
        assert!(!p.audit_band(200));
    }

    #[test]
    fn plane_distances() {
        let line = AffinePlane::new(vec![0.0, 0.0], vec![vec![1.0, 0.0]]).unwrap();
        assert_eq!(plane_distance(&line, &[3.0, 4.0]), 4.0);
        let pt = AffinePlane::new(vec![0.0, 0.0], vec![]).unwrap();
        assert_eq!(plane_distance(&pt, &[3.0, 4.0]), 5.0);
        let l2 = AffinePlane::new(vec![1.0, 0.0], vec![vec![0.0, 1.0]]).unwrap();
        assert_eq!(plane_distance(&l2, &[4.0, 7.0]), 3.0);
    }

    #[test]
    fn rejects_non_orthonormal() {
        assert!(AffinePlane::new(vec![0.0, 0.0], vec![vec![1.0, 1.0]]).is_err());
    }

    #[test]
    fn parameter_ranges() {
        assert!(make_params_with_ds(3, 0.2, 1.0).is_err());
        assert!(make_params_with_ds(1, 0.5, 1.0).is_err());
        assert!(make_params_with_ds(1, 0.0, 1.0).is_err());
        let p = make_params_with_ds(2, 0.3, 1.0).unwrap();
        assert_eq!(p.a, 1.0 - 2.0 * 0.3);
    }
}
