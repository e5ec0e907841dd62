use super::{DensitySource, TransitionSet};
use crate::error::Result;
use crate::math::dist2;

type ThetaFn = Box<dyn Fn(f64, &[f64]) -> f64>;

/// Density given by a closure, sampled on a lattice of spacing h centred at
/// the origin. Used to exercise the trees on prescribed geometries.
pub struct SyntheticDensity {
    pub n: usize,
    pub epsilon: f64,
    pub h: f64,
    theta: ThetaFn,
}

impl SyntheticDensity {
    pub fn new(n: usize, epsilon: f64, h: f64, theta: impl Fn(f64, &[f64]) -> f64 + 'static) -> Self {
        SyntheticDensity { n, epsilon, h, theta: Box::new(theta) }
    }
}

impl DensitySource for SyntheticDensity {
    fn dim(&self) -> usize {
        self.n
    }

    fn epsilon(&self) -> f64 {
        self.epsilon
    }

    fn theta(&self, r: f64, y: &[f64]) -> Result<f64> {
        Ok((self.theta)(r, y))
    }

    fn resolution(&self) -> f64 {
        self.h
    }

    fn sample_points(&self, x: &[f64], r: f64) -> Vec<Vec<f64>> {
        let lo: Vec<i64> = x.iter().map(|c| ((c - r) / self.h).ceil() as i64).collect();
        let hi: Vec<i64> = x.iter().map(|c| ((c + r) / self.h).floor() as i64).collect();
        let mut out = Vec::new();
        if self.n == 1 {
            for i in lo[0]..=hi[0] {
                let p = vec![i as f64 * self.h];
                if dist2(&p, x) <= r * r {
                    out.push(p);
                }
            }
        } else {
            for i in lo[0]..=hi[0] {
                for j in lo[1]..=hi[1] {
                    let p = vec![i as f64 * self.h, j as f64 * self.h];
                    if dist2(&p, x) <= r * r {
                        out.push(p);
                    }
                }
            }
        }
        out
    }
}

/// Points of the two diagonals of the unit square meeting at the origin,
/// spaced h along each line, inside B₁(0).
pub fn cross_transition_set(h: f64) -> TransitionSet {
    let mut pts = Vec::new();
    let m = (1.0 / h).floor() as i64;
    for i in -m..=m {
        let t = i as f64 * h / std::f64::consts::SQRT_2;
        pts.push(vec![t, t]);
        if i != 0 {
            pts.push(vec![t, -t]);
        }
    }
    pts.retain(|p| p[0] * p[0] + p[1] * p[1] <= 1.0);
    TransitionSet::from_points(pts)
}
