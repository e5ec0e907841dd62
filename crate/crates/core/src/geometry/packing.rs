use serde::Serialize;

use super::{beta2, DiscreteMeasure};
use crate::error::{Error, Result};
use crate::math::dist;

/// A closed ball B_r(p).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Ball {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: Vec<f64>, radius: f64) -> Self {
        Ball { center, radius }
    }
}

const DISJOINT_TOL: f64 = 1e-12;

/// Checks that the balls B_{factor·r_p}(p) are pairwise disjoint.
pub fn check_disjoint(balls: &[Ball], factor: f64) -> Result<()> {
    for i in 0..balls.len() {
        for j in i + 1..balls.len() {
            let d = dist(&balls[i].center, &balls[j].center);
            if d + DISJOINT_TOL < factor * (balls[i].radius + balls[j].radius) {
                return Err(Error::Validation(format!(
                    "balls {i} and {j} overlap at dilation {factor}: distance {d:.6e}"
                )));
            }
        }
    }
    Ok(())
}

/// Dyadic radius 2^{−i}, valid for negative i as well.
pub fn dyadic(i: i32) -> f64 {
    2f64.powi(-i)
}

/// μ_i = Σ_{r_p ≤ 2^{−i}} r_p^k δ_p, radii carried along.
pub fn packing_measure(balls: &[Ball], k: usize, i: i32, declare_disjoint: bool) -> Result<DiscreteMeasure> {
    if declare_disjoint {
        check_disjoint(balls, 1.0)?;
    }
    let cut = dyadic(i);
    let kept: Vec<&Ball> = balls.iter().filter(|b| b.radius <= cut).collect();
    if kept.is_empty() {
        return Ok(DiscreteMeasure::empty(balls.first().map(|b| b.center.len()).unwrap_or(0)));
    }
    DiscreteMeasure::new(
        kept.iter().map(|b| b.center.clone()).collect(),
        kept.iter().map(|b| b.radius.powi(k as i32)).collect(),
        Some(kept.iter().map(|b| b.radius).collect()),
    )
}

/// Smallest dyadic scale index past which every ball of radius 2^{−j}
/// around an atom sees only that atom, so all further β vanish.
pub fn finest_scale(mu: &DiscreteMeasure) -> i32 {
    let mut sep = f64::INFINITY;
    for a in 0..mu.len() {
        for b in a + 1..mu.len() {
            let d = dist(&mu.atoms[a], &mu.atoms[b]);
            if d > 0.0 {
                sep = sep.min(d);
            }
        }
    }
    if !sep.is_finite() {
        return 0;
    }
    // strictly below the separation: 2^{−j} < sep
    (-sep.log2()).floor() as i32 + 1
}

/// Which alternative of the restriction identity a support point falls in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RestrictionCase {
    /// x ∈ spt μ_j, both β agree
    SharedSupport,
    /// x ∉ spt μ_j, β_{μ_i} vanishes
    Vanishing,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RestrictionPoint {
    pub x: Vec<f64>,
    pub case: RestrictionCase,
    pub lhs: f64,
    pub rhs: f64,
}

impl RestrictionPoint {
    pub fn exact(&self) -> bool {
        self.lhs == self.rhs
    }
}

/// For every x ∈ spt μ_i evaluates β_{μ_i}(x, 2^{−j}) against
/// β_{μ_j}(x, 2^{−j}) or 0. Requires j ≥ i and disjoint balls.
pub fn restriction_identity(balls: &[Ball], k: usize, i: i32, j: i32) -> Result<Vec<RestrictionPoint>> {
    if j < i {
        return Err(Error::Parameter("restriction identity needs j >= i".into()));
    }
    let mu_i = packing_measure(balls, k, i, true)?;
    let mu_j = packing_measure(balls, k, j, false)?;
    let r = dyadic(j);
    let mut out = Vec::with_capacity(mu_i.len());
    for x in &mu_i.atoms {
        let lhs = beta2(&mu_i, x, r, k)?.value;
        let (case, rhs) = if mu_j.in_support(x) {
            (RestrictionCase::SharedSupport, beta2(&mu_j, x, r, k)?.value)
        } else {
            (RestrictionCase::Vanishing, 0.0)
        };
        out.push(RestrictionPoint { x: x.clone(), case, lhs, rhs });
    }
    Ok(out)
}

fn local_beta_sum(mu: &DiscreteMeasure, k: usize, x: &[f64], region: f64, scale: f64) -> Result<f64> {
    let mut s = 0.0;
    for a in mu.ball(x, region) {
        let b = beta2(mu, &mu.atoms[a], scale, k)?;
        s += mu.weights[a] * b.beta_sq;
    }
    Ok(s)
}

/// Both sides of the packing exchange identity at scale index i:
/// Σ_{j≥i−1} ∫_{B_{r_i}(x)} β_{μ_i}(y, r_j)² dμ_i against the same sum with
/// μ_j in place of μ_i. Needs the doubled balls disjoint.
pub fn exchange_identity(balls: &[Ball], k: usize, i: i32, x: &[f64]) -> Result<(f64, f64)> {
    check_disjoint(balls, 2.0)?;
    let mu_i = packing_measure(balls, k, i, false)?;
    let full = packing_measure(balls, k, i32::MIN / 2, false)?;
    let j_max = finest_scale(&full).max(i);
    let region = dyadic(i);
    let (mut lhs, mut rhs) = (0.0, 0.0);
    for j in (i - 1)..=j_max {
        let mu_j = packing_measure(balls, k, j, false)?;
        lhs += local_beta_sum(&mu_i, k, x, region, dyadic(j))?;
        rhs += local_beta_sum(&mu_j, k, x, region, dyadic(j))?;
    }
    Ok((lhs, rhs))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReifenbergCheck {
    pub sum: f64,
    pub threshold: f64,
    pub holds: bool,
}

/// 2^{−2−2n}·δ_DR·2^{−ik}.
pub fn reifenberg_threshold(n: usize, k: usize, i: i32, delta_dr: f64) -> f64 {
    2f64.powi(-2 - 2 * n as i32) * delta_dr * 2f64.powi(-i * k as i32)
}

/// Discrete hypothesis on B_{2^{−i}}(x): Σ_{j≥i−1} ∫ β(y, 2^{−j})² dμ(y)
/// against the threshold. Scales finer than the atom separation contribute
/// nothing and are skipped.
pub fn reifenberg_hypothesis(mu: &DiscreteMeasure, k: usize, x: &[f64], i: i32, delta_dr: f64) -> Result<ReifenbergCheck> {
    let j_max = finest_scale(mu).max(i);
    let region = dyadic(i);
    let mut sum = 0.0;
    for j in (i - 1)..=j_max {
        sum += local_beta_sum(mu, k, x, region, dyadic(j))?;
    }
    let threshold = reifenberg_threshold(x.len(), k, i, delta_dr);
    Ok(ReifenbergCheck { sum, threshold, holds: sum <= threshold })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PackingBound {
    pub hypothesis_ok: bool,
    pub mass: f64,
    /// mass over the unit ball, which is the packing constant measured here
    pub empirical_c: f64,
    /// largest sum/threshold ratio over all checked (x, i)
    pub worst_ratio: f64,
    pub checks: usize,
}

/// Runs the hypothesis at every atom and every dyadic scale 2^{−i} with
/// 0 ≤ i ≤ finest scale, then reports Σ r_q^k.
pub fn packing_bound_check(balls: &[Ball], k: usize, delta_dr: f64) -> Result<PackingBound> {
    for b in balls {
        if b.radius > 1.0 || crate::math::dot(&b.center, &b.center).sqrt() + b.radius > 1.0 + DISJOINT_TOL {
            return Err(Error::Validation("balls must lie in the unit ball with radius at most 1".into()));
        }
    }
    let mu = packing_measure(balls, k, i32::MIN / 2, true)?;
    let mass = mu.total_mass();
    if mu.is_empty() {
        return Ok(PackingBound { hypothesis_ok: true, mass, empirical_c: mass, worst_ratio: 0.0, checks: 0 });
    }
    let n = mu.n;
    let j_max = finest_scale(&mu).max(0);
    // β²(y, 2^{−j}) for each atom and scale, computed once
    let mut table = vec![vec![0.0; (j_max + 2) as usize]; mu.len()];
    for (a, row) in table.iter_mut().enumerate() {
        for j in -1..=j_max {
            row[(j + 1) as usize] = beta2(&mu, &mu.atoms[a], dyadic(j), k)?.beta_sq;
        }
    }
    let (mut ok, mut worst, mut checks) = (true, 0.0f64, 0);
    for x in &mu.atoms {
        for i in 0..=j_max {
            let mut sum = 0.0;
            for a in mu.ball(x, dyadic(i)) {
                for j in (i - 1)..=j_max {
                    sum += mu.weights[a] * table[a][(j + 1) as usize];
                }
            }
            let thr = reifenberg_threshold(n, k, i, delta_dr);
            ok &= sum <= thr;
            worst = worst.max(sum / thr);
            checks += 1;
        }
    }
    Ok(PackingBound { hypothesis_ok: ok, mass, empirical_c: mass, worst_ratio: worst, checks })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_radii_are_all_kept() {
        let balls: Vec<Ball> = (0..4).map(|q| Ball::new(vec![q as f64, 0.0], 0.125)).collect();
        let mu = packing_measure(&balls, 1, 2, true).unwrap();
        assert_eq!(mu.len(), 4);
        assert!(mu.weights.iter().all(|&w| w == 0.125));
        assert!(packing_measure(&balls, 1, 10, true).unwrap().is_empty());
    }

    #[test]
    fn overlap_is_rejected() {
        let balls = vec![Ball::new(vec![0.0, 0.0], 0.5), Ball::new(vec![0.6, 0.0], 0.5)];
        assert!(packing_measure(&balls, 1, 0, true).is_err());
    }

    #[test]
    fn single_unit_ball() {
        let pb = packing_bound_check(&[Ball::new(vec![0.0, 0.0], 1.0)], 1, 0.01).unwrap();
        assert_eq!(pb.mass, 1.0);
        assert!(pb.hypothesis_ok);
    }

    #[test]
    fn finest_scale_is_below_separation() {
        let mu = DiscreteMeasure::new(vec![vec![0.0, 0.0], vec![0.3, 0.0]], vec![1.0, 1.0], None).unwrap();
        let j = finest_scale(&mu);
        assert!(dyadic(j) < 0.3 && dyadic(j - 1) >= 0.3);
    }
}
