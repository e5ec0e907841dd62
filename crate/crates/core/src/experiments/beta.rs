use std::f64::consts::PI;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{sci, Check, ExperimentConfig, Report};
use crate::error::{Error, Result};
use crate::geometry::{
    beta2, beta_objective, check_disjoint, exchange_identity, packing_bound_check, packing_measure, reifenberg_hypothesis,
    restriction_identity, Ball, DiscreteMeasure, PackingBound,
};
use crate::math::AffinePlane;

/// `count` balls in B₁(0) ⊂ R² whose doubles are pairwise disjoint, radii
/// spread over several dyadic scales.
pub fn random_disjoint_balls(rng: &mut impl Rng, count: usize) -> Result<Vec<Ball>> {
    let mut balls: Vec<Ball> = Vec::with_capacity(count);
    let mut tries = 0;
    while balls.len() < count {
        tries += 1;
        if tries > 100_000 {
            return Err(Error::Internal("could not place disjoint balls".into()));
        }
        let r = 2f64.powi(-rng.random_range(2..7)) * rng.random_range(0.5..1.0);
        let rho = (1.0 - r) * rng.random::<f64>().sqrt();
        let phi = rng.random_range(0.0..2.0 * PI);
        let c = vec![rho * phi.cos(), rho * phi.sin()];
        let b = Ball::new(c, r);
        if balls.iter().all(|o| crate::math::dist(&o.center, &b.center) > 2.0 * (o.radius + b.radius)) {
            balls.push(b);
        }
    }
    check_disjoint(&balls, 2.0)?;
    Ok(balls)
}

/// Atoms uniform in [−1, 1]^n with weights in [0.1, 1].
pub fn random_measure(rng: &mut impl Rng, n: usize, atoms: usize) -> DiscreteMeasure {
    let pts = (0..atoms).map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let w = (0..atoms).map(|_| rng.random_range(0.1..1.0)).collect();
    DiscreteMeasure::new(pts, w, None).expect("finite atoms and positive weights")
}

/// 2^m touching balls of radius 2^{−m−1} along [−1/2, 1/2] × {0}.
pub fn line_packing(m: u32) -> Vec<Ball> {
    perturbed_line_packing(m, 0.0)
}

/// The line packing with atoms displaced alternately by ±a off the line.
pub fn perturbed_line_packing(m: u32, a: f64) -> Vec<Ball> {
    let q = 1usize << m;
    let r = 0.5 / q as f64;
    (0..q)
        .map(|i| {
            let y = if i % 2 == 0 { a } else { -a };
            Ball::new(vec![-0.5 + (2 * i + 1) as f64 * r, y], r)
        })
        .collect()
}

/// The line packing bent along a unit-radius circular arc of length 1;
/// radii shrink to half the chord so the balls stay disjoint.
pub fn arc_packing(m: u32) -> Vec<Ball> {
    let q = 1usize << m;
    let dphi = 1.0 / q as f64;
    let r = (0.5 * dphi).sin();
    let sag = 1.0 - 0.5f64.cos();
    (0..q)
        .map(|i| {
            let phi = -0.5 + (i as f64 + 0.5) * dphi;
            Ball::new(vec![phi.sin(), 1.0 - phi.cos() - 0.5 * sag], r)
        })
        .collect()
}

/// 2^m × 2^m touching balls of radius 2^{−m−1} filling [−1/2, 1/2]².
pub fn square_packing(m: u32) -> Vec<Ball> {
    let q = 1usize << m;
    let r = 0.5 / q as f64;
    let mut v = Vec::with_capacity(q * q);
    for a in 0..q {
        for b in 0..q {
            v.push(Ball::new(vec![-0.5 + (2 * a + 1) as f64 * r, -0.5 + (2 * b + 1) as f64 * r], r));
        }
    }
    v
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttainmentRow {
    pub measure: usize,
    pub x: Vec<f64>,
    pub r: f64,
    pub beta_sq: f64,
    pub min_objective: f64,
    pub violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityRow {
    pub config: usize,
    pub identity: &'static str,
    pub i: i32,
    pub j: i32,
    pub points: usize,
    pub exact: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PackingRow {
    pub case: &'static str,
    pub m: u32,
    pub balls: usize,
    pub bound: PackingBound,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BetaSuiteReport {
    pub seed: u64,
    pub three_atom_beta_sq: f64,
    pub attainment: Vec<AttainmentRow>,
    pub identities: Vec<IdentityRow>,
    pub packing: Vec<PackingRow>,
    /// (displacement, hypothesis sum) at B₁(0), scale index 0
    pub perturbation: Vec<(f64, f64)>,
}

impl BetaSuiteReport {
    fn packing_of(&self, case: &str) -> Vec<&PackingRow> {
        self.packing.iter().filter(|p| p.case == case).collect()
    }
}

impl Report for BetaSuiteReport {
    fn title(&self) -> &'static str {
        "beta-reifenberg-suite"
    }

    fn summary(&self) -> Vec<String> {
        let mut v = vec![format!("seed = {}", self.seed)];
        for p in &self.packing {
            v.push(format!(
                "{} m = {}: mass {:.6}, hypothesis {}, worst ratio {:.3e}",
                p.case, p.m, p.bound.mass, p.bound.hypothesis_ok, p.bound.worst_ratio
            ));
        }
        v
    }

    fn checks(&self) -> Vec<Check> {
        let mut v = Vec::new();
        let err = (self.three_atom_beta_sq - 1.0 / 12.0).abs();
        v.push(Check::new("three-atom beta^2 = 1/12", err <= 1e-10, format!("error {err:.2e}")));
        let viol: usize = self.attainment.iter().map(|a| a.violations).sum();
        let planes: usize = self.attainment.len();
        v.push(Check::new("eigen-plane attains the minimum", viol == 0, format!("{viol} violations over {planes} measures")));
        for kind in ["restriction", "exchange"] {
            let rows: Vec<&IdentityRow> = self.identities.iter().filter(|r| r.identity == kind).collect();
            let pts: usize = rows.iter().map(|r| r.points).sum();
            let exact: usize = rows.iter().map(|r| r.exact).sum();
            let configs = rows.iter().map(|r| r.config).max().map_or(0, |c| c + 1);
            v.push(Check::new(
                format!("{kind} identity exact"),
                pts > 0 && exact == pts,
                format!("{exact}/{pts} exact over {configs} configurations"),
            ));
        }
        let line = self.packing_of("line");
        let line_ok = !line.is_empty() && line.iter().all(|p| p.bound.hypothesis_ok && p.bound.worst_ratio == 0.0);
        v.push(Check::new("line packing: hypothesis with zero sum", line_ok, format!("{} refinements", line.len())));
        let spread = line.iter().map(|p| (p.bound.mass - 0.5).abs()).fold(0.0, f64::max);
        v.push(Check::new("line packing: mass 1/2 at every m", !line.is_empty() && spread <= 1e-12, format!("max deviation {spread:.2e}")));
        let square = self.packing_of("square");
        v.push(Check::new(
            "square filling fails the k = 1 hypothesis",
            !square.is_empty() && square.iter().all(|p| !p.bound.hypothesis_ok),
            format!("{} configurations", square.len()),
        ));
        let arc = self.packing_of("arc");
        let arc_ok = arc.iter().all(|a| line.iter().filter(|l| l.m == a.m).all(|l| a.bound.mass <= 2.0 * l.bound.mass));
        v.push(Check::new("arc mass within twice the line", !arc.is_empty() && arc_ok, format!("{} refinements", arc.len())));
        let dec = self.perturbation.windows(2).all(|w| w[1].1 < w[0].1) && self.perturbation.last().is_some_and(|p| p.1 > 0.0);
        let detail: Vec<String> = self.perturbation.iter().map(|(a, s)| format!("{a:.0e}: {s:.3e}")).collect();
        v.push(Check::new("hypothesis sum shrinks with the perturbation", dec, detail.join(", ")));
        v
    }

    fn tables(&self) -> Vec<(String, String)> {
        let mut att = String::from("measure,x1,x2,r,beta_sq,min_objective,violations\n");
        for a in &self.attainment {
            let _ = writeln!(
                att,
                "{},{},{},{},{},{},{}",
                a.measure,
                sci(a.x[0]),
                sci(a.x[1]),
                sci(a.r),
                sci(a.beta_sq),
                sci(a.min_objective),
                a.violations
            );
        }
        let mut ids = String::from("config,identity,i,j,points,exact\n");
        for r in &self.identities {
            let _ = writeln!(ids, "{},{},{},{},{},{}", r.config, r.identity, r.i, r.j, r.points, r.exact);
        }
        let mut pk = String::from("case,m,balls,mass,hypothesis_ok,worst_ratio,checks\n");
        for p in &self.packing {
            let _ = writeln!(
                pk,
                "{},{},{},{},{},{},{}",
                p.case,
                p.m,
                p.balls,
                sci(p.bound.mass),
                p.bound.hypothesis_ok,
                sci(p.bound.worst_ratio),
                p.bound.checks
            );
        }
        let mut pert = String::from("displacement,sum\n");
        for (a, s) in &self.perturbation {
            let _ = writeln!(pert, "{},{}", sci(*a), sci(*s));
        }
        vec![
            ("beta_attainment.csv".into(), att),
            ("packing_identities.csv".into(), ids),
            ("packing_bounds.csv".into(), pk),
            ("perturbation.csv".into(), pert),
        ]
    }
}

/// Square-filling sizes: large enough to fail, small enough to stay quick.
const SQUARE_SIZES: [u32; 2] = [3, 4];

/// β correctness, packing identities and discrete-Reifenberg sanity on
/// seeded random and explicit configurations in the plane.
pub fn run_beta_suite(cfg: &ExperimentConfig) -> Result<BetaSuiteReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let three = DiscreteMeasure::new(vec![vec![1.0, 0.0], vec![-1.0, 0.0], vec![0.0, 1.0]], vec![1.0; 3], None)?;
    let three_atom_beta_sq = beta2(&three, &[0.0, 0.0], 2.0, 1)?.beta_sq;

    let mut attainment = Vec::with_capacity(cfg.beta_measures);
    for q in 0..cfg.beta_measures {
        let mu = random_measure(&mut rng, 2, 20);
        let x = vec![rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5)];
        let r = rng.random_range(0.5..1.5);
        let b = beta2(&mu, &x, r, 1)?;
        let (mut min_objective, mut violations) = (f64::INFINITY, 0);
        for _ in 0..cfg.beta_planes {
            let base = vec![x[0] + rng.random_range(-r..r), x[1] + rng.random_range(-r..r)];
            let phi = rng.random_range(0.0..PI);
            let plane = AffinePlane::new(base, vec![vec![phi.cos(), phi.sin()]])?;
            let obj = beta_objective(&mu, &x, r, &plane);
            min_objective = min_objective.min(obj);
            if b.beta_sq > obj * (1.0 + 1e-12) + 1e-15 {
                violations += 1;
            }
        }
        attainment.push(AttainmentRow { measure: q, x, r, beta_sq: b.beta_sq, min_objective, violations });
    }

    let mut identities = Vec::new();
    for c in 0..cfg.packing_configs {
        let balls = random_disjoint_balls(&mut rng, 10)?;
        for i in 0..=3 {
            for j in i..=7 {
                let pts = restriction_identity(&balls, 1, i, j)?;
                identities.push(IdentityRow {
                    config: c,
                    identity: "restriction",
                    i,
                    j,
                    points: pts.len(),
                    exact: pts.iter().filter(|p| p.exact()).count(),
                });
            }
            let mut centers = vec![vec![0.0, 0.0]];
            centers.extend(packing_measure(&balls, 1, i, false)?.atoms.into_iter().take(3));
            let mut exact = 0;
            for x in &centers {
                let (lhs, rhs) = exchange_identity(&balls, 1, i, x)?;
                exact += usize::from(lhs == rhs);
            }
            identities.push(IdentityRow { config: c, identity: "exchange", i, j: i - 1, points: centers.len(), exact });
        }
    }

    let mut packing = Vec::new();
    for &m in &cfg.refinements {
        let line = line_packing(m);
        packing.push(PackingRow { case: "line", m, balls: line.len(), bound: packing_bound_check(&line, 1, cfg.delta_dr)? });
        let arc = arc_packing(m);
        packing.push(PackingRow { case: "arc", m, balls: arc.len(), bound: packing_bound_check(&arc, 1, cfg.delta_dr)? });
    }
    for m in SQUARE_SIZES {
        let sq = square_packing(m);
        packing.push(PackingRow { case: "square", m, balls: sq.len(), bound: packing_bound_check(&sq, 1, cfg.delta_dr)? });
    }

    let mut perturbation = Vec::new();
    for a in [4e-3, 2e-3, 1e-3] {
        let mu = packing_measure(&perturbed_line_packing(4, a), 1, 0, true)?;
        perturbation.push((a, reifenberg_hypothesis(&mu, 1, &[0.0, 0.0], 0, cfg.delta_dr)?.sum));
    }

    Ok(BetaSuiteReport { seed: cfg.seed, three_atom_beta_sq, attainment, identities, packing, perturbation })
}
