use std::collections::HashMap;
use std::io::Write;

use serde::Serialize;

use super::{build_bad_tree, build_good_tree, classify_ball, sup_density, BallKind, DensitySource, StratConfig, TransitionSet, TreeKind};
use crate::error::{Error, Result};
use crate::math::{dist, dist2};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverBall {
    pub center: Vec<f64>,
    /// r_x = max(r_min, r_d)
    pub radius: f64,
    /// radius the tree assigned
    pub r_d: f64,
    pub kind: BallKind,
    pub generation: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverCertificates {
    pub covered_fraction: f64,
    pub packing_sum: f64,
    /// balls with r_x > r_min whose measured sup Θ(2r_x, ·) exceeds the
    /// allowed ceiling
    pub energy_drop_failures: usize,
    /// largest measured sup Θ(2r_x, ·) − ceiling over balls with r_x > r_min
    pub max_energy_excess: f64,
    pub trees_passed: bool,
    pub generations: usize,
    /// largest measured bad-tree child constant c₂
    pub c2_measured: f64,
    /// 2·c₂·ρ < 1 with the measured c₂
    pub contraction_ok: bool,
}

impl CoverCertificates {
    pub fn passed(&self) -> bool {
        self.covered_fraction == 1.0 && self.energy_drop_failures == 0 && self.trees_passed
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BallCover {
    pub n: usize,
    pub r_min: f64,
    pub balls: Vec<CoverBall>,
    pub certificates: CoverCertificates,
}

impl BallCover {
    pub fn len(&self) -> usize {
        self.balls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.balls.is_empty()
    }

    /// Σ r_x^{n−1}.
    pub fn packing_sum(&self) -> f64 {
        self.balls.iter().map(|b| b.radius.powi(self.n as i32 - 1)).sum()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let mut head: Vec<String> = (1..=self.n).map(|d| format!("x{d}")).collect();
        head.extend(["radius".into(), "kind".into(), "generation".into()]);
        writeln!(w, "{}", head.join(","))?;
        for b in &self.balls {
            let mut row: Vec<String> = b.center.iter().map(|c| format!("{c:.12e}")).collect();
            row.push(format!("{:.12e}", b.radius));
            row.push(b.kind.as_str().into());
            row.push(b.generation.to_string());
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }

    pub fn certificates_json(&self) -> Result<String> {
        serde_json::to_string_pretty(&self.certificates).map_err(|e| Error::Internal(e.to_string()))
    }
}

/// Fraction of the points of `region` lying in some ball.
pub fn covered_fraction(ts: &TransitionSet, region: &[usize], balls: &[CoverBall]) -> f64 {
    if region.is_empty() {
        return 1.0;
    }
    let hit = region
        .iter()
        .filter(|&&i| balls.iter().any(|b| dist(&b.center, &ts.points[i]) <= b.radius))
        .count();
    if hit == region.len() {
        1.0
    } else {
        hit as f64 / region.len() as f64
    }
}

fn energy_check(
    src: &dyn DensitySource,
    balls: &[CoverBall],
    r_min: f64,
    allowed: f64,
) -> Result<(usize, f64)> {
    let (mut failures, mut excess) = (0, f64::NEG_INFINITY);
    for b in balls.iter().filter(|b| b.radius > r_min) {
        let sup = sup_density(src, &b.center, b.radius)?;
        excess = excess.max(sup - allowed);
        if sup > allowed + src.slack() * allowed.abs() {
            failures += 1;
        }
    }
    Ok((failures, if excess.is_finite() { excess } else { 0.0 }))
}

/// Alternating good/bad trees from the single leaf B_R(center) until no
/// leaves remain. The root is classified by the density test alone.
pub fn corona_decomposition(
    ts: &TransitionSet,
    src: &dyn DensitySource,
    cfg: &StratConfig,
    center: &[f64],
    radius: f64,
    ceiling: f64,
    r_min: f64,
) -> Result<BallCover> {
    cfg.validate()?;
    cfg.check_scale(r_min, src.epsilon())?;
    let n = src.dim();
    let region = ts.in_ball(center, radius);
    let mut balls: Vec<CoverBall> = Vec::new();
    let mut trees_passed = true;
    let mut c2 = 0.0f64;
    let budget = ((r_min / radius).ln() / cfg.rho.ln()).max(0.0).floor() as usize + 2;
    let mut generations = 0;
    if radius <= r_min {
        // the root is already at the target scale
        if !region.is_empty() {
            balls.push(CoverBall { center: center.to_vec(), radius: r_min, r_d: radius, kind: BallKind::Stop, generation: 0 });
        }
    } else if !region.is_empty() {
        let mut kind = classify_ball(center, radius, ts, src, cfg, ceiling)?;
        let mut leaves = vec![(center.to_vec(), radius)];
        while !leaves.is_empty() {
            generations += 1;
            if generations > budget {
                return Err(Error::Internal(format!("corona did not terminate within {budget} generations")));
            }
            let mut next = Vec::new();
            for (f, rf) in &leaves {
                let tree = match kind {
                    BallKind::Good => build_good_tree(f, *rf, ts, src, cfg, ceiling, r_min)?,
                    _ => build_bad_tree(f, *rf, ts, src, cfg, ceiling, r_min)?,
                };
                trees_passed &= tree.cert.passed();
                c2 = c2.max(tree.cert.c2_measured);
                for d in &tree.stops {
                    balls.push(CoverBall {
                        center: d.center.clone(),
                        radius: d.radius.max(r_min),
                        r_d: d.radius,
                        kind: BallKind::Stop,
                        generation: generations,
                    });
                }
                next.extend(tree.leaves.into_iter().map(|l| (l.center, l.radius)));
                debug_assert!(matches!(tree.kind, TreeKind::Good | TreeKind::Bad));
            }
            kind = if kind == BallKind::Good { BallKind::Bad } else { BallKind::Good };
            leaves = next;
        }
    }
    let (failures, excess) = energy_check(src, &balls, r_min, ceiling - cfg.eta / 2.0)?;
    let certificates = CoverCertificates {
        covered_fraction: covered_fraction(ts, &region, &balls),
        packing_sum: balls.iter().map(|b| b.radius.powi(n as i32 - 1)).sum(),
        energy_drop_failures: failures,
        max_energy_excess: excess,
        trees_passed,
        generations,
        c2_measured: c2,
        contraction_ok: 2.0 * c2 * cfg.rho < 1.0,
    };
    Ok(BallCover { n, r_min, balls, certificates })
}

/// Per-generation certificates of the refinement.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GenerationReport {
    pub generation: usize,
    pub balls: usize,
    pub covered: bool,
    pub packing_sum: f64,
    pub energy_drop_ok: bool,
    /// sup r_x ≤ 10^{−i}; `None` when r itself exceeds 10^{−i}, where the
    /// radius bound cannot apply
    pub radius_control: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RefinedCover {
    pub cover: BallCover,
    pub generations: Vec<GenerationReport>,
    /// balls before the final subcover extraction
    pub before_subcover: usize,
}

impl RefinedCover {
    pub fn passed(&self) -> bool {
        self.cover.certificates.passed()
            && self.generations.iter().all(|g| g.covered && g.energy_drop_ok && g.radius_control != Some(false))
    }
}

/// Greedy subcover: repeatedly keep the ball covering the most uncovered
/// points (lowest index on ties) until every point is covered.
pub fn greedy_subcover(ts: &TransitionSet, region: &[usize], balls: &[CoverBall]) -> Vec<CoverBall> {
    let hits: Vec<Vec<usize>> = balls
        .iter()
        .map(|b| region.iter().copied().filter(|&i| dist(&b.center, &ts.points[i]) <= b.radius).collect())
        .collect();
    let mut uncovered: std::collections::HashSet<usize> = region.iter().copied().collect();
    let mut chosen = Vec::new();
    while !uncovered.is_empty() {
        let (best, gain) = hits
            .iter()
            .enumerate()
            .map(|(j, h)| (j, h.iter().filter(|i| uncovered.contains(i)).count()))
            .fold((usize::MAX, 0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if gain == 0 {
            break;
        }
        for i in &hits[best] {
            uncovered.remove(i);
        }
        chosen.push(best);
    }
    chosen.sort_unstable();
    chosen.into_iter().map(|j| balls[j].clone()).collect()
}

/// Refines a cover until every radius equals r: each ball with r_x > r is
/// re-covered by a corona decomposition at its own scale, with the ceiling
/// lowered by η/2 per generation. Ends with a greedy subcover.
pub fn refine_cover(
    cover: &BallCover,
    ts: &TransitionSet,
    src: &dyn DensitySource,
    cfg: &StratConfig,
    r: f64,
) -> Result<RefinedCover> {
    cfg.validate()?;
    cfg.check_scale(r, src.epsilon())?;
    let n = src.dim();
    let zero = vec![0.0; n];
    let region = ts.in_ball(&zero, 1.0);
    let budget = (2.0 * cfg.m / cfg.eta).ceil() as usize + 1;
    let mut current = cover.balls.clone();
    let mut reports = Vec::new();
    let mut trees_passed = cover.certificates.trees_passed;
    let mut c2 = cover.certificates.c2_measured;
    let mut generation = 1;
    loop {
        let ceiling = cfg.m - generation as f64 * cfg.eta / 2.0;
        let (failures, _) = energy_check(src, &current, r, ceiling)?;
        let sup_r = current.iter().map(|b| b.radius).fold(0.0, f64::max);
        let bound = 10f64.powi(-(generation as i32));
        reports.push(GenerationReport {
            generation,
            balls: current.len(),
            covered: covered_fraction(ts, &region, &current) == 1.0,
            packing_sum: current.iter().map(|b| b.radius.powi(n as i32 - 1)).sum(),
            energy_drop_ok: failures == 0,
            radius_control: (r <= bound).then_some(sup_r <= bound),
        });
        if current.iter().all(|b| b.radius <= r) {
            break;
        }
        if generation >= budget {
            return Err(Error::Internal(format!("refinement exceeded {budget} generations")));
        }
        generation += 1;
        let parent_ceiling = cfg.m - (generation - 1) as f64 * cfg.eta / 2.0;
        let mut next = Vec::new();
        for b in current {
            if b.radius <= r {
                next.push(b);
                continue;
            }
            let sub = corona_decomposition(ts, src, cfg, &b.center, b.radius, parent_ceiling, r)?;
            trees_passed &= sub.certificates.trees_passed;
            c2 = c2.max(sub.certificates.c2_measured);
            next.extend(sub.balls.into_iter().map(|mut s| {
                s.generation = generation;
                s
            }));
        }
        current = next;
    }
    let before_subcover = current.len();
    let balls = greedy_subcover(ts, &region, &current);
    let final_ceiling = cfg.m - generation as f64 * cfg.eta / 2.0;
    let (failures, excess) = energy_check(src, &balls, r, final_ceiling)?;
    let certificates = CoverCertificates {
        covered_fraction: covered_fraction(ts, &region, &balls),
        packing_sum: balls.iter().map(|b| b.radius.powi(n as i32 - 1)).sum(),
        energy_drop_failures: failures,
        max_energy_excess: excess,
        trees_passed,
        generations: generation,
        c2_measured: c2,
        contraction_ok: 2.0 * c2 * cfg.rho < 1.0,
    };
    Ok(RefinedCover { cover: BallCover { n, r_min: r, balls, certificates }, generations: reports, before_subcover })
}

/// Cover of radius r for the transition set in B₁(0): the corona at the
/// unit ball followed by the refinement.
pub fn cover_at_radius(ts: &TransitionSet, src: &dyn DensitySource, cfg: &StratConfig, r: f64) -> Result<RefinedCover> {
    let zero = vec![0.0; src.dim()];
    let first = corona_decomposition(ts, src, cfg, &zero, 1.0, cfg.m, r)?;
    refine_cover(&first, ts, src, cfg, r)
}

/// Lebesgue measure of the r-tube around S ∩ B₁(0), by counting cells of
/// side ≤ r/10 whose centres lie within r of S.
pub fn tubular_volume(points: &[Vec<f64>], r: f64) -> f64 {
    let inside: Vec<&Vec<f64>> = points.iter().filter(|p| p.iter().map(|v| v * v).sum::<f64>() <= 1.0).collect();
    if inside.is_empty() || !(r > 0.0) {
        return 0.0;
    }
    let n = inside[0].len();
    let cell = r / 10.0;
    // buckets of side r
    let key = |x: &[f64]| -> [i64; 2] {
        let mut k = [0i64; 2];
        for d in 0..n {
            k[d] = (x[d] / r).floor() as i64;
        }
        k
    };
    let mut buckets: HashMap<[i64; 2], Vec<usize>> = HashMap::new();
    for (i, p) in inside.iter().enumerate() {
        buckets.entry(key(p)).or_default().push(i);
    }
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for p in &inside {
        for d in 0..n {
            lo[d] = lo[d].min(p[d] - r);
            hi[d] = hi[d].max(p[d] + r);
        }
    }
    let counts: Vec<usize> = (0..n).map(|d| ((hi[d] - lo[d]) / cell).ceil() as usize).collect();
    let r2 = r * r;
    let mut hit = 0usize;
    let total: usize = counts.iter().product();
    let mut c = vec![0.0; n];
    for flat in 0..total {
        let mut rem = flat;
        for d in (0..n).rev() {
            c[d] = lo[d] + ((rem % counts[d]) as f64 + 0.5) * cell;
            rem /= counts[d];
        }
        let k = key(&c);
        let mut found = false;
        'outer: for da in -1..=1i64 {
            for db in if n == 2 { -1..=1i64 } else { 0..=0 } {
                if let Some(list) = buckets.get(&[k[0] + da, k[1] + db]) {
                    if list.iter().any(|&i| dist2(inside[i], &c) <= r2) {
                        found = true;
                        break 'outer;
                    }
                }
            }
        }
        hit += usize::from(found);
    }
    hit as f64 * cell.powi(n as i32)
}

/// Outcome of the parameter calibration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Calibration {
    pub config: StratConfig,
    pub attempts: usize,
    /// (η, η′, outcome) per attempt
    pub history: Vec<(f64, f64, String)>,
}

/// Doubles η′ and halves η until the cover at radius r is built without a
/// classification-consistency error and with all certificates passing.
pub fn calibrate(ts: &TransitionSet, src: &dyn DensitySource, cfg: &StratConfig, r: f64) -> Result<Calibration> {
    const MAX_ATTEMPTS: usize = 16;
    let mut c = cfg.clone();
    let mut history = Vec::new();
    for attempt in 1..=MAX_ATTEMPTS {
        let outcome = match cover_at_radius(ts, src, &c, r) {
            Ok(rc) if rc.passed() => {
                history.push((c.eta, c.eta_prime, "passed".to_string()));
                return Ok(Calibration { config: c, attempts: attempt, history });
            }
            Ok(_) => "certificate failure".to_string(),
            Err(Error::Consistency(msg)) => msg,
            Err(e) => return Err(e),
        };
        history.push((c.eta, c.eta_prime, outcome));
        c.eta_prime *= 2.0;
        c.eta /= 2.0;
    }
    Err(Error::Calibration(format!("no admissible (eta, eta_prime) within {MAX_ATTEMPTS} attempts")))
}
