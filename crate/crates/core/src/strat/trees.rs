use serde::Serialize;

use super::{classify_ball, fit_bad_plane, high_density_points, net_of, BadPlane, BallKind, DensitySource, StratConfig, TransitionSet};
use crate::error::{Error, Result};
use crate::math::dist;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TreeNode {
    pub center: Vec<f64>,
    pub radius: f64,
    pub kind: BallKind,
    /// scale index counted from the root
    pub scale: usize,
    pub children: Vec<TreeNode>,
}

impl TreeNode {
    pub fn count(&self) -> usize {
        1 + self.children.iter().map(|c| c.count()).sum::<usize>()
    }
}

/// A ball B_radius(center) produced by a tree.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Leaf {
    pub center: Vec<f64>,
    pub radius: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TreeKind {
    Good,
    Bad,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TreeCertificate {
    /// fifth-radius balls of stops and bad balls pairwise disjoint
    /// (all scales for good trees, within each scale for bad trees)
    pub fifth_balls_disjoint: bool,
    /// Θ(γ r_y, y) ≥ ceiling − η′ at every leaf and stop (good trees)
    pub energy_drop_ok: bool,
    pub covered: bool,
    /// radius window of the stop balls
    pub stop_structure_ok: bool,
    /// Σ r_f^{n−1} / r_A^{n−1}
    pub leaf_packing: f64,
    /// Σ r_d^{n−1} / r_A^{n−1}
    pub stop_packing: f64,
    /// #(G_i ∪ B_i)·(r_i/r_A)^{n−2} per scale (bad trees)
    pub child_counts: Vec<f64>,
    /// smallest c₂ with child_counts[i] ≤ (c₂ρ)^{i+1}
    pub c2_measured: f64,
}

impl TreeCertificate {
    pub fn passed(&self) -> bool {
        self.fifth_balls_disjoint && self.energy_drop_ok && self.covered && self.stop_structure_ok
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Tree {
    pub kind: TreeKind,
    pub root: TreeNode,
    /// bad centres of a good tree, good centres of a bad tree
    pub leaves: Vec<Leaf>,
    pub stops: Vec<Leaf>,
    pub cert: TreeCertificate,
}

/// centre, radius, kind, scale index, parent
type ArenaNode = (Vec<f64>, f64, BallKind, usize, Option<usize>);

struct Arena {
    nodes: Vec<ArenaNode>,
}

impl Arena {
    fn push(&mut self, c: Vec<f64>, r: f64, k: BallKind, scale: usize, parent: Option<usize>) -> usize {
        self.nodes.push((c, r, k, scale, parent));
        self.nodes.len() - 1
    }

    fn assemble(&self, id: usize) -> TreeNode {
        let (c, r, k, s, _) = &self.nodes[id];
        let children = (0..self.nodes.len()).filter(|&j| self.nodes[j].4 == Some(id)).map(|j| self.assemble(j)).collect();
        TreeNode { center: c.clone(), radius: *r, kind: *k, scale: *s, children }
    }

    /// First listed candidate whose ball contains p.
    fn parent_of(&self, p: &[f64], candidates: &[usize]) -> Option<usize> {
        candidates.iter().copied().find(|&id| dist(&self.nodes[id].0, p) <= self.nodes[id].1)
    }
}

fn fifth_disjoint(balls: &[&Leaf]) -> bool {
    for i in 0..balls.len() {
        for j in i + 1..balls.len() {
            if dist(&balls[i].center, &balls[j].center) < (balls[i].radius + balls[j].radius) / 5.0 {
                return false;
            }
        }
    }
    true
}

fn covers(ts: &TransitionSet, region: &[usize], balls: &[&Leaf]) -> bool {
    region.iter().all(|&i| balls.iter().any(|b| dist(&b.center, &ts.points[i]) <= b.radius))
}

fn packing(balls: &[Leaf], n: usize, r_a: f64) -> f64 {
    let e = n as i32 - 1;
    balls.iter().map(|b| (b.radius / r_a).powi(e)).sum()
}

/// Good tree rooted at B_{r_a}(a): nets of the transition set inside good
/// balls, minus every earlier bad ball, down to r_min.
pub fn build_good_tree(
    a: &[f64],
    r_a: f64,
    ts: &TransitionSet,
    src: &dyn DensitySource,
    cfg: &StratConfig,
    ceiling: f64,
    r_min: f64,
) -> Result<Tree> {
    if !(r_a > r_min) {
        return Err(Error::Parameter(format!("root radius {r_a} must exceed r_min = {r_min}")));
    }
    let n = a.len();
    let mut arena = Arena { nodes: Vec::new() };
    let root = arena.push(a.to_vec(), r_a, BallKind::Good, 0, None);
    let region = ts.in_ball(a, r_a);
    let mut goods = vec![root];
    let mut bad_ids: Vec<usize> = Vec::new();
    let (mut leaves, mut stops) = (Vec::new(), Vec::new());
    let mut r_prev = r_a;
    let mut scale = 0;
    while !goods.is_empty() {
        let r_i = r_prev * cfg.rho;
        scale += 1;
        let cand: Vec<usize> = region
            .iter()
            .copied()
            .filter(|&p| {
                let y = &ts.points[p];
                goods.iter().any(|&g| dist(&arena.nodes[g].0, y) <= r_prev)
                    && bad_ids.iter().all(|&b| dist(&arena.nodes[b].0, y) > arena.nodes[b].1)
            })
            .collect();
        let net = net_of(&ts.points, &cand, 2.0 * r_i / 5.0);
        if r_i <= r_min {
            for &p in &net {
                let parent = arena.parent_of(&ts.points[p], &goods);
                arena.push(ts.points[p].clone(), r_i, BallKind::Stop, scale, parent);
                stops.push(Leaf { center: ts.points[p].clone(), radius: r_i });
            }
            break;
        }
        let mut next = Vec::new();
        for &p in &net {
            let y = &ts.points[p];
            let kind = classify_ball(y, r_i, ts, src, cfg, ceiling)?;
            let parent = arena.parent_of(y, &goods);
            let id = arena.push(y.clone(), r_i, kind, scale, parent);
            if kind == BallKind::Good {
                next.push(id);
            } else {
                bad_ids.push(id);
                leaves.push(Leaf { center: y.clone(), radius: r_i });
            }
        }
        goods = next;
        r_prev = r_i;
    }
    let marked: Vec<&Leaf> = leaves.iter().chain(stops.iter()).collect();
    let mut energy_drop_ok = true;
    for b in &marked {
        let th = src.theta_floored(cfg.gamma * b.radius, &b.center)?;
        energy_drop_ok &= th >= ceiling - cfg.eta_prime;
    }
    let stop_structure_ok = stops.iter().all(|d| d.radius > cfg.rho * r_min && d.radius <= r_min);
    let cert = TreeCertificate {
        fifth_balls_disjoint: fifth_disjoint(&marked),
        energy_drop_ok,
        covered: covers(ts, &region, &marked),
        stop_structure_ok,
        leaf_packing: packing(&leaves, n, r_a),
        stop_packing: packing(&stops, n, r_a),
        child_counts: Vec::new(),
        c2_measured: 0.0,
    };
    Ok(Tree { kind: TreeKind::Good, root: arena.assemble(root), leaves, stops, cert })
}

/// Plane of a bad ball, or a consistency error when the high-density points
/// are not confined to the ρt-tube.
pub fn bad_ball_plane(
    x: &[f64],
    t: f64,
    src: &dyn DensitySource,
    cfg: &StratConfig,
    ceiling: f64,
) -> Result<BadPlane> {
    let pts = high_density_points(x, t, src, cfg, ceiling)?;
    let plane = fit_bad_plane(&pts, x, t, cfg.rho);
    if !plane.contained {
        return Err(Error::Consistency(format!(
            "bad ball at {x:?}, radius {t}: {} high-density points spread {:.3e} > rho*t = {:.3e}",
            plane.points,
            plane.max_distance,
            cfg.rho * t
        )));
    }
    Ok(plane)
}

/// Sup of Θ(2r, ·) over the sample points of B_{2r}(x).
pub fn sup_density(src: &dyn DensitySource, x: &[f64], r: f64) -> Result<f64> {
    let mut m = 0.0f64;
    for y in src.sample_points(x, 2.0 * r) {
        m = m.max(src.theta_floored(2.0 * r, &y)?);
    }
    Ok(m)
}

/// Bad tree rooted at B_{r_a}(a): stop balls of radius η r_{i−1} off the
/// tube around each bad plane, children on the tube.
pub fn build_bad_tree(
    a: &[f64],
    r_a: f64,
    ts: &TransitionSet,
    src: &dyn DensitySource,
    cfg: &StratConfig,
    ceiling: f64,
    r_min: f64,
) -> Result<Tree> {
    if !(r_a > r_min) {
        return Err(Error::Parameter(format!("root radius {r_a} must exceed r_min = {r_min}")));
    }
    let n = a.len();
    let mut arena = Arena { nodes: Vec::new() };
    let root = arena.push(a.to_vec(), r_a, BallKind::Bad, 0, None);
    let region = ts.in_ball(a, r_a);
    let mut bads: Vec<(usize, BadPlane)> = vec![(root, bad_ball_plane(a, r_a, src, cfg, ceiling)?)];
    let (mut leaves, mut stops) = (Vec::new(), Vec::new());
    let mut child_counts = Vec::new();
    let mut per_scale_disjoint = true;
    let mut r_prev = r_a;
    let mut scale = 0;
    while !bads.is_empty() {
        let r_i = r_prev * cfg.rho;
        scale += 1;
        let tube = 2.0 * cfg.rho * r_prev;
        let r_d = cfg.eta * r_prev;
        let inside = |p: usize, want_tube: Option<bool>| -> bool {
            let y = &ts.points[p];
            bads.iter().any(|(b, pl)| {
                dist(&arena.nodes[*b].0, y) <= r_prev && want_tube.is_none_or(|w| pl.in_tube(y, tube) == w)
            })
        };
        let ids: Vec<usize> = bads.iter().map(|(b, _)| *b).collect();
        let stop_here = if r_i <= r_min {
            let all: Vec<usize> = region.iter().copied().filter(|&p| inside(p, None)).collect();
            bads = Vec::new();
            net_of(&ts.points, &all, 2.0 * r_d / 5.0)
        } else {
            let off: Vec<usize> = region.iter().copied().filter(|&p| inside(p, Some(false))).collect();
            let on: Vec<usize> = region.iter().copied().filter(|&p| inside(p, Some(true))).collect();
            let stops_off = net_of(&ts.points, &off, 2.0 * r_d / 5.0);
            let kids = net_of(&ts.points, &on, 2.0 * r_i / 5.0);
            child_counts.push(kids.len() as f64 * (r_i / r_a).powi(n as i32 - 2));
            let mut next = Vec::new();
            for &p in &kids {
                let y = &ts.points[p];
                let kind = classify_ball(y, r_i, ts, src, cfg, ceiling)?;
                let parent = arena.parent_of(y, &ids);
                let id = arena.push(y.clone(), r_i, kind, scale, parent);
                if kind == BallKind::Good {
                    leaves.push(Leaf { center: y.clone(), radius: r_i });
                } else {
                    next.push((id, bad_ball_plane(y, r_i, src, cfg, ceiling)?));
                }
            }
            bads = next;
            stops_off
        };
        let mut scale_stops = Vec::new();
        for &p in &stop_here {
            let parent = arena.parent_of(&ts.points[p], &ids);
            arena.push(ts.points[p].clone(), r_d, BallKind::Stop, scale, parent);
            scale_stops.push(Leaf { center: ts.points[p].clone(), radius: r_d });
        }
        per_scale_disjoint &= fifth_disjoint(&scale_stops.iter().collect::<Vec<_>>());
        stops.extend(scale_stops);
        r_prev = r_i;
    }
    let mut stop_structure_ok = true;
    for d in &stops {
        let windowed = cfg.eta * r_min < d.radius && d.radius < r_min;
        if !windowed {
            let sup = sup_density(src, &d.center, d.radius)?;
            stop_structure_ok &= sup <= ceiling - cfg.eta / 2.0 + src.slack() * ceiling;
        }
    }
    let marked: Vec<&Leaf> = leaves.iter().chain(stops.iter()).collect();
    let c2_measured = child_counts
        .iter()
        .enumerate()
        .map(|(i, &c)| if c > 0.0 { c.powf(1.0 / (i + 1) as f64) / cfg.rho } else { 0.0 })
        .fold(0.0, f64::max);
    let cert = TreeCertificate {
        fifth_balls_disjoint: per_scale_disjoint,
        energy_drop_ok: true,
        covered: covers(ts, &region, &marked),
        stop_structure_ok,
        leaf_packing: packing(&leaves, n, r_a),
        stop_packing: packing(&stops, n, r_a),
        child_counts,
        c2_measured,
    };
    Ok(Tree { kind: TreeKind::Bad, root: arena.assemble(root), leaves, stops, cert })
}
