use serde::Serialize;

use crate::error::{Error, Result};
use crate::fft::LatticeConv;
use crate::quad::gl_composite;

/// Binary pixel mask of a planar set E. Row 0 is the top row; `origin` is
/// the lower-left corner of the pixel box and `h` the pixel side.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Mask {
    pub width: usize,
    pub height: usize,
    pub origin: [f64; 2],
    pub h: f64,
    pub data: Vec<bool>,
}

impl Mask {
    pub fn new(width: usize, height: usize, origin: [f64; 2], h: f64, data: Vec<bool>) -> Result<Self> {
        if width == 0 || height == 0 || data.len() != width * height {
            return Err(Error::Validation("mask dimensions do not match its data".into()));
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::Validation("pixel size must be positive".into()));
        }
        Ok(Mask { width, height, origin, h, data })
    }

    /// Mask with pixel (r, c) set when `inside(center)` holds.
    pub fn from_fn(width: usize, height: usize, origin: [f64; 2], h: f64, inside: impl Fn([f64; 2]) -> bool) -> Self {
        let mut m = Mask { width, height, origin, h, data: vec![false; width * height] };
        for r in 0..height {
            for c in 0..width {
                let x = m.center(r, c);
                m.data[r * width + c] = inside(x);
            }
        }
        m
    }

    /// Parses a plain grey-map ("P2") text grid whose samples are all 0 or 1.
    pub fn from_pgm(text: &str, origin: [f64; 2], h: f64) -> Result<Self> {
        let mut tokens = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or(""))
            .flat_map(|l| l.split_whitespace());
        if tokens.next() != Some("P2") {
            return Err(Error::Validation("mask must start with the P2 magic".into()));
        }
        let mut header = [0usize; 3];
        for slot in header.iter_mut() {
            let t = tokens.next().ok_or_else(|| Error::Validation("truncated mask header".into()))?;
            *slot = t.parse().map_err(|_| Error::Validation(format!("bad mask header token {t:?}")))?;
        }
        let [width, height, _maxval] = header;
        let mut data = Vec::with_capacity(width * height);
        for (q, t) in tokens.enumerate() {
            match t {
                "0" => data.push(false),
                "1" => data.push(true),
                other => {
                    return Err(Error::Validation(format!("mask sample {q} is {other:?}, expected 0 or 1")));
                }
            }
        }
        Mask::new(width, height, origin, h, data)
    }

    pub fn to_pgm(&self) -> String {
        let mut s = format!("P2\n{} {}\n1\n", self.width, self.height);
        for r in 0..self.height {
            let row: Vec<&str> = (0..self.width).map(|c| if self.data[r * self.width + c] { "1" } else { "0" }).collect();
            s.push_str(&row.join(" "));
            s.push('\n');
        }
        s
    }

    pub fn complement(&self) -> Self {
        Mask { data: self.data.iter().map(|b| !b).collect(), ..self.clone() }
    }

    pub fn center(&self, r: usize, c: usize) -> [f64; 2] {
        [
            self.origin[0] + (c as f64 + 0.5) * self.h,
            self.origin[1] + ((self.height - 1 - r) as f64 + 0.5) * self.h,
        ]
    }

    fn extent(&self) -> ([f64; 2], [f64; 2]) {
        let lo = self.origin;
        let hi = [lo[0] + self.width as f64 * self.h, lo[1] + self.height as f64 * self.h];
        (lo, hi)
    }

    /// Phase at an arbitrary point, replicating edge pixels outward.
    pub fn phase_at(&self, x: [f64; 2]) -> bool {
        let c = ((x[0] - self.origin[0]) / self.h).floor().clamp(0.0, (self.width - 1) as f64) as usize;
        let ry = ((x[1] - self.origin[1]) / self.h).floor().clamp(0.0, (self.height - 1) as f64) as usize;
        self.data[(self.height - 1 - ry) * self.width + c]
    }
}

/// Disc window Ω = B_radius(center).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Window {
    pub center: [f64; 2],
    pub radius: f64,
}

impl Window {
    fn contains(&self, x: [f64; 2]) -> bool {
        let (a, b) = (x[0] - self.center[0], x[1] - self.center[1]);
        a * a + b * b <= self.radius * self.radius
    }
}

/// Cell-pair kernel for unit pixels, offset d ≠ 0. Touching pixels use the
/// 2×2 subcell split on both sides.
fn unit_pair_kernel(s: f64, d: [i64; 2]) -> f64 {
    let e = -(2.0 + 2.0 * s) / 2.0;
    if d == [0, 0] {
        return 0.0;
    }
    if d[0].abs() <= 1 && d[1].abs() <= 1 {
        let offs = [-0.25, 0.25];
        let mut acc = 0.0;
        for a0 in offs {
            for a1 in offs {
                for b0 in offs {
                    for b1 in offs {
                        let x = d[0] as f64 + b0 - a0;
                        let y = d[1] as f64 + b1 - a1;
                        acc += (x * x + y * y).powf(e);
                    }
                }
            }
        }
        acc / 16.0
    } else {
        ((d[0] * d[0] + d[1] * d[1]) as f64).powf(e)
    }
}

/// Σ over the angular range of a ray integral from a point to infinity
/// beyond the pixel box, for pixels of the phase `want`.
fn exterior_tail(mask: &Mask, x: [f64; 2], s: f64, want: bool, rays: &[(f64, f64)], radial: &[(f64, f64)]) -> f64 {
    let (lo, hi) = mask.extent();
    let corners = [[hi[0], lo[1]], [hi[0], hi[1]], [lo[0], hi[1]], [lo[0], lo[1]]];
    let ang = |p: [f64; 2]| (p[1] - x[1]).atan2(p[0] - x[0]);
    let mut total = 0.0;
    for side in 0..4 {
        let (p, q) = (corners[side], corners[(side + 1) % 4]);
        let (a0, mut a1) = (ang(p), ang(q));
        while a1 < a0 {
            a1 += std::f64::consts::TAU;
        }
        let span = a1 - a0;
        for &(u, wu) in rays {
            let th = a0 + u * span;
            let e = [th.cos(), th.sin()];
            // distance to the side along e
            let exit = if side % 2 == 0 {
                (p[0] - x[0]) / e[0]
            } else {
                (p[1] - x[1]) / e[1]
            };
            // ∫_{exit}^∞ χ ρ^{−1−2s} dρ = (1/2s)∫_0^{exit^{−2s}} χ dt
            let t_top = exit.powf(-2.0 * s);
            let mut acc = 0.0;
            for &(v, wv) in radial {
                let t = v * t_top;
                let rho = t.powf(-1.0 / (2.0 * s));
                let y = [x[0] + rho * e[0], x[1] + rho * e[1]];
                if mask.phase_at(y) == want {
                    acc += wv;
                }
            }
            total += wu * span * acc * t_top / (2.0 * s);
        }
    }
    total
}

/// Nonlocal 2s-perimeter of E in Ω with kernel |x−y|^{−2−2s}, by pixel-pair
/// sums plus the interaction of Ω-pixels with the replicated exterior.
pub fn perimeter_2s(mask: &Mask, window: &Window, s: f64) -> Result<f64> {
    if !(s > 0.0 && s < 0.5) {
        return Err(Error::Parameter(format!("s = {s} outside (0, 1/2)")));
    }
    let (lo, hi) = mask.extent();
    let w = window;
    if w.center[0] - w.radius < lo[0] || w.center[0] + w.radius > hi[0] || w.center[1] - w.radius < lo[1] || w.center[1] + w.radius > hi[1] {
        return Err(Error::Validation("window must lie inside the mask box".into()));
    }
    let (rows, cols) = (mask.height, mask.width);
    let len = rows * cols;
    let mut sets = vec![vec![0.0; len]; 4]; // E∩Ω, Eᶜ∩Ω, E∖Ω, Eᶜ∖Ω
    let mut in_omega = vec![false; len];
    for r in 0..rows {
        for c in 0..cols {
            let i = r * cols + c;
            in_omega[i] = w.contains(mask.center(r, c));
            let slot = match (mask.data[i], in_omega[i]) {
                (true, true) => 0,
                (false, true) => 1,
                (true, false) => 2,
                (false, false) => 3,
            };
            sets[slot][i] = 1.0;
        }
    }
    let scale = mask.h.powf(2.0 - 2.0 * s);
    let conv = LatticeConv::new(2, [rows, cols], [rows, cols], [0, 0], |d| unit_pair_kernel(s, d));
    let smoothed: Vec<Vec<f64>> = sets.iter().map(|x| conv.apply(x)).collect();
    let pair = |a: usize, b: usize| -> f64 {
        let ab: f64 = sets[a].iter().zip(&smoothed[b]).map(|(x, y)| x * y).sum();
        let ba: f64 = sets[b].iter().zip(&smoothed[a]).map(|(x, y)| x * y).sum();
        0.5 * (ab + ba) * scale
    };
    let rays = gl_composite(8, 4, 0.0, 1.0);
    let radial = gl_composite(8, 2, 0.0, 1.0);
    let h2 = mask.h * mask.h;
    let (mut tail_e, mut tail_c) = (0.0, 0.0);
    for r in 0..rows {
        for c in 0..cols {
            let i = r * cols + c;
            if !in_omega[i] {
                continue;
            }
            let x = mask.center(r, c);
            let t = exterior_tail(mask, x, s, !mask.data[i], &rays, &radial) * h2;
            if mask.data[i] {
                tail_e += t;
            } else {
                tail_c += t;
            }
        }
    }
    let mut terms = [pair(0, 1), pair(0, 3), pair(2, 1), tail_e, tail_c];
    terms.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    Ok(terms.iter().sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pgm_roundtrip_and_rejection() {
        let m = Mask::from_fn(4, 3, [0.0, 0.0], 0.5, |x| x[0] < 1.0);
        let back = Mask::from_pgm(&m.to_pgm(), [0.0, 0.0], 0.5).unwrap();
        assert_eq!(back, m);
        assert!(Mask::from_pgm("P2\n2 1\n1\n0 2\n", [0.0, 0.0], 1.0).is_err());
        assert!(Mask::from_pgm("P2\n2 2\n1\n0 1 1\n", [0.0, 0.0], 1.0).is_err());
    }

    #[test]
    fn replicated_edges() {
        let m = Mask::from_fn(4, 4, [0.0, 0.0], 1.0, |x| x[1] > 3.0);
        assert!(m.phase_at([-10.0, 100.0]));
        assert!(!m.phase_at([50.0, -5.0]));
    }
}
