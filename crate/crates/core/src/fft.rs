//! Linear (non-circular) lattice convolution through zero-padded FFTs.
//!
//! `out[i] = Σ_j k(i − o − j) · src[j]` where `src` lives on an S-lattice,
//! `out` on a T-lattice and `o` is the integer shift of the target origin.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

pub struct LatticeConv {
    n: usize,
    src: [usize; 2],
    tgt: [usize; 2],
    p: [usize; 2],
    dmin: [i64; 2],
    shift: [i64; 2],
    fwd: [Arc<dyn Fft<f64>>; 2],
    inv: [Arc<dyn Fft<f64>>; 2],
    spectrum: Vec<Complex64>,
}

impl LatticeConv {
    /// `kernel(d)` is queried for every offset in the needed range.
    pub fn new(
        n: usize,
        src: [usize; 2],
        tgt: [usize; 2],
        shift: [i64; 2],
        kernel: impl Fn([i64; 2]) -> f64,
    ) -> Self {
        let mut planner = FftPlanner::new();
        let mut p = [1usize; 2];
        let mut dmin = [0i64; 2];
        for d in 0..n {
            p[d] = src[d] + tgt[d] - 1;
            dmin[d] = -shift[d] - (src[d] as i64 - 1);
        }
        let fwd = [planner.plan_fft_forward(p[0]), planner.plan_fft_forward(p[1])];
        let inv = [planner.plan_fft_inverse(p[0]), planner.plan_fft_inverse(p[1])];
        let mut conv = LatticeConv { n, src, tgt, p, dmin, shift, fwd, inv, spectrum: Vec::new() };
        let mut buf = vec![Complex64::new(0.0, 0.0); p[0] * p[1]];
        // kernel offsets e ∈ [0, S+T−1) per axis map to d = e + dmin
        for e0 in 0..p[0] {
            for e1 in 0..p[1] {
                let d = [e0 as i64 + dmin[0], e1 as i64 + dmin[1]];
                buf[e0 * p[1] + e1] = Complex64::new(kernel(d), 0.0);
            }
        }
        conv.forward(&mut buf);
        let scale = 1.0 / (p[0] * p[1]) as f64;
        buf.iter_mut().for_each(|c| *c *= scale);
        conv.spectrum = buf;
        conv
    }

    fn forward(&self, buf: &mut [Complex64]) {
        let [p0, p1] = self.p;
        if self.n == 1 {
            self.fwd[0].process(buf);
            return;
        }
        self.fwd[1].process(buf);
        let mut t = transpose(buf, p0, p1);
        self.fwd[0].process(&mut t);
        buf.copy_from_slice(&t);
    }

    fn inverse(&self, buf: &mut [Complex64]) {
        let [p0, p1] = self.p;
        if self.n == 1 {
            self.inv[0].process(buf);
            return;
        }
        // buf is in transposed (p1 × p0) layout
        self.inv[0].process(buf);
        let mut t = transpose(buf, p1, p0);
        self.inv[1].process(&mut t);
        buf.copy_from_slice(&t);
    }

    pub fn target_len(&self) -> usize {
        self.tgt[0] * if self.n == 2 { self.tgt[1] } else { 1 }
    }

    /// Applies the convolution to `src` (row-major on the S-lattice).
    pub fn apply(&self, src: &[f64]) -> Vec<f64> {
        let [p0, p1] = self.p;
        let mut buf = vec![Complex64::new(0.0, 0.0); p0 * p1];
        let s1 = if self.n == 2 { self.src[1] } else { 1 };
        for j0 in 0..self.src[0] {
            for j1 in 0..s1 {
                buf[j0 * p1 + j1] = Complex64::new(src[j0 * s1 + j1], 0.0);
            }
        }
        self.forward(&mut buf);
        buf.iter_mut().zip(&self.spectrum).for_each(|(a, b)| *a *= b);
        self.inverse(&mut buf);
        // full-conv index q = i + o − dmin... per axis: q = i − dmin − shift
        let t1 = if self.n == 2 { self.tgt[1] } else { 1 };
        let mut out = vec![0.0; self.tgt[0] * t1];
        let q0 = -self.dmin[0] - self.shift[0];
        let q1 = -self.dmin[1] - self.shift[1];
        for i0 in 0..self.tgt[0] {
            for i1 in 0..t1 {
                let a = (i0 as i64 + q0) as usize;
                let b = (i1 as i64 + q1) as usize;
                out[i0 * t1 + i1] = buf[a * p1 + b].re;
            }
        }
        out
    }
}

fn transpose(buf: &[Complex64], rows: usize, cols: usize) -> Vec<Complex64> {
    let mut t = vec![Complex64::new(0.0, 0.0); rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            t[c * rows + r] = buf[r * cols + c];
        }
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute(n: usize, src: &[f64], s: [usize; 2], t: [usize; 2], o: [i64; 2], k: &dyn Fn([i64; 2]) -> f64) -> Vec<f64> {
        let s1 = if n == 2 { s[1] } else { 1 };
        let t1 = if n == 2 { t[1] } else { 1 };
        let mut out = vec![0.0; t[0] * t1];
        for i0 in 0..t[0] {
            for i1 in 0..t1 {
                let mut acc = 0.0;
                for j0 in 0..s[0] {
                    for j1 in 0..s1 {
                        let d0 = i0 as i64 - o[0] - j0 as i64;
                        let d1 = if n == 2 { i1 as i64 - o[1] - j1 as i64 } else { 0 };
                        acc += k([d0, d1]) * src[j0 * s1 + j1];
                    }
                }
                out[i0 * t1 + i1] = acc;
            }
        }
        out
    }

    #[test]
    fn matches_brute_force_2d() {
        let k = |d: [i64; 2]| 1.0 / (1.0 + (d[0] * d[0] + 2 * d[1] * d[1]) as f64) + 0.1 * d[0] as f64;
        let s = [5, 4];
        let t = [9, 7];
        let o = [2, 1];
        let src: Vec<f64> = (0..20).map(|i| (i as f64 * 0.37).sin()).collect();
        let conv = LatticeConv::new(2, s, t, o, k);
        let got = conv.apply(&src);
        let want = brute(2, &src, s, t, o, &k);
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn matches_brute_force_1d() {
        let k = |d: [i64; 2]| (d[0] as f64 * 0.3).cos() / (1.0 + (d[0] * d[0]) as f64);
        let s = [7, 1];
        let t = [7, 1];
        let src: Vec<f64> = (0..7).map(|i| i as f64 - 2.5).collect();
        let conv = LatticeConv::new(1, s, t, [0, 0], k);
        let got = conv.apply(&src);
        let want = brute(1, &src, s, t, [0, 0], &k);
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
